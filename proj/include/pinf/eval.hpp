#pragma once

#include "pinf/explain.hpp"
#include "pinf/features.hpp"
#include "pinf/predictor.hpp"
#include "pinf/sppi.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pinf {

enum class Study { Activation, InverseActivation };

std::string_view to_string(Study s);

struct CurvePoint {
    std::size_t added = 0;
    double probability = 0.0;
};

struct PerturbationCurve {
    std::vector<CurvePoint> points;
    std::string method;
    std::string example_id;
    std::size_t class_index = 0;
    Study study = Study::Activation;
};

/// Descending attribution for activation, ascending for inverse activation;
/// ties go to the smaller feature index in both.
std::vector<FeatureIndex> insertion_order(const AttributionVector& phi, Study study);

/// Starts fully masked and re-activates features in insertion order, recording the
/// softmax probability of class c at the final row after every step (n+1 passes).
PerturbationCurve perturbation_curve(const Predictor& model, const TokenSeq& seq, const FeatureGrouping& grouping,
                                     const AttributionVector& phi, std::size_t c, TokenId mask_token, Study study);

PerturbationCurve activation_curve(const Predictor& model, const TokenSeq& seq, const FeatureGrouping& grouping,
                                   const AttributionVector& phi, std::size_t c, TokenId mask_token);
PerturbationCurve inverse_activation_curve(const Predictor& model, const TokenSeq& seq,
                                           const FeatureGrouping& grouping, const AttributionVector& phi,
                                           std::size_t c, TokenId mask_token);

/// Trapezoidal area with the x axis rescaled to [0, 1].
double auc(const PerturbationCurve& curve);

/// I.i.d. uniform(-1, 1) scores.
AttributionVector random_attribution(std::size_t n, std::uint64_t seed);

/// Cosine of the phi vectors; intercepts are ignored.
double cosine_similarity(const AttributionVector& a, const AttributionVector& b);

/// Per feature i: max-abs logit difference between the trace row of feature i on
/// the unmasked input and the final row on the input with only features 1..i kept.
std::vector<double> approximation_gap(const Predictor& model, const TokenSeq& seq, const FeatureGrouping& grouping,
                                      TokenId mask_token);

struct StudyExample {
    std::string id;
    TokenSeq tokens;
    std::optional<FeatureGrouping> grouping;  ///< empty when the example failed to parse
    std::size_t label = 0;
    std::shared_ptr<const Predictor> model;
    std::string error;  ///< pre-existing failure carried into the report
};

enum class ClassChoice { True, Predicted, Explicit };

struct StudyOptions {
    std::vector<Method> methods;
    MethodOptions method_options;
    ClassChoice class_choice = ClassChoice::True;
    std::size_t explicit_class = 0;
    std::uint64_t seed = 0;
    bool keep_curves = true;
};

struct StudyRow {
    std::string example_id;
    Method method = Method::Random;
    std::size_t class_index = 0;
    std::size_t num_features = 0;
    std::optional<AttributionVector> attribution;
    double as_auc = 0.0;
    double ias_auc = 0.0;
    std::size_t forward_passes = 0;
    std::string error;  ///< empty on success
};

struct MethodSummary {
    Method method = Method::Random;
    double mean_as_auc = 0.0;
    double mean_ias_auc = 0.0;
    std::size_t examples = 0;
    std::size_t failures = 0;
};

struct StudyReport {
    std::vector<StudyRow> rows;
    std::vector<MethodSummary> summaries;
    std::vector<PerturbationCurve> curves;
    std::uint64_t seed = 0;

    const MethodSummary& summary(Method m) const;
};

/// Seeds are derived from (seed, example index, method), so rows do not depend on
/// which other methods or examples are in the run.
StudyReport run_study(const std::vector<StudyExample>& examples, const StudyOptions& options);

}  // namespace pinf
