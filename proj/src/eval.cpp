#include "pinf/eval.hpp"

#include "pinf/error.hpp"
#include "pinf/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace pinf {

std::string_view to_string(Study s) { return s == Study::Activation ? "AS" : "IAS"; }

std::vector<FeatureIndex> insertion_order(const AttributionVector& phi, Study study) {
    std::vector<FeatureIndex> order(phi.size());
    std::iota(order.begin(), order.end(), FeatureIndex{1});
    const auto& v = phi.phi;
    std::stable_sort(order.begin(), order.end(), [&](FeatureIndex a, FeatureIndex b) {
        return study == Study::Activation ? v[a - 1] > v[b - 1] : v[a - 1] < v[b - 1];
    });
    return order;
}

PerturbationCurve perturbation_curve(const Predictor& model, const TokenSeq& seq, const FeatureGrouping& grouping,
                                     const AttributionVector& phi, std::size_t c, TokenId mask_token, Study study) {
    const std::size_t n = grouping.size();
    if (phi.size() != n) {
        throw data_error("attribution has " + std::to_string(phi.size()) + " entries for " + std::to_string(n) +
                         " features");
    }
    if (c >= model.num_classes()) {
        throw usage_error("class " + std::to_string(c) + " out of range");
    }
    PerturbationCurve curve;
    curve.class_index = c;
    curve.study = study;
    BinaryMask mask = BinaryMask::zeros(n);
    auto probe = [&](std::size_t added) {
        const auto logits = model.forward(apply_mask(seq, grouping, mask, mask_token)).final_row();
        curve.points.push_back({added, softmax(logits)(static_cast<Eigen::Index>(c))});
    };
    probe(0);
    std::size_t added = 0;
    for (FeatureIndex f : insertion_order(phi, study)) {
        mask.set(f, true);
        probe(++added);
    }
    return curve;
}

PerturbationCurve activation_curve(const Predictor& model, const TokenSeq& seq, const FeatureGrouping& grouping,
                                   const AttributionVector& phi, std::size_t c, TokenId mask_token) {
    return perturbation_curve(model, seq, grouping, phi, c, mask_token, Study::Activation);
}

PerturbationCurve inverse_activation_curve(const Predictor& model, const TokenSeq& seq,
                                           const FeatureGrouping& grouping, const AttributionVector& phi,
                                           std::size_t c, TokenId mask_token) {
    return perturbation_curve(model, seq, grouping, phi, c, mask_token, Study::InverseActivation);
}

double auc(const PerturbationCurve& curve) {
    const auto& pts = curve.points;
    if (pts.size() < 2) {
        throw data_error("AUC needs at least two curve points");
    }
    const double span = static_cast<double>(pts.back().added - pts.front().added);
    if (span <= 0.0) {
        throw data_error("curve x values must increase");
    }
    double area = 0.0;
    for (std::size_t k = 1; k < pts.size(); ++k) {
        const double dx = static_cast<double>(pts[k].added - pts[k - 1].added) / span;
        area += 0.5 * dx * (pts[k].probability + pts[k - 1].probability);
    }
    return area;
}

AttributionVector random_attribution(std::size_t n, std::uint64_t seed) {
    if (n < 1) {
        throw usage_error("random attribution needs n >= 1");
    }
    Rng rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    AttributionVector out;
    out.phi.resize(n);
    for (double& x : out.phi) x = dist(rng);
    return out;
}

double cosine_similarity(const AttributionVector& a, const AttributionVector& b) {
    if (a.size() != b.size()) {
        throw data_error("cosine similarity of vectors with different lengths");
    }
    const Eigen::Map<const Eigen::VectorXd> x(a.phi.data(), static_cast<Eigen::Index>(a.size()));
    const Eigen::Map<const Eigen::VectorXd> y(b.phi.data(), static_cast<Eigen::Index>(b.size()));
    const double nx = x.norm();
    const double ny = y.norm();
    if (nx == 0.0 || ny == 0.0) {
        throw numeric_error("cosine similarity is undefined for a zero vector");
    }
    return std::clamp(x.dot(y) / (nx * ny), -1.0, 1.0);
}

std::vector<double> approximation_gap(const Predictor& model, const TokenSeq& seq, const FeatureGrouping& grouping,
                                      TokenId mask_token) {
    const std::size_t n = grouping.size();
    const PredictionTrace full = model.forward(seq);
    std::vector<double> gaps(n);
    BinaryMask prefix = BinaryMask::zeros(n);
    for (FeatureIndex i = 1; i <= n; ++i) {
        prefix.set(i, true);
        const Eigen::VectorXd masked = model.forward(apply_mask(seq, grouping, prefix, mask_token)).final_row();
        gaps[i - 1] = (full.row(trace_row_for_feature(grouping, i)) - masked).cwiseAbs().maxCoeff();
    }
    return gaps;
}

const MethodSummary& StudyReport::summary(Method m) const {
    for (const auto& s : summaries) {
        if (s.method == m) return s;
    }
    throw usage_error("method '" + std::string(to_string(m)) + "' was not part of the study");
}

StudyReport run_study(const std::vector<StudyExample>& examples, const StudyOptions& options) {
    if (examples.empty()) {
        throw data_error("study dataset is empty");
    }
    StudyReport report;
    report.seed = options.seed;
    MppiPlanCache plans;
    for (Method m : options.methods) report.summaries.push_back({m, 0.0, 0.0, 0, 0});

    for (std::size_t e = 0; e < examples.size(); ++e) {
        const auto& ex = examples[e];
        for (std::size_t mi = 0; mi < options.methods.size(); ++mi) {
            const Method method = options.methods[mi];
            StudyRow row;
            row.example_id = ex.id;
            row.method = method;
            try {
                if (!ex.error.empty()) throw data_error(ex.error);
                if (!ex.model || !ex.grouping) throw data_error("example has no model or grouping");
                const auto& grouping = *ex.grouping;
                row.num_features = grouping.size();
                switch (options.class_choice) {
                    case ClassChoice::True: row.class_index = ex.label; break;
                    case ClassChoice::Predicted: row.class_index = predicted_class(*ex.model, ex.tokens); break;
                    case ClassChoice::Explicit: row.class_index = options.explicit_class; break;
                }
                if (row.class_index >= ex.model->num_classes()) {
                    throw data_error("class " + std::to_string(row.class_index) + " out of range");
                }
                const std::uint64_t seed =
                    derive_seed(derive_seed(options.seed, e), static_cast<std::uint64_t>(method));
                Explanation expl = explain(method, *ex.model, ex.tokens, grouping, row.class_index,
                                           options.method_options, seed, plans);
                auto as = activation_curve(*ex.model, ex.tokens, grouping, expl.attribution, row.class_index,
                                           options.method_options.mask_token);
                auto ias = inverse_activation_curve(*ex.model, ex.tokens, grouping, expl.attribution,
                                                    row.class_index, options.method_options.mask_token);
                row.as_auc = auc(as);
                row.ias_auc = auc(ias);
                row.forward_passes = expl.forward_passes;
                row.attribution = std::move(expl.attribution);
                if (options.keep_curves) {
                    for (auto* c : {&as, &ias}) {
                        c->method = std::string(to_string(method));
                        c->example_id = ex.id;
                        report.curves.push_back(std::move(*c));
                    }
                }
            } catch (const std::exception& err) {
                row.error = err.what();
            }
            auto& s = report.summaries[mi];
            if (row.error.empty()) {
                s.mean_as_auc += row.as_auc;
                s.mean_ias_auc += row.ias_auc;
                ++s.examples;
            } else {
                ++s.failures;
            }
            report.rows.push_back(std::move(row));
        }
    }
    for (auto& s : report.summaries) {
        if (s.examples > 0) {
            s.mean_as_auc /= static_cast<double>(s.examples);
            s.mean_ias_auc /= static_cast<double>(s.examples);
        }
    }
    return report;
}

}  // namespace pinf
