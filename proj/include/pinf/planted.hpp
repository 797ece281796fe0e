#pragma once

#include "pinf/features.hpp"
#include "pinf/predictor.hpp"

#include <cstdint>
#include <vector>

namespace pinf {

/// v(S) = sum_{i in S} a_i + sum_{i<j in S} b_ij, emitted as logits [-scale*v, +scale*v].
class PlantedSetFunction {
public:
    /// `pairwise` is a dense symmetric n x n matrix with zero diagonal.
    PlantedSetFunction(std::vector<double> linear, Eigen::MatrixXd pairwise, double scale = 1.0);
    explicit PlantedSetFunction(std::vector<double> linear, double scale = 1.0);

    std::size_t num_features() const { return linear_.size(); }
    const std::vector<double>& linear() const { return linear_; }
    const Eigen::MatrixXd& pairwise() const { return pairwise_; }
    double scale() const { return scale_; }

    double value(const Coalition& s) const;
    /// Two-class logits for v(S).
    Eigen::VectorXd logits(const Coalition& s) const;

    /// Exact Shapley values of v: a_i + (1/2) sum_j b_ij.
    std::vector<double> shapley_values() const;

private:
    std::vector<double> linear_;
    Eigen::MatrixXd pairwise_;
    double scale_;
};

/// Random planted function: a_i ~ U(-1, 1); each pair interacts with
/// probability `density`, b_ij ~ U(-interaction, interaction).
PlantedSetFunction random_planted(std::size_t n, std::uint64_t seed, double density = 0.2,
                                  double interaction = 0.5, double scale = 1.0);

/// Trace of the planted function when the features whose bits are set are active.
PredictionTrace planted_forward(const PlantedSetFunction& pf, const BinaryMask& mask,
                                const FeatureGrouping& grouping);

/// Planted function bound to a token layout. A feature counts as active when any of
/// its tokens differs from the mask token; the row at feature j's last token holds
/// v(active features among 1..j) and every other row repeats the preceding value.
class PlantedPredictor final : public Predictor {
public:
    PlantedPredictor(PlantedSetFunction fn, FeatureGrouping grouping, TokenId mask_token,
                     std::size_t vocab_size);

    PredictionTrace forward(const TokenSeq& input) const override;
    std::size_t num_classes() const override { return 2; }
    std::size_t vocab_size() const override { return vocab_size_; }

    const PlantedSetFunction& function() const { return fn_; }
    const FeatureGrouping& grouping() const { return grouping_; }

private:
    PlantedSetFunction fn_;
    FeatureGrouping grouping_;
    TokenId mask_token_;
    std::size_t vocab_size_;
};

}  // namespace pinf
