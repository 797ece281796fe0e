#pragma once

#include "pinf/features.hpp"
#include "pinf/predictor.hpp"
#include "pinf/random.hpp"
#include "pinf/sppi.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace pinf {

inline constexpr std::size_t kMaxExactFeatures = 14;

/// Deterministic set function over features 1..n.
struct SetFunction {
    std::function<double(const Coalition&)> eval;
    std::size_t n = 0;
};

/// Class-c value of the final trace row on the masked input.
SetFunction model_set_function(const Predictor& model, const TokenSeq& seq, const FeatureGrouping& grouping,
                               std::size_t c, ValueSpace space, TokenId mask_token);

/// Shapley values by full enumeration of all 2^n coalitions. n <= 14.
AttributionVector exact_shap(const SetFunction& v);

/// Coalition-size probabilities P*_i proportional to 1/(i(n-i)), sizes 1..n-1.
class ShapleyVec {
public:
    explicit ShapleyVec(std::size_t n);

    std::size_t num_features() const { return n_; }
    /// Probability of size i, 1 <= i <= n-1.
    double operator[](std::size_t size) const { return probs_.at(size - 1); }
    const std::vector<double>& probs() const { return probs_; }

private:
    std::size_t n_;
    std::vector<double> probs_;
};

ShapleyVec shapley_size_dist(std::size_t n);

/// Kernel SHAP weight (n-1) / (C(n,s) s (n-s)) for 0 < s < n.
double shapley_kernel_weight(std::size_t n, std::size_t s);

struct WeightedSample {
    Coalition coalition;
    double target = 0.0;
    double weight = 1.0;
    /// Anchors are enforced as equality constraints on the fitted model.
    bool anchor = false;
};

/// Weighted least squares for g(S) = phi0 + sum_{i in S} phi_i with the anchors as
/// hard constraints. Normal equations carry a 1e-10 ridge on the diagonal.
/// Throws a numeric error when fewer than n+1 distinct coalitions are present or
/// the design is rank deficient.
AttributionVector kernel_shap_solve(const std::vector<WeightedSample>& samples, std::size_t n);

inline constexpr double kRidge = 1e-10;

enum class KernelShapMode {
    /// B coalitions with size ~ P*, members uniform, uniform weights.
    Sampled,
    /// All 2^n - 2 proper coalitions with Shapley kernel weights.
    Enumerate,
};

struct KernelShapResult {
    AttributionVector attribution;
    std::size_t forward_passes = 0;
};

/// Kernel SHAP on full forward passes. Anchors are the empty and full
/// coalitions, each one extra pass; 'forward_passes' reports all of them.
KernelShapResult kernel_shap_baseline(const Predictor& model, const TokenSeq& seq, const FeatureGrouping& grouping,
                                      std::size_t c, std::size_t budget, std::uint64_t seed,
                                      TokenId mask_token = kMaskToken, ValueSpace space = ValueSpace::Logit,
                                      KernelShapMode mode = KernelShapMode::Sampled);

/// Uniform coalition of `size` features drawn from 1..n.
Coalition sample_coalition_of_size(std::size_t n, std::size_t size, Rng& rng);

}  // namespace pinf
