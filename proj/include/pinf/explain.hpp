#pragma once

#include "pinf/mppi.hpp"
#include "pinf/shapley.hpp"
#include "pinf/sppi.hpp"

#include <optional>
#include <string_view>

namespace pinf {

enum class Method { SpPi, MpPi, KernelShap, ExactShap, Random };

std::string_view to_string(Method m);
Method method_from_string(std::string_view name);

struct MethodOptions {
    /// Sampled methods default to 2n when unset.
    std::optional<std::size_t> budget;
    ValueSpace value_space = ValueSpace::Logit;
    Sampler sampler = Sampler::Optimized;
    bool augmented = true;
    TokenId mask_token = kMaskToken;
};

struct Explanation {
    AttributionVector attribution;
    std::size_t forward_passes = 0;
};

/// Runs one attribution method. `plans` supplies MP-PI sampling plans.
Explanation explain(Method method, const Predictor& model, const TokenSeq& seq, const FeatureGrouping& grouping,
                    std::size_t c, const MethodOptions& options, std::uint64_t seed, MppiPlanCache& plans);

/// Argmax of the final row of the unmasked pass.
std::size_t predicted_class(const Predictor& model, const TokenSeq& seq);

}  // namespace pinf
