#include "pinf/explain.hpp"

#include "pinf/error.hpp"
#include "pinf/eval.hpp"

#include <string>

namespace pinf {

std::string_view to_string(Method m) {
    switch (m) {
        case Method::SpPi: return "sp-pi";
        case Method::MpPi: return "mp-pi";
        case Method::KernelShap: return "kernel-shap";
        case Method::ExactShap: return "exact-shap";
        case Method::Random: return "random";
    }
    return "random";
}

Method method_from_string(std::string_view name) {
    for (Method m : {Method::SpPi, Method::MpPi, Method::KernelShap, Method::ExactShap, Method::Random}) {
        if (to_string(m) == name) return m;
    }
    throw usage_error("unknown method '" + std::string(name) + "'");
}

std::size_t predicted_class(const Predictor& model, const TokenSeq& seq) {
    Eigen::Index best = 0;
    model.forward(seq).final_row().maxCoeff(&best);
    return static_cast<std::size_t>(best);
}

Explanation explain(Method method, const Predictor& model, const TokenSeq& seq, const FeatureGrouping& grouping,
                    std::size_t c, const MethodOptions& options, std::uint64_t seed, MppiPlanCache& plans) {
    const std::size_t n = grouping.size();
    const std::size_t budget = options.budget.value_or(2 * n);
    switch (method) {
        case Method::SpPi: {
            CountingPredictor counted(model);
            AttributionVector phi = sp_pi(counted.forward(seq), grouping, c, options.value_space);
            return {std::move(phi), counted.calls()};
        }
        case Method::MpPi: {
            const auto plan = plans.get(n, options.augmented, options.sampler);
            MppiResult r = explain_mp_pi(model, seq, grouping, c, budget, *plan, options.mask_token, seed,
                                         options.value_space);
            return {std::move(r.attribution), r.dataset.forward_passes};
        }
        case Method::KernelShap: {
            KernelShapResult r = kernel_shap_baseline(model, seq, grouping, c, budget, seed, options.mask_token,
                                                      options.value_space, KernelShapMode::Sampled);
            return {std::move(r.attribution), r.forward_passes};
        }
        case Method::ExactShap: {
            if (n > kMaxExactFeatures) {
                throw usage_error("exact-shap is limited to n <= " + std::to_string(kMaxExactFeatures) +
                                  " features (got " + std::to_string(n) + ")");
            }
            CountingPredictor counted(model);
            AttributionVector phi = exact_shap(
                model_set_function(counted, seq, grouping, c, options.value_space, options.mask_token));
            phi.class_index = c;
            phi.value_space = options.value_space;
            return {std::move(phi), counted.calls()};
        }
        case Method::Random: {
            AttributionVector phi = random_attribution(n, seed);
            phi.class_index = c;
            phi.value_space = options.value_space;
            return {std::move(phi), 0};
        }
    }
    throw usage_error("unhandled method");
}

}  // namespace pinf
