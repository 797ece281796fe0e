#include "pinf/sppi.hpp"

#include "pinf/error.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace pinf {

std::string_view to_string(ValueSpace space) { return space == ValueSpace::Logit ? "logit" : "probability"; }

ValueSpace value_space_from_string(std::string_view name) {
    if (name == "logit") return ValueSpace::Logit;
    if (name == "probability") return ValueSpace::Probability;
    throw usage_error("unknown value space '" + std::string(name) + "'");
}

double class_value(const Eigen::VectorXd& logits, std::size_t c, ValueSpace space) {
    const auto k = static_cast<std::size_t>(logits.size());
    if (c >= k) {
        throw usage_error("class " + std::to_string(c) + " out of range for " + std::to_string(k) + " classes");
    }
    const auto ci = static_cast<Eigen::Index>(c);
    if (space == ValueSpace::Probability) {
        return softmax(logits)(ci);
    }
    double top = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < logits.size(); ++j) {
        if (j != ci) top = std::max(top, logits(j));
    }
    double acc = 0.0;
    for (Eigen::Index j = 0; j < logits.size(); ++j) {
        if (j != ci) acc += std::exp(logits(j) - top);
    }
    return logits(ci) - (top + std::log(acc));
}

double AttributionVector::sum() const { return std::accumulate(phi.begin(), phi.end(), 0.0); }

AttributionVector sp_pi(const PredictionTrace& trace, const FeatureGrouping& grouping, std::size_t c,
                        ValueSpace space) {
    if (c >= trace.num_classes()) {
        throw usage_error("class " + std::to_string(c) + " out of range for " + std::to_string(trace.num_classes()) +
                          " classes");
    }
    if (grouping.extent() > trace.num_positions()) {
        throw data_error("grouping covers " + std::to_string(grouping.extent()) + " positions but the trace has " +
                         std::to_string(trace.num_positions()));
    }
    AttributionVector out;
    out.class_index = c;
    out.value_space = space;
    out.phi.resize(grouping.size());
    double prev = class_value(trace.row(0), c, space);
    out.phi0 = prev;
    for (FeatureIndex j = 1; j <= grouping.size(); ++j) {
        const double cur = class_value(trace.row(trace_row_for_feature(grouping, j)), c, space);
        out.phi[j - 1] = cur - prev;
        prev = cur;
    }
    return out;
}

}  // namespace pinf
