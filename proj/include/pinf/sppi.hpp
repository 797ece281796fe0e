#pragma once

#include "pinf/features.hpp"
#include "pinf/predictor.hpp"

#include <string_view>
#include <vector>

namespace pinf {

enum class ValueSpace { Logit, Probability };

std::string_view to_string(ValueSpace space);
ValueSpace value_space_from_string(std::string_view name);

/// Scalar value of class c from a logit row. Logit space is the log-odds of the
/// class probability, z_c - logsumexp_{k != c} z_k; probability space is softmax_c.
double class_value(const Eigen::VectorXd& logits, std::size_t c, ValueSpace space);

struct AttributionVector {
    std::vector<double> phi;
    double phi0 = 0.0;
    std::size_t class_index = 0;
    ValueSpace value_space = ValueSpace::Logit;

    std::size_t size() const { return phi.size(); }
    double sum() const;
};

/// Single-pass attribution: phi_i = p_i - p_{i-1}, p_0 read at the BOS row.
AttributionVector sp_pi(const PredictionTrace& trace, const FeatureGrouping& grouping, std::size_t c,
                        ValueSpace space = ValueSpace::Logit);

}  // namespace pinf
