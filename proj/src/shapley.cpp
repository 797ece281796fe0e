#include "pinf/shapley.hpp"

#include "pinf/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>

namespace pinf {

namespace {

double binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0.0;
    k = std::min(k, n - k);
    double r = 1.0;
    for (std::size_t i = 1; i <= k; ++i) {
        r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    }
    return r;
}

Coalition coalition_from_bits(std::uint64_t bits, std::size_t n) {
    std::vector<FeatureIndex> m;
    for (std::size_t j = 0; j < n; ++j) {
        if ((bits >> j) & 1U) m.push_back(j + 1);
    }
    return Coalition(std::move(m));
}

}  // namespace

SetFunction model_set_function(const Predictor& model, const TokenSeq& seq, const FeatureGrouping& grouping,
                               std::size_t c, ValueSpace space, TokenId mask_token) {
    const std::size_t n = grouping.size();
    return SetFunction{[&model, &seq, &grouping, c, space, mask_token, n](const Coalition& s) {
                           const TokenSeq masked = apply_mask(seq, grouping, s.to_mask(n), mask_token);
                           return class_value(model.forward(masked).final_row(), c, space);
                       },
                       n};
}

AttributionVector exact_shap(const SetFunction& v) {
    const std::size_t n = v.n;
    if (n < 1) {
        throw usage_error("exact SHAP needs at least one feature");
    }
    if (n > kMaxExactFeatures) {
        throw usage_error("exact SHAP enumerates 2^n coalitions and is limited to n <= " +
                          std::to_string(kMaxExactFeatures) + " (got n = " + std::to_string(n) + ")");
    }
    const std::uint64_t total = std::uint64_t{1} << n;
    std::vector<double> values(total);
    for (std::uint64_t b = 0; b < total; ++b) {
        values[b] = v.eval(coalition_from_bits(b, n));
    }
    // |S|! (n-|S|-1)! / n! = 1 / (n C(n-1, |S|))
    std::vector<double> w(n);
    for (std::size_t s = 0; s < n; ++s) {
        w[s] = 1.0 / (static_cast<double>(n) * binomial(n - 1, s));
    }
    AttributionVector out;
    out.phi.assign(n, 0.0);
    out.phi0 = values[0];
    for (std::uint64_t b = 0; b < total; ++b) {
        const auto s = static_cast<std::size_t>(__builtin_popcountll(b));
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint64_t bit = std::uint64_t{1} << i;
            if (b & bit) continue;
            out.phi[i] += w[s] * (values[b | bit] - values[b]);
        }
    }
    return out;
}

ShapleyVec::ShapleyVec(std::size_t n) : n_(n) {
    if (n < 2) {
        throw usage_error("the Shapley size distribution needs n >= 2");
    }
    probs_.resize(n - 1);
    double total = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
        probs_[i - 1] = 1.0 / (static_cast<double>(i) * static_cast<double>(n - i));
        total += probs_[i - 1];
    }
    for (double& p : probs_) p /= total;
}

ShapleyVec shapley_size_dist(std::size_t n) { return ShapleyVec(n); }

double shapley_kernel_weight(std::size_t n, std::size_t s) {
    if (s == 0 || s >= n) {
        throw usage_error("the Shapley kernel is unbounded for the empty and full coalitions");
    }
    return static_cast<double>(n - 1) / (binomial(n, s) * static_cast<double>(s) * static_cast<double>(n - s));
}

AttributionVector kernel_shap_solve(const std::vector<WeightedSample>& samples, std::size_t n) {
    if (n < 1) {
        throw usage_error("regression needs at least one feature");
    }
    const auto dim = static_cast<Eigen::Index>(n + 1);
    Eigen::MatrixXd normal = Eigen::MatrixXd::Identity(dim, dim) * kRidge;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
    std::map<Coalition, std::pair<double, std::size_t>> anchors;
    std::set<Coalition> distinct;

    Eigen::VectorXd x(dim);
    for (const auto& s : samples) {
        if (s.coalition.last() > n) {
            throw data_error("sample coalition references feature " + std::to_string(s.coalition.last()) +
                             " of " + std::to_string(n));
        }
        if (!std::isfinite(s.target) || !std::isfinite(s.weight) || s.weight < 0.0) {
            throw numeric_error("sample has a non-finite target or an invalid weight");
        }
        if (s.anchor) {
            auto& slot = anchors[s.coalition];
            slot.first += s.target;
            slot.second += 1;
            distinct.insert(s.coalition);
            continue;
        }
        if (s.weight == 0.0) continue;
        distinct.insert(s.coalition);
        x.setZero();
        x(0) = 1.0;
        for (FeatureIndex j : s.coalition.members()) x(static_cast<Eigen::Index>(j)) = 1.0;
        normal.noalias() += s.weight * x * x.transpose();
        rhs.noalias() += s.weight * s.target * x;
    }
    if (distinct.size() < n + 1) {
        throw numeric_error("rank-deficient design: " + std::to_string(distinct.size()) +
                            " distinct coalitions for " + std::to_string(n) + " features (need " +
                            std::to_string(n + 1) + ")");
    }

    const auto m = static_cast<Eigen::Index>(anchors.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(dim + m, dim + m);
    Eigen::VectorXd kkt_rhs(dim + m);
    kkt.topLeftCorner(dim, dim) = normal;
    kkt_rhs.head(dim) = rhs;
    Eigen::Index r = 0;
    for (const auto& [coalition, acc] : anchors) {
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(dim);
        row(0) = 1.0;
        for (FeatureIndex j : coalition.members()) row(static_cast<Eigen::Index>(j)) = 1.0;
        kkt.block(dim + r, 0, 1, dim) = row;
        kkt.block(0, dim + r, dim, 1) = row.transpose();
        kkt_rhs(dim + r) = acc.first / static_cast<double>(acc.second);
        ++r;
    }

    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    lu.setThreshold(1e-14);
    if (!lu.isInvertible()) {
        throw numeric_error("rank-deficient design: anchor constraints are linearly dependent");
    }
    const Eigen::VectorXd sol = lu.solve(kkt_rhs);
    const double scale = std::max(1.0, kkt_rhs.cwiseAbs().maxCoeff());
    if (!sol.allFinite() || (kkt * sol - kkt_rhs).cwiseAbs().maxCoeff() > 1e-6 * scale) {
        throw numeric_error("weighted least squares solve failed; design is rank deficient beyond ridge rescue");
    }

    AttributionVector out;
    out.phi0 = sol(0);
    out.phi.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.phi[i] = sol(static_cast<Eigen::Index>(i + 1));
    return out;
}

Coalition sample_coalition_of_size(std::size_t n, std::size_t size, Rng& rng) {
    std::vector<FeatureIndex> pool(n);
    for (std::size_t j = 0; j < n; ++j) pool[j] = j + 1;
    // Partial Fisher-Yates.
    for (std::size_t k = 0; k < size; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, n - 1);
        std::swap(pool[k], pool[pick(rng)]);
    }
    pool.resize(size);
    return Coalition(std::move(pool));
}

KernelShapResult kernel_shap_baseline(const Predictor& model, const TokenSeq& seq, const FeatureGrouping& grouping,
                                      std::size_t c, std::size_t budget, std::uint64_t seed, TokenId mask_token,
                                      ValueSpace space, KernelShapMode mode) {
    const std::size_t n = grouping.size();
    if (mode == KernelShapMode::Sampled && budget < n + 1) {
        throw usage_error("kernel SHAP budget " + std::to_string(budget) + " is below n+1 = " + std::to_string(n + 1));
    }
    if (mode == KernelShapMode::Enumerate && n > kMaxExactFeatures) {
        throw usage_error("kernel SHAP enumeration is limited to n <= " + std::to_string(kMaxExactFeatures));
    }
    CountingPredictor counted(model);
    const SetFunction v = model_set_function(counted, seq, grouping, c, space, mask_token);

    std::vector<WeightedSample> samples;
    samples.push_back({Coalition{}, v.eval(Coalition{}), 1.0, true});
    samples.push_back({Coalition::full(n), v.eval(Coalition::full(n)), 1.0, true});

    if (mode == KernelShapMode::Enumerate) {
        const std::uint64_t total = std::uint64_t{1} << n;
        for (std::uint64_t b = 1; b + 1 < total; ++b) {
            Coalition s = coalition_from_bits(b, n);
            const double w = shapley_kernel_weight(n, s.size());
            const double y = v.eval(s);
            samples.push_back({std::move(s), y, w, false});
        }
    } else if (n >= 2) {
        const ShapleyVec sizes(n);
        Rng rng(seed);
        std::discrete_distribution<std::size_t> size_dist(sizes.probs().begin(), sizes.probs().end());
        for (std::size_t draw = 0; draw < budget; ++draw) {
            Coalition s = sample_coalition_of_size(n, size_dist(rng) + 1, rng);
            const double y = v.eval(s);
            samples.push_back({std::move(s), y, 1.0, false});
        }
    }
    KernelShapResult out{kernel_shap_solve(samples, n), counted.calls()};
    out.attribution.class_index = c;
    out.attribution.value_space = space;
    return out;
}

}  // namespace pinf
