#include "pinf/planted.hpp"

#include "pinf/error.hpp"
#include "pinf/random.hpp"

#include <cmath>
#include <string>

namespace pinf {

PlantedSetFunction::PlantedSetFunction(std::vector<double> linear, Eigen::MatrixXd pairwise, double scale)
    : linear_(std::move(linear)), pairwise_(std::move(pairwise)), scale_(scale) {
    const auto n = static_cast<Eigen::Index>(linear_.size());
    if (n == 0) {
        throw usage_error("planted function needs at least one feature");
    }
    if (pairwise_.rows() != n || pairwise_.cols() != n) {
        throw data_error("pairwise matrix must be " + std::to_string(n) + " x " + std::to_string(n));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (pairwise_(i, i) != 0.0) {
            throw data_error("pairwise matrix must have a zero diagonal");
        }
        for (Eigen::Index j = i + 1; j < n; ++j) {
            if (pairwise_(i, j) != pairwise_(j, i)) {
                throw data_error("pairwise matrix is not symmetric at (" + std::to_string(i + 1) + ", " +
                                 std::to_string(j + 1) + ")");
            }
        }
    }
    if (!std::isfinite(scale_) || !pairwise_.allFinite()) {
        throw data_error("planted function has non-finite parameters");
    }
}

PlantedSetFunction::PlantedSetFunction(std::vector<double> linear, double scale)
    : PlantedSetFunction(linear, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(linear.size()),
                                                       static_cast<Eigen::Index>(linear.size())),
                         scale) {}

double PlantedSetFunction::value(const Coalition& s) const {
    const auto& m = s.members();
    if (s.last() > linear_.size()) {
        throw data_error("coalition member exceeds planted feature count");
    }
    double v = 0.0;
    for (std::size_t x = 0; x < m.size(); ++x) {
        v += linear_[m[x] - 1];
        for (std::size_t y = x + 1; y < m.size(); ++y) {
            v += pairwise_(static_cast<Eigen::Index>(m[x] - 1), static_cast<Eigen::Index>(m[y] - 1));
        }
    }
    return v;
}

Eigen::VectorXd PlantedSetFunction::logits(const Coalition& s) const {
    const double v = scale_ * value(s);
    return Eigen::Vector2d(-v, v);
}

std::vector<double> PlantedSetFunction::shapley_values() const {
    std::vector<double> phi(linear_.size());
    for (std::size_t i = 0; i < phi.size(); ++i) {
        phi[i] = linear_[i] + 0.5 * pairwise_.row(static_cast<Eigen::Index>(i)).sum();
    }
    return phi;
}

PlantedSetFunction random_planted(std::size_t n, std::uint64_t seed, double density, double interaction,
                                  double scale) {
    Rng rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::bernoulli_distribution coin(density);
    std::vector<double> a(n);
    for (double& x : a) x = unit(rng);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (coin(rng)) {
                const double w = interaction * unit(rng);
                b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = w;
                b(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = w;
            }
        }
    }
    return PlantedSetFunction(std::move(a), std::move(b), scale);
}

namespace {

// Shared by planted_forward and PlantedPredictor::forward.
PredictionTrace planted_trace(const PlantedSetFunction& pf, const BinaryMask& mask, const FeatureGrouping& grouping,
                              std::size_t length) {
    Eigen::MatrixXd scores(static_cast<Eigen::Index>(length), 2);
    std::vector<FeatureIndex> active;
    Eigen::VectorXd current = pf.logits(Coalition{});
    std::size_t next_feature = 1;
    for (std::size_t p = 0; p < length; ++p) {
        if (next_feature <= grouping.size() && p == trace_row_for_feature(grouping, next_feature)) {
            if (mask.active(next_feature)) {
                active.push_back(next_feature);
                current = pf.logits(Coalition(active));
            }
            ++next_feature;
        }
        scores.row(static_cast<Eigen::Index>(p)) = current.transpose();
    }
    return PredictionTrace(std::move(scores));
}

}  // namespace

PredictionTrace planted_forward(const PlantedSetFunction& pf, const BinaryMask& mask,
                                const FeatureGrouping& grouping) {
    if (mask.size() != pf.num_features() || grouping.size() != pf.num_features()) {
        throw data_error("mask, grouping and planted function disagree on the feature count");
    }
    return planted_trace(pf, mask, grouping, grouping.extent());
}

PlantedPredictor::PlantedPredictor(PlantedSetFunction fn, FeatureGrouping grouping, TokenId mask_token,
                                   std::size_t vocab_size)
    : fn_(std::move(fn)), grouping_(std::move(grouping)), mask_token_(mask_token), vocab_size_(vocab_size) {
    if (grouping_.size() != fn_.num_features()) {
        throw data_error("planted function has " + std::to_string(fn_.num_features()) + " features but the input has " +
                         std::to_string(grouping_.size()));
    }
    if (mask_token_ >= vocab_size_) {
        throw usage_error("mask token outside the planted vocabulary");
    }
}

PredictionTrace PlantedPredictor::forward(const TokenSeq& input) const {
    check_tokens(input, vocab_size_);
    if (input.size() < grouping_.extent()) {
        throw data_error("input shorter than the planted feature layout");
    }
    BinaryMask mask = BinaryMask::zeros(grouping_.size());
    for (FeatureIndex j = 1; j <= grouping_.size(); ++j) {
        const auto& r = grouping_.feature(j);
        for (std::size_t p = r.start; p < r.end; ++p) {
            if (input[p] != mask_token_) {
                mask.set(j, true);
                break;
            }
        }
    }
    return planted_trace(fn_, mask, grouping_, input.size());
}

}  // namespace pinf
