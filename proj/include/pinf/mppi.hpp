#pragma once

#include "pinf/features.hpp"
#include "pinf/predictor.hpp"
#include "pinf/random.hpp"
#include "pinf/shapley.hpp"
#include "pinf/sppi.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string_view>
#include <tuple>
#include <vector>

namespace pinf {

/// Coalition shape: its size and its last (largest) active feature.
struct Cell {
    std::size_t size = 0;
    FeatureIndex last = 0;
    auto operator<=>(const Cell&) const = default;
};

/// Number of cells with 1 <= size <= last <= n.
inline std::size_t num_cells(std::size_t n) { return n * (n + 1) / 2; }

/// Flat index of a cell; cells are ordered by size, then last feature, so the
/// full-coalition cell (n, n) is the final index.
std::size_t cell_index(std::size_t n, Cell cell);
Cell cell_at(std::size_t n, std::size_t index);

/// Dense table over (size, last) cells for sizes 1..n. Entries with last < size
/// are structurally zero and cannot be written.
class SizeLastMatrix {
public:
    SizeLastMatrix() = default;
    explicit SizeLastMatrix(std::size_t n);
    static SizeLastMatrix from_vec(std::size_t n, const Eigen::VectorXd& values);

    std::size_t num_features() const { return n_; }
    double operator()(std::size_t size, FeatureIndex last) const;
    void set(std::size_t size, FeatureIndex last, double value);
    void add(std::size_t size, FeatureIndex last, double value);

    /// Values over all cells in `cell_index` order.
    const Eigen::VectorXd& vec() const { return values_; }
    double total() const { return values_.sum(); }
    /// Sum over cells of one size.
    double size_marginal(std::size_t size) const;

private:
    std::size_t n_ = 0;
    Eigen::VectorXd values_;
};

/// P*_{ij} = P*_i C(j-1, i-1) / C(n, i) for j >= i.
SizeLastMatrix size_last_from_vec(const ShapleyVec& p);

/// One row of the conditional matrix in exact integer form:
/// P(out | input) = count / denominator.
struct ConditionalRow {
    Cell input;
    std::vector<std::pair<Cell, std::uint64_t>> counts;
    std::uint64_t denominator = 0;
};

inline constexpr std::size_t kMaxConditionalFeatures = 12;

/// Distribution of a uniformly chosen intermediate (prefix) coalition given the
/// input mask cell, tabulated by enumerating every input coalition of that cell.
class ConditionalMatrix {
public:
    ConditionalMatrix(std::size_t n, bool augmented, std::vector<ConditionalRow> rows);

    std::size_t num_features() const { return n_; }
    bool augmented() const { return augmented_; }
    const std::vector<ConditionalRow>& rows() const { return rows_; }
    /// Row for an input cell; nullptr when the cell cannot be an input.
    const ConditionalRow* row(Cell input) const;
    double operator()(Cell input, Cell out) const;

    /// Dense (cells x cells) matrix in `cell_index` order.
    const Eigen::MatrixXd& dense() const { return dense_; }

private:
    std::size_t n_;
    bool augmented_;
    std::vector<ConditionalRow> rows_;
    std::vector<int> row_of_cell_;
    Eigen::MatrixXd dense_;
};

/// Input cells are sizes 1..n-1; with `augmented`, every input also activates
/// all features after its last one. Cost is sum_{i<=j} C(j-1, i-1) * i' ~ n 2^n.
ConditionalMatrix conditional_matrix(std::size_t n, bool augmented);

inline constexpr std::size_t kMaxCountedFeatures = 60;

/// Same rows as `conditional_matrix`, with the integer counts written down
/// combinatorially instead of enumerated; used by MP-PI beyond the enumeration
/// limit.
ConditionalMatrix counted_conditional_matrix(std::size_t n, bool augmented);

/// Closed-form conditional probability. Non-augmented:
///   C(l-1,k-1) C(j-l-1,i-k-1) / (C(j-1,i-1) i)  for k < i, l < j
///   1/i                                           for (k,l) = (i,j)
/// Augmented, i' = i+n-j: the same with i' in place of i for k < i, l < j, and
/// 1/i' for l >= j, k = i+l-j.
double conditional_closed_form(std::size_t n, bool augmented, Cell input, Cell out);

enum class Sampler { Optimized, Shapley };

std::string_view to_string(Sampler s);
Sampler sampler_from_string(std::string_view name);

struct OptimizeReport {
    std::size_t iterations = 0;
    double residual = 0.0;
    double gradient_norm = 0.0;
    bool converged = false;
};

/// Input-mask distribution P' over cells with size <= n-1.
struct MaskDistribution {
    SizeLastMatrix probs;
    bool augmented = true;
    Sampler sampler = Sampler::Optimized;
    OptimizeReport report;
};

/// Mixture of conditional rows weighted by P': vec(P^D) = vec(P') M.
SizeLastMatrix propagate(const MaskDistribution& pprime, const ConditionalMatrix& m);

/// ||vec(P') M - vec(P*)|| over the cells of sizes 1..n-1.
double mask_residual(const MaskDistribution& pprime, const ConditionalMatrix& m, const SizeLastMatrix& target);

struct OptimizeOptions {
    double tolerance = 1e-9;
    std::size_t max_iterations = 10000;
};

/// Minimizes the squared residual over the probability simplex on input cells by
/// accelerated projected gradient with restarts, starting from the uniform point.
MaskDistribution optimize_mask_dist(const ConditionalMatrix& m, const SizeLastMatrix& target,
                                    const OptimizeOptions& options = {});

/// P' equal to the Shapley size/last matrix itself.
MaskDistribution shapley_mask_dist(std::size_t n, bool augmented);

struct SampledMask {
    BinaryMask mask;
    Cell cell;
};

/// Draws a cell from P', then a uniform coalition of that cell; the tail after the
/// last feature is switched on for augmented distributions.
SampledMask sample_mask(const MaskDistribution& pprime, Rng& rng);

struct DatasetRow {
    Coalition coalition;
    Eigen::VectorXd scores;
    std::size_t round = 0;  ///< 0 for anchors
    Cell cell;
    bool anchor = false;
};

struct CoalitionDataset {
    std::vector<DatasetRow> rows;
    std::size_t rounds = 0;
    std::size_t forward_passes = 0;
};

/// Multi-pass progressive inference: one unmasked pass for the anchors, then B
/// masked passes each harvesting the trace rows of its prefix coalitions.
CoalitionDataset run_mppi(const Predictor& model, const TokenSeq& seq, const FeatureGrouping& grouping,
                          std::size_t budget, const MaskDistribution& pprime, TokenId mask_token, Rng& rng);

/// Round-normalized cell histogram: each non-anchor row counts 1/(rows in its
/// round), averaged over rounds. Converges to propagate(P', M).
SizeLastMatrix empirical_cell_frequencies(const CoalitionDataset& dataset, std::size_t n);

inline constexpr double kWeightFloor = 1e-12;

/// Weighted samples fed to the regression: weight P*_kl / P^D_kl, anchors hard.
std::vector<WeightedSample> mppi_samples(const CoalitionDataset& dataset, const SizeLastMatrix& pd,
                                         const SizeLastMatrix& target, std::size_t c, ValueSpace space);

AttributionVector mp_pi(const CoalitionDataset& dataset, const SizeLastMatrix& pd, const SizeLastMatrix& target,
                        std::size_t c, std::size_t n, ValueSpace space = ValueSpace::Logit);

/// Everything MP-PI needs for one feature count, independent of the input.
struct MppiPlan {
    std::size_t n = 0;
    ConditionalMatrix conditional;
    SizeLastMatrix target;
    MaskDistribution pprime;
    SizeLastMatrix pd;
};

MppiPlan make_mppi_plan(std::size_t n, bool augmented, Sampler sampler);

/// Thread-safe memo of plans keyed by (n, augmented, sampler).
class MppiPlanCache {
public:
    std::shared_ptr<const MppiPlan> get(std::size_t n, bool augmented, Sampler sampler);

private:
    std::mutex mutex_;
    std::map<std::tuple<std::size_t, bool, Sampler>, std::shared_ptr<const MppiPlan>> plans_;
};

struct MppiResult {
    AttributionVector attribution;
    CoalitionDataset dataset;
};

MppiResult explain_mp_pi(const Predictor& model, const TokenSeq& seq, const FeatureGrouping& grouping,
                         std::size_t c, std::size_t budget, const MppiPlan& plan, TokenId mask_token,
                         std::uint64_t seed, ValueSpace space = ValueSpace::Logit);

}  // namespace pinf
