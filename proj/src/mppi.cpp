#include "pinf/mppi.hpp"

#include "pinf/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

namespace pinf {

namespace {

std::uint64_t binom_u64(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    unsigned __int128 r = 1;
    for (std::size_t i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;
    }
    return static_cast<std::uint64_t>(r);
}

double binom(std::size_t n, std::size_t k) { return static_cast<double>(binom_u64(n, k)); }

bool valid_cell(std::size_t n, Cell c) { return c.size >= 1 && c.size <= c.last && c.last <= n; }

// Euclidean projection onto {x >= 0, sum x = 1}.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
    std::vector<double> u(v.data(), v.data() + v.size());
    std::sort(u.begin(), u.end(), std::greater<>());
    double css = 0.0;
    double theta = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        css += u[k];
        const double t = (css - 1.0) / static_cast<double>(k + 1);
        if (u[k] - t > 0.0) theta = t;
    }
    return (v.array() - theta).max(0.0).matrix();
}

}  // namespace

std::size_t cell_index(std::size_t n, Cell cell) {
    if (!valid_cell(n, cell)) {
        throw data_error("invalid cell (size " + std::to_string(cell.size) + ", last " + std::to_string(cell.last) +
                         ") for n = " + std::to_string(n));
    }
    // Sizes 1..i-1 hold (n - s + 1) cells each.
    const std::size_t i = cell.size;
    const std::size_t offset = (i - 1) * (n + 1) - (i - 1) * i / 2;
    return offset + (cell.last - i);
}

Cell cell_at(std::size_t n, std::size_t index) {
    for (std::size_t i = 1; i <= n; ++i) {
        const std::size_t width = n - i + 1;
        if (index < width) return Cell{i, i + index};
        index -= width;
    }
    throw data_error("cell index out of range");
}

SizeLastMatrix::SizeLastMatrix(std::size_t n) : n_(n), values_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_cells(n)))) {}

SizeLastMatrix SizeLastMatrix::from_vec(std::size_t n, const Eigen::VectorXd& values) {
    if (static_cast<std::size_t>(values.size()) != num_cells(n)) {
        throw data_error("vector length does not match the cell count for n = " + std::to_string(n));
    }
    SizeLastMatrix m(n);
    m.values_ = values;
    return m;
}

double SizeLastMatrix::operator()(std::size_t size, FeatureIndex last) const {
    if (!valid_cell(n_, Cell{size, last})) return 0.0;
    return values_(static_cast<Eigen::Index>(cell_index(n_, Cell{size, last})));
}

void SizeLastMatrix::set(std::size_t size, FeatureIndex last, double value) {
    values_(static_cast<Eigen::Index>(cell_index(n_, Cell{size, last}))) = value;
}

void SizeLastMatrix::add(std::size_t size, FeatureIndex last, double value) {
    values_(static_cast<Eigen::Index>(cell_index(n_, Cell{size, last}))) += value;
}

double SizeLastMatrix::size_marginal(std::size_t size) const {
    double acc = 0.0;
    for (FeatureIndex j = size; j <= n_; ++j) acc += (*this)(size, j);
    return acc;
}

SizeLastMatrix size_last_from_vec(const ShapleyVec& p) {
    const std::size_t n = p.num_features();
    SizeLastMatrix out(n);
    for (std::size_t i = 1; i < n; ++i) {
        for (FeatureIndex j = i; j <= n; ++j) {
            out.set(i, j, p[i] * binom(j - 1, i - 1) / binom(n, i));
        }
    }
    return out;
}

ConditionalMatrix::ConditionalMatrix(std::size_t n, bool augmented, std::vector<ConditionalRow> rows)
    : n_(n), augmented_(augmented), rows_(std::move(rows)), row_of_cell_(num_cells(n), -1) {
    const auto cells = static_cast<Eigen::Index>(num_cells(n));
    dense_ = Eigen::MatrixXd::Zero(cells, cells);
    for (std::size_t r = 0; r < rows_.size(); ++r) {
        const auto& row = rows_[r];
        const std::size_t in = cell_index(n, row.input);
        row_of_cell_[in] = static_cast<int>(r);
        for (const auto& [out, count] : row.counts) {
            dense_(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(cell_index(n, out))) =
                static_cast<double>(count) / static_cast<double>(row.denominator);
        }
    }
}

const ConditionalRow* ConditionalMatrix::row(Cell input) const {
    if (!valid_cell(n_, input)) return nullptr;
    const int r = row_of_cell_[cell_index(n_, input)];
    return r < 0 ? nullptr : &rows_[static_cast<std::size_t>(r)];
}

double ConditionalMatrix::operator()(Cell input, Cell out) const {
    if (!valid_cell(n_, input) || !valid_cell(n_, out)) return 0.0;
    return dense_(static_cast<Eigen::Index>(cell_index(n_, input)), static_cast<Eigen::Index>(cell_index(n_, out)));
}

ConditionalMatrix conditional_matrix(std::size_t n, bool augmented) {
    if (n < 2) {
        throw usage_error("conditional matrix needs n >= 2");
    }
    if (n > kMaxConditionalFeatures) {
        throw usage_error("conditional matrix enumeration is limited to n <= " +
                          std::to_string(kMaxConditionalFeatures) + " (got " + std::to_string(n) + ")");
    }
    std::vector<ConditionalRow> rows;
    for (std::size_t i = 1; i < n; ++i) {
        for (FeatureIndex j = i; j <= n; ++j) {
            std::map<Cell, std::uint64_t> counts;
            std::uint64_t bases = 0;
            // Every (i-1)-subset of 1..j-1, as a bitmask over j-1 bits.
            const std::uint64_t limit = std::uint64_t{1} << (j - 1);
            for (std::uint64_t b = 0; b < limit; ++b) {
                if (static_cast<std::size_t>(__builtin_popcountll(b)) != i - 1) continue;
                ++bases;
                std::vector<FeatureIndex> members;
                for (std::size_t f = 0; f + 1 < j; ++f) {
                    if ((b >> f) & 1U) members.push_back(f + 1);
                }
                members.push_back(j);
                if (augmented) {
                    for (FeatureIndex t = j + 1; t <= n; ++t) members.push_back(t);
                }
                for (std::size_t k = 1; k <= members.size(); ++k) {
                    ++counts[Cell{k, members[k - 1]}];
                }
            }
            const std::size_t active = augmented ? i + n - j : i;
            ConditionalRow row{Cell{i, j}, {counts.begin(), counts.end()}, bases * active};
            rows.push_back(std::move(row));
        }
    }
    return ConditionalMatrix(n, augmented, std::move(rows));
}

ConditionalMatrix counted_conditional_matrix(std::size_t n, bool augmented) {
    if (n < 2) {
        throw usage_error("conditional matrix needs n >= 2");
    }
    if (n > kMaxCountedFeatures) {
        throw usage_error("conditional matrix counts overflow beyond n = " + std::to_string(kMaxCountedFeatures));
    }
    std::vector<ConditionalRow> rows;
    for (std::size_t i = 1; i < n; ++i) {
        for (FeatureIndex j = i; j <= n; ++j) {
            const std::uint64_t bases = binom_u64(j - 1, i - 1);
            ConditionalRow row{Cell{i, j}, {}, bases * (augmented ? i + n - j : i)};
            // Proper prefixes that stop before j: feature l is the k-th member.
            for (std::size_t k = 1; k < i; ++k) {
                for (FeatureIndex l = k; l < j; ++l) {
                    const std::uint64_t c = binom_u64(l - 1, k - 1) * binom_u64(j - l - 1, i - k - 1);
                    if (c > 0) row.counts.push_back({Cell{k, l}, c});
                }
            }
            // Every base reaches j, and each tail feature, exactly once.
            const FeatureIndex stop = augmented ? n : j;
            for (FeatureIndex l = j; l <= stop; ++l) row.counts.push_back({Cell{i + l - j, l}, bases});
            std::sort(row.counts.begin(), row.counts.end());
            rows.push_back(std::move(row));
        }
    }
    return ConditionalMatrix(n, augmented, std::move(rows));
}

double conditional_closed_form(std::size_t n, bool augmented, Cell input, Cell out) {
    const auto [i, j] = input;
    const auto [k, l] = out;
    if (!valid_cell(n, input) || !valid_cell(n, out) || i >= n) return 0.0;
    const double active = augmented ? static_cast<double>(i + n - j) : static_cast<double>(i);
    if (k < i && l < j) {
        // Feature l is the k-th member, and i-k-1 members lie strictly between l and j.
        if (l < k || j - l - 1 < i - k - 1) return 0.0;
        return binom(l - 1, k - 1) * binom(j - l - 1, i - k - 1) / (binom(j - 1, i - 1) * active);
    }
    if (augmented) {
        return (l >= j && k + j == i + l) ? 1.0 / active : 0.0;
    }
    return (k == i && l == j) ? 1.0 / active : 0.0;
}

std::string_view to_string(Sampler s) { return s == Sampler::Optimized ? "opt" : "shapley"; }

Sampler sampler_from_string(std::string_view name) {
    if (name == "opt") return Sampler::Optimized;
    if (name == "shapley") return Sampler::Shapley;
    throw usage_error("unknown sampler '" + std::string(name) + "'");
}

SizeLastMatrix propagate(const MaskDistribution& pprime, const ConditionalMatrix& m) {
    const std::size_t n = m.num_features();
    if (pprime.probs.num_features() != n) {
        throw data_error("mask distribution has n = " + std::to_string(pprime.probs.num_features()) +
                         ", conditional matrix has n = " + std::to_string(n));
    }
    return SizeLastMatrix::from_vec(n, m.dense().transpose() * pprime.probs.vec());
}

double mask_residual(const MaskDistribution& pprime, const ConditionalMatrix& m, const SizeLastMatrix& target) {
    const SizeLastMatrix pd = propagate(pprime, m);
    if (target.num_features() != m.num_features()) {
        throw data_error("target and conditional matrix disagree on n");
    }
    const auto k = static_cast<Eigen::Index>(num_cells(m.num_features()) - 1);
    return (pd.vec().head(k) - target.vec().head(k)).norm();
}

MaskDistribution optimize_mask_dist(const ConditionalMatrix& m, const SizeLastMatrix& target,
                                    const OptimizeOptions& options) {
    const std::size_t n = m.num_features();
    if (target.num_features() != n) {
        throw data_error("target and conditional matrix disagree on n");
    }
    // Inputs and targets both range over the cells of sizes 1..n-1.
    const auto k = static_cast<Eigen::Index>(num_cells(n) - 1);
    const Eigen::MatrixXd a = m.dense().topLeftCorner(k, k);
    const Eigen::VectorXd t = target.vec().head(k);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a * a.transpose(), Eigen::EigenvaluesOnly);
    const double lipschitz = 2.0 * std::max(eig.eigenvalues().maxCoeff(), 1e-12);

    auto objective = [&](const Eigen::VectorXd& x) { return (a.transpose() * x - t).squaredNorm(); };
    auto gradient = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return 2.0 * a * (a.transpose() * x - t); };

    Eigen::VectorXd x = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
    Eigen::VectorXd y = x;
    double momentum = 1.0;
    Eigen::VectorXd best = x;
    double best_obj = objective(x);

    OptimizeReport report;
    for (std::size_t it = 1; it <= options.max_iterations; ++it) {
        const Eigen::VectorXd next = project_to_simplex(y - gradient(y) / lipschitz);
        const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
        if ((y - next).dot(next - x) > 0.0) {
            // Restart when the momentum step points uphill.
            y = next;
            momentum = 1.0;
        } else {
            y = next + ((momentum - 1.0) / next_momentum) * (next - x);
            momentum = next_momentum;
        }
        x = next;
        const double obj = objective(x);
        if (obj < best_obj) {
            best_obj = obj;
            best = x;
        }
        const Eigen::VectorXd step = x - project_to_simplex(x - gradient(x) / lipschitz);
        report.iterations = it;
        report.gradient_norm = lipschitz * step.norm();
        if (report.gradient_norm <= options.tolerance) {
            report.converged = true;
            break;
        }
    }

    MaskDistribution out;
    Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_cells(n)));
    full.head(k) = best / best.sum();
    out.probs = SizeLastMatrix::from_vec(n, full);
    out.augmented = m.augmented();
    out.sampler = Sampler::Optimized;
    report.residual = mask_residual(out, m, target);
    out.report = report;
    return out;
}

MaskDistribution shapley_mask_dist(std::size_t n, bool augmented) {
    MaskDistribution out;
    out.probs = size_last_from_vec(ShapleyVec(n));
    out.augmented = augmented;
    out.sampler = Sampler::Shapley;
    out.report.converged = true;
    return out;
}

SampledMask sample_mask(const MaskDistribution& pprime, Rng& rng) {
    const std::size_t n = pprime.probs.num_features();
    const Eigen::VectorXd& p = pprime.probs.vec();
    std::discrete_distribution<std::size_t> pick_cell(p.data(), p.data() + p.size());
    const Cell cell = cell_at(n, pick_cell(rng));
    BinaryMask mask = BinaryMask::zeros(n);
    if (cell.size > 1) {
        const Coalition others = sample_coalition_of_size(cell.last - 1, cell.size - 1, rng);
        for (FeatureIndex f : others.members()) mask.set(f, true);
    }
    mask.set(cell.last, true);
    if (pprime.augmented) {
        for (FeatureIndex f = cell.last + 1; f <= n; ++f) mask.set(f, true);
    }
    return {std::move(mask), cell};
}

CoalitionDataset run_mppi(const Predictor& model, const TokenSeq& seq, const FeatureGrouping& grouping,
                          std::size_t budget, const MaskDistribution& pprime, TokenId mask_token, Rng& rng) {
    const std::size_t n = grouping.size();
    if (budget < 1) {
        throw usage_error("MP-PI budget must be >= 1");
    }
    if (pprime.probs.num_features() != n) {
        throw data_error("mask distribution is for n = " + std::to_string(pprime.probs.num_features()) +
                         " but the input has " + std::to_string(n) + " features");
    }
    CountingPredictor counted(model);
    CoalitionDataset data;

    const PredictionTrace unmasked = counted.forward(seq);
    data.rows.push_back({Coalition::full(n), unmasked.final_row(), 0, Cell{n, n}, true});
    data.rows.push_back({Coalition{}, unmasked.row(0), 0, Cell{0, 0}, true});

    for (std::size_t r = 1; r <= budget; ++r) {
        const SampledMask drawn = sample_mask(pprime, rng);
        const PredictionTrace trace = counted.forward(apply_mask(seq, grouping, drawn.mask, mask_token));
        std::set<Coalition> seen;
        for (const auto& prefix : prefix_coalitions(drawn.mask)) {
            if (!seen.insert(prefix.coalition).second) continue;
            data.rows.push_back({prefix.coalition, trace.row(trace_row_for_feature(grouping, prefix.last_feature)), r,
                                 Cell{prefix.coalition.size(), prefix.last_feature}, false});
        }
    }
    data.rounds = budget;
    data.forward_passes = counted.calls();
    return data;
}

SizeLastMatrix empirical_cell_frequencies(const CoalitionDataset& dataset, std::size_t n) {
    std::vector<std::size_t> per_round(dataset.rounds + 1, 0);
    for (const auto& row : dataset.rows) {
        if (!row.anchor) ++per_round.at(row.round);
    }
    SizeLastMatrix out(n);
    if (dataset.rounds == 0) return out;
    for (const auto& row : dataset.rows) {
        if (row.anchor) continue;
        out.add(row.cell.size, row.cell.last,
                1.0 / (static_cast<double>(per_round[row.round]) * static_cast<double>(dataset.rounds)));
    }
    return out;
}

std::vector<WeightedSample> mppi_samples(const CoalitionDataset& dataset, const SizeLastMatrix& pd,
                                         const SizeLastMatrix& target, std::size_t c, ValueSpace space) {
    std::vector<WeightedSample> samples;
    samples.reserve(dataset.rows.size());
    for (const auto& row : dataset.rows) {
        const double y = class_value(row.scores, c, space);
        if (row.anchor) {
            samples.push_back({row.coalition, y, 1.0, true});
            continue;
        }
        const double w = target(row.cell.size, row.cell.last) /
                         std::max(pd(row.cell.size, row.cell.last), kWeightFloor);
        samples.push_back({row.coalition, y, w, false});
    }
    return samples;
}

AttributionVector mp_pi(const CoalitionDataset& dataset, const SizeLastMatrix& pd, const SizeLastMatrix& target,
                        std::size_t c, std::size_t n, ValueSpace space) {
    if (pd.num_features() != n || target.num_features() != n) {
        throw data_error("P^D / target do not match the feature count");
    }
    AttributionVector out = kernel_shap_solve(mppi_samples(dataset, pd, target, c, space), n);
    out.class_index = c;
    out.value_space = space;
    return out;
}

MppiPlan make_mppi_plan(std::size_t n, bool augmented, Sampler sampler) {
    ConditionalMatrix cond =
        n <= kMaxConditionalFeatures ? conditional_matrix(n, augmented) : counted_conditional_matrix(n, augmented);
    SizeLastMatrix target = size_last_from_vec(ShapleyVec(n));
    MaskDistribution pprime =
        sampler == Sampler::Optimized ? optimize_mask_dist(cond, target) : shapley_mask_dist(n, augmented);
    pprime.report.residual = mask_residual(pprime, cond, target);
    SizeLastMatrix pd = propagate(pprime, cond);
    return MppiPlan{n, std::move(cond), std::move(target), std::move(pprime), std::move(pd)};
}

std::shared_ptr<const MppiPlan> MppiPlanCache::get(std::size_t n, bool augmented, Sampler sampler) {
    std::lock_guard lock(mutex_);
    auto& slot = plans_[{n, augmented, sampler}];
    if (!slot) {
        slot = std::make_shared<const MppiPlan>(make_mppi_plan(n, augmented, sampler));
    }
    return slot;
}

MppiResult explain_mp_pi(const Predictor& model, const TokenSeq& seq, const FeatureGrouping& grouping,
                         std::size_t c, std::size_t budget, const MppiPlan& plan, TokenId mask_token,
                         std::uint64_t seed, ValueSpace space) {
    Rng rng(seed);
    CoalitionDataset data = run_mppi(model, seq, grouping, budget, plan.pprime, mask_token, rng);
    AttributionVector phi = mp_pi(data, plan.pd, plan.target, c, grouping.size(), space);
    return MppiResult{std::move(phi), std::move(data)};
}

}  // namespace pinf
