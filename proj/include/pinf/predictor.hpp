#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

namespace pinf {

using TokenId = std::uint32_t;

/// Token ids with the begin-of-sequence token at index 0.
using TokenSeq = std::vector<TokenId>;

/// Reserved ids of the toy vocabulary.
inline constexpr TokenId kBosToken = 0;
inline constexpr TokenId kMaskToken = 1;

/// Class logits at every position of one forward pass (positions x classes).
class PredictionTrace {
public:
    PredictionTrace() = default;
    explicit PredictionTrace(Eigen::MatrixXd scores);

    std::size_t num_positions() const { return static_cast<std::size_t>(scores_.rows()); }
    std::size_t num_classes() const { return static_cast<std::size_t>(scores_.cols()); }

    /// Logits at one position.
    Eigen::VectorXd row(std::size_t position) const;
    Eigen::VectorXd final_row() const { return row(num_positions() - 1); }

    const Eigen::MatrixXd& scores() const { return scores_; }

    bool operator==(const PredictionTrace& other) const;

private:
    Eigen::MatrixXd scores_;
};

/// A causal sequence classifier: row i of the trace depends on tokens 0..i only.
class Predictor {
public:
    virtual ~Predictor() = default;

    virtual PredictionTrace forward(const TokenSeq& input) const = 0;
    virtual std::size_t num_classes() const = 0;
    virtual std::size_t vocab_size() const = 0;
};

/// Counts forward passes of a wrapped predictor; thread-safe.
class CountingPredictor final : public Predictor {
public:
    explicit CountingPredictor(const Predictor& inner) : inner_(inner) {}

    PredictionTrace forward(const TokenSeq& input) const override;
    std::size_t num_classes() const override { return inner_.num_classes(); }
    std::size_t vocab_size() const override { return inner_.vocab_size(); }

    std::size_t calls() const { return calls_.load(); }
    void reset() { calls_.store(0); }

private:
    const Predictor& inner_;
    mutable std::atomic<std::size_t> calls_{0};
};

/// Numerically stable softmax of a logit vector.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

/// Throws unless every id is below `vocab_size` and the sequence is non-empty.
void check_tokens(const TokenSeq& input, std::size_t vocab_size);

}  // namespace pinf
