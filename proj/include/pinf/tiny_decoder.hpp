#pragma once

#include "pinf/predictor.hpp"
#include "pinf/random.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace pinf {

struct TinyDecoderConfig {
    std::size_t vocab_size = 32;
    std::size_t embed_dim = 16;
    std::size_t num_layers = 2;
    std::size_t num_heads = 2;
    std::size_t max_positions = 64;
    std::size_t num_classes = 2;

    /// Throws a usage error when a count is zero or heads do not divide the width.
    void validate() const;
    bool operator==(const TinyDecoderConfig&) const = default;
};

/// Per-head attention probabilities recorded during a forward pass,
/// indexed [layer][head](query, key).
using AttentionMaps = std::vector<std::vector<Eigen::MatrixXd>>;

/// Pre-norm causal transformer with learned positions and a linear
/// classification head applied at every position.
///
/// Parameters live in a flat name -> row-major array table so the weight
/// file is a direct dump of it. Names and shapes (d = embed_dim, h = 4d):
///   tok_embed [vocab x d], pos_embed [max_positions x d]
///   layer{L}.ln1.gain/bias [d], layer{L}.attn.{q,k,v,o}.weight [d x d],
///   layer{L}.attn.{q,k,v,o}.bias [d], layer{L}.ln2.gain/bias [d],
///   layer{L}.mlp.fc.weight [d x h], layer{L}.mlp.fc.bias [h],
///   layer{L}.mlp.proj.weight [h x d], layer{L}.mlp.proj.bias [d]
///   final_ln.gain/bias [d], head.weight [d x classes], head.bias [classes]
class TinyDecoder final : public Predictor {
public:
    using ArrayTable = std::map<std::string, std::vector<double>>;

    /// Validates that every expected array is present with the right length.
    TinyDecoder(TinyDecoderConfig config, ArrayTable arrays);

    PredictionTrace forward(const TokenSeq& input) const override;
    PredictionTrace forward(const TokenSeq& input, AttentionMaps* attention) const;

    std::size_t num_classes() const override { return config_.num_classes; }
    std::size_t vocab_size() const override { return config_.vocab_size; }

    const TinyDecoderConfig& config() const { return config_; }
    const ArrayTable& arrays() const { return arrays_; }

    /// Expected (name, element count) pairs for a configuration, in draw order.
    static std::vector<std::pair<std::string, std::size_t>> layout(const TinyDecoderConfig& config);

private:
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
    matrix(const std::string& name, std::size_t rows, std::size_t cols) const;
    Eigen::Map<const Eigen::RowVectorXd> vector(const std::string& name) const;

    TinyDecoderConfig config_;
    ArrayTable arrays_;
};

/// Every array drawn i.i.d. uniform in [-0.1, 0.1] from mt19937_64(seed),
/// arrays visited in `TinyDecoder::layout` order.
TinyDecoder init_random(const TinyDecoderConfig& config, std::uint64_t seed);

}  // namespace pinf
