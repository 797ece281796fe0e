#pragma once

#include "pinf/planted.hpp"
#include "pinf/tiny_decoder.hpp"

#include <filesystem>
#include <string>
#include <variant>

namespace pinf {

/// Model file format. One JSON document:
///
///   {"format_version": 1, "kind": "tiny_decoder",
///    "config": {"vocab_size", "embed_dim", "num_layers", "num_heads", "max_positions", "num_classes"},
///    "arrays": {"<name>": [row-major doubles], ...}}
///
///   {"format_version": 1, "kind": "planted", "n_features": n,
///    "linear": [a_1..a_n], "pairwise": [[b_11..b_1n], ...], "scale": s, "vocab_size": V}
///
/// Array names for the decoder are listed on TinyDecoder.
inline constexpr int kWeightFormatVersion = 1;

/// A planted function plus the vocabulary size it accepts.
struct PlantedModel {
    PlantedSetFunction function;
    std::size_t vocab_size = 64;
};

using ModelFile = std::variant<TinyDecoder, PlantedModel>;

std::string serialize_model(const ModelFile& model);
ModelFile parse_model(const std::string& text);

void save_weights(const ModelFile& model, const std::filesystem::path& path);
ModelFile load_weights(const std::filesystem::path& path);

}  // namespace pinf
