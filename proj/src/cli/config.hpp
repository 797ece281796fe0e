#pragma once

#include "pinf/error.hpp"
#include "pinf/explain.hpp"
#include "pinf/features.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pinf::cli {

enum class ClassMode { Default, Predicted, True, Explicit };

struct ClassSpec {
    ClassMode mode = ClassMode::Default;
    std::size_t index = 0;
};

/// Parses "predicted", "true" or a class index.
ClassSpec parse_class_spec(const std::string& text);
std::string to_string(const ClassSpec& spec);

struct RunConfig {
    std::vector<Method> methods{Method::SpPi};
    std::optional<std::size_t> budget;
    ClassSpec class_spec;
    Granularity granularity = Granularity::Token;
    std::vector<TokenId> separators;
    TokenId mask_token = kMaskToken;
    Sampler sampler = Sampler::Optimized;
    bool augmented = true;
    ValueSpace value_space = ValueSpace::Logit;
    std::uint64_t seed = 0;
    bool timing = false;
    std::optional<std::filesystem::path> vocab;

    MethodOptions method_options() const;
    /// Throws a usage error for inconsistent settings.
    void validate() const;
};

/// Comma-separated method names.
std::vector<Method> parse_methods(const std::string& text);

}  // namespace pinf::cli
