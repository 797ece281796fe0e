#include "cli/config.hpp"

#include <charconv>
#include <sstream>

namespace pinf::cli {

ClassSpec parse_class_spec(const std::string& text) {
    if (text == "predicted") return {ClassMode::Predicted, 0};
    if (text == "true") return {ClassMode::True, 0};
    std::size_t idx = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, idx);
    if (ec != std::errc{} || ptr != end || text.empty()) {
        throw usage_error("--class must be 'predicted', 'true' or a class index, got '" + text + "'");
    }
    return {ClassMode::Explicit, idx};
}

std::string to_string(const ClassSpec& spec) {
    switch (spec.mode) {
        case ClassMode::Default: return "default";
        case ClassMode::Predicted: return "predicted";
        case ClassMode::True: return "true";
        case ClassMode::Explicit: return std::to_string(spec.index);
    }
    return "default";
}

std::vector<Method> parse_methods(const std::string& text) {
    std::vector<Method> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(method_from_string(item));
    }
    if (out.empty()) {
        throw usage_error("no methods given");
    }
    return out;
}

MethodOptions RunConfig::method_options() const {
    MethodOptions o;
    o.budget = budget;
    o.value_space = value_space;
    o.sampler = sampler;
    o.augmented = augmented;
    o.mask_token = mask_token;
    return o;
}

void RunConfig::validate() const {
    if (budget && *budget < 1) {
        throw usage_error("--budget must be >= 1");
    }
    if (mask_token == kBosToken) {
        throw usage_error("the mask token may not be the BOS token");
    }
}

}  // namespace pinf::cli
