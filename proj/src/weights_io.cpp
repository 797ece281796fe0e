#include "pinf/weights_io.hpp"

#include "pinf/error.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace pinf {

using nlohmann::json;

namespace {

json config_to_json(const TinyDecoderConfig& c) {
    return json{{"vocab_size", c.vocab_size}, {"embed_dim", c.embed_dim},       {"num_layers", c.num_layers},
                {"num_heads", c.num_heads},   {"max_positions", c.max_positions}, {"num_classes", c.num_classes}};
}

TinyDecoderConfig config_from_json(const json& j) {
    TinyDecoderConfig c;
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.num_layers = j.at("num_layers").get<std::size_t>();
    c.num_heads = j.at("num_heads").get<std::size_t>();
    c.max_positions = j.at("max_positions").get<std::size_t>();
    c.num_classes = j.at("num_classes").get<std::size_t>();
    return c;
}

json to_json(const TinyDecoder& m) {
    json arrays = json::object();
    for (const auto& [name, values] : m.arrays()) {
        arrays[name] = values;
    }
    return json{{"format_version", kWeightFormatVersion},
                {"kind", "tiny_decoder"},
                {"config", config_to_json(m.config())},
                {"arrays", std::move(arrays)}};
}

json to_json(const PlantedModel& m) {
    const auto& fn = m.function;
    json pairwise = json::array();
    for (Eigen::Index i = 0; i < fn.pairwise().rows(); ++i) {
        std::vector<double> row(fn.pairwise().cols());
        for (Eigen::Index j = 0; j < fn.pairwise().cols(); ++j) row[static_cast<std::size_t>(j)] = fn.pairwise()(i, j);
        pairwise.push_back(std::move(row));
    }
    return json{{"format_version", kWeightFormatVersion},
                {"kind", "planted"},
                {"n_features", fn.num_features()},
                {"linear", fn.linear()},
                {"pairwise", std::move(pairwise)},
                {"scale", fn.scale()},
                {"vocab_size", m.vocab_size}};
}

PlantedModel planted_from_json(const json& doc) {
    const auto n = doc.at("n_features").get<std::size_t>();
    auto linear = doc.at("linear").get<std::vector<double>>();
    if (linear.size() != n) {
        throw data_error("dimension mismatch: 'linear' has " + std::to_string(linear.size()) + " entries, n_features is " +
                         std::to_string(n));
    }
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    if (doc.contains("pairwise")) {
        const auto rows = doc.at("pairwise").get<std::vector<std::vector<double>>>();
        if (rows.size() != n) {
            throw data_error("dimension mismatch: 'pairwise' must have n_features rows");
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (rows[i].size() != n) {
                throw data_error("dimension mismatch: 'pairwise' row " + std::to_string(i) + " has wrong length");
            }
            for (std::size_t j = 0; j < n; ++j) {
                b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
            }
        }
    }
    PlantedModel m{PlantedSetFunction(std::move(linear), std::move(b), doc.value("scale", 1.0)),
                   doc.value("vocab_size", std::size_t{64})};
    return m;
}

}  // namespace

std::string serialize_model(const ModelFile& model) {
    const json doc = std::visit([](const auto& m) { return to_json(m); }, model);
    return doc.dump(1) + "\n";
}

ModelFile parse_model(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw data_error(std::string("malformed model file: ") + e.what());
    }
    try {
        if (!doc.is_object()) {
            throw data_error("malformed model file: top level must be an object");
        }
        const int version = doc.at("format_version").get<int>();
        if (version != kWeightFormatVersion) {
            throw data_error("unsupported model format_version " + std::to_string(version) + " (expected " +
                             std::to_string(kWeightFormatVersion) + ")");
        }
        const auto kind = doc.at("kind").get<std::string>();
        if (kind == "planted") {
            return planted_from_json(doc);
        }
        if (kind != "tiny_decoder") {
            throw data_error("unknown model kind '" + kind + "'");
        }
        const TinyDecoderConfig config = config_from_json(doc.at("config"));
        try {
            config.validate();
        } catch (const Error& e) {
            throw data_error(std::string("invalid manifest: ") + e.what());
        }
        TinyDecoder::ArrayTable arrays;
        for (const auto& [name, values] : doc.at("arrays").items()) {
            arrays.emplace(name, values.get<std::vector<double>>());
        }
        return TinyDecoder(config, std::move(arrays));
    } catch (const json::exception& e) {
        throw data_error(std::string("malformed model manifest: ") + e.what());
    }
}

void save_weights(const ModelFile& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw data_error("cannot open '" + path.string() + "' for writing");
    }
    out << serialize_model(model);
    if (!out) {
        throw data_error("write to '" + path.string() + "' failed");
    }
}

ModelFile load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw data_error("cannot open model file '" + path.string() + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_model(buf.str());
}

}  // namespace pinf
