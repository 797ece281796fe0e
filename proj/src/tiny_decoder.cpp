#include "pinf/tiny_decoder.hpp"

#include "pinf/error.hpp"

#include <cmath>
#include <random>
#include <string>

namespace pinf {

namespace {

constexpr double kLayerNormEps = 1e-5;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string layer_key(std::size_t layer, const char* suffix) {
    return "layer" + std::to_string(layer) + "." + suffix;
}

// Row-wise layer norm; each output row depends on its input row only.
Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& gain, const Eigen::RowVectorXd& bias) {
    Eigen::MatrixXd out(x.rows(), x.cols());
    const double width = static_cast<double>(x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mean = x.row(r).sum() / width;
        const Eigen::RowVectorXd centered = x.row(r).array() - mean;
        const double var = centered.squaredNorm() / width;
        out.row(r) = (centered / std::sqrt(var + kLayerNormEps)).cwiseProduct(gain) + bias;
    }
    return out;
}

double gelu(double v) {
    constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
    return 0.5 * v * (1.0 + std::tanh(kC * (v + 0.044715 * v * v * v)));
}

}  // namespace

void TinyDecoderConfig::validate() const {
    if (vocab_size < 1 || embed_dim < 1 || num_layers < 1 || num_heads < 1 || max_positions < 1 ||
        num_classes < 1) {
        throw usage_error("tiny decoder config counts must all be >= 1");
    }
    if (num_classes < 2) {
        throw usage_error("tiny decoder needs at least two classes");
    }
    if (embed_dim % num_heads != 0) {
        throw usage_error("embed_dim " + std::to_string(embed_dim) + " is not divisible by num_heads " +
                          std::to_string(num_heads));
    }
}

std::vector<std::pair<std::string, std::size_t>> TinyDecoder::layout(const TinyDecoderConfig& c) {
    const std::size_t d = c.embed_dim;
    const std::size_t h = 4 * d;
    std::vector<std::pair<std::string, std::size_t>> out;
    out.emplace_back("tok_embed", c.vocab_size * d);
    out.emplace_back("pos_embed", c.max_positions * d);
    for (std::size_t l = 0; l < c.num_layers; ++l) {
        out.emplace_back(layer_key(l, "ln1.gain"), d);
        out.emplace_back(layer_key(l, "ln1.bias"), d);
        for (const char* p : {"attn.q", "attn.k", "attn.v", "attn.o"}) {
            out.emplace_back(layer_key(l, p) + ".weight", d * d);
            out.emplace_back(layer_key(l, p) + ".bias", d);
        }
        out.emplace_back(layer_key(l, "ln2.gain"), d);
        out.emplace_back(layer_key(l, "ln2.bias"), d);
        out.emplace_back(layer_key(l, "mlp.fc.weight"), d * h);
        out.emplace_back(layer_key(l, "mlp.fc.bias"), h);
        out.emplace_back(layer_key(l, "mlp.proj.weight"), h * d);
        out.emplace_back(layer_key(l, "mlp.proj.bias"), d);
    }
    out.emplace_back("final_ln.gain", d);
    out.emplace_back("final_ln.bias", d);
    out.emplace_back("head.weight", d * c.num_classes);
    out.emplace_back("head.bias", c.num_classes);
    return out;
}

TinyDecoder::TinyDecoder(TinyDecoderConfig config, ArrayTable arrays)
    : config_(config), arrays_(std::move(arrays)) {
    config_.validate();
    const auto expected = layout(config_);
    for (const auto& [name, count] : expected) {
        const auto it = arrays_.find(name);
        if (it == arrays_.end()) {
            throw data_error("missing weight array '" + name + "'");
        }
        if (it->second.size() != count) {
            throw data_error("dimension mismatch for '" + name + "': expected " + std::to_string(count) +
                             " values, got " + std::to_string(it->second.size()));
        }
    }
    if (arrays_.size() != expected.size()) {
        throw data_error("weight table has unexpected extra arrays");
    }
}

Eigen::Map<const RowMatrix> TinyDecoder::matrix(const std::string& name, std::size_t rows, std::size_t cols) const {
    return Eigen::Map<const RowMatrix>(arrays_.at(name).data(), static_cast<Eigen::Index>(rows),
                                       static_cast<Eigen::Index>(cols));
}

Eigen::Map<const Eigen::RowVectorXd> TinyDecoder::vector(const std::string& name) const {
    const auto& a = arrays_.at(name);
    return Eigen::Map<const Eigen::RowVectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
}

PredictionTrace TinyDecoder::forward(const TokenSeq& input) const { return forward(input, nullptr); }

PredictionTrace TinyDecoder::forward(const TokenSeq& input, AttentionMaps* attention) const {
    check_tokens(input, config_.vocab_size);
    if (input.size() > config_.max_positions) {
        throw data_error("sequence of length " + std::to_string(input.size()) + " exceeds max_positions " +
                         std::to_string(config_.max_positions));
    }
    const auto t = static_cast<Eigen::Index>(input.size());
    const std::size_t d = config_.embed_dim;
    const std::size_t hidden = 4 * d;
    const std::size_t heads = config_.num_heads;
    const auto head_dim = static_cast<Eigen::Index>(d / heads);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));

    const auto tok = matrix("tok_embed", config_.vocab_size, d);
    const auto pos = matrix("pos_embed", config_.max_positions, d);
    Eigen::MatrixXd x(t, static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < t; ++i) {
        x.row(i) = tok.row(static_cast<Eigen::Index>(input[static_cast<std::size_t>(i)])) + pos.row(i);
    }

    if (attention != nullptr) {
        attention->assign(config_.num_layers, std::vector<Eigen::MatrixXd>(heads, Eigen::MatrixXd::Zero(t, t)));
    }

    for (std::size_t l = 0; l < config_.num_layers; ++l) {
        const Eigen::MatrixXd h = layer_norm(x, vector(layer_key(l, "ln1.gain")), vector(layer_key(l, "ln1.bias")));
        auto project = [&](const char* p) -> Eigen::MatrixXd {
            const std::string base = layer_key(l, p);
            return (h * matrix(base + ".weight", d, d)).rowwise() + vector(base + ".bias");
        };
        const Eigen::MatrixXd q = project("attn.q");
        const Eigen::MatrixXd k = project("attn.k");
        const Eigen::MatrixXd v = project("attn.v");

        Eigen::MatrixXd mixed = Eigen::MatrixXd::Zero(t, static_cast<Eigen::Index>(d));
        for (std::size_t hd = 0; hd < heads; ++hd) {
            const Eigen::Index off = static_cast<Eigen::Index>(hd) * head_dim;
            for (Eigen::Index i = 0; i < t; ++i) {
                // Query i sees keys 0..i only.
                Eigen::VectorXd w(i + 1);
                for (Eigen::Index j = 0; j <= i; ++j) {
                    w(j) = q.row(i).segment(off, head_dim).dot(k.row(j).segment(off, head_dim)) * inv_sqrt;
                }
                w = softmax(w);
                for (Eigen::Index j = 0; j <= i; ++j) {
                    mixed.row(i).segment(off, head_dim) += w(j) * v.row(j).segment(off, head_dim);
                }
                if (attention != nullptr) {
                    (*attention)[l][hd].row(i).head(i + 1) = w.transpose();
                }
            }
        }
        const std::string o = layer_key(l, "attn.o");
        x += (mixed * matrix(o + ".weight", d, d)).rowwise() + vector(o + ".bias");

        const Eigen::MatrixXd h2 = layer_norm(x, vector(layer_key(l, "ln2.gain")), vector(layer_key(l, "ln2.bias")));
        Eigen::MatrixXd act =
            (h2 * matrix(layer_key(l, "mlp.fc.weight"), d, hidden)).rowwise() + vector(layer_key(l, "mlp.fc.bias"));
        act = act.unaryExpr(&gelu);
        x += (act * matrix(layer_key(l, "mlp.proj.weight"), hidden, d)).rowwise() +
             vector(layer_key(l, "mlp.proj.bias"));
    }

    const Eigen::MatrixXd out = layer_norm(x, vector("final_ln.gain"), vector("final_ln.bias"));
    Eigen::MatrixXd logits =
        (out * matrix("head.weight", d, config_.num_classes)).rowwise() + vector("head.bias");
    return PredictionTrace(std::move(logits));
}

TinyDecoder init_random(const TinyDecoderConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    std::uniform_real_distribution<double> dist(-0.1, 0.1);
    TinyDecoder::ArrayTable arrays;
    for (const auto& [name, count] : TinyDecoder::layout(config)) {
        std::vector<double> values(count);
        for (double& v : values) {
            v = dist(rng);
        }
        arrays.emplace(name, std::move(values));
    }
    return TinyDecoder(config, std::move(arrays));
}

}  // namespace pinf
