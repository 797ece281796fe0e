#pragma once

#include "pinf/error.hpp"
#include "pinf/features.hpp"
#include "pinf/planted.hpp"
#include "pinf/predictor.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace testing {

// BOS followed by n ordinary tokens 2, 3, ...
inline pinf::TokenSeq seq_of(std::size_t n, pinf::TokenId first = 2) {
    pinf::TokenSeq s{pinf::kBosToken};
    for (std::size_t i = 0; i < n; ++i) s.push_back(first + static_cast<pinf::TokenId>(i));
    return s;
}

inline pinf::FeatureGrouping token_features(const pinf::TokenSeq& s) {
    return pinf::group_tokens(s, {});
}

inline pinf::FeatureGrouping token_features(std::size_t n) { return token_features(seq_of(n)); }

// Shapley value of feature i as the average marginal contribution over all n!
// orderings. Completely separate from the size-weighted formula in the library.
inline std::vector<double> permutation_shapley(const std::function<double(const pinf::Coalition&)>& v,
                                               std::size_t n) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 1);
    std::vector<double> phi(n, 0.0);
    std::size_t count = 0;
    do {
        std::vector<std::size_t> members;
        double prev = v(pinf::Coalition{});
        for (std::size_t f : order) {
            members.push_back(f);
            const double cur = v(pinf::Coalition(members));
            phi[f - 1] += cur - prev;
            prev = cur;
        }
        ++count;
    } while (std::next_permutation(order.begin(), order.end()));
    for (double& x : phi) x /= static_cast<double>(count);
    return phi;
}

inline pinf::Coalition coalition_from_bits(std::uint64_t bits, std::size_t n) {
    std::vector<std::size_t> m;
    for (std::size_t j = 1; j <= n; ++j) {
        if (bits >> (j - 1) & 1u) m.push_back(j);
    }
    return pinf::Coalition(m);
}

// Constant logits at every position, whatever the input.
class ConstantPredictor final : public pinf::Predictor {
public:
    explicit ConstantPredictor(Eigen::VectorXd logits, std::size_t vocab = 64)
        : logits_(std::move(logits)), vocab_(vocab) {}

    pinf::PredictionTrace forward(const pinf::TokenSeq& input) const override {
        Eigen::MatrixXd m(static_cast<Eigen::Index>(input.size()), logits_.size());
        for (Eigen::Index r = 0; r < m.rows(); ++r) m.row(r) = logits_.transpose();
        return pinf::PredictionTrace(m);
    }
    std::size_t num_classes() const override { return static_cast<std::size_t>(logits_.size()); }
    std::size_t vocab_size() const override { return vocab_; }

private:
    Eigen::VectorXd logits_;
    std::size_t vocab_;
};

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("pinf_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

template <class F>
pinf::ErrorKind error_kind_of(F&& f) {
    try {
        f();
    } catch (const pinf::Error& e) {
        return e.kind();
    }
    throw std::logic_error("expected a pinf::Error");
}

}  // namespace testing
