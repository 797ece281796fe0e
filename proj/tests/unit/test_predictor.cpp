#include "support.hpp"

#include "pinf/tiny_decoder.hpp"
#include "pinf/weights_io.hpp"

#include <doctest.h>
#include <json.hpp>

#include <random>

using namespace pinf;
using testing::error_kind_of;

namespace {

TinyDecoderConfig small_config() {
    TinyDecoderConfig c;
    c.vocab_size = 20;
    c.embed_dim = 8;
    c.num_layers = 2;
    c.num_heads = 2;
    c.max_positions = 16;
    c.num_classes = 3;
    return c;
}

}  // namespace

TEST_CASE("decoder rows ignore later tokens") {
    const TinyDecoder model = init_random(small_config(), 7);
    TokenSeq a{0, 4, 5, 6, 7, 8, 9};
    for (std::size_t i = 1; i < a.size(); ++i) {
        TokenSeq b = a;
        for (std::size_t t = i + 1; t < b.size(); ++t) b[t] = static_cast<TokenId>((b[t] * 3 + 1) % 20);
        const auto ta = model.forward(a);
        const auto tb = model.forward(b);
        for (std::size_t r = 0; r <= i; ++r) CHECK((ta.row(r).array() == tb.row(r).array()).all());
    }
}

TEST_CASE("decoder is deterministic") {
    const TinyDecoder model = init_random(small_config(), 11);
    const TokenSeq s{0, 3, 3, 2, 19};
    CHECK(model.forward(s) == model.forward(s));
}

TEST_CASE("decoder attention rows are causal distributions") {
    const TinyDecoder model = init_random(small_config(), 3);
    AttentionMaps maps;
    model.forward(TokenSeq{0, 5, 6, 7, 8}, &maps);
    REQUIRE(maps.size() == 2);
    for (const auto& layer : maps) {
        REQUIRE(layer.size() == 2);
        for (const auto& m : layer) {
            for (Eigen::Index q = 0; q < m.rows(); ++q) {
                CHECK(m.row(q).sum() == doctest::Approx(1.0).epsilon(1e-6));
                for (Eigen::Index k = q + 1; k < m.cols(); ++k) CHECK(m(q, k) == 0.0);
            }
        }
    }
}

TEST_CASE("decoder input errors") {
    const TinyDecoder model = init_random(small_config(), 1);
    CHECK(error_kind_of([&] { model.forward(TokenSeq(17, 2)); }) == ErrorKind::Data);
    CHECK(error_kind_of([&] { model.forward(TokenSeq{0, 20}); }) == ErrorKind::Data);
    CHECK(error_kind_of([&] { model.forward(TokenSeq{}); }) == ErrorKind::Data);
}

TEST_CASE("init_random is a function of config and seed") {
    const auto a = init_random(small_config(), 5);
    const auto b = init_random(small_config(), 5);
    const auto c = init_random(small_config(), 6);
    CHECK(a.arrays() == b.arrays());
    CHECK(a.arrays() != c.arrays());
    for (const auto& [name, values] : a.arrays()) {
        for (double v : values) {
            CHECK(v >= -0.1);
            CHECK(v <= 0.1);
        }
    }
}

TEST_CASE("invalid decoder configs") {
    auto c = small_config();
    c.num_heads = 3;
    CHECK(error_kind_of([&] { init_random(c, 0); }) == ErrorKind::Usage);
    c = small_config();
    c.num_layers = 0;
    CHECK(error_kind_of([&] { init_random(c, 0); }) == ErrorKind::Usage);
    c = small_config();
    c.num_classes = 1;
    CHECK_THROWS_AS(init_random(c, 0), Error);
}

TEST_CASE("planted forward reads prefix values") {
    const PlantedSetFunction pf({1.0, 2.0, 3.0});
    const auto seq = testing::seq_of(3);
    const PlantedPredictor model(pf, testing::token_features(seq), kMaskToken, 64);
    const auto tr = model.forward(seq);
    const auto row = tr.row(trace_row_for_feature(testing::token_features(seq), 2));
    CHECK(row(0) == -3.0);
    CHECK(row(1) == 3.0);
    CHECK(tr.row(0).isZero());
}

TEST_CASE("planted_forward examples") {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(3, 3);
    b(0, 2) = b(2, 0) = 4.0;
    const PlantedSetFunction pf({1.0, 0.0, 2.0}, b);
    const auto g = testing::token_features(3);
    CHECK(planted_forward(pf, BinaryMask{1, 0, 1}, g).final_row()(1) == 7.0);

    const auto zeros = planted_forward(pf, BinaryMask{0, 0, 0}, g);
    CHECK(zeros.scores().isZero());

    const PlantedSetFunction two({1.0, 2.0});
    const auto g2 = testing::token_features(2);
    const auto t2 = planted_forward(two, BinaryMask{0, 1}, g2);
    CHECK(t2.final_row()(1) == 2.0);
    CHECK(t2.row(trace_row_for_feature(g2, 1))(1) == 0.0);

    CHECK(error_kind_of([&] { planted_forward(pf, BinaryMask{1, 0}, g); }) == ErrorKind::Data);
}

TEST_CASE("planted multi-token features repeat values on inner rows") {
    const PlantedSetFunction pf({1.5, -0.5});
    const TokenSeq seq{0, 5, 6, 7, 8, 9};
    const FeatureGrouping g({{1, 4}, {4, 6}}, Granularity::Custom);
    const auto tr = PlantedPredictor(pf, g, kMaskToken, 64).forward(seq);
    CHECK(tr.row(1)(1) == 0.0);
    CHECK(tr.row(2)(1) == 0.0);
    CHECK(tr.row(3)(1) == 1.5);
    CHECK(tr.row(4)(1) == 1.5);
    CHECK(tr.row(5)(1) == doctest::Approx(1.0));
    // a feature is active while any of its tokens survives
    const auto partial = PlantedPredictor(pf, g, kMaskToken, 64).forward(TokenSeq{0, 1, 6, 1, 1, 1});
    CHECK(partial.final_row()(1) == 1.5);
}

TEST_CASE("planted predictor has no prefix approximation error") {
    const std::size_t n = 6;
    const PlantedSetFunction pf = random_planted(n, 42, 0.5, 1.0);
    const auto seq = testing::seq_of(n);
    const auto g = testing::token_features(seq);
    const PlantedPredictor model(pf, g, kMaskToken, 64);
    for (std::uint64_t bits = 0; bits < (1u << n); ++bits) {
        const BinaryMask z = testing::coalition_from_bits(bits, n).to_mask(n);
        const auto tr = model.forward(apply_mask(seq, g, z, kMaskToken));
        for (const auto& p : prefix_coalitions(z)) {
            const auto direct = model.forward(apply_mask(seq, g, p.coalition.to_mask(n), kMaskToken));
            CHECK((tr.row(trace_row_for_feature(g, p.last_feature)).array() == direct.final_row().array()).all());
            CHECK(tr.row(trace_row_for_feature(g, p.last_feature))(1) == pf.scale() * pf.value(p.coalition));
        }
    }
}

TEST_CASE("planted function validation and shapley values") {
    Eigen::MatrixXd asym = Eigen::MatrixXd::Zero(2, 2);
    asym(0, 1) = 1.0;
    CHECK(error_kind_of([&] { PlantedSetFunction({0.0, 0.0}, asym); }) == ErrorKind::Data);
    Eigen::MatrixXd diag = Eigen::MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(PlantedSetFunction({0.0, 0.0}, diag), Error);

    const PlantedSetFunction pf = random_planted(5, 9, 0.6, 1.0);
    const auto oracle = testing::permutation_shapley([&](const Coalition& s) { return pf.value(s); }, 5);
    const auto closed = pf.shapley_values();
    for (std::size_t i = 0; i < 5; ++i) CHECK(closed[i] == doctest::Approx(oracle[i]).epsilon(1e-12));
    CHECK(pf.value(Coalition{}) == 0.0);
}

TEST_CASE("weights round trip bitwise") {
    const auto dir = testing::scratch_dir("weights");
    const TinyDecoder model = init_random(small_config(), 21);
    save_weights(model, dir / "m.json");
    const auto loaded = std::get<TinyDecoder>(load_weights(dir / "m.json"));
    const TokenSeq s{0, 4, 9, 13, 2};
    CHECK(loaded.forward(s) == model.forward(s));
    CHECK(loaded.config() == model.config());

    const PlantedModel planted{random_planted(4, 3), 40};
    save_weights(planted, dir / "p.json");
    const auto back = std::get<PlantedModel>(load_weights(dir / "p.json"));
    CHECK(back.vocab_size == 40);
    CHECK(back.function.linear() == planted.function.linear());
    CHECK((back.function.pairwise().array() == planted.function.pairwise().array()).all());
}

TEST_CASE("malformed weight files are data errors") {
    const auto dir = testing::scratch_dir("weights_bad");
    const std::string text = serialize_model(init_random(small_config(), 2));
    testing::spit(dir / "trunc.json", text.substr(0, text.size() / 2));
    CHECK(error_kind_of([&] { load_weights(dir / "trunc.json"); }) == ErrorKind::Data);
    CHECK(error_kind_of([&] { load_weights(dir / "missing.json"); }) == ErrorKind::Data);

    auto doc = nlohmann::json::parse(text);
    doc["config"]["embed_dim"] = 4;
    doc["config"]["num_heads"] = 2;
    CHECK(error_kind_of([&] { parse_model(doc.dump()); }) == ErrorKind::Data);

    doc = nlohmann::json::parse(text);
    doc["format_version"] = 2;
    CHECK(error_kind_of([&] { parse_model(doc.dump()); }) == ErrorKind::Data);

    doc = nlohmann::json::parse(text);
    doc["arrays"].erase("head.bias");
    CHECK(error_kind_of([&] { parse_model(doc.dump()); }) == ErrorKind::Data);
}

TEST_CASE("prediction trace invariants") {
    CHECK_THROWS_AS(PredictionTrace(Eigen::MatrixXd::Zero(3, 1)), Error);
    Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 2);
    bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(PredictionTrace{bad}, Error);
    const Eigen::VectorXd p = softmax(Eigen::Vector3d(1000.0, 1000.0, -1000.0));
    CHECK(p(0) == doctest::Approx(0.5));
    CHECK(p.sum() == doctest::Approx(1.0));
}

TEST_CASE("counting predictor counts passes") {
    const testing::ConstantPredictor base(Eigen::Vector2d(0.0, 1.0));
    CountingPredictor counted(base);
    counted.forward(testing::seq_of(3));
    counted.forward(testing::seq_of(2));
    CHECK(counted.calls() == 2);
    counted.reset();
    CHECK(counted.calls() == 0);
}
