#include "support.hpp"

#include "cli/commands.hpp"
#include "pinf/sppi.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sstream>

using namespace pinf;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "pinf");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string jsonl(const std::vector<std::string>& lines) {
    std::string s;
    for (const auto& l : lines) s += l + "\n";
    return s;
}

}  // namespace

TEST_CASE("cli explain reports local accuracy") {
    const auto dir = testing::scratch_dir("cli_explain");
    REQUIRE(run_cli({"gen-model", "--seed", "4", "--out", (dir / "tiny.json").string()}).code == 0);
    testing::spit(dir / "in.jsonl", jsonl({R"({"id":"a","tokens":[4,5,6,7,8],"label":0})",
                                           R"({"id":"b","tokens":[9,3,2],"label":1})"}));
    const auto r = run_cli({"explain", "--model", (dir / "tiny.json").string(), "--input", (dir / "in.jsonl").string(),
                            "--method", "sp-pi", "--out", (dir / "out.json").string()});
    REQUIRE(r.code == 0);
    const auto doc = json::parse(testing::slurp(dir / "out.json"));
    CHECK(doc["seed"] == 0);
    CHECK(doc["examples"].size() == 2);

    const auto model = std::get<TinyDecoder>(load_weights(dir / "tiny.json"));
    const TokenSeq seq{0, 4, 5, 6, 7, 8};
    const auto tr = model.forward(seq);
    const auto& ex = doc["examples"][0];
    const std::size_t c = ex["class"];
    CHECK(c == predicted_class(model, seq));
    const double expect = class_value(tr.final_row(), c, ValueSpace::Logit) - class_value(tr.row(0), c, ValueSpace::Logit);
    CHECK(std::abs(ex["phi_sum"].get<double>() - expect) <= 1e-12);
    CHECK(ex["forward_passes"] == 1);
    CHECK(ex["num_features"] == 5);
    CHECK_FALSE(ex.contains("wall_time_ms"));
}

TEST_CASE("cli explain is byte reproducible and guards exact shap") {
    const auto dir = testing::scratch_dir("cli_repro");
    REQUIRE(run_cli({"gen-model", "--kind", "planted", "--features", "15", "--seed", "2", "--out",
                     (dir / "p15.json").string()})
                .code == 0);
    std::string toks = "[";
    for (int t = 0; t < 15; ++t) toks += std::to_string(2 + t) + (t < 14 ? "," : "]");
    testing::spit(dir / "in.jsonl", jsonl({R"({"id":"long","tokens":)" + toks + R"(,"label":1})"}));
    std::vector<std::string> base{"explain", "--model", (dir / "p15.json").string(), "--input",
                                  (dir / "in.jsonl").string(), "--seed", "9"};
    auto with = [&](std::vector<std::string> extra) {
        auto v = base;
        v.insert(v.end(), extra.begin(), extra.end());
        return run_cli(v);
    };
    for (const char* m : {"mp-pi", "kernel-shap", "random"}) {
        REQUIRE(with({"--method", m, "--out", (dir / "a.json").string()}).code == 0);
        REQUIRE(with({"--method", m, "--out", (dir / "b.json").string()}).code == 0);
        CHECK(testing::slurp(dir / "a.json") == testing::slurp(dir / "b.json"));
    }
    const auto guarded = with({"--method", "exact-shap", "--out", (dir / "x.json").string()});
    CHECK(guarded.code == cli::kUsage);
    const auto doc = json::parse(testing::slurp(dir / "x.json"));
    CHECK(doc["examples"][0]["error"].get<std::string>().find("n <= 14") != std::string::npos);
}

TEST_CASE("cli eval writes report and curves") {
    const auto dir = testing::scratch_dir("cli_eval");
    REQUIRE(run_cli({"gen-model", "--kind", "planted", "--features", "5", "--seed", "1", "--out",
                     (dir / "p.json").string()})
                .code == 0);
    testing::spit(dir / "d.jsonl", jsonl({R"({"id":"a","tokens":[2,3,4,5,6],"label":1})",
                                          R"({"id":"b","tokens":[7,8,9,10,11],"label":0})"}));
    auto eval = [&](const fs::path& out) {
        return run_cli({"eval", "--model", (dir / "p.json").string(), "--dataset", (dir / "d.jsonl").string(),
                        "--method", "random,sp-pi", "--seed", "3", "--out", out.string()});
    };
    REQUIRE(eval(dir / "r1").code == 0);
    REQUIRE(eval(dir / "r2").code == 0);
    CHECK(testing::slurp(dir / "r1" / "curves.csv") == testing::slurp(dir / "r2" / "curves.csv"));
    CHECK(testing::slurp(dir / "r1" / "report.json") == testing::slurp(dir / "r2" / "report.json"));

    std::istringstream csv(testing::slurp(dir / "r1" / "curves.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "example_id,method,study,step,fraction,probability");
    std::map<std::string, int> per_curve;
    while (std::getline(csv, line)) {
        const auto cut = line.find(',', line.find(',', line.find(',') + 1) + 1);
        ++per_curve[line.substr(0, cut)];
    }
    CHECK(per_curve.size() == 8);
    for (const auto& [key, count] : per_curve) CHECK(count == 6);

    const auto doc = json::parse(testing::slurp(dir / "r1" / "report.json"));
    CHECK(doc["seed"] == 3);
    for (const auto& row : doc["rows"]) {
        CHECK(row["as_auc"].get<double>() >= 0.0);
        CHECK(row["as_auc"].get<double>() <= 1.0);
        CHECK(row["ias_auc"].get<double>() >= 0.0);
        CHECK(row["ias_auc"].get<double>() <= 1.0);
    }
    // eval defaults to the true label
    CHECK(doc["rows"][0]["class"] == 1);
    CHECK(doc["rows"][2]["class"] == 0);
}

TEST_CASE("cli gen-model") {
    const auto dir = testing::scratch_dir("cli_gen");
    REQUIRE(run_cli({"gen-model", "--seed", "5", "--embed-dim", "8", "--out", (dir / "a.json").string()}).code == 0);
    REQUIRE(run_cli({"gen-model", "--seed", "5", "--embed-dim", "8", "--out", (dir / "b.json").string()}).code == 0);
    CHECK(testing::slurp(dir / "a.json") == testing::slurp(dir / "b.json"));
    const auto loaded = std::get<TinyDecoder>(load_weights(dir / "a.json"));
    CHECK(loaded.forward(TokenSeq{0, 3, 4}) == init_random(loaded.config(), 5).forward(TokenSeq{0, 3, 4}));

    testing::spit(dir / "spec.json", R"({"linear":[1,2,3],"pairwise":[[0,1,0],[1,0,0],[0,0,0]],"scale":0.5})");
    REQUIRE(run_cli({"gen-model", "--kind", "planted", "--spec", (dir / "spec.json").string(), "--out",
                     (dir / "p.json").string()})
                .code == 0);
    const auto planted = std::get<PlantedModel>(load_weights(dir / "p.json"));
    CHECK(planted.function.value(Coalition{1, 2}) == 4.0);
    CHECK(planted.function.scale() == 0.5);

    testing::spit(dir / "asym.json", R"({"linear":[1,2],"pairwise":[[0,1],[2,0]]})");
    const auto bad = run_cli({"gen-model", "--kind", "planted", "--spec", (dir / "asym.json").string(), "--out",
                              (dir / "q.json").string()});
    CHECK(bad.code == cli::kData);
    CHECK(bad.err.find("symmetric") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "q.json"));
}

TEST_CASE("cli dist dump") {
    const auto dir = testing::scratch_dir("cli_dist");
    REQUIRE(run_cli({"dist", "--n", "6", "--out", (dir / "d.json").string()}).code == 0);
    const auto doc = json::parse(testing::slurp(dir / "d.json"));
    const auto sizes = doc["shapley_sizes"].get<std::vector<double>>();
    CHECK(sizes == shapley_size_dist(6).probs());
    CHECK(std::abs(doc["pd_optimized_total"].get<double>() - 1.0) <= 1e-10);
    double total = 0;
    for (const auto& row : doc["pd_optimized"])
        for (double v : row.get<std::vector<double>>()) total += v;
    CHECK(std::abs(total - 1.0) <= 1e-10);
    for (const auto& row : doc["conditional"]) {
        std::uint64_t sum = 0;
        for (const auto& c : row["counts"]) sum += c[2].get<std::uint64_t>();
        CHECK(sum == row["denominator"].get<std::uint64_t>());
    }
    CHECK(doc["residual_optimized"].get<double>() <= doc["residual_shapley"].get<double>());
    CHECK(run_cli({"dist", "--n", "13", "--out", (dir / "big.json").string()}).code == cli::kUsage);
}

TEST_CASE("cli exit codes") {
    const auto dir = testing::scratch_dir("cli_codes");
    CHECK(run_cli({}).code == cli::kUsage);
    CHECK(run_cli({"explain", "--bogus"}).code == cli::kUsage);
    CHECK(run_cli({"explain", "--model", "nope.json", "--input", "nope.jsonl", "--out", (dir / "o.json").string()}).code ==
          cli::kData);
    REQUIRE(run_cli({"gen-model", "--out", (dir / "m.json").string()}).code == 0);
    testing::spit(dir / "in.jsonl", jsonl({R"({"id":"a","tokens":[2,3],"label":0})"}));
    CHECK(run_cli({"explain", "--model", (dir / "m.json").string(), "--input", (dir / "in.jsonl").string(),
                   "--method", "sp-pi", "--value-space", "odds", "--out", (dir / "o.json").string()})
              .code == cli::kUsage);
    CHECK(run_cli({"explain", "--model", (dir / "m.json").string(), "--input", (dir / "in.jsonl").string(),
                   "--method", "mp-pi", "--budget", "0", "--out", (dir / "o.json").string()})
              .code == cli::kOk);  // zero means the 2n default
    testing::spit(dir / "bad.jsonl", jsonl({R"({"id":"a","tokens":[2,3],"label":0})", R"({"id":"b","label":0})"}));
    const auto partial = run_cli({"explain", "--model", (dir / "m.json").string(), "--input",
                                  (dir / "bad.jsonl").string(), "--out", (dir / "o.json").string()});
    CHECK(partial.code == cli::kData);
    const auto doc = json::parse(testing::slurp(dir / "o.json"));
    CHECK(doc["examples"][0].contains("phi"));
    CHECK(doc["examples"][1].contains("error"));
    CHECK(cli::exit_code(ErrorKind::Numeric) == 3);
}

TEST_CASE("text records and vocabulary") {
    const auto dir = testing::scratch_dir("cli_vocab");
    testing::spit(dir / "vocab.txt", "the\nfilm\nwas\ngood\n.\nbad\n");
    const auto vocab = cli::Vocabulary::load(dir / "vocab.txt");
    CHECK(vocab.size() == 8);
    CHECK(vocab.lookup("the") == TokenId{2});
    CHECK(vocab.sentence_separators() == std::vector<TokenId>{6});
    std::vector<std::string> unknown;
    CHECK(vocab.tokenize("the film was  great .", kMaskToken, &unknown) == TokenSeq{0, 2, 3, 4, kMaskToken, 6});
    CHECK(unknown == std::vector<std::string>{"great"});

    const auto rec = cli::parse_example(R"({"id":"t","text":"the film . was bad","label":0})", 1, &vocab, kMaskToken);
    CHECK(rec.error.empty());
    CHECK(rec.tokens == TokenSeq{0, 2, 3, 6, 4, 7});
    CHECK_FALSE(cli::parse_example(R"({"id":"t","text":"x","tokens":[2],"label":0})", 1, &vocab, kMaskToken).error.empty());
    CHECK_FALSE(cli::parse_example(R"({"id":"t","text":"film","label":0})", 1, nullptr, kMaskToken).error.empty());
    CHECK_FALSE(cli::parse_example("{not json", 1, nullptr, kMaskToken).error.empty());
    const auto grouped = cli::parse_example(R"({"id":"g","tokens":[2,3,4],"label":1,"groups":[[1,3],[3,4]]})", 1,
                                            nullptr, kMaskToken);
    REQUIRE(grouped.groups);
    CHECK(grouped.groups->size() == 2);

    REQUIRE(run_cli({"gen-model", "--kind", "planted", "--features", "2", "--out", (dir / "p.json").string()}).code == 0);
    testing::spit(dir / "t.jsonl", jsonl({R"({"id":"s","text":"the film . was bad","label":1})"}));
    const auto r = run_cli({"explain", "--model", (dir / "p.json").string(), "--input", (dir / "t.jsonl").string(),
                            "--vocab", (dir / "vocab.txt").string(), "--granularity", "sentence", "--out",
                            (dir / "o.json").string()});
    CHECK(r.code == 0);
    CHECK(json::parse(testing::slurp(dir / "o.json"))["examples"][0]["num_features"] == 2);
}

TEST_CASE("config parsing") {
    CHECK(cli::parse_methods("sp-pi,mp-pi") == std::vector<Method>{Method::SpPi, Method::MpPi});
    CHECK_THROWS_AS(cli::parse_methods(""), Error);
    CHECK(cli::parse_class_spec("true").mode == cli::ClassMode::True);
    CHECK(cli::parse_class_spec("predicted").mode == cli::ClassMode::Predicted);
    const auto e = cli::parse_class_spec("2");
    CHECK(e.mode == cli::ClassMode::Explicit);
    CHECK(e.index == 2);
    CHECK(testing::error_kind_of([] { cli::parse_class_spec("-1"); }) == ErrorKind::Usage);
}
