#include "cli/commands.hpp"

#include "pinf/eval.hpp"
#include "pinf/mppi.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>

namespace pinf::cli {

using ojson = nlohmann::ordered_json;

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Usage: return kUsage;
        case ErrorKind::Data: return kData;
        case ErrorKind::Numeric: return kNumeric;
    }
    return kData;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw data_error("write to '" + path.string() + "' failed");
}

// Shortest repr that round-trips, matching the JSON writer.
std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

ojson config_json(const RunConfig& c) {
    ojson methods = ojson::array();
    for (Method m : c.methods) methods.push_back(std::string(to_string(m)));
    ojson j;
    j["methods"] = methods;
    j["budget"] = c.budget ? ojson(*c.budget) : ojson("2n");
    j["class"] = to_string(c.class_spec);
    j["granularity"] = std::string(to_string(c.granularity));
    j["separators"] = c.separators;
    j["mask_token"] = c.mask_token;
    j["sampler"] = std::string(to_string(c.sampler));
    j["augmented"] = c.augmented;
    j["value_space"] = std::string(to_string(c.value_space));
    j["seed"] = c.seed;
    return j;
}

// Loaded model plus per-example predictor binding.
class ModelBinder {
public:
    explicit ModelBinder(ModelFile model) : model_(std::move(model)) {
        if (auto* tiny = std::get_if<TinyDecoder>(&model_)) {
            shared_ = std::make_shared<TinyDecoder>(*tiny);
        }
    }

    std::shared_ptr<const Predictor> bind(const FeatureGrouping& grouping, TokenId mask_token) const {
        if (shared_) return shared_;
        const auto& planted = std::get<PlantedModel>(model_);
        return std::make_shared<PlantedPredictor>(planted.function, grouping, mask_token, planted.vocab_size);
    }

    std::size_t vocab_size() const {
        return shared_ ? shared_->vocab_size() : std::get<PlantedModel>(model_).vocab_size;
    }

private:
    ModelFile model_;
    std::shared_ptr<const Predictor> shared_;
};

FeatureGrouping grouping_for(const ExampleRecord& rec, const RunConfig& config, const Vocabulary* vocab) {
    GroupingOptions opts;
    if (rec.groups) {
        opts.granularity = Granularity::Custom;
        opts.custom = *rec.groups;
    } else {
        opts.granularity = config.granularity;
        opts.separators = config.separators;
        if (opts.separators.empty() && config.granularity == Granularity::Sentence && vocab != nullptr) {
            opts.separators = vocab->sentence_separators();
        }
    }
    return group_tokens(rec.tokens, opts);
}

std::optional<Vocabulary> load_vocab(const RunConfig& config) {
    if (!config.vocab) return std::nullopt;
    return Vocabulary::load(*config.vocab);
}

std::size_t resolve_class(const ClassSpec& spec, ClassMode fallback, const ExampleRecord& rec,
                          const Predictor& model) {
    const ClassMode mode = spec.mode == ClassMode::Default ? fallback : spec.mode;
    switch (mode) {
        case ClassMode::True: return rec.label;
        case ClassMode::Explicit: return spec.index;
        case ClassMode::Predicted:
        case ClassMode::Default: break;
    }
    return predicted_class(model, rec.tokens);
}

int code_of(const std::exception& e) {
    if (const auto* pe = dynamic_cast<const Error*>(&e)) return exit_code(pe->kind());
    return kData;
}

}  // namespace

int cmd_explain(const RunConfig& config, const std::filesystem::path& model_path,
                const std::filesystem::path& input_path, const std::filesystem::path& out_path) {
    config.validate();
    if (config.methods.size() != 1) {
        throw usage_error("explain takes exactly one --method");
    }
    const Method method = config.methods.front();
    const ModelBinder binder(load_weights(model_path));
    const auto vocab = load_vocab(config);
    const auto records = read_examples(input_path, vocab ? &*vocab : nullptr, config.mask_token);
    MppiPlanCache plans;

    ojson examples = ojson::array();
    int status = kOk;
    for (std::size_t e = 0; e < records.size(); ++e) {
        const auto& rec = records[e];
        ojson row;
        row["id"] = rec.id;
        row["method"] = std::string(to_string(method));
        try {
            if (!rec.error.empty()) throw data_error(rec.error);
            const FeatureGrouping grouping = grouping_for(rec, config, vocab ? &*vocab : nullptr);
            const auto model = binder.bind(grouping, config.mask_token);
            const std::size_t c = resolve_class(config.class_spec, ClassMode::Predicted, rec, *model);
            if (c >= model->num_classes()) throw usage_error("class " + std::to_string(c) + " out of range");
            const auto start = std::chrono::steady_clock::now();
            const Explanation expl = explain(method, *model, rec.tokens, grouping, c, config.method_options(),
                                             derive_seed(config.seed, e), plans);
            const auto stop = std::chrono::steady_clock::now();
            row["class"] = c;
            row["value_space"] = std::string(to_string(expl.attribution.value_space));
            row["num_features"] = grouping.size();
            row["phi0"] = expl.attribution.phi0;
            row["phi"] = expl.attribution.phi;
            row["phi_sum"] = expl.attribution.sum();
            row["forward_passes"] = expl.forward_passes;
            if (config.timing) {
                row["wall_time_ms"] = std::chrono::duration<double, std::milli>(stop - start).count();
            }
        } catch (const std::exception& err) {
            row["error"] = err.what();
            std::cerr << "error: " << rec.id << ": " << err.what() << "\n";
            if (status == kOk) status = code_of(err);
        }
        examples.push_back(std::move(row));
    }
    ojson doc;
    doc["format_version"] = 1;
    doc["command"] = "explain";
    doc["seed"] = config.seed;
    doc["config"] = config_json(config);
    doc["examples"] = std::move(examples);
    write_file(out_path, doc.dump(1) + "\n");
    return status;
}

int cmd_eval(const RunConfig& config, const std::filesystem::path& model_path,
             const std::filesystem::path& dataset_path, const std::filesystem::path& out_dir) {
    config.validate();
    const ModelBinder binder(load_weights(model_path));
    const auto vocab = load_vocab(config);
    const auto records = read_examples(dataset_path, vocab ? &*vocab : nullptr, config.mask_token);

    std::vector<StudyExample> examples;
    for (const auto& rec : records) {
        StudyExample ex;
        ex.id = rec.id;
        ex.tokens = rec.tokens;
        ex.label = rec.label;
        ex.error = rec.error;
        if (ex.error.empty()) {
            try {
                ex.grouping = grouping_for(rec, config, vocab ? &*vocab : nullptr);
                ex.model = binder.bind(*ex.grouping, config.mask_token);
            } catch (const std::exception& err) {
                ex.error = err.what();
            }
        }
        examples.push_back(std::move(ex));
    }

    StudyOptions opts;
    opts.methods = config.methods;
    opts.method_options = config.method_options();
    opts.seed = config.seed;
    switch (config.class_spec.mode) {
        case ClassMode::Default:
        case ClassMode::True: opts.class_choice = ClassChoice::True; break;
        case ClassMode::Predicted: opts.class_choice = ClassChoice::Predicted; break;
        case ClassMode::Explicit:
            opts.class_choice = ClassChoice::Explicit;
            opts.explicit_class = config.class_spec.index;
            break;
    }
    const StudyReport report = run_study(examples, opts);

    ojson summary = ojson::array();
    for (const auto& s : report.summaries) {
        summary.push_back({{"method", std::string(to_string(s.method))},
                           {"mean_as_auc", s.mean_as_auc},
                           {"mean_ias_auc", s.mean_ias_auc},
                           {"examples", s.examples},
                           {"failures", s.failures}});
    }
    ojson rows = ojson::array();
    for (const auto& r : report.rows) {
        ojson row;
        row["example_id"] = r.example_id;
        row["method"] = std::string(to_string(r.method));
        if (!r.error.empty()) {
            row["error"] = r.error;
        } else {
            row["class"] = r.class_index;
            row["num_features"] = r.num_features;
            row["as_auc"] = r.as_auc;
            row["ias_auc"] = r.ias_auc;
            row["forward_passes"] = r.forward_passes;
            row["phi"] = r.attribution->phi;
        }
        rows.push_back(std::move(row));
    }
    ojson doc;
    doc["format_version"] = 1;
    doc["command"] = "eval";
    doc["seed"] = report.seed;
    doc["config"] = config_json(config);
    doc["summary"] = std::move(summary);
    doc["rows"] = std::move(rows);

    std::filesystem::create_directories(out_dir);
    write_file(out_dir / "report.json", doc.dump(1) + "\n");

    std::string csv = "example_id,method,study,step,fraction,probability\n";
    for (const auto& curve : report.curves) {
        const double span = static_cast<double>(curve.points.back().added);
        for (const auto& p : curve.points) {
            csv += curve.example_id + "," + curve.method + "," + std::string(to_string(curve.study)) + "," +
                   std::to_string(p.added) + "," + format_double(static_cast<double>(p.added) / span) + "," +
                   format_double(p.probability) + "\n";
        }
    }
    write_file(out_dir / "curves.csv", csv);

    for (const auto& r : report.rows) {
        if (!r.error.empty()) std::cerr << "error: " << r.example_id << " (" << to_string(r.method) << "): " << r.error << "\n";
    }
    return kOk;
}

int cmd_gen_model(const GenModelOptions& options, const std::filesystem::path& out_path) {
    ojson doc;
    if (options.kind == "tiny") {
        doc = ojson::parse(serialize_model(init_random(options.tiny, options.seed)));
    } else if (options.kind == "planted") {
        if (options.planted_spec) {
            // Round-trips the spec through the validating parser.
            std::ifstream in(*options.planted_spec);
            if (!in) throw data_error("cannot open planted spec '" + options.planted_spec->string() + "'");
            nlohmann::json spec = nlohmann::json::parse(in, nullptr, false);
            if (spec.is_discarded() || !spec.is_object()) throw data_error("malformed planted spec");
            spec["kind"] = "planted";
            if (!spec.contains("format_version")) spec["format_version"] = kWeightFormatVersion;
            if (!spec.contains("n_features") && spec.contains("linear")) spec["n_features"] = spec["linear"].size();
            const ModelFile model = parse_model(spec.dump());
            doc = ojson::parse(serialize_model(model));
        } else {
            if (options.features < 1) throw usage_error("--features must be >= 1");
            PlantedModel m{random_planted(options.features, options.seed, options.density, options.interaction,
                                          options.scale),
                           options.vocab_size};
            doc = ojson::parse(serialize_model(m));
        }
    } else {
        throw usage_error("unknown model kind '" + options.kind + "' (expected tiny or planted)");
    }
    doc["seed"] = options.seed;
    write_file(out_path, doc.dump(1) + "\n");
    return kOk;
}

namespace {

ojson matrix_json(const SizeLastMatrix& m) {
    const std::size_t n = m.num_features();
    ojson rows = ojson::array();
    for (std::size_t i = 1; i <= n; ++i) {
        std::vector<double> row(n, 0.0);
        for (FeatureIndex j = 1; j <= n; ++j) row[j - 1] = m(i, j);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace

int cmd_dist(std::size_t n, bool augmented, std::uint64_t seed, const std::filesystem::path& out_path) {
    if (n < 2 || n > kMaxConditionalFeatures) {
        throw usage_error("dist needs 2 <= n <= " + std::to_string(kMaxConditionalFeatures));
    }
    const MppiPlan opt = make_mppi_plan(n, augmented, Sampler::Optimized);
    const MaskDistribution direct = shapley_mask_dist(n, augmented);
    const SizeLastMatrix pd_direct = propagate(direct, opt.conditional);

    ojson cond = ojson::array();
    for (const auto& row : opt.conditional.rows()) {
        ojson counts = ojson::array();
        for (const auto& [cell, count] : row.counts) counts.push_back({cell.size, cell.last, count});
        cond.push_back({{"input", {row.input.size, row.input.last}}, {"denominator", row.denominator},
                        {"counts", std::move(counts)}});
    }

    ojson doc;
    doc["format_version"] = 1;
    doc["command"] = "dist";
    doc["seed"] = seed;
    doc["n"] = n;
    doc["augmented"] = augmented;
    doc["layout"] = "rows are coalition sizes 1..n, columns are last active features 1..n";
    doc["shapley_sizes"] = shapley_size_dist(n).probs();
    doc["shapley_matrix"] = matrix_json(opt.target);
    doc["optimized_pprime"] = matrix_json(opt.pprime.probs);
    doc["pd_optimized"] = matrix_json(opt.pd);
    doc["pd_shapley"] = matrix_json(pd_direct);
    doc["pd_optimized_total"] = opt.pd.total();
    doc["pd_shapley_total"] = pd_direct.total();
    doc["residual_optimized"] = opt.pprime.report.residual;
    doc["residual_shapley"] = mask_residual(direct, opt.conditional, opt.target);
    doc["optimizer"] = {{"iterations", opt.pprime.report.iterations},
                        {"gradient_norm", opt.pprime.report.gradient_norm},
                        {"converged", opt.pprime.report.converged}};
    doc["conditional"] = std::move(cond);
    write_file(out_path, doc.dump(1) + "\n");
    return kOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Progressive-inference attributions for causal sequence classifiers"};
    app.require_subcommand(1);

    RunConfig config;
    std::string methods = "sp-pi";
    std::string class_text = "default";
    std::string granularity = "token";
    std::string sampler = "opt";
    std::string value_space = "logit";
    std::size_t budget = 0;
    std::filesystem::path model_path, input_path, out_path, vocab_path;

    auto add_run_flags = [&](CLI::App* sub, const char* method_help) {
        sub->add_option("--model", model_path, "model/weights JSON")->required();
        sub->add_option("--method", methods, method_help);
        sub->add_option("--budget", budget, "forward-pass budget for sampled methods (default 2n)");
        sub->add_option("--class", class_text, "predicted | true | <index>");
        sub->add_option("--granularity", granularity, "token | word | sentence");
        sub->add_option("--separators", config.separators, "separator token ids for word/sentence grouping")
            ->delimiter(',');
        sub->add_option("--mask-token", config.mask_token, "mask token id");
        sub->add_option("--sampler", sampler, "opt | shapley");
        sub->add_flag("--augmented,!--no-augmented", config.augmented, "tail-augmented MP-PI masks");
        sub->add_option("--value-space", value_space, "logit | probability");
        sub->add_option("--seed", config.seed, "random seed");
        sub->add_option("--vocab", vocab_path, "vocabulary file for text records");
        sub->add_option("--out", out_path, "output path")->required();
    };

    auto* explain_cmd = app.add_subcommand("explain", "attribute each example in a JSONL file");
    add_run_flags(explain_cmd, "sp-pi | mp-pi | kernel-shap | exact-shap | random");
    explain_cmd->add_option("--input", input_path, "examples JSONL")->required();
    explain_cmd->add_flag("--timing", config.timing, "record wall time per example (not reproducible)");

    auto* eval_cmd = app.add_subcommand("eval", "activation / inverse-activation study");
    add_run_flags(eval_cmd, "comma-separated methods");
    eval_cmd->add_option("--dataset", input_path, "examples JSONL")->required();

    GenModelOptions gen;
    std::filesystem::path gen_out;
    auto* gen_cmd = app.add_subcommand("gen-model", "write a random decoder or a planted set function");
    gen_cmd->add_option("--kind", gen.kind, "tiny | planted");
    gen_cmd->add_option("--vocab-size", gen.tiny.vocab_size, "decoder vocabulary size");
    gen_cmd->add_option("--embed-dim", gen.tiny.embed_dim);
    gen_cmd->add_option("--layers", gen.tiny.num_layers);
    gen_cmd->add_option("--heads", gen.tiny.num_heads);
    gen_cmd->add_option("--max-positions", gen.tiny.max_positions);
    gen_cmd->add_option("--classes", gen.tiny.num_classes);
    gen_cmd->add_option("--spec", gen.planted_spec, "planted spec JSON (linear, pairwise, scale)");
    gen_cmd->add_option("--features", gen.features, "random planted: feature count");
    gen_cmd->add_option("--density", gen.density, "random planted: pair interaction probability");
    gen_cmd->add_option("--interaction", gen.interaction, "random planted: max |b_ij|");
    gen_cmd->add_option("--scale", gen.scale, "planted logit scale");
    gen_cmd->add_option("--planted-vocab", gen.vocab_size, "planted vocabulary size");
    gen_cmd->add_option("--seed", gen.seed);
    gen_cmd->add_option("--out", gen_out)->required();

    std::size_t dist_n = 0;
    bool dist_augmented = true;
    std::uint64_t dist_seed = 0;
    std::filesystem::path dist_out;
    auto* dist_cmd = app.add_subcommand("dist", "dump sampling distributions for n features");
    dist_cmd->add_option("--n", dist_n, "feature count")->required();
    dist_cmd->add_flag("--augmented,!--no-augmented", dist_augmented);
    dist_cmd->add_option("--seed", dist_seed);
    dist_cmd->add_option("--out", dist_out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*explain_cmd || *eval_cmd) {
            config.methods = parse_methods(methods);
            config.class_spec = parse_class_spec(class_text == "default" ? "predicted" : class_text);
            if (class_text == "default") config.class_spec.mode = ClassMode::Default;
            config.granularity = granularity_from_string(granularity);
            config.sampler = sampler_from_string(sampler);
            config.value_space = value_space_from_string(value_space);
            if (budget > 0) config.budget = budget;
            if (!vocab_path.empty()) config.vocab = vocab_path;
            if (config.granularity == Granularity::Custom) {
                throw usage_error("custom granularity comes from per-record 'groups'");
            }
            return *explain_cmd ? cmd_explain(config, model_path, input_path, out_path)
                                : cmd_eval(config, model_path, input_path, out_path);
        }
        if (*gen_cmd) return cmd_gen_model(gen, gen_out);
        if (*dist_cmd) return cmd_dist(dist_n, dist_augmented, dist_seed, dist_out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kData;
    }
    return kUsage;
}

}  // namespace pinf::cli
