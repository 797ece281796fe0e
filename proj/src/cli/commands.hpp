#pragma once

#include "cli/config.hpp"
#include "cli/dataset.hpp"
#include "pinf/weights_io.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace pinf::cli {

/// Process exit codes.
enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

int exit_code(ErrorKind kind);

/// Writes one report object per example. Returns the exit code of the first
/// failing example, or kOk.
int cmd_explain(const RunConfig& config, const std::filesystem::path& model_path,
                const std::filesystem::path& input_path, const std::filesystem::path& out_path);

/// Writes <out_dir>/report.json and <out_dir>/curves.csv.
int cmd_eval(const RunConfig& config, const std::filesystem::path& model_path,
             const std::filesystem::path& dataset_path, const std::filesystem::path& out_dir);

struct GenModelOptions {
    std::string kind = "tiny";  ///< tiny | planted
    TinyDecoderConfig tiny;
    std::optional<std::filesystem::path> planted_spec;
    std::size_t features = 8;
    double density = 0.2;
    double interaction = 0.5;
    double scale = 1.0;
    std::size_t vocab_size = 64;
    std::uint64_t seed = 0;
};

int cmd_gen_model(const GenModelOptions& options, const std::filesystem::path& out_path);

int cmd_dist(std::size_t n, bool augmented, std::uint64_t seed, const std::filesystem::path& out_path);

/// Entry point shared by the `pinf` executable and in-process tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pinf::cli
