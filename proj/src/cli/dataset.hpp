#pragma once

#include "pinf/features.hpp"
#include "pinf/predictor.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pinf::cli {

/// Whitespace tokenizer over a vocabulary file with one token per line.
/// Id 0 is BOS, id 1 is MASK, and line k (0-based) maps to id k + 2.
class Vocabulary {
public:
    static Vocabulary load(const std::filesystem::path& path);
    explicit Vocabulary(std::vector<std::string> words);

    std::size_t size() const { return words_.size() + 2; }
    std::optional<TokenId> lookup(const std::string& word) const;

    /// BOS followed by one id per whitespace-separated word; unknown words become
    /// `oov_token` and are appended to `unknown`.
    TokenSeq tokenize(const std::string& text, TokenId oov_token, std::vector<std::string>* unknown) const;

    /// Ids of ".", "!" and "?" when present.
    std::vector<TokenId> sentence_separators() const;

private:
    std::vector<std::string> words_;
    std::map<std::string, TokenId> index_;
};

/// One JSONL line:
///   {"id": "ex1", "tokens": [5, 6, 7] | "text": "...", "label": 1, "groups": [[1, 3], [3, 4]]}
/// Token lists exclude BOS; group ranges index the sequence with BOS at 0.
struct ExampleRecord {
    std::string id;
    TokenSeq tokens;  ///< with BOS
    std::size_t label = 0;
    std::optional<std::vector<TokenRange>> groups;
    std::string error;  ///< parse failure; the record is kept so reports stay aligned
};

/// Parses every non-blank line. File-level failures throw; malformed lines are
/// returned with `error` set.
std::vector<ExampleRecord> read_examples(const std::filesystem::path& path, const Vocabulary* vocab,
                                         TokenId oov_token);

ExampleRecord parse_example(const std::string& line, std::size_t line_number, const Vocabulary* vocab,
                            TokenId oov_token);

}  // namespace pinf::cli
