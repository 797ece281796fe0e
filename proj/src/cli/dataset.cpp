#include "cli/dataset.hpp"

#include "pinf/error.hpp"

#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace pinf::cli {

using nlohmann::json;

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
    for (std::size_t k = 0; k < words_.size(); ++k) {
        if (!index_.emplace(words_[k], static_cast<TokenId>(k + 2)).second) {
            throw data_error("duplicate vocabulary entry '" + words_[k] + "'");
        }
    }
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw data_error("cannot open vocabulary '" + path.string() + "'");
    }
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) words.push_back(line);
    }
    return Vocabulary(std::move(words));
}

std::optional<TokenId> Vocabulary::lookup(const std::string& word) const {
    const auto it = index_.find(word);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

TokenSeq Vocabulary::tokenize(const std::string& text, TokenId oov_token, std::vector<std::string>* unknown) const {
    TokenSeq out{kBosToken};
    std::istringstream ss(text);
    std::string word;
    while (ss >> word) {
        if (auto id = lookup(word)) {
            out.push_back(*id);
        } else {
            out.push_back(oov_token);
            if (unknown) unknown->push_back(word);
        }
    }
    return out;
}

std::vector<TokenId> Vocabulary::sentence_separators() const {
    std::vector<TokenId> out;
    for (const char* p : {".", "!", "?"}) {
        if (auto id = lookup(p)) out.push_back(*id);
    }
    return out;
}

ExampleRecord parse_example(const std::string& line, std::size_t line_number, const Vocabulary* vocab,
                            TokenId oov_token) {
    ExampleRecord rec;
    rec.id = "line-" + std::to_string(line_number);
    try {
        const json j = json::parse(line);
        if (!j.is_object()) throw data_error("record is not a JSON object");
        if (j.contains("id")) rec.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
        const bool has_tokens = j.contains("tokens");
        const bool has_text = j.contains("text");
        if (has_tokens == has_text) {
            throw data_error("record must have exactly one of 'tokens' or 'text'");
        }
        if (has_tokens) {
            rec.tokens.push_back(kBosToken);
            for (const auto& t : j.at("tokens")) rec.tokens.push_back(t.get<TokenId>());
        } else {
            if (vocab == nullptr) throw data_error("text record needs --vocab");
            std::vector<std::string> unknown;
            rec.tokens = vocab->tokenize(j.at("text").get<std::string>(), oov_token, &unknown);
            for (const auto& w : unknown) {
                std::cerr << "warning: " << rec.id << ": out-of-vocabulary word '" << w << "' mapped to mask token\n";
            }
        }
        if (!j.contains("label")) throw data_error("record has no 'label'");
        rec.label = j.at("label").get<std::size_t>();
        if (j.contains("groups")) {
            std::vector<TokenRange> groups;
            for (const auto& g : j.at("groups")) {
                if (!g.is_array() || g.size() != 2) throw data_error("each group must be [start, end]");
                groups.push_back({g[0].get<std::size_t>(), g[1].get<std::size_t>()});
            }
            rec.groups = std::move(groups);
        }
    } catch (const json::exception& e) {
        rec.error = std::string("schema error: ") + e.what();
    } catch (const Error& e) {
        rec.error = e.what();
    }
    return rec;
}

std::vector<ExampleRecord> read_examples(const std::filesystem::path& path, const Vocabulary* vocab,
                                         TokenId oov_token) {
    std::ifstream in(path);
    if (!in) {
        throw data_error("cannot open dataset '" + path.string() + "'");
    }
    std::vector<ExampleRecord> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(parse_example(line, number, vocab, oov_token));
    }
    if (out.empty()) {
        throw data_error("dataset '" + path.string() + "' has no records");
    }
    return out;
}

}  // namespace pinf::cli
