#pragma once

#include "pinf/predictor.hpp"

#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pinf {

/// 1-based feature index.
using FeatureIndex = std::size_t;

/// Half-open token range [start, end).
struct TokenRange {
    std::size_t start = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - start; }
    bool operator==(const TokenRange&) const = default;
};

enum class Granularity { Token, Word, Sentence, Custom };

std::string_view to_string(Granularity g);
Granularity granularity_from_string(std::string_view name);

/// Ordered, non-overlapping token ranges; feature j (1-based) is groups[j-1].
/// Position 0 (BOS) never belongs to a feature.
class FeatureGrouping {
public:
    FeatureGrouping(std::vector<TokenRange> groups, Granularity granularity);

    std::size_t size() const { return groups_.size(); }
    const TokenRange& feature(FeatureIndex j) const;
    const std::vector<TokenRange>& groups() const { return groups_; }
    Granularity granularity() const { return granularity_; }

    /// One past the last token covered by any feature.
    std::size_t extent() const { return groups_.back().end; }

    bool operator==(const FeatureGrouping&) const = default;

private:
    std::vector<TokenRange> groups_;
    Granularity granularity_;
};

/// Active/inactive flag per feature.
class BinaryMask {
public:
    BinaryMask() = default;
    explicit BinaryMask(std::vector<std::uint8_t> bits);
    BinaryMask(std::initializer_list<int> bits);

    static BinaryMask ones(std::size_t n) { return BinaryMask(std::vector<std::uint8_t>(n, 1)); }
    static BinaryMask zeros(std::size_t n) { return BinaryMask(std::vector<std::uint8_t>(n, 0)); }

    std::size_t size() const { return bits_.size(); }
    bool active(FeatureIndex j) const { return bits_.at(j - 1) != 0; }
    void set(FeatureIndex j, bool on) { bits_.at(j - 1) = on ? 1 : 0; }
    std::size_t count() const;
    const std::vector<std::uint8_t>& bits() const { return bits_; }

    bool operator==(const BinaryMask&) const = default;

private:
    std::vector<std::uint8_t> bits_;
};

/// A set of 1-based feature indices, stored strictly increasing.
class Coalition {
public:
    Coalition() = default;
    /// Sorts and deduplicates.
    explicit Coalition(std::vector<FeatureIndex> members);
    Coalition(std::initializer_list<FeatureIndex> members);

    static Coalition from_mask(const BinaryMask& mask);
    static Coalition full(std::size_t n);

    const std::vector<FeatureIndex>& members() const { return members_; }
    std::size_t size() const { return members_.size(); }
    bool empty() const { return members_.empty(); }
    bool contains(FeatureIndex j) const;
    /// Largest member; zero for the empty coalition.
    FeatureIndex last() const { return members_.empty() ? 0 : members_.back(); }

    BinaryMask to_mask(std::size_t n) const;
    /// Bit j-1 set for member j; n <= 64.
    std::uint64_t bits() const;

    auto operator<=>(const Coalition&) const = default;

private:
    std::vector<FeatureIndex> members_;
};

struct GroupingOptions {
    Granularity granularity = Granularity::Token;
    /// Word/sentence granularity closes a feature after each of these ids; with
    /// none, every token is its own feature.
    std::vector<TokenId> separators;
    /// Explicit ranges for custom granularity.
    std::vector<TokenRange> custom;
};

FeatureGrouping group_tokens(const TokenSeq& seq, const GroupingOptions& options);

/// Replaces every token of each inactive feature with `mask_token`.
TokenSeq apply_mask(const TokenSeq& seq, const FeatureGrouping& grouping, const BinaryMask& mask,
                    TokenId mask_token);

struct PrefixCoalition {
    Coalition coalition;
    FeatureIndex last_feature;
    bool operator==(const PrefixCoalition&) const = default;
};

/// Distinct nonempty prefixes of the active features of `mask`, each paired
/// with its last active feature.
std::vector<PrefixCoalition> prefix_coalitions(const BinaryMask& mask);

/// Trace row holding the prediction after feature j has been consumed.
std::size_t trace_row_for_feature(const FeatureGrouping& grouping, FeatureIndex j);

}  // namespace pinf
