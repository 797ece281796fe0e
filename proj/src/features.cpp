#include "pinf/features.hpp"

#include "pinf/error.hpp"

#include <algorithm>
#include <string>

namespace pinf {

std::string_view to_string(Granularity g) {
    switch (g) {
        case Granularity::Token: return "token";
        case Granularity::Word: return "word";
        case Granularity::Sentence: return "sentence";
        case Granularity::Custom: return "custom";
    }
    return "token";
}

Granularity granularity_from_string(std::string_view name) {
    if (name == "token") return Granularity::Token;
    if (name == "word") return Granularity::Word;
    if (name == "sentence") return Granularity::Sentence;
    if (name == "custom") return Granularity::Custom;
    throw usage_error("unknown granularity '" + std::string(name) + "'");
}

FeatureGrouping::FeatureGrouping(std::vector<TokenRange> groups, Granularity granularity)
    : groups_(std::move(groups)), granularity_(granularity) {
    if (groups_.empty()) {
        throw data_error("feature grouping is empty");
    }
    std::size_t prev_end = 1;
    for (const auto& g : groups_) {
        if (g.start < 1) {
            throw data_error("feature range may not include the BOS position");
        }
        if (g.end <= g.start) {
            throw data_error("empty feature range [" + std::to_string(g.start) + ", " + std::to_string(g.end) + ")");
        }
        if (g.start < prev_end) {
            throw data_error("feature ranges overlap or are unsorted at [" + std::to_string(g.start) + ", " +
                             std::to_string(g.end) + ")");
        }
        prev_end = g.end;
    }
}

const TokenRange& FeatureGrouping::feature(FeatureIndex j) const {
    if (j < 1 || j > groups_.size()) {
        throw data_error("feature index " + std::to_string(j) + " out of range 1.." + std::to_string(groups_.size()));
    }
    return groups_[j - 1];
}

BinaryMask::BinaryMask(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    for (auto& b : bits_) {
        b = b != 0 ? 1 : 0;
    }
}

BinaryMask::BinaryMask(std::initializer_list<int> bits) {
    bits_.reserve(bits.size());
    for (int b : bits) {
        bits_.push_back(b != 0 ? 1 : 0);
    }
}

std::size_t BinaryMask::count() const { return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1)); }

Coalition::Coalition(std::vector<FeatureIndex> members) : members_(std::move(members)) {
    std::sort(members_.begin(), members_.end());
    members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
    if (!members_.empty() && members_.front() == 0) {
        throw data_error("feature indices are 1-based");
    }
}

Coalition::Coalition(std::initializer_list<FeatureIndex> members) : Coalition(std::vector<FeatureIndex>(members)) {}

Coalition Coalition::from_mask(const BinaryMask& mask) {
    std::vector<FeatureIndex> members;
    for (FeatureIndex j = 1; j <= mask.size(); ++j) {
        if (mask.active(j)) members.push_back(j);
    }
    return Coalition(std::move(members));
}

Coalition Coalition::full(std::size_t n) {
    std::vector<FeatureIndex> members(n);
    for (std::size_t j = 0; j < n; ++j) members[j] = j + 1;
    return Coalition(std::move(members));
}

bool Coalition::contains(FeatureIndex j) const { return std::binary_search(members_.begin(), members_.end(), j); }

BinaryMask Coalition::to_mask(std::size_t n) const {
    if (last() > n) {
        throw data_error("coalition member " + std::to_string(last()) + " exceeds feature count " + std::to_string(n));
    }
    BinaryMask mask = BinaryMask::zeros(n);
    for (FeatureIndex j : members_) mask.set(j, true);
    return mask;
}

std::uint64_t Coalition::bits() const {
    std::uint64_t b = 0;
    for (FeatureIndex j : members_) {
        if (j > 64) throw data_error("coalition bitset supports at most 64 features");
        b |= std::uint64_t{1} << (j - 1);
    }
    return b;
}

FeatureGrouping group_tokens(const TokenSeq& seq, const GroupingOptions& options) {
    if (seq.empty()) {
        throw data_error("cannot group an empty sequence");
    }
    std::vector<TokenRange> groups;
    switch (options.granularity) {
        case Granularity::Token:
            for (std::size_t p = 1; p < seq.size(); ++p) groups.push_back({p, p + 1});
            break;
        case Granularity::Word:
        case Granularity::Sentence: {
            // A separator closes the feature it belongs to.
            std::size_t start = 1;
            for (std::size_t p = 1; p < seq.size(); ++p) {
                const bool sep = std::find(options.separators.begin(), options.separators.end(), seq[p]) !=
                                 options.separators.end();
                if (sep || options.separators.empty()) {
                    groups.push_back({start, p + 1});
                    start = p + 1;
                }
            }
            if (start < seq.size()) groups.push_back({start, seq.size()});
            break;
        }
        case Granularity::Custom: {
            groups = options.custom;
            std::sort(groups.begin(), groups.end(),
                      [](const TokenRange& a, const TokenRange& b) { return a.start < b.start; });
            for (std::size_t g = 0; g < groups.size(); ++g) {
                if (groups[g].end > seq.size()) {
                    throw data_error("custom range [" + std::to_string(groups[g].start) + ", " +
                                     std::to_string(groups[g].end) + ") exceeds sequence length " +
                                     std::to_string(seq.size()));
                }
                if (g > 0 && groups[g].start < groups[g - 1].end) {
                    throw data_error("custom ranges [" + std::to_string(groups[g - 1].start) + ", " +
                                     std::to_string(groups[g - 1].end) + ") and [" + std::to_string(groups[g].start) +
                                     ", " + std::to_string(groups[g].end) + ") overlap");
                }
            }
            break;
        }
    }
    if (groups.empty()) {
        throw data_error("sequence has no tokens after BOS; feature set is empty");
    }
    return FeatureGrouping(std::move(groups), options.granularity);
}

TokenSeq apply_mask(const TokenSeq& seq, const FeatureGrouping& grouping, const BinaryMask& mask,
                    TokenId mask_token) {
    if (mask.size() != grouping.size()) {
        throw data_error("mask length " + std::to_string(mask.size()) + " does not match " +
                         std::to_string(grouping.size()) + " features");
    }
    if (grouping.extent() > seq.size()) {
        throw data_error("grouping extends past the end of the sequence");
    }
    TokenSeq out = seq;
    for (FeatureIndex j = 1; j <= grouping.size(); ++j) {
        if (mask.active(j)) continue;
        const auto& r = grouping.feature(j);
        std::fill(out.begin() + static_cast<std::ptrdiff_t>(r.start), out.begin() + static_cast<std::ptrdiff_t>(r.end),
                  mask_token);
    }
    return out;
}

std::vector<PrefixCoalition> prefix_coalitions(const BinaryMask& mask) {
    std::vector<PrefixCoalition> out;
    std::vector<FeatureIndex> members;
    for (FeatureIndex j = 1; j <= mask.size(); ++j) {
        if (!mask.active(j)) continue;
        members.push_back(j);
        out.push_back({Coalition(members), j});
    }
    return out;
}

std::size_t trace_row_for_feature(const FeatureGrouping& grouping, FeatureIndex j) {
    return grouping.feature(j).end - 1;
}

}  // namespace pinf
