#include "support.hpp"

#include <doctest.h>

using namespace pinf;
using testing::error_kind_of;

TEST_CASE("token granularity gives one feature per token after BOS") {
    const auto g = group_tokens(TokenSeq{0, 9, 8, 7, 6, 5}, {});
    REQUIRE(g.size() == 5);
    for (FeatureIndex j = 1; j <= 5; ++j) CHECK(g.feature(j) == TokenRange{j, j + 1});
}

TEST_CASE("sentence separators close their feature") {
    const TokenId sep = 9;
    GroupingOptions opts;
    opts.granularity = Granularity::Sentence;
    opts.separators = {sep};
    const auto g = group_tokens(TokenSeq{0, 4, 5, sep, 6}, opts);
    REQUIRE(g.size() == 2);
    CHECK(g.feature(1) == TokenRange{1, 4});
    CHECK(g.feature(2) == TokenRange{4, 5});

    // a trailing separator does not produce an empty feature
    CHECK(group_tokens(TokenSeq{0, 4, sep}, opts).size() == 1);
}

TEST_CASE("word granularity without separators is per token") {
    GroupingOptions opts;
    opts.granularity = Granularity::Word;
    CHECK(group_tokens(TokenSeq{0, 4, 5, 6}, opts).size() == 3);
}

TEST_CASE("custom ranges") {
    GroupingOptions opts;
    opts.granularity = Granularity::Custom;
    opts.custom = {{3, 5}, {1, 3}};
    const auto g = group_tokens(TokenSeq{0, 2, 3, 4, 5}, opts);
    CHECK(g.feature(1) == TokenRange{1, 3});
    CHECK(g.extent() == 5);

    opts.custom = {{1, 3}, {2, 4}};
    CHECK(error_kind_of([&] { group_tokens(TokenSeq{0, 2, 3, 4}, opts); }) == ErrorKind::Data);
    opts.custom = {{0, 2}};
    CHECK(error_kind_of([&] { group_tokens(TokenSeq{0, 2, 3}, opts); }) == ErrorKind::Data);
    opts.custom = {{1, 9}};
    CHECK(error_kind_of([&] { group_tokens(TokenSeq{0, 2, 3}, opts); }) == ErrorKind::Data);
    opts.custom = {{2, 2}};
    CHECK_THROWS_AS(group_tokens(TokenSeq{0, 2, 3}, opts), Error);
}

TEST_CASE("empty feature set is rejected") {
    CHECK(error_kind_of([] { group_tokens(TokenSeq{0}, {}); }) == ErrorKind::Data);
    CHECK_THROWS_AS(group_tokens(TokenSeq{}, {}), Error);
    CHECK_THROWS_AS(FeatureGrouping({}, Granularity::Token), Error);
}

TEST_CASE("apply_mask examples") {
    const TokenSeq s{0, 5, 6, 7};
    const auto g = testing::token_features(s);
    CHECK(apply_mask(s, g, BinaryMask{1, 0, 1}, 0) == TokenSeq{0, 5, 0, 7});
    CHECK(apply_mask(s, g, BinaryMask::ones(3), 1) == s);
    CHECK(apply_mask(s, g, BinaryMask::zeros(3), 1) == TokenSeq{0, 1, 1, 1});
    CHECK(error_kind_of([&] { apply_mask(s, g, BinaryMask{1, 0}, 1); }) == ErrorKind::Data);
}

TEST_CASE("apply_mask masks every token of a group and is idempotent") {
    const TokenSeq s{0, 5, 6, 7, 8, 9};
    const FeatureGrouping g({{1, 3}, {3, 4}, {4, 6}}, Granularity::Custom);
    for (std::uint64_t bits = 0; bits < 8; ++bits) {
        const auto z = testing::coalition_from_bits(bits, 3).to_mask(3);
        const auto once = apply_mask(s, g, z, 1);
        CHECK(apply_mask(once, g, z, 1) == once);
        CHECK(once[0] == 0);
        for (FeatureIndex j = 1; j <= 3; ++j) {
            for (std::size_t t = g.feature(j).start; t < g.feature(j).end; ++t) {
                CHECK(once[t] == (z.active(j) ? s[t] : 1u));
            }
        }
    }
}

TEST_CASE("prefix coalition examples") {
    using P = PrefixCoalition;
    CHECK(prefix_coalitions(BinaryMask{1, 0, 1, 1}) ==
          std::vector<P>{{Coalition{1}, 1}, {Coalition{1, 3}, 3}, {Coalition{1, 3, 4}, 4}});
    CHECK(prefix_coalitions(BinaryMask{0, 1, 0}) == std::vector<P>{{Coalition{2}, 2}});
    CHECK(prefix_coalitions(BinaryMask{1, 1}) == std::vector<P>{{Coalition{1}, 1}, {Coalition{1, 2}, 2}});
    CHECK(prefix_coalitions(BinaryMask::zeros(4)).empty());
}

TEST_CASE("prefix coalitions are strictly nested") {
    const std::size_t n = 7;
    for (std::uint64_t bits = 0; bits < (1u << n); ++bits) {
        const auto z = testing::coalition_from_bits(bits, n).to_mask(n);
        const auto prefixes = prefix_coalitions(z);
        CHECK(prefixes.size() == z.count());
        for (std::size_t k = 0; k < prefixes.size(); ++k) {
            const auto& cur = prefixes[k].coalition;
            CHECK(cur.size() == k + 1);
            CHECK(cur.last() == prefixes[k].last_feature);
            if (k > 0) {
                const auto& prev = prefixes[k - 1].coalition.members();
                CHECK(std::includes(cur.members().begin(), cur.members().end(), prev.begin(), prev.end()));
            }
        }
    }
}

TEST_CASE("trace_row_for_feature") {
    CHECK(trace_row_for_feature(testing::token_features(5), 3) == 3);
    const FeatureGrouping sentence({{1, 5}, {5, 7}}, Granularity::Sentence);
    CHECK(trace_row_for_feature(sentence, 1) == 4);
    CHECK(trace_row_for_feature(sentence, 2) == 6);
    CHECK(error_kind_of([&] { trace_row_for_feature(sentence, 0); }) == ErrorKind::Data);
    CHECK_THROWS_AS(trace_row_for_feature(sentence, 3), Error);
}

TEST_CASE("coalitions compare by membership") {
    CHECK(Coalition{3, 1, 2} == Coalition{1, 2, 3});
    CHECK(Coalition{2, 2, 1} == Coalition{1, 2});
    CHECK(Coalition::from_mask(BinaryMask{0, 1, 1}) == Coalition{2, 3});
    CHECK(Coalition{1, 3}.to_mask(3) == BinaryMask{1, 0, 1});
    CHECK(Coalition{1, 3}.bits() == 0b101u);
    CHECK(Coalition::full(3) == Coalition{1, 2, 3});
    CHECK(Coalition{}.last() == 0);
    CHECK(Coalition{1, 4}.contains(4));
    CHECK_FALSE(Coalition{1, 4}.contains(2));
}

TEST_CASE("granularity names") {
    for (auto g : {Granularity::Token, Granularity::Word, Granularity::Sentence, Granularity::Custom}) {
        CHECK(granularity_from_string(to_string(g)) == g);
    }
    CHECK(error_kind_of([] { granularity_from_string("paragraph"); }) == ErrorKind::Usage);
}
