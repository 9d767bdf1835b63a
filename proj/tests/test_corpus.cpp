#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "afgn/corpus.hpp"
#include "afgn/errors.hpp"

using namespace afgn;

namespace {

std::string join(const std::vector<std::string>& tokens) {
    std::string out;
    for (const auto& t : tokens) {
        if (!out.empty()) out += ' ';
        out += t;
    }
    return out;
}

}  // namespace

TEST_CASE("tokenize") {
    CHECK(tokenize("I hate you.") == std::vector<std::string>{"i", "hate", "you", "."});
    CHECK(tokenize("") == std::vector<std::string>{});
    CHECK(tokenize("Don't!  stop") == std::vector<std::string>{"don", "'", "t", "!", "stop"});

    SUBCASE("idempotent under re-join") {
        for (const char* s : {"I hate you.", "well... OK?!", "a,b;c:d", "  spaced   out  "}) {
            const auto once = tokenize(s);
            CHECK(tokenize(join(once)) == once);
        }
    }
}

TEST_CASE("build_vocab") {
    SUBCASE("under capacity keeps everything") {
        const auto vocab = Vocabulary::build({tokenize("a a b")}, 6);
        CHECK(vocab.size() == 6);
        CHECK(vocab.contains("a"));
        CHECK(vocab.contains("b"));
        CHECK(vocab.id("a") == 4);  // most frequent first after reserved
        CHECK(vocab.id("b") == 5);
    }
    SUBCASE("over capacity keeps the most frequent, ties lexicographic") {
        // Frequencies: d:4, b:3, c:3, a:2, plus six singletons.
        std::vector<std::vector<std::string>> corpus{
            tokenize("d d d d b b b c c c a a"),
            tokenize("e f g h i j"),
        };
        const auto vocab = Vocabulary::build(corpus, 8);
        CHECK(vocab.size() == 8);
        CHECK(vocab.id("d") == 4);
        CHECK(vocab.id("b") == 5);
        CHECK(vocab.id("c") == 6);
        CHECK(vocab.id("a") == 7);
        CHECK(vocab.id("e") == kUnkId);
    }
    SUBCASE("deterministic") {
        std::vector<std::vector<std::string>> corpus{tokenize("x y z z q r s")};
        const auto v1 = Vocabulary::build(corpus, 7);
        const auto v2 = Vocabulary::build(corpus, 7);
        CHECK(v1.tokens() == v2.tokens());
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(Vocabulary::build({}, 10), DataError);
        CHECK_THROWS_AS(Vocabulary::build({tokenize("a")}, 4), ConfigError);
    }
}

TEST_CASE("encode/decode round trip") {
    const auto vocab = Vocabulary::build({tokenize("hi hello there friend")}, 20);
    const auto tokens = tokenize("hello friend");
    CHECK(vocab.decode(vocab.encode(tokens)) == tokens);
    // OOV round-trips to the UNK surface form.
    CHECK(vocab.decode(vocab.encode({"zzz"})) == std::vector<std::string>{"<unk>"});
}

TEST_CASE("load_pairs") {
    const auto vocab = Vocabulary::build({tokenize("hi hello how are you fine thanks")}, 20);

    SUBCASE("minimal line") {
        std::istringstream in("hi\thello\n");
        const auto pairs = load_pairs(in, vocab, 20);
        REQUIRE(pairs.size() == 1);
        CHECK(pairs[0].prompt_ids == std::vector<TokenId>{vocab.id("hi")});
        CHECK(pairs[0].response_ids == std::vector<TokenId>{vocab.id("hello"), kEosId});
    }
    SUBCASE("malformed line skipped with usable remainder") {
        std::istringstream in("no-tab-here\nhi\thello\n");
        CHECK(load_pairs(in, vocab, 20).size() == 1);
    }
    SUBCASE("zero usable lines errors") {
        std::istringstream in("nope\nstill nope\n");
        CHECK_THROWS_AS(load_pairs(in, vocab, 20), DataError);
    }
    SUBCASE("truncation and EOS") {
        std::istringstream in("hi hello how are you\tfine thanks fine thanks\n");
        const auto pairs = load_pairs(in, vocab, 3);
        REQUIRE(pairs.size() == 1);
        CHECK(pairs[0].prompt_ids.size() == 3);
        CHECK(pairs[0].response_ids.size() == 4);
        CHECK(pairs[0].response_ids.back() == kEosId);
    }
    SUBCASE("three-line fixture encodes as expected") {
        std::istringstream in("hi\thello\nhow are you\tfine\nthanks\thi hi\n");
        const auto pairs = load_pairs(in, vocab, 20);
        REQUIRE(pairs.size() == 3);
        CHECK(pairs[1].prompt_ids ==
              std::vector<TokenId>{vocab.id("how"), vocab.id("are"), vocab.id("you")});
        CHECK(pairs[2].response_ids ==
              std::vector<TokenId>{vocab.id("hi"), vocab.id("hi"), kEosId});
    }
}

TEST_CASE("batches") {
    const auto vocab = Vocabulary::build({tokenize("a b c d e f g")}, 20);
    std::istringstream in("a\tb\nc\td e\nf g\ta\nb c\td\ne\tf g a\n");
    const auto pairs = load_pairs(in, vocab, 20);
    REQUIRE(pairs.size() == 5);

    SUBCASE("sizes 2,2,1") {
        const auto batches = make_batches(pairs, 2, 42);
        REQUIRE(batches.size() == 3);
        CHECK(batches[0].size == 2);
        CHECK(batches[1].size == 2);
        CHECK(batches[2].size == 1);
    }
    SUBCASE("same seed reproduces the order") {
        const auto a = make_batches(pairs, 2, 42, 3);
        const auto b = make_batches(pairs, 2, 42, 3);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].prompt_ids == b[i].prompt_ids);
            CHECK(a[i].response_ids == b[i].response_ids);
        }
    }
    SUBCASE("mask sums equal original lengths, masks are prefixes of ones") {
        const auto batches = make_batches(pairs, 2, 7);
        std::size_t prompt_total = 0, response_total = 0;
        for (const auto& batch : batches) {
            for (std::size_t r = 0; r < batch.size; ++r) {
                bool seen_pad = false;
                for (std::size_t c = 0; c < batch.prompt_width; ++c) {
                    const bool real = batch.prompt_mask[r * batch.prompt_width + c] > 0;
                    if (!real) seen_pad = true;
                    CHECK_FALSE((real && seen_pad));
                    prompt_total += real;
                }
                seen_pad = false;
                for (std::size_t c = 0; c < batch.response_width; ++c) {
                    const bool real = batch.response_mask[r * batch.response_width + c] > 0;
                    if (!real) seen_pad = true;
                    CHECK_FALSE((real && seen_pad));
                    response_total += real;
                }
            }
        }
        std::size_t expect_prompt = 0, expect_response = 0;
        for (const auto& p : pairs) {
            expect_prompt += p.prompt_ids.size();
            expect_response += p.response_ids.size();
        }
        CHECK(prompt_total == expect_prompt);
        CHECK(response_total == expect_response);
    }
    SUBCASE("different seeds permute the same multiset") {
        auto flatten = [](const std::vector<Batch>& batches) {
            std::vector<std::vector<TokenId>> rows;
            for (const auto& batch : batches) {
                for (std::size_t r = 0; r < batch.size; ++r) {
                    std::vector<TokenId> row;
                    for (std::size_t c = 0; c < batch.response_width; ++c) {
                        if (batch.response_mask[r * batch.response_width + c] > 0) {
                            row.push_back(batch.response_ids[r * batch.response_width + c]);
                        }
                    }
                    rows.push_back(row);
                }
            }
            std::sort(rows.begin(), rows.end());
            return rows;
        };
        CHECK(flatten(make_batches(pairs, 2, 1)) == flatten(make_batches(pairs, 2, 2)));
    }
}

TEST_CASE("pair_cornell adjacency") {
    const std::string dir = "/tmp/afgn_cornell_test";
    std::system(("mkdir -p " + dir).c_str());
    {
        std::ofstream lines(dir + "/movie_lines.txt");
        lines << "L1 +++$+++ u0 +++$+++ m0 +++$+++ ALICE +++$+++ hi there\n"
              << "L2 +++$+++ u1 +++$+++ m0 +++$+++ BOB +++$+++ hello\n"
              << "L3 +++$+++ u0 +++$+++ m0 +++$+++ ALICE +++$+++ bye now\n";
        std::ofstream convos(dir + "/movie_conversations.txt");
        convos << "u0 +++$+++ u1 +++$+++ m0 +++$+++ ['L1', 'L2', 'L3']\n";
    }
    const auto pairs =
        pair_cornell(dir + "/movie_lines.txt", dir + "/movie_conversations.txt");
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].first == "hi there");
    CHECK(pairs[0].second == "hello");
    CHECK(pairs[1].first == "hello");
    CHECK(pairs[1].second == "bye now");

    SUBCASE("missing file names the path") {
        CHECK_THROWS_WITH_AS(pair_cornell(dir + "/nope.txt", dir + "/movie_conversations.txt"),
                             doctest::Contains("nope.txt"), DataError);
    }
    SUBCASE("empty conversations file yields zero pairs") {
        std::ofstream(dir + "/empty.txt").close();
        CHECK(pair_cornell(dir + "/movie_lines.txt", dir + "/empty.txt").empty());
    }
}
