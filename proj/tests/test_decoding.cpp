#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "afgn/decoding.hpp"
#include "afgn/errors.hpp"

using namespace afgn;

namespace {

Lexicon fixture() { return Lexicon::load_file(AFGN_DATA_DIR "/affect_lexicon_50.csv"); }

// Exhaustive decode oracle: scores every sequence (terminating at EOS when
// the scorer has one, else at max_len) and returns the top-B.
struct Enumerated {
    std::vector<TokenId> full_tokens;  // includes EOS
    std::vector<TokenId> tokens;       // EOS stripped
    double log_prob = 0.0;
};

void enumerate_rec(const SequenceScorer& scorer, const SequenceScorer::State& state,
                   TokenId prev, std::vector<TokenId>& tokens, double log_prob,
                   std::size_t max_len, std::vector<Enumerated>& out) {
    if (tokens.size() == max_len) {
        out.push_back({tokens, tokens, log_prob});
        return;
    }
    auto [row, next] = scorer.step(state, prev);
    for (std::size_t v = 0; v < row.size(); ++v) {
        const double lp = log_prob + row[v];
        if (std::isinf(lp) && lp < 0.0) continue;
        const TokenId tok = static_cast<TokenId>(v);
        tokens.push_back(tok);
        if (tok == scorer.eos_id()) {
            Enumerated e{tokens, tokens, lp};
            e.tokens.pop_back();
            out.push_back(std::move(e));
        } else {
            enumerate_rec(scorer, next, tok, tokens, lp, max_len, out);
        }
        tokens.pop_back();
    }
}

std::vector<Enumerated> enumerate_top(const SequenceScorer& scorer,
                                      std::span<const TokenId> prompt, std::size_t top,
                                      std::size_t max_len) {
    std::vector<Enumerated> all;
    std::vector<TokenId> tokens;
    enumerate_rec(scorer, scorer.start(prompt), kSosId, tokens, 0.0, max_len, all);
    std::sort(all.begin(), all.end(), [](const Enumerated& a, const Enumerated& b) {
        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
        return a.full_tokens < b.full_tokens;
    });
    if (all.size() > top) all.resize(top);
    return all;
}

// Complete random probability table over every prefix shorter than depth.
// power > 1 sharpens the rows; width-limited beam search only tracks the
// true top-B when the distributions are peaked enough, so the exact-match
// oracle tests draw from the peaked family (verified for their seeds).
MockModel random_mock(std::mt19937_64& rng, std::size_t vocab, std::size_t depth,
                      TokenId eos, double power = 10.0) {
    MockModel mock(vocab, eos);
    std::uniform_real_distribution<double> dist(0.05, 1.0);
    std::vector<std::vector<TokenId>> frontier{{}};
    for (std::size_t d = 0; d < depth; ++d) {
        std::vector<std::vector<TokenId>> next_frontier;
        for (auto& prefix : frontier) {
            std::vector<double> probs(vocab);
            for (double& p : probs) p = std::pow(dist(rng), power);
            mock.set_row(prefix, probs);
            for (std::size_t v = 0; v < vocab; ++v) {
                if (eos >= 0 && static_cast<TokenId>(v) == eos) continue;
                auto child = prefix;
                child.push_back(static_cast<TokenId>(v));
                next_frontier.push_back(std::move(child));
            }
        }
        frontier = std::move(next_frontier);
    }
    return mock;
}

const std::vector<TokenId> kNoPrompt{};

}  // namespace

TEST_CASE("mock model fixture format") {
    std::istringstream in(
        "vocab 3\n"
        "- 0.2 0.5 0.3\n"
        "1 0.6 0.2 0.2\n");
    MockModel mock = MockModel::parse(in);
    CHECK(mock.vocab_size() == 3);
    CHECK(mock.eos_id() == -1);

    auto s0 = mock.start(kNoPrompt);
    auto [row, s1] = mock.step(s0, kSosId);
    CHECK(row[1] == doctest::Approx(std::log(0.5)));
    auto [row2, s2] = mock.step(s1, 1);
    CHECK(row2[0] == doctest::Approx(std::log(0.6)));
    // Missing prefix falls back to uniform.
    auto [row3, s3] = mock.step(s2, 0);
    CHECK(row3[2] == doctest::Approx(std::log(1.0 / 3.0)));

    std::istringstream with_eos("vocab 4\neos 3\n- 0.1 0.2 0.3 0.4\n");
    CHECK(MockModel::parse(with_eos).eos_id() == 3);

    std::istringstream bad("vocab 2\n- 0.5\n");
    CHECK_THROWS_AS(MockModel::parse(bad), DataError);
}

TEST_CASE("greedy decode") {
    MockModel mock(3, -1);
    mock.set_row({}, {0.1, 0.6, 0.3});
    mock.set_row({1}, {0.5, 0.2, 0.3});
    const auto seq = greedy_decode(mock, kNoPrompt, 2);
    CHECK(seq == std::vector<TokenId>{1, 0});
    CHECK(greedy_decode(mock, kNoPrompt, 2) == seq);  // deterministic

    SUBCASE("argmax ties go to the lowest id") {
        MockModel tie(3, -1);
        tie.set_row({}, {0.4, 0.4, 0.2});
        CHECK(greedy_decode(tie, kNoPrompt, 1) == std::vector<TokenId>{0});
    }
    SUBCASE("EOS stops immediately") {
        MockModel eager(3, 2);
        eager.set_row({}, {0.2, 0.2, 0.6});
        CHECK(greedy_decode(eager, kNoPrompt, 5).empty());
    }
    SUBCASE("matches beam search with B=1") {
        std::mt19937_64 rng(17);
        for (int rep = 0; rep < 10; ++rep) {
            MockModel m = random_mock(rng, 4, 3, rep % 2 == 0 ? 3 : -1);
            DecodeConfig cfg;
            cfg.beam_width = 1;
            cfg.group_count = 1;
            cfg.max_len = 3;
            const auto beams = beam_search(m, kNoPrompt, cfg);
            REQUIRE(beams.size() == 1);
            CHECK(beams[0].token_ids == greedy_decode(m, kNoPrompt, 3));
        }
    }
}

TEST_CASE("beam search equals the exhaustive oracle") {
    std::mt19937_64 rng(13);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t vocab = 3 + rng() % 4;       // 3..6
        const std::size_t max_len = 2 + rng() % 3;     // 2..4
        const std::size_t beam_width = 1 + rng() % 4;  // 1..4
        const bool with_eos = rep % 2 == 0;
        const TokenId eos = with_eos ? static_cast<TokenId>(vocab - 1) : -1;
        CAPTURE(rep); CAPTURE(vocab); CAPTURE(max_len); CAPTURE(beam_width);

        MockModel mock = random_mock(rng, vocab, max_len, eos);
        DecodeConfig cfg;
        cfg.beam_width = beam_width;
        cfg.group_count = 1;
        cfg.max_len = max_len;
        const auto beams = beam_search(mock, kNoPrompt, cfg);
        const auto expected = enumerate_top(mock, kNoPrompt, beam_width, max_len);

        REQUIRE(beams.size() == expected.size());
        for (std::size_t i = 0; i < beams.size(); ++i) {
            CHECK(beams[i].token_ids == expected[i].tokens);
            CHECK(beams[i].log_prob == doctest::Approx(expected[i].log_prob).epsilon(1e-12));
        }
        // Eq-style distinctness of stored beams.
        for (std::size_t i = 0; i < beams.size(); ++i) {
            for (std::size_t j = i + 1; j < beams.size(); ++j) {
                CHECK((beams[i].token_ids != beams[j].token_ids ||
                       beams[i].finished != beams[j].finished));
            }
        }
        for (const auto& beam : beams) CHECK(beam.log_prob <= 1e-12);
    }
}

TEST_CASE("beam scores are consistent with enumeration on flat mocks") {
    // Flat distributions can make width-limited search miss the true
    // top-B, but every returned beam must still be scored exactly and
    // never beat the true optimum.
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 30; ++rep) {
        const std::size_t vocab = 3 + rng() % 4;
        const std::size_t max_len = 2 + rng() % 3;
        const TokenId eos = rep % 2 == 0 ? static_cast<TokenId>(vocab - 1) : -1;
        MockModel mock = random_mock(rng, vocab, max_len, eos, 1.0);

        DecodeConfig cfg;
        cfg.beam_width = 1 + rng() % 4;
        cfg.group_count = 1;
        cfg.max_len = max_len;
        const auto beams = beam_search(mock, kNoPrompt, cfg);

        std::vector<Enumerated> all;
        std::vector<TokenId> tokens;
        enumerate_rec(mock, mock.start(kNoPrompt), kSosId, tokens, 0.0, max_len, all);
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& e : all) best = std::max(best, e.log_prob);

        for (const auto& beam : beams) {
            auto full = beam.token_ids;
            if (beam.finished) full.push_back(eos);
            bool found = false;
            for (const auto& e : all) {
                if (e.full_tokens == full) {
                    CHECK(beam.log_prob == doctest::Approx(e.log_prob).epsilon(1e-12));
                    found = true;
                }
            }
            CHECK(found);
            CHECK(beam.log_prob <= best + 1e-12);
        }
    }
}

TEST_CASE("diverse beam search reductions") {
    std::mt19937_64 rng(555);
    for (int rep = 0; rep < 15; ++rep) {
        MockModel mock = random_mock(rng, 4, 3, rep % 3 == 0 ? 3 : -1);
        DecodeConfig bs_cfg;
        bs_cfg.beam_width = 3;
        bs_cfg.group_count = 1;
        bs_cfg.max_len = 3;
        const auto bs = beam_search(mock, kNoPrompt, bs_cfg);

        TokenAffectFn affect = [](TokenId) { return VadVector{5, 1, 5}; };
        for (auto metric : {DiversityMetric::HAMMING, DiversityMetric::WL_AFFECT,
                            DiversityMetric::SL_AFFECT}) {
            // G=1: no previous groups, any metric degenerates to BS.
            DecodeConfig g1 = bs_cfg;
            g1.metric = metric;
            g1.diversity_strength = 0.7;
            const auto dbs1 = diverse_beam_search(mock, kNoPrompt, g1, affect);
            REQUIRE(dbs1.size() == bs.size());
            for (std::size_t i = 0; i < bs.size(); ++i) {
                CHECK(dbs1[i].token_ids == bs[i].token_ids);
                CHECK(dbs1[i].log_prob == doctest::Approx(bs[i].log_prob));
            }
        }
        // lambda_g = 0 with G groups: each group independently runs width-B/G BS.
        DecodeConfig zero = bs_cfg;
        zero.group_count = 3;
        zero.metric = DiversityMetric::HAMMING;
        zero.diversity_strength = 0.0;
        const auto dbs0 = diverse_beam_search(mock, kNoPrompt, zero, affect);
        DecodeConfig narrow = bs_cfg;
        narrow.beam_width = 1;
        const auto bs1 = beam_search(mock, kNoPrompt, narrow);
        for (const auto& beam : dbs0) {
            CHECK(beam.token_ids == bs1[0].token_ids);
        }
    }
}

TEST_CASE("hamming DBS follows the doubly-greedy hand trace") {
    // vocab 4, no EOS, two steps, lambda_g = 0.5, G = B = 3.
    MockModel mock(4, -1);
    mock.set_row({}, {0.4, 0.3, 0.2, 0.1});
    mock.set_row({0}, {0.1, 0.2, 0.3, 0.4});
    mock.set_row({1}, {0.25, 0.25, 0.25, 0.25});

    DecodeConfig cfg;
    cfg.beam_width = 3;
    cfg.group_count = 3;
    cfg.diversity_strength = 0.5;
    cfg.max_len = 2;
    cfg.metric = DiversityMetric::HAMMING;
    const auto beams = diverse_beam_search(mock, kNoPrompt, cfg, nullptr);

    // Hand trace: t=1 picks 0 / 1 / 0 across the groups; t=2 extends to
    // [0,3], [1,0], [0,2]; ranking by raw log-prob.
    REQUIRE(beams.size() == 3);
    CHECK(beams[0].token_ids == std::vector<TokenId>{0, 3});
    CHECK(beams[0].log_prob == doctest::Approx(std::log(0.4 * 0.4)));
    CHECK(beams[1].token_ids == std::vector<TokenId>{0, 2});
    CHECK(beams[1].log_prob == doctest::Approx(std::log(0.4 * 0.3)));
    CHECK(beams[2].token_ids == std::vector<TokenId>{1, 0});
    CHECK(beams[2].log_prob == doctest::Approx(std::log(0.3 * 0.25)));
}

TEST_CASE("dissimilarity metrics") {
    const auto lex = fixture();

    SUBCASE("hamming counts matches") {
        CHECK(delta_hamming(2, {}) == 0.0);
        const std::vector<TokenId> prev{2, 5, 2};
        CHECK(delta_hamming(2, prev) == -2.0);
        CHECK(delta_hamming(7, prev) == 0.0);
    }
    SUBCASE("word-level affect") {
        CHECK(delta_wl_affect("ecstatic", std::vector<std::string>{}, lex) == 0.0);
        const std::vector<std::string> same{"ecstatic"};
        CHECK(delta_wl_affect("ecstatic", same, lex) == doctest::Approx(-1.0));
        const std::vector<std::string> prev{"bored"};
        const double expected =
            -cosine_sim(VadVector{6.45, 6.95, 5.63}, VadVector{2.95, 3.65, 4.96});
        CHECK(delta_wl_affect("ecstatic", prev, lex) == doctest::Approx(expected));
        CHECK(delta_wl_affect("ecstatic", prev, lex) == doctest::Approx(-0.9604).epsilon(1e-3));
    }
    SUBCASE("sentence-level affect") {
        CHECK(delta_sl_affect(VadVector{1, 2, 3}, {}) == 0.0);
        const std::vector<std::string> prefix{"ecstatic", "bored"};
        const std::vector<std::vector<std::string>> identical{{"ecstatic", "bored"}};
        CHECK(delta_sl_affect(prefix, identical, lex) == doctest::Approx(-1.0));
        const std::vector<std::vector<std::string>> other{{"mother", "granny"}};
        const double expected = -cosine_sim(lex.affect_sum(prefix),
                                            lex.affect_sum(other[0]));
        CHECK(delta_sl_affect(prefix, other, lex) == doctest::Approx(expected));

        // Bounded below by the number of previous beams for nonnegative vectors.
        const std::vector<std::vector<std::string>> many{
            {"mother"}, {"hate"}, {"sword", "table"}};
        const double d = delta_sl_affect(prefix, many, lex);
        CHECK(d <= 0.0);
        CHECK(d >= -3.0);
    }
}

TEST_CASE("psi bookkeeping matches recomputation") {
    const auto lex = fixture();
    std::vector<std::vector<std::string>> seqs{
        {"hate", "love", "bored", "ecstatic", "mother", "table", "ok"}};
    auto vocab = Vocabulary::build(seqs, 32);
    auto affect = make_token_affect(vocab, lex);

    std::mt19937_64 rng(31);
    for (int rep = 0; rep < 10; ++rep) {
        MockModel mock = random_mock(rng, vocab.size(), 3, kEosId);
        DecodeConfig cfg;
        cfg.beam_width = 4;
        cfg.group_count = 4;
        cfg.max_len = 3;
        cfg.metric = DiversityMetric::SL_AFFECT;
        const auto beams = diverse_beam_search(mock, kNoPrompt, cfg, affect);
        for (const auto& beam : beams) {
            const auto tokens = vocab.decode(beam.token_ids);
            CHECK(beam.psi == lex.affect_sum(tokens));
        }
    }
}

TEST_CASE("config validation") {
    MockModel mock(4, -1);
    DecodeConfig cfg;
    cfg.beam_width = 4;
    cfg.group_count = 3;
    CHECK_THROWS_AS(diverse_beam_search(mock, kNoPrompt, cfg, nullptr), ConfigError);
    cfg.group_count = 2;
    cfg.metric = DiversityMetric::SL_AFFECT;
    CHECK_THROWS_AS(diverse_beam_search(mock, kNoPrompt, cfg, nullptr), ConfigError);
}
