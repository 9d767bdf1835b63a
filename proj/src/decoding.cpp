#include "afgn/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "afgn/errors.hpp"

namespace afgn {
namespace {

struct ModelState {
    DecoderState state;
};

struct MockState {
    std::vector<TokenId> prefix;  // response tokens consumed so far
    bool started = false;         // first step consumes SOS, not a response token
};

// One live hypothesis. tokens includes the terminating EOS; psi excludes it.
struct Beam {
    std::vector<TokenId> tokens;
    double log_prob = 0.0;
    VadVector psi{0.0, 0.0, 0.0};
    bool finished = false;
    SequenceScorer::State state;      // after consuming all tokens
    std::vector<double> next_row;     // log-probs for the next extension
};

bool lex_less(const std::vector<TokenId>& a, const std::vector<TokenId>& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

Beam make_root(const SequenceScorer& scorer, std::span<const TokenId> prompt) {
    Beam root;
    auto start = scorer.start(prompt);
    auto [row, state] = scorer.step(start, kSosId);
    root.next_row = std::move(row);
    root.state = std::move(state);
    return root;
}

}  // namespace

SequenceScorer::State ModelScorer::start(std::span<const TokenId> prompt) const {
    return std::make_shared<ModelState>(ModelState{model_.encode(prompt)});
}

std::pair<std::vector<double>, SequenceScorer::State> ModelScorer::step(
    const State& state, TokenId prev_token) const {
    const auto* ms = static_cast<const ModelState*>(state.get());
    auto [log_probs, next] = model_.decode_step(ms->state, prev_token);
    return {log_probs.values(), std::make_shared<ModelState>(ModelState{next})};
}

void MockModel::set_row(std::vector<TokenId> prefix, std::vector<double> probabilities) {
    if (probabilities.size() != vocab_) {
        throw ConfigError("mock model: row needs " + std::to_string(vocab_) +
                          " probabilities, got " + std::to_string(probabilities.size()));
    }
    double total = 0.0;
    for (double p : probabilities) {
        if (p < 0.0) throw ConfigError("mock model: negative probability");
        total += p;
    }
    if (total <= 0.0) throw ConfigError("mock model: probability row sums to zero");
    for (double& p : probabilities) p /= total;
    rows_[std::move(prefix)] = std::move(probabilities);
}

MockModel MockModel::parse(std::istream& in) {
    std::string word;
    std::size_t vocab = 0;
    TokenId eos = -1;
    if (!(in >> word) || word != "vocab" || !(in >> vocab) || vocab == 0) {
        throw DataError("mock model: expected 'vocab N' header");
    }
    std::streampos before = in.tellg();
    if (in >> word && word == "eos") {
        long long e;
        if (!(in >> e)) throw DataError("mock model: bad 'eos K' header");
        eos = static_cast<TokenId>(e);
    } else {
        in.clear();
        in.seekg(before);
    }

    MockModel mock(vocab, eos);
    std::string line;
    std::getline(in, line);  // finish header line
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string prefix_field;
        if (!(ss >> prefix_field)) continue;
        std::vector<TokenId> prefix;
        if (prefix_field != "-") {
            std::istringstream ps(prefix_field);
            std::string id;
            while (std::getline(ps, id, ',')) prefix.push_back(std::stoi(id));
        }
        std::vector<double> probs;
        double p;
        while (ss >> p) probs.push_back(p);
        if (probs.size() != vocab) {
            throw DataError("mock model: line " + std::to_string(line_no) + " has " +
                            std::to_string(probs.size()) + " probabilities, expected " +
                            std::to_string(vocab));
        }
        mock.set_row(std::move(prefix), std::move(probs));
    }
    return mock;
}

MockModel MockModel::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("mock model: cannot open '" + path + "'");
    return parse(in);
}

SequenceScorer::State MockModel::start(std::span<const TokenId>) const {
    return std::make_shared<MockState>();
}

std::pair<std::vector<double>, SequenceScorer::State> MockModel::step(
    const State& state, TokenId prev_token) const {
    const auto* ms = static_cast<const MockState*>(state.get());
    auto next = std::make_shared<MockState>(*ms);
    if (next->started) {
        next->prefix.push_back(prev_token);
    } else {
        next->started = true;
    }

    std::vector<double> log_row(vocab_);
    auto it = rows_.find(next->prefix);
    if (it == rows_.end()) {
        const double uniform = -std::log(static_cast<double>(vocab_));
        std::fill(log_row.begin(), log_row.end(), uniform);
    } else {
        for (std::size_t i = 0; i < vocab_; ++i) {
            log_row[i] = it->second[i] > 0.0 ? std::log(it->second[i])
                                             : -std::numeric_limits<double>::infinity();
        }
    }
    return {std::move(log_row), std::move(next)};
}

const char* diversity_metric_name(DiversityMetric metric) {
    switch (metric) {
        case DiversityMetric::NONE: return "none";
        case DiversityMetric::HAMMING: return "hamming";
        case DiversityMetric::WL_AFFECT: return "wl-affect";
        case DiversityMetric::SL_AFFECT: return "sl-affect";
    }
    return "?";
}

DiversityMetric diversity_metric_from_name(const std::string& name) {
    if (name == "none") return DiversityMetric::NONE;
    if (name == "hamming") return DiversityMetric::HAMMING;
    if (name == "wl-affect") return DiversityMetric::WL_AFFECT;
    if (name == "sl-affect") return DiversityMetric::SL_AFFECT;
    throw ConfigError("unknown diversity metric '" + name + "'");
}

TokenAffectFn make_token_affect(const Vocabulary& vocab, const Lexicon& lexicon) {
    // Precomputed per id; the table is tiny next to the model.
    std::vector<VadVector> table(vocab.size());
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        table[i] = lexicon.w2av(vocab.token(static_cast<TokenId>(i)));
    }
    return [table = std::move(table)](TokenId id) {
        return table.at(static_cast<std::size_t>(id));
    };
}

std::vector<TokenId> greedy_decode(const SequenceScorer& scorer,
                                   std::span<const TokenId> prompt, std::size_t max_len) {
    std::vector<TokenId> tokens;
    auto state = scorer.start(prompt);
    TokenId prev = kSosId;
    for (std::size_t t = 0; t < max_len; ++t) {
        auto [row, next] = scorer.step(state, prev);
        std::size_t best = 0;
        for (std::size_t v = 1; v < row.size(); ++v) {
            if (row[v] > row[best]) best = v;
        }
        const TokenId chosen = static_cast<TokenId>(best);
        if (chosen == scorer.eos_id()) break;
        tokens.push_back(chosen);
        state = std::move(next);
        prev = chosen;
    }
    return tokens;
}

double delta_hamming(TokenId candidate, std::span<const TokenId> previous_choices) {
    double count = 0.0;
    for (TokenId t : previous_choices) {
        if (t == candidate) count += 1.0;
    }
    return -count;
}

double delta_wl_affect(const VadVector& candidate, std::span<const VadVector> previous) {
    double total = 0.0;
    for (const auto& p : previous) total += cosine_sim(candidate, p);
    return -total;
}

double delta_wl_affect(const std::string& candidate,
                       std::span<const std::string> previous_tokens, const Lexicon& lexicon) {
    std::vector<VadVector> prev;
    prev.reserve(previous_tokens.size());
    for (const auto& tok : previous_tokens) prev.push_back(lexicon.w2av(tok));
    return delta_wl_affect(lexicon.w2av(candidate), prev);
}

double delta_sl_affect(const VadVector& candidate_psi,
                       std::span<const VadVector> previous_psis) {
    double total = 0.0;
    for (const auto& p : previous_psis) total += cosine_sim(candidate_psi, p);
    return -total;
}

double delta_sl_affect(std::span<const std::string> candidate_prefix,
                       std::span<const std::vector<std::string>> previous_beams,
                       const Lexicon& lexicon) {
    std::vector<VadVector> prev;
    prev.reserve(previous_beams.size());
    for (const auto& beam : previous_beams) prev.push_back(lexicon.affect_sum(beam));
    return delta_sl_affect(lexicon.affect_sum(candidate_prefix), prev);
}

namespace {

struct Candidate {
    std::size_t parent;  // index into the group's beam list
    TokenId token = -1;  // -1: carry a finished beam unchanged
    double raw_score = 0.0;
    double selection_score = 0.0;
    std::vector<TokenId> tokens;  // resulting sequence
};

std::vector<ScoredSequence> run_search(const SequenceScorer& scorer,
                                       std::span<const TokenId> prompt,
                                       const DecodeConfig& config,
                                       const TokenAffectFn& token_affect) {
    if (config.beam_width < 1) throw ConfigError("decode: beam_width must be >= 1");
    if (config.group_count < 1 || config.beam_width % config.group_count != 0) {
        throw ConfigError("decode: group_count " + std::to_string(config.group_count) +
                          " must divide beam_width " + std::to_string(config.beam_width));
    }
    const bool needs_affect = config.metric == DiversityMetric::WL_AFFECT ||
                              config.metric == DiversityMetric::SL_AFFECT;
    if (needs_affect && !token_affect) {
        throw ConfigError("decode: affect metric requires a token affect function");
    }

    const std::size_t groups = config.group_count;
    const std::size_t per_group = config.beam_width / groups;
    const TokenId eos = scorer.eos_id();

    std::vector<std::vector<Beam>> beams(groups);
    {
        Beam root = make_root(scorer, prompt);
        for (auto& group : beams) group.push_back(root);
    }

    for (std::size_t t = 0; t < config.max_len; ++t) {
        // Step-t commitments of already-processed groups, used by later
        // groups' dissimilarity terms. Beams finished before t contribute
        // nothing.
        std::vector<TokenId> fixed_tokens;
        std::vector<VadVector> fixed_psis;

        for (std::size_t g = 0; g < groups; ++g) {
            std::vector<Candidate> candidates;
            for (std::size_t b = 0; b < beams[g].size(); ++b) {
                const Beam& beam = beams[g][b];
                if (beam.finished) {
                    Candidate keep;
                    keep.parent = b;
                    keep.raw_score = beam.log_prob;
                    keep.selection_score = beam.log_prob;
                    keep.tokens = beam.tokens;
                    candidates.push_back(std::move(keep));
                    continue;
                }
                for (std::size_t v = 0; v < beam.next_row.size(); ++v) {
                    const double lp = beam.log_prob + beam.next_row[v];
                    if (std::isinf(lp) && lp < 0.0) continue;
                    Candidate cand;
                    cand.parent = b;
                    cand.token = static_cast<TokenId>(v);
                    cand.raw_score = lp;
                    double delta = 0.0;
                    if (config.diversity_strength > 0.0 && g > 0) {
                        switch (config.metric) {
                            case DiversityMetric::NONE:
                                break;
                            case DiversityMetric::HAMMING:
                                delta = delta_hamming(cand.token, fixed_tokens);
                                break;
                            case DiversityMetric::WL_AFFECT:
                                delta = delta_wl_affect(token_affect(cand.token), fixed_psis);
                                break;
                            case DiversityMetric::SL_AFFECT: {
                                VadVector psi = beam.psi;
                                if (cand.token != eos) psi = psi + token_affect(cand.token);
                                delta = delta_sl_affect(psi, fixed_psis);
                                break;
                            }
                        }
                    }
                    cand.selection_score = lp + config.diversity_strength * delta;
                    cand.tokens = beam.tokens;
                    cand.tokens.push_back(cand.token);
                    candidates.push_back(std::move(cand));
                }
            }

            std::sort(candidates.begin(), candidates.end(),
                      [](const Candidate& a, const Candidate& b) {
                          if (a.selection_score != b.selection_score) {
                              return a.selection_score > b.selection_score;
                          }
                          return lex_less(a.tokens, b.tokens);
                      });

            std::vector<Beam> selected;
            std::vector<TokenId> group_tokens;
            std::vector<VadVector> group_psis;
            for (const Candidate& cand : candidates) {
                if (selected.size() == per_group) break;
                const Beam& parent = beams[g][cand.parent];
                if (cand.token < 0) {
                    selected.push_back(parent);
                    continue;
                }
                Beam child;
                child.tokens = cand.tokens;
                child.log_prob = cand.raw_score;
                child.psi = parent.psi;
                if (cand.token == eos) {
                    child.finished = true;
                    child.state = parent.state;
                } else {
                    child.psi = child.psi + (token_affect ? token_affect(cand.token)
                                                          : VadVector{0.0, 0.0, 0.0});
                    auto [row, state] = scorer.step(parent.state, cand.token);
                    child.next_row = std::move(row);
                    child.state = std::move(state);
                }
                group_tokens.push_back(cand.token);
                group_psis.push_back(child.finished ? parent.psi : child.psi);
                selected.push_back(std::move(child));
            }
            if (!selected.empty()) beams[g] = std::move(selected);

            fixed_tokens.insert(fixed_tokens.end(), group_tokens.begin(), group_tokens.end());
            fixed_psis.insert(fixed_psis.end(), group_psis.begin(), group_psis.end());
        }
    }

    struct Ranked {
        ScoredSequence seq;
        double rank_score;
        std::vector<TokenId> full;
    };
    std::vector<Ranked> ranked;
    for (std::size_t g = 0; g < groups; ++g) {
        for (const Beam& beam : beams[g]) {
            Ranked r;
            r.full = beam.tokens;
            r.seq.token_ids = beam.tokens;
            if (beam.finished) r.seq.token_ids.pop_back();  // strip EOS
            r.seq.log_prob = beam.log_prob;
            r.seq.finished = beam.finished;
            r.seq.group = g;
            r.seq.psi = beam.psi;
            const double steps = static_cast<double>(std::max<std::size_t>(1, beam.tokens.size()));
            r.rank_score = config.length_normalize ? beam.log_prob / steps : beam.log_prob;
            ranked.push_back(std::move(r));
        }
    }
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        if (a.rank_score != b.rank_score) return a.rank_score > b.rank_score;
        return lex_less(a.full, b.full);
    });

    std::vector<ScoredSequence> out;
    out.reserve(ranked.size());
    for (auto& r : ranked) out.push_back(std::move(r.seq));
    return out;
}

}  // namespace

std::vector<ScoredSequence> beam_search(const SequenceScorer& scorer,
                                        std::span<const TokenId> prompt,
                                        const DecodeConfig& config) {
    DecodeConfig bs = config;
    bs.group_count = 1;
    bs.metric = DiversityMetric::NONE;
    bs.diversity_strength = 0.0;
    return run_search(scorer, prompt, bs, nullptr);
}

std::vector<ScoredSequence> diverse_beam_search(const SequenceScorer& scorer,
                                                std::span<const TokenId> prompt,
                                                const DecodeConfig& config,
                                                const TokenAffectFn& token_affect) {
    return run_search(scorer, prompt, config, token_affect);
}

}  // namespace afgn
