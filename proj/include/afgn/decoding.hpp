#pragma once

#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "afgn/corpus.hpp"
#include "afgn/lexicon.hpp"
#include "afgn/model.hpp"
#include "afgn/vad.hpp"

namespace afgn {

// Anything that can score next tokens given a prompt: the trained model or
// a table-driven mock used by oracle tests.
class SequenceScorer {
  public:
    using State = std::shared_ptr<const void>;

    virtual ~SequenceScorer() = default;
    virtual State start(std::span<const TokenId> prompt) const = 0;
    // Returns the log-probability row over the vocabulary and the state
    // after consuming prev_token.
    virtual std::pair<std::vector<double>, State> step(const State& state,
                                                       TokenId prev_token) const = 0;
    virtual std::size_t vocab_size() const = 0;
    // Token that terminates a beam; negative means no terminator.
    virtual TokenId eos_id() const { return kEosId; }
};

class ModelScorer final : public SequenceScorer {
  public:
    explicit ModelScorer(const Seq2SeqModel& model) : model_(model) {}
    State start(std::span<const TokenId> prompt) const override;
    std::pair<std::vector<double>, State> step(const State& state,
                                               TokenId prev_token) const override;
    std::size_t vocab_size() const override { return model_.config().vocab_size; }

  private:
    const Seq2SeqModel& model_;
};

// Table-driven scorer: response prefix -> next-token probability row.
// Prefixes absent from the table fall back to a uniform row.
class MockModel final : public SequenceScorer {
  public:
    MockModel(std::size_t vocab, TokenId eos = -1) : vocab_(vocab), eos_(eos) {}

    void set_row(std::vector<TokenId> prefix, std::vector<double> probabilities);

    // Text fixture: "vocab N" and optional "eos K" header lines, then one
    // line per table row: comma-separated prefix ids (or "-" for the empty
    // prefix), whitespace, N probabilities.
    static MockModel parse(std::istream& in);
    static MockModel parse_file(const std::string& path);

    State start(std::span<const TokenId> prompt) const override;
    std::pair<std::vector<double>, State> step(const State& state,
                                               TokenId prev_token) const override;
    std::size_t vocab_size() const override { return vocab_; }
    TokenId eos_id() const override { return eos_; }

  private:
    std::size_t vocab_;
    TokenId eos_;
    std::map<std::vector<TokenId>, std::vector<double>> rows_;
};

enum class DiversityMetric { NONE, HAMMING, WL_AFFECT, SL_AFFECT };

const char* diversity_metric_name(DiversityMetric metric);
DiversityMetric diversity_metric_from_name(const std::string& name);

struct DecodeConfig {
    std::size_t beam_width = 3;
    std::size_t group_count = 3;      // must divide beam_width
    double diversity_strength = 0.7;  // lambda_g
    std::size_t max_len = 20;
    DiversityMetric metric = DiversityMetric::NONE;
    bool length_normalize = false;
};

struct ScoredSequence {
    std::vector<TokenId> token_ids;  // terminating EOS stripped
    double log_prob = 0.0;
    bool finished = false;
    std::size_t group = 0;
    VadVector psi{0.0, 0.0, 0.0};  // cumulative affect, zero without a token_affect
};

// Maps a token to its affect vector; decoding needs it for the affect
// diversity metrics and Psi bookkeeping.
using TokenAffectFn = std::function<VadVector(TokenId)>;

TokenAffectFn make_token_affect(const Vocabulary& vocab, const Lexicon& lexicon);

// Argmax decoding; ties go to the lowest token id.
std::vector<TokenId> greedy_decode(const SequenceScorer& scorer,
                                   std::span<const TokenId> prompt, std::size_t max_len);

// Standard beam search; ranking by total log-prob (mean per step when
// length_normalize), ties broken by lexicographically smaller sequence.
std::vector<ScoredSequence> beam_search(const SequenceScorer& scorer,
                                        std::span<const TokenId> prompt,
                                        const DecodeConfig& config);

// Doubly-greedy diverse beam search over group_count groups. Groups run in
// fixed order each step; group g's selection adds diversity_strength times
// the configured dissimilarity against groups 1..g-1. Final ranking is by
// raw log-prob. token_affect may be null for the Hamming metric.
std::vector<ScoredSequence> diverse_beam_search(const SequenceScorer& scorer,
                                                std::span<const TokenId> prompt,
                                                const DecodeConfig& config,
                                                const TokenAffectFn& token_affect);

// Dissimilarity primitives. All return 0 with no previous groups and are
// <= 0 for the affect variants on nonnegative vectors.
double delta_hamming(TokenId candidate, std::span<const TokenId> previous_choices);
double delta_wl_affect(const VadVector& candidate, std::span<const VadVector> previous);
double delta_wl_affect(const std::string& candidate,
                       std::span<const std::string> previous_tokens, const Lexicon& lexicon);
double delta_sl_affect(const VadVector& candidate_psi, std::span<const VadVector> previous_psis);
double delta_sl_affect(std::span<const std::string> candidate_prefix,
                       std::span<const std::vector<std::string>> previous_beams,
                       const Lexicon& lexicon);

}  // namespace afgn
