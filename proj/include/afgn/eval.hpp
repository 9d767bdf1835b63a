#pragma once

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "afgn/decoding.hpp"
#include "afgn/lexicon.hpp"

namespace afgn {

// Mean distance of the tokens' affect vectors from the neutral vector.
// Zero iff every token maps to neutral. Throws ConfigError when empty.
double affect_content_score(std::span<const std::string> tokens, const Lexicon& lexicon);

struct DiversityReport {
    double mean_pairwise_affect_distance = 0.0;
    double mean_pairwise_cosine = 0.0;
    double distinct_1 = 0.0;
    double distinct_2 = 0.0;
    std::size_t beam_count = 0;
};

// Pairwise affect statistics over the beams' mean-Psi vectors plus pooled
// distinct-n ratios. Needs at least two beams.
DiversityReport affect_diversity_report(const std::vector<std::vector<std::string>>& beams,
                                        const Lexicon& lexicon);

struct EvalRow {
    std::string config_name;
    std::size_t prompt_count = 0;
    double mean_affect_content = 0.0;
    DiversityReport diversity;  // fields averaged over prompts
};

struct NamedDecodeConfig {
    std::string name;
    DecodeConfig config;
};

// Decodes every prompt under every config and aggregates the affect
// metrics; one row per config, deterministic.
std::vector<EvalRow> corpus_eval(const Seq2SeqModel& model,
                                 const std::vector<std::vector<TokenId>>& prompts,
                                 const std::vector<NamedDecodeConfig>& configs,
                                 const Lexicon& lexicon);

// TSV with a header line, one row per config.
void write_eval_tsv(std::ostream& out, const std::vector<EvalRow>& rows);

}  // namespace afgn
