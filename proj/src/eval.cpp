#include "afgn/eval.hpp"

#include <set>

#include "afgn/errors.hpp"
#include "afgn/vad.hpp"

namespace afgn {

double affect_content_score(std::span<const std::string> tokens, const Lexicon& lexicon) {
    if (tokens.empty()) throw ConfigError("affect_content_score: empty token sequence");
    double total = 0.0;
    for (const auto& tok : tokens) {
        total += affect_distance(lexicon.w2av(tok), kNeutralVad);
    }
    return total / static_cast<double>(tokens.size());
}

DiversityReport affect_diversity_report(const std::vector<std::vector<std::string>>& beams,
                                        const Lexicon& lexicon) {
    if (beams.size() < 2) {
        throw ConfigError("affect_diversity_report: need at least 2 beams");
    }
    DiversityReport report;
    report.beam_count = beams.size();

    std::vector<VadVector> means;
    means.reserve(beams.size());
    for (const auto& beam : beams) {
        const double n = static_cast<double>(std::max<std::size_t>(1, beam.size()));
        means.push_back(lexicon.affect_sum(beam) / n);
    }
    std::size_t pair_count = 0;
    for (std::size_t i = 0; i < means.size(); ++i) {
        for (std::size_t j = i + 1; j < means.size(); ++j) {
            report.mean_pairwise_affect_distance += affect_distance(means[i], means[j]);
            report.mean_pairwise_cosine += cosine_sim(means[i], means[j]);
            ++pair_count;
        }
    }
    report.mean_pairwise_affect_distance /= static_cast<double>(pair_count);
    report.mean_pairwise_cosine /= static_cast<double>(pair_count);

    for (int n = 1; n <= 2; ++n) {
        std::set<std::vector<std::string>> unique;
        std::size_t total = 0;
        for (const auto& beam : beams) {
            if (beam.size() < static_cast<std::size_t>(n)) continue;
            for (std::size_t i = 0; i + n <= beam.size(); ++i) {
                unique.insert({beam.begin() + i, beam.begin() + i + n});
                ++total;
            }
        }
        const double ratio =
            total == 0 ? 0.0 : static_cast<double>(unique.size()) / static_cast<double>(total);
        (n == 1 ? report.distinct_1 : report.distinct_2) = ratio;
    }
    return report;
}

std::vector<EvalRow> corpus_eval(const Seq2SeqModel& model,
                                 const std::vector<std::vector<TokenId>>& prompts,
                                 const std::vector<NamedDecodeConfig>& configs,
                                 const Lexicon& lexicon) {
    if (prompts.empty()) throw DataError("corpus_eval: no prompts");

    const ModelScorer scorer(model);
    const auto token_affect = make_token_affect(model.vocab(), lexicon);

    std::vector<EvalRow> rows;
    for (const auto& [name, config] : configs) {
        EvalRow row;
        row.config_name = name;
        std::size_t diversity_prompts = 0;
        for (const auto& prompt : prompts) {
            auto results = config.metric == DiversityMetric::NONE
                               ? beam_search(scorer, prompt, config)
                               : diverse_beam_search(scorer, prompt, config, token_affect);

            std::vector<std::vector<std::string>> beams;
            double content = 0.0;
            std::size_t scored = 0;
            for (const auto& result : results) {
                auto tokens = model.vocab().decode(result.token_ids);
                if (!tokens.empty()) {
                    content += affect_content_score(tokens, lexicon);
                    ++scored;
                }
                beams.push_back(std::move(tokens));
            }
            row.mean_affect_content += scored == 0 ? 0.0 : content / static_cast<double>(scored);
            if (beams.size() >= 2) {
                const auto report = affect_diversity_report(beams, lexicon);
                row.diversity.mean_pairwise_affect_distance +=
                    report.mean_pairwise_affect_distance;
                row.diversity.mean_pairwise_cosine += report.mean_pairwise_cosine;
                row.diversity.distinct_1 += report.distinct_1;
                row.diversity.distinct_2 += report.distinct_2;
                ++diversity_prompts;
            }
        }
        const double np = static_cast<double>(prompts.size());
        row.prompt_count = prompts.size();
        row.mean_affect_content /= np;
        if (diversity_prompts > 0) {
            const double nd = static_cast<double>(diversity_prompts);
            row.diversity.mean_pairwise_affect_distance /= nd;
            row.diversity.mean_pairwise_cosine /= nd;
            row.diversity.distinct_1 /= nd;
            row.diversity.distinct_2 /= nd;
            row.diversity.beam_count = config.beam_width;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_eval_tsv(std::ostream& out, const std::vector<EvalRow>& rows) {
    out << "config\tprompts\tmean_affect_content\tmean_pairwise_affect_distance\t"
           "mean_pairwise_cosine\tdistinct_1\tdistinct_2\n";
    for (const auto& row : rows) {
        out << row.config_name << '\t' << row.prompt_count << '\t' << row.mean_affect_content
            << '\t' << row.diversity.mean_pairwise_affect_distance << '\t'
            << row.diversity.mean_pairwise_cosine << '\t' << row.diversity.distinct_1 << '\t'
            << row.diversity.distinct_2 << '\n';
    }
}

}  // namespace afgn
