#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "afgn/corpus.hpp"
#include "afgn/decoding.hpp"
#include "afgn/errors.hpp"
#include "afgn/eval.hpp"
#include "afgn/lexicon.hpp"
#include "afgn/losses.hpp"
#include "afgn/model.hpp"

using namespace afgn;

namespace {

std::vector<std::string> read_lines(const std::string& path) {
    std::vector<std::string> lines;
    std::string line;
    if (path == "-") {
        while (std::getline(std::cin, line)) lines.push_back(line);
        return lines;
    }
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    return out;
}

Vocabulary vocab_from_pairs_file(const std::string& path, std::size_t max_size) {
    std::vector<std::vector<std::string>> sequences;
    for (const auto& line : read_lines(path)) {
        const auto tab = line.find('\t');
        if (tab == std::string::npos) continue;
        sequences.push_back(tokenize(line.substr(0, tab)));
        sequences.push_back(tokenize(line.substr(tab + 1)));
    }
    return Vocabulary::build(sequences, max_size);
}

// Tokenized, encoded prompts; blank or whitespace-only lines are dropped.
std::vector<std::vector<TokenId>> encode_prompts(const std::vector<std::string>& lines,
                                                 const Vocabulary& vocab) {
    std::vector<std::vector<TokenId>> prompts;
    for (const auto& line : lines) {
        auto tokens = tokenize(line);
        if (tokens.empty()) continue;
        prompts.push_back(vocab.encode(tokens));
    }
    if (prompts.empty()) throw DataError("no non-empty prompt lines");
    return prompts;
}

std::string join(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) out += ' ';
        out += tokens[i];
    }
    return out;
}

double default_lambda(LossKind kind) {
    switch (kind) {
        case LossKind::DMAX: return 0.4;
        case LossKind::DMIN:
        case LossKind::AC: return 0.5;
        case LossKind::XENT: break;
    }
    return 0.0;
}

struct DecodeFlags {
    std::size_t beam = 3;
    std::size_t groups = 3;
    double lambda_g = 0.7;
    std::size_t max_len = 20;
    std::string metric = "none";
    bool length_normalize = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--beam", beam, "beam width B")->capture_default_str();
        cmd->add_option("--groups", groups, "beam groups G; must divide B")
            ->capture_default_str();
        cmd->add_option("--lambda-g", lambda_g, "diversity strength")->capture_default_str();
        cmd->add_option("--max-len", max_len, "maximum response length")
            ->capture_default_str();
        cmd->add_option("--metric", metric, "diversity metric: none|hamming|wl-affect|sl-affect")
            ->capture_default_str();
        cmd->add_flag("--length-normalize", length_normalize,
                      "rank beams by per-step log-probability");
    }

    DecodeConfig config() const {
        DecodeConfig cfg;
        cfg.beam_width = beam;
        cfg.metric = diversity_metric_from_name(metric);
        cfg.group_count = cfg.metric == DiversityMetric::NONE ? 1 : groups;
        cfg.diversity_strength = lambda_g;
        cfg.max_len = max_len;
        cfg.length_normalize = length_normalize;
        return cfg;
    }
};

std::vector<ScoredSequence> run_decode(const SequenceScorer& scorer,
                                       const std::vector<TokenId>& prompt,
                                       const DecodeConfig& cfg,
                                       const TokenAffectFn& affect) {
    return cfg.metric == DiversityMetric::NONE ? beam_search(scorer, prompt, cfg)
                                               : diverse_beam_search(scorer, prompt, cfg, affect);
}

int cmd_prep_cornell(const std::string& lines_path, const std::string& convos_path,
                     const std::string& out_path) {
    const auto pairs = pair_cornell(lines_path, convos_path);
    auto out = open_output(out_path);
    for (auto [prompt, response] : pairs) {
        for (char& c : prompt) {
            if (c == '\t') c = ' ';
        }
        for (char& c : response) {
            if (c == '\t') c = ' ';
        }
        out << prompt << '\t' << response << '\n';
    }
    std::cerr << "wrote " << pairs.size() << " pairs to " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Affective neural response generation toolkit"};
    app.require_subcommand(1);
    app.set_config("--config-file", "",
                   "key=value config file; command-line flags take precedence");

    // prep-cornell
    auto* prep = app.add_subcommand(
        "prep-cornell", "Convert the Cornell Movie Dialogs corpus to a TSV pairs file");
    std::string prep_lines, prep_convos, prep_out;
    prep->add_option("--lines", prep_lines, "movie_lines.txt path")->required();
    prep->add_option("--conversations", prep_convos, "movie_conversations.txt path")
        ->required();
    prep->add_option("--out", prep_out, "output TSV path")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "Train a model on a TSV pairs file");
    std::string tr_lexicon, tr_pairs, tr_out, tr_log, tr_resume, tr_loss = "xent";
    std::size_t tr_vocab = 2000, tr_embed = 32, tr_hidden = 64, tr_max_len = 20;
    std::size_t tr_epochs = 10, tr_pretrain = 40, tr_batch = 64;
    double tr_lambda = -1.0, tr_lr = 1e-3, tr_clip = 5.0;
    std::uint64_t tr_seed = 0;
    bool tr_no_affect = false, tr_norm_affect = false;
    train_cmd->add_option("--lexicon", tr_lexicon, "affect lexicon CSV/TSV")->required();
    train_cmd->add_option("--pairs", tr_pairs, "prompt<TAB>response training file")
        ->required();
    train_cmd->add_option("--out", tr_out, "checkpoint output path")->required();
    train_cmd->add_option("--log", tr_log, "epoch log TSV path (default: stderr)");
    train_cmd->add_option("--resume", tr_resume,
                          "checkpoint to continue from; skips the XENT warmup");
    train_cmd->add_option("--loss", tr_loss, "xent|dmin|dmax|ac")->capture_default_str();
    train_cmd->add_option("--lambda", tr_lambda,
                          "affect weight (default per loss: dmin 0.5, dmax 0.4, ac 0.5)");
    train_cmd->add_option("--epochs", tr_epochs, "epochs of the configured loss")
        ->capture_default_str();
    train_cmd->add_option("--pretrain-epochs", tr_pretrain,
                          "XENT warmup epochs before an affective loss")
        ->capture_default_str();
    train_cmd->add_option("--vocab-size", tr_vocab, "vocabulary cap incl. reserved tokens")
        ->capture_default_str();
    train_cmd->add_option("--embed-dim", tr_embed, "embedding width")->capture_default_str();
    train_cmd->add_option("--hidden-dim", tr_hidden, "LSTM width")->capture_default_str();
    train_cmd->add_option("--max-len", tr_max_len, "sequence truncation length")
        ->capture_default_str();
    train_cmd->add_option("--lr", tr_lr, "Adam learning rate")->capture_default_str();
    train_cmd->add_option("--batch", tr_batch, "batch size")->capture_default_str();
    train_cmd->add_option("--seed", tr_seed, "RNG seed")->capture_default_str();
    train_cmd->add_option("--clip", tr_clip, "global gradient norm clip; 0 disables")
        ->capture_default_str();
    train_cmd->add_flag("--no-affect-input", tr_no_affect,
                        "drop the affect channel from the decoder input");
    train_cmd->add_flag("--normalize-affect", tr_norm_affect,
                        "divide per-step affect terms by response length");

    // decode
    auto* decode_cmd = app.add_subcommand("decode", "Batch-decode a prompts file");
    std::string dc_checkpoint, dc_lexicon, dc_prompts = "-", dc_out = "-", dc_mock;
    DecodeFlags dc_flags;
    decode_cmd->add_option("--checkpoint", dc_checkpoint, "model checkpoint");
    decode_cmd->add_option("--lexicon", dc_lexicon, "affect lexicon CSV/TSV");
    decode_cmd->add_option("--prompts", dc_prompts, "prompts file, one per line; - for stdin")
        ->capture_default_str();
    decode_cmd->add_option("--out", dc_out, "responses file; - for stdout")
        ->capture_default_str();
    decode_cmd->add_option("--mock", dc_mock,
                           "table-driven mock model file; prompts become token-id lines");
    dc_flags.attach(decode_cmd);

    // chat
    auto* chat_cmd = app.add_subcommand("chat", "Interactive prompt/response loop");
    std::string ch_checkpoint, ch_lexicon;
    bool ch_show_affect = false;
    DecodeFlags ch_flags;
    chat_cmd->add_option("--checkpoint", ch_checkpoint, "model checkpoint")->required();
    chat_cmd->add_option("--lexicon", ch_lexicon, "affect lexicon CSV/TSV")->required();
    chat_cmd->add_flag("--show-affect", ch_show_affect,
                       "print the response's mean VAD and affect content score");
    ch_flags.attach(chat_cmd);

    // affect-score
    auto* score_cmd = app.add_subcommand("affect-score", "Report VAD affect for text");
    std::string as_lexicon, as_file;
    std::vector<std::string> as_words;
    score_cmd->add_option("--lexicon", as_lexicon, "affect lexicon CSV/TSV")->required();
    score_cmd->add_option("--file", as_file, "score each line of this file");
    score_cmd->add_option("text", as_words, "text to score");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Affect metrics across decoding configs");
    std::string ev_checkpoint, ev_lexicon, ev_prompts, ev_out = "-";
    std::vector<std::string> ev_metrics;
    DecodeFlags ev_flags;
    eval_cmd->add_option("--checkpoint", ev_checkpoint, "model checkpoint")->required();
    eval_cmd->add_option("--lexicon", ev_lexicon, "affect lexicon CSV/TSV")->required();
    eval_cmd->add_option("--prompts", ev_prompts, "prompts file, one per line")->required();
    eval_cmd->add_option("--out", ev_out, "TSV output; - for stdout")->capture_default_str();
    eval_cmd
        ->add_option("--metrics", ev_metrics,
                     "metrics to compare (default: none hamming wl-affect sl-affect)")
        ->expected(-1);
    ev_flags.attach(eval_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (prep->parsed()) {
            return cmd_prep_cornell(prep_lines, prep_convos, prep_out);
        }

        if (train_cmd->parsed()) {
            const auto lexicon = Lexicon::load_file(tr_lexicon);
            const LossKind kind = loss_kind_from_name(tr_loss);
            if (tr_lambda < 0.0) tr_lambda = default_lambda(kind);

            ModelConfig mcfg;
            mcfg.vocab_size = tr_vocab;
            mcfg.embed_dim = tr_embed;
            mcfg.hidden_dim = tr_hidden;
            mcfg.use_affect_input = !tr_no_affect;
            mcfg.max_decode_len = tr_max_len;

            Seq2SeqModel model =
                tr_resume.empty()
                    ? Seq2SeqModel::init(mcfg, lexicon,
                                         vocab_from_pairs_file(tr_pairs, tr_vocab), tr_seed)
                    : Seq2SeqModel::load(tr_resume);
            const auto pairs = load_pairs_file(tr_pairs, model.vocab(), tr_max_len);

            TrainSchedule schedule;
            schedule.learning_rate = tr_lr;
            schedule.batch_size = tr_batch;
            schedule.seed = tr_seed;
            schedule.clip_norm = tr_clip;
            if (kind == LossKind::XENT) {
                schedule.phase1_epochs = tr_epochs;
                schedule.phase2_epochs = 0;
            } else {
                schedule.phase1_epochs = tr_resume.empty() ? tr_pretrain : 0;
                schedule.phase2_epochs = tr_epochs;
            }
            LossConfig lcfg{kind, tr_lambda, tr_norm_affect};

            std::ofstream log_file;
            std::ostream* log = &std::cerr;
            if (!tr_log.empty()) {
                log_file = open_output(tr_log);
                log = &log_file;
            }
            train(model, pairs, schedule, lcfg, lexicon, log);
            model.save(tr_out);
            std::cerr << "saved checkpoint to " << tr_out << "\n";
            return 0;
        }

        if (decode_cmd->parsed()) {
            const DecodeConfig cfg = dc_flags.config();
            const auto lines = read_lines(dc_prompts);
            std::ofstream out_file;
            std::ostream* out = &std::cout;
            if (dc_out != "-") {
                out_file = open_output(dc_out);
                out = &out_file;
            }

            if (!dc_mock.empty()) {
                if (cfg.metric == DiversityMetric::WL_AFFECT ||
                    cfg.metric == DiversityMetric::SL_AFFECT) {
                    throw ConfigError("mock mode supports metrics none and hamming only");
                }
                const MockModel mock = MockModel::parse_file(dc_mock);
                for (const auto& line : lines) {
                    std::istringstream ss(line);
                    std::vector<TokenId> prompt;
                    TokenId id;
                    while (ss >> id) prompt.push_back(id);
                    const auto results = run_decode(mock, prompt, cfg, nullptr);
                    for (std::size_t b = 0; b < results.size(); ++b) {
                        if (b > 0) *out << '\t';
                        for (std::size_t i = 0; i < results[b].token_ids.size(); ++i) {
                            if (i > 0) *out << ' ';
                            *out << results[b].token_ids[i];
                        }
                    }
                    *out << '\n';
                }
                return 0;
            }

            if (dc_checkpoint.empty()) throw ConfigError("decode needs --checkpoint or --mock");
            if (dc_lexicon.empty()) throw ConfigError("decode needs --lexicon");
            const auto lexicon = Lexicon::load_file(dc_lexicon);
            const auto model = Seq2SeqModel::load(dc_checkpoint);
            const ModelScorer scorer(model);
            const auto affect = make_token_affect(model.vocab(), lexicon);

            for (const auto& line : lines) {
                const auto tokens = tokenize(line);
                if (tokens.empty()) {
                    *out << '\n';
                    continue;
                }
                const auto prompt = model.vocab().encode(tokens);
                const auto results = run_decode(scorer, prompt, cfg, affect);
                for (std::size_t b = 0; b < results.size(); ++b) {
                    if (b > 0) *out << '\t';
                    *out << join(model.vocab().decode(results[b].token_ids));
                }
                *out << '\n';
            }
            return 0;
        }

        if (chat_cmd->parsed()) {
            const DecodeConfig cfg = ch_flags.config();
            const auto lexicon = Lexicon::load_file(ch_lexicon);
            const auto model = Seq2SeqModel::load(ch_checkpoint);
            const ModelScorer scorer(model);
            const auto affect = make_token_affect(model.vocab(), lexicon);

            std::string line;
            while (std::cout << "> " << std::flush, std::getline(std::cin, line)) {
                if (line == ":quit") break;
                const auto tokens = tokenize(line);
                if (tokens.empty()) continue;
                const auto prompt = model.vocab().encode(tokens);
                const auto results = run_decode(scorer, prompt, cfg, affect);
                const auto response = model.vocab().decode(results.at(0).token_ids);
                std::cout << (response.empty() ? "(empty)" : join(response)) << "\n";
                if (ch_show_affect && !response.empty()) {
                    const VadVector mean = lexicon.affect_mean(response);
                    std::cout << "  affect mean V=" << mean.v << " A=" << mean.a
                              << " D=" << mean.d
                              << " content=" << affect_content_score(response, lexicon)
                              << "\n";
                }
            }
            return 0;
        }

        if (score_cmd->parsed()) {
            const auto lexicon = Lexicon::load_file(as_lexicon);
            std::vector<std::string> inputs;
            if (!as_file.empty()) {
                inputs = read_lines(as_file);
            } else {
                inputs.push_back(join(as_words));
            }
            for (const auto& input : inputs) {
                const auto tokens = tokenize(input);
                for (const auto& token : tokens) {
                    const VadVector vad = lexicon.w2av(token);
                    std::cout << token << '\t' << lexicon.lemmatize(token) << '\t' << vad.v
                              << '\t' << vad.a << '\t' << vad.d << '\n';
                }
                if (tokens.empty()) continue;
                const VadVector psi = lexicon.affect_sum(tokens);
                const VadVector mean = lexicon.affect_mean(tokens);
                std::cout << "psi\t" << psi.v << '\t' << psi.a << '\t' << psi.d << '\n'
                          << "mean\t" << mean.v << '\t' << mean.a << '\t' << mean.d << '\n'
                          << "affect_content\t" << affect_content_score(tokens, lexicon)
                          << '\n';
            }
            return 0;
        }

        if (eval_cmd->parsed()) {
            const auto lexicon = Lexicon::load_file(ev_lexicon);
            const auto model = Seq2SeqModel::load(ev_checkpoint);
            const auto prompts = encode_prompts(read_lines(ev_prompts), model.vocab());
            if (ev_metrics.empty()) {
                ev_metrics = {"none", "hamming", "wl-affect", "sl-affect"};
            }
            std::vector<NamedDecodeConfig> configs;
            for (const auto& name : ev_metrics) {
                DecodeFlags flags = ev_flags;
                flags.metric = name;
                configs.push_back({name, flags.config()});
            }
            const auto rows = corpus_eval(model, prompts, configs, lexicon);
            if (ev_out == "-") {
                write_eval_tsv(std::cout, rows);
            } else {
                auto out = open_output(ev_out);
                write_eval_tsv(out, rows);
            }
            return 0;
        }
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
