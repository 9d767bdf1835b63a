#include "afgn/losses.hpp"

#include <chrono>
#include <cmath>

#include "afgn/errors.hpp"
#include "afgn/vad.hpp"

namespace afgn {
namespace {

// Per-step multipliers of the p-hat term; zero for XENT. Distances are
// computed from reference tokens and treated as constants.
std::vector<double> affect_coefficients(const Seq2SeqModel& model, const DialoguePair& pair,
                                        const LossConfig& config, const Lexicon& lexicon) {
    const std::size_t steps = pair.response_ids.size();
    std::vector<double> coeffs(steps, 0.0);
    if (config.kind == LossKind::XENT) return coeffs;

    const auto& vocab = model.vocab();
    double sign = 0.0;
    if (config.kind == LossKind::DMIN) sign = 1.0;
    if (config.kind == LossKind::DMAX) sign = -1.0;

    if (config.kind == LossKind::AC) {
        for (std::size_t i = 0; i < steps; ++i) {
            const VadVector w = lexicon.w2av(vocab.token(pair.response_ids[i]));
            coeffs[i] = -config.lambda * affect_distance(w, kNeutralVad);
        }
    } else {
        std::vector<std::string> prompt_tokens;
        for (TokenId id : pair.prompt_ids) {
            if (id != kPadId) prompt_tokens.push_back(vocab.token(id));
        }
        const VadVector prompt_mean = lexicon.affect_mean(prompt_tokens);
        VadVector running{0.0, 0.0, 0.0};
        for (std::size_t i = 0; i < steps; ++i) {
            running = running + lexicon.w2av(vocab.token(pair.response_ids[i]));
            const VadVector response_mean = running / static_cast<double>(i + 1);
            coeffs[i] = sign * config.lambda * affect_distance(prompt_mean, response_mean);
        }
    }
    if (config.normalize_affect_by_length) {
        for (double& c : coeffs) c /= static_cast<double>(steps);
    }
    return coeffs;
}

}  // namespace

const char* loss_kind_name(LossKind kind) {
    switch (kind) {
        case LossKind::XENT: return "xent";
        case LossKind::DMIN: return "dmin";
        case LossKind::DMAX: return "dmax";
        case LossKind::AC: return "ac";
    }
    return "?";
}

LossKind loss_kind_from_name(const std::string& name) {
    if (name == "xent") return LossKind::XENT;
    if (name == "dmin") return LossKind::DMIN;
    if (name == "dmax") return LossKind::DMAX;
    if (name == "ac") return LossKind::AC;
    throw ConfigError("unknown loss kind '" + name + "'");
}

Tensor pair_loss(const Seq2SeqModel& model, const DialoguePair& pair,
                 const LossConfig& config, const Lexicon& lexicon) {
    const double xent_weight = config.kind == LossKind::XENT ? 1.0 : 1.0 - config.lambda;
    const auto coeffs = affect_coefficients(model, pair, config, lexicon);

    DecoderState state = model.encode(pair.prompt_ids);
    Tensor total = Tensor::scalar(0.0);
    TokenId prev = kSosId;
    for (std::size_t i = 0; i < pair.response_ids.size(); ++i) {
        const TokenId ref = pair.response_ids[i];
        if (ref == kPadId) break;
        auto [log_probs, next] = model.decode_step(state, prev);
        Tensor log_p = gather_row(log_probs, {static_cast<std::size_t>(ref)});
        total = add(total, scale(log_p, -xent_weight));
        if (coeffs[i] != 0.0) {
            total = add(total, scale(exp_op(log_p), coeffs[i]));
        }
        state = next;
        prev = ref;
    }
    return total;
}

Tensor xent_loss(const Seq2SeqModel& model, const DialoguePair& pair) {
    return pair_loss(model, pair, LossConfig{LossKind::XENT, 0.0}, Lexicon{});
}

Tensor dmin_loss(const Seq2SeqModel& model, const DialoguePair& pair, double lambda,
                 const Lexicon& lexicon) {
    return pair_loss(model, pair, LossConfig{LossKind::DMIN, lambda}, lexicon);
}

Tensor dmax_loss(const Seq2SeqModel& model, const DialoguePair& pair, double lambda,
                 const Lexicon& lexicon) {
    return pair_loss(model, pair, LossConfig{LossKind::DMAX, lambda}, lexicon);
}

Tensor ac_loss(const Seq2SeqModel& model, const DialoguePair& pair, double lambda,
               const Lexicon& lexicon) {
    return pair_loss(model, pair, LossConfig{LossKind::AC, lambda}, lexicon);
}

std::vector<EpochLog> train(Seq2SeqModel& model, const std::vector<DialoguePair>& pairs,
                            const TrainSchedule& schedule, const LossConfig& config,
                            const Lexicon& lexicon, std::ostream* log,
                            const std::function<void(const Seq2SeqModel&, const std::string&)>&
                                checkpoint_cb) {
    if (pairs.empty()) throw DataError("train: empty corpus");

    AdamOptimizer::Config adam;
    adam.learning_rate = schedule.learning_rate;
    adam.clip_norm = schedule.clip_norm;
    AdamOptimizer optimizer(model.parameters(), adam);

    std::vector<EpochLog> logs;
    const std::size_t total_epochs = schedule.phase1_epochs + schedule.phase2_epochs;
    for (std::size_t epoch = 0; epoch < total_epochs; ++epoch) {
        const bool phase2 = epoch >= schedule.phase1_epochs;
        const LossConfig active = phase2 ? config : LossConfig{LossKind::XENT, 0.0};
        const auto start = std::chrono::steady_clock::now();

        double loss_sum = 0.0;
        std::size_t pair_count = 0;
        const auto batches = make_batches(pairs, schedule.batch_size, schedule.seed, epoch);
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            const Batch& batch = batches[bi];
            Tensor batch_loss = Tensor::scalar(0.0);
            for (std::size_t row = 0; row < batch.size; ++row) {
                DialoguePair pair;
                for (std::size_t j = 0; j < batch.prompt_width; ++j) {
                    if (batch.prompt_mask[row * batch.prompt_width + j] > 0.0f) {
                        pair.prompt_ids.push_back(batch.prompt_ids[row * batch.prompt_width + j]);
                    }
                }
                for (std::size_t j = 0; j < batch.response_width; ++j) {
                    if (batch.response_mask[row * batch.response_width + j] > 0.0f) {
                        pair.response_ids.push_back(
                            batch.response_ids[row * batch.response_width + j]);
                    }
                }
                batch_loss = add(batch_loss, pair_loss(model, pair, active, lexicon));
            }
            batch_loss = scale(batch_loss, 1.0 / static_cast<double>(batch.size));
            const double value = batch_loss.item();
            if (!std::isfinite(value)) {
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(bi) + ", loss " +
                                   loss_kind_name(active.kind));
            }
            loss_sum += value * static_cast<double>(batch.size);
            pair_count += batch.size;

            optimizer.zero_grad();
            backward(batch_loss);
            optimizer.step();
        }

        const auto end = std::chrono::steady_clock::now();
        EpochLog entry;
        entry.epoch = epoch;
        entry.phase = phase2 ? 2 : 1;
        entry.kind = active.kind;
        entry.mean_loss = loss_sum / static_cast<double>(pair_count);
        entry.wall_seconds = std::chrono::duration<double>(end - start).count();
        if (log) {
            (*log) << entry.epoch << '\t' << entry.phase << '\t' << loss_kind_name(entry.kind)
                   << '\t' << entry.mean_loss << '\t' << entry.wall_seconds << '\n';
        }
        logs.push_back(entry);

        if (checkpoint_cb && epoch + 1 == schedule.phase1_epochs && schedule.phase2_epochs > 0) {
            checkpoint_cb(model, "phase1");
        }
    }
    if (checkpoint_cb) checkpoint_cb(model, "final");
    return logs;
}

}  // namespace afgn
