#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "afgn/corpus.hpp"
#include "afgn/lexicon.hpp"
#include "afgn/model.hpp"
#include "afgn/tensor.hpp"

namespace afgn {

enum class LossKind { XENT, DMIN, DMAX, AC };

const char* loss_kind_name(LossKind kind);
LossKind loss_kind_from_name(const std::string& name);

struct LossConfig {
    LossKind kind = LossKind::XENT;
    double lambda = 0.5;  // ignored by XENT
    // Divide the per-step affect terms by response length (off by default;
    // the summed form keeps lambda's balance per step).
    bool normalize_affect_by_length = false;
};

// Teacher-forced objectives over one prompt/response pair. The affect
// distances are constants of the pair; gradient flows only through the
// log-probabilities and the reference-token probability p-hat.
Tensor xent_loss(const Seq2SeqModel& model, const DialoguePair& pair);
Tensor dmin_loss(const Seq2SeqModel& model, const DialoguePair& pair, double lambda,
                 const Lexicon& lexicon);
Tensor dmax_loss(const Seq2SeqModel& model, const DialoguePair& pair, double lambda,
                 const Lexicon& lexicon);
Tensor ac_loss(const Seq2SeqModel& model, const DialoguePair& pair, double lambda,
               const Lexicon& lexicon);

Tensor pair_loss(const Seq2SeqModel& model, const DialoguePair& pair,
                 const LossConfig& config, const Lexicon& lexicon);

struct TrainSchedule {
    std::size_t phase1_epochs = 40;  // XENT
    std::size_t phase2_epochs = 10;  // configured affective loss
    double learning_rate = 1e-3;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    double clip_norm = 5.0;
};

struct EpochLog {
    std::size_t epoch = 0;
    int phase = 1;
    LossKind kind = LossKind::XENT;
    double mean_loss = 0.0;
    double wall_seconds = 0.0;
};

// Runs phase 1 (XENT) then phase 2 (the configured loss). Calls
// checkpoint_cb at the phase boundary ("phase1") and at the end ("final")
// when provided; writes one TSV line per epoch to log when provided.
// Throws NumericError on a non-finite loss.
std::vector<EpochLog> train(Seq2SeqModel& model, const std::vector<DialoguePair>& pairs,
                            const TrainSchedule& schedule, const LossConfig& config,
                            const Lexicon& lexicon, std::ostream* log = nullptr,
                            const std::function<void(const Seq2SeqModel&, const std::string&)>&
                                checkpoint_cb = nullptr);

}  // namespace afgn
