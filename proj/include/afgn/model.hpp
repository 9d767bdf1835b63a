#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "afgn/corpus.hpp"
#include "afgn/lexicon.hpp"
#include "afgn/tensor.hpp"

namespace afgn {

struct ModelConfig {
    std::size_t vocab_size = 2000;
    std::size_t embed_dim = 32;
    std::size_t hidden_dim = 64;
    bool use_affect_input = true;
    std::size_t max_decode_len = 20;

    std::size_t input_dim() const { return embed_dim + (use_affect_input ? 3 : 0); }
};

// Per-gate LSTM weights: x-projection (input_dim x H), recurrent
// (H x H), bias (1 x H) for input/forget/cell/output gates.
struct LstmParams {
    Tensor wi, ui, bi;
    Tensor wf, uf, bf;
    Tensor wg, ug, bg;
    Tensor wo, uo, bo;
};

struct DecoderState {
    Tensor hidden;  // 1 x H
    Tensor cell;    // 1 x H
};

// Single-layer LSTM encoder-decoder with a shared embedding table and a
// frozen per-token affect table concatenated onto the embeddings.
class Seq2SeqModel {
  public:
    // Empty shell; usable only after init or load.
    Seq2SeqModel() = default;

    // Weights uniform(-0.08, 0.08), biases zero, forget-gate bias +1;
    // affect table filled from w2av over vocabulary surface tokens.
    static Seq2SeqModel init(const ModelConfig& config, const Lexicon& lexicon,
                             const Vocabulary& vocab, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }
    const Vocabulary& vocab() const { return vocab_; }
    const Tensor& affect_table() const { return affect_table_; }

    // [trainable embedding ⊕ affect] row for one token.
    Tensor embed(TokenId token) const;

    // Runs the encoder over the prompt left to right; PAD ids are skipped.
    // Throws ConfigError when no real token remains.
    DecoderState encode(std::span<const TokenId> prompt_ids) const;

    // One decoder step: feeds prev_token, returns the log-softmax row over
    // the vocabulary and the next state.
    std::pair<Tensor, DecoderState> decode_step(const DecoderState& state,
                                                TokenId prev_token) const;

    // Trainable tensors in checkpoint order.
    std::vector<Tensor> parameters();

    // Binary checkpoint: "AFGN", version 1, LE32 vocab_size/embed_dim/
    // hidden_dim/flags, then every tensor (affect table included) as LE32
    // rows, LE32 cols, float32 LE data, then the non-reserved vocabulary
    // as LE32 count + length-prefixed UTF-8 tokens.
    void save(const std::string& path) const;
    static Seq2SeqModel load(const std::string& path);

  private:
    DecoderState lstm_step(const LstmParams& p, const DecoderState& state,
                           const Tensor& input) const;

    ModelConfig config_;
    Vocabulary vocab_ = Vocabulary::from_tokens({});
    Tensor embedding_;     // vocab x embed_dim
    LstmParams encoder_;
    LstmParams decoder_;
    Tensor w_out_;         // H x vocab
    Tensor b_out_;         // 1 x vocab
    Tensor affect_table_;  // vocab x 3, frozen
};

}  // namespace afgn
