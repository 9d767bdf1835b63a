#include "afgn/model.hpp"

#include <cstring>
#include <fstream>
#include <random>

#include "afgn/errors.hpp"

namespace afgn {
namespace {

Tensor init_weight(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-0.08, 0.08);
    std::vector<double> values(rows * cols);
    for (double& v : values) v = dist(rng);
    return Tensor::from_values(rows, cols, std::move(values), /*requires_grad=*/true);
}

Tensor init_bias(std::size_t cols, double fill) {
    return Tensor::from_values(1, cols, std::vector<double>(cols, fill),
                               /*requires_grad=*/true);
}

LstmParams init_lstm(std::size_t input_dim, std::size_t hidden, std::mt19937_64& rng) {
    LstmParams p;
    p.wi = init_weight(input_dim, hidden, rng);
    p.ui = init_weight(hidden, hidden, rng);
    p.bi = init_bias(hidden, 0.0);
    p.wf = init_weight(input_dim, hidden, rng);
    p.uf = init_weight(hidden, hidden, rng);
    p.bf = init_bias(hidden, 1.0);  // forget-gate bias +1
    p.wg = init_weight(input_dim, hidden, rng);
    p.ug = init_weight(hidden, hidden, rng);
    p.bg = init_bias(hidden, 0.0);
    p.wo = init_weight(input_dim, hidden, rng);
    p.uo = init_weight(hidden, hidden, rng);
    p.bo = init_bias(hidden, 0.0);
    return p;
}

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) {
        throw DataError("checkpoint: truncated while reading integer");
    }
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_tensor(std::ostream& out, const Tensor& t) {
    write_u32(out, static_cast<std::uint32_t>(t.rows()));
    write_u32(out, static_cast<std::uint32_t>(t.cols()));
    for (double v : t.values()) {
        const float f = static_cast<float>(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        write_u32(out, bits);
    }
}

Tensor read_tensor(std::istream& in, std::size_t rows, std::size_t cols,
                   bool requires_grad, const char* name) {
    const std::uint32_t r = read_u32(in);
    const std::uint32_t c = read_u32(in);
    if (r != rows || c != cols) {
        throw DataError("checkpoint: tensor '" + std::string(name) + "' has shape " +
                        std::to_string(r) + "x" + std::to_string(c) + ", expected " +
                        std::to_string(rows) + "x" + std::to_string(cols));
    }
    std::vector<double> values(rows * cols);
    for (double& v : values) {
        const std::uint32_t bits = read_u32(in);
        float f;
        std::memcpy(&f, &bits, 4);
        v = static_cast<double>(f);
    }
    return Tensor::from_values(rows, cols, std::move(values), requires_grad);
}

constexpr char kMagic[4] = {'A', 'F', 'G', 'N'};
constexpr unsigned char kVersion = 1;

}  // namespace

Seq2SeqModel Seq2SeqModel::init(const ModelConfig& config, const Lexicon& lexicon,
                                const Vocabulary& vocab, std::uint64_t seed) {
    if (config.embed_dim == 0 || config.hidden_dim == 0) {
        throw ConfigError("model: embed_dim and hidden_dim must be >= 1");
    }
    if (vocab.size() > config.vocab_size) {
        throw ConfigError("model: vocabulary size " + std::to_string(vocab.size()) +
                          " exceeds configured vocab_size " +
                          std::to_string(config.vocab_size));
    }
    Seq2SeqModel model;
    model.config_ = config;
    model.config_.vocab_size = vocab.size();
    model.vocab_ = vocab;

    std::mt19937_64 rng(seed);
    const std::size_t v = vocab.size();
    model.embedding_ = init_weight(v, config.embed_dim, rng);
    model.encoder_ = init_lstm(model.config_.input_dim(), config.hidden_dim, rng);
    model.decoder_ = init_lstm(model.config_.input_dim(), config.hidden_dim, rng);
    model.w_out_ = init_weight(config.hidden_dim, v, rng);
    model.b_out_ = init_bias(v, 0.0);

    std::vector<double> affect(v * 3);
    for (std::size_t i = 0; i < v; ++i) {
        const VadVector vad = lexicon.w2av(vocab.token(static_cast<TokenId>(i)));
        affect[i * 3 + 0] = vad.v;
        affect[i * 3 + 1] = vad.a;
        affect[i * 3 + 2] = vad.d;
    }
    model.affect_table_ = Tensor::from_values(v, 3, std::move(affect));
    return model;
}

Tensor Seq2SeqModel::embed(TokenId token) const {
    if (token < 0 || static_cast<std::size_t>(token) >= config_.vocab_size) {
        throw ConfigError("model: token id " + std::to_string(token) + " out of range");
    }
    const std::size_t idx = static_cast<std::size_t>(token);
    Tensor word = select_rows(embedding_, {idx});
    if (!config_.use_affect_input) return word;
    Tensor affect = select_rows(affect_table_, {idx});
    return concat_cols(word, affect);
}

DecoderState Seq2SeqModel::lstm_step(const LstmParams& p, const DecoderState& state,
                                     const Tensor& input) const {
    Tensor i = sigmoid(add(add(matmul(input, p.wi), matmul(state.hidden, p.ui)), p.bi));
    Tensor f = sigmoid(add(add(matmul(input, p.wf), matmul(state.hidden, p.uf)), p.bf));
    Tensor g = tanh_op(add(add(matmul(input, p.wg), matmul(state.hidden, p.ug)), p.bg));
    Tensor o = sigmoid(add(add(matmul(input, p.wo), matmul(state.hidden, p.uo)), p.bo));
    Tensor cell = add(hadamard(f, state.cell), hadamard(i, g));
    Tensor hidden = hadamard(o, tanh_op(cell));
    return {hidden, cell};
}

DecoderState Seq2SeqModel::encode(std::span<const TokenId> prompt_ids) const {
    DecoderState state{Tensor::zeros(1, config_.hidden_dim),
                       Tensor::zeros(1, config_.hidden_dim)};
    std::size_t real_tokens = 0;
    for (TokenId id : prompt_ids) {
        if (id == kPadId) continue;
        ++real_tokens;
        state = lstm_step(encoder_, state, embed(id));
    }
    if (real_tokens == 0) throw ConfigError("encode: prompt has no real tokens");
    return state;
}

std::pair<Tensor, DecoderState> Seq2SeqModel::decode_step(const DecoderState& state,
                                                          TokenId prev_token) const {
    DecoderState next = lstm_step(decoder_, state, embed(prev_token));
    Tensor logits = add(matmul(next.hidden, w_out_), b_out_);
    return {log_softmax_row(logits), next};
}

std::vector<Tensor> Seq2SeqModel::parameters() {
    std::vector<Tensor> params{embedding_};
    for (LstmParams* lstm : {&encoder_, &decoder_}) {
        for (Tensor* t : {&lstm->wi, &lstm->ui, &lstm->bi, &lstm->wf, &lstm->uf, &lstm->bf,
                          &lstm->wg, &lstm->ug, &lstm->bg, &lstm->wo, &lstm->uo, &lstm->bo}) {
            params.push_back(*t);
        }
    }
    params.push_back(w_out_);
    params.push_back(b_out_);
    return params;
}

void Seq2SeqModel::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("checkpoint: cannot open '" + path + "' for writing");
    out.write(kMagic, 4);
    out.put(static_cast<char>(kVersion));
    write_u32(out, static_cast<std::uint32_t>(config_.vocab_size));
    write_u32(out, static_cast<std::uint32_t>(config_.embed_dim));
    write_u32(out, static_cast<std::uint32_t>(config_.hidden_dim));
    write_u32(out, config_.use_affect_input ? 1u : 0u);

    // Tensor order: embedding, encoder gates (w/u/b for i,f,g,o), decoder
    // gates likewise, output projection + bias, affect table.
    auto* self = const_cast<Seq2SeqModel*>(this);
    for (const Tensor& t : self->parameters()) write_tensor(out, t);
    write_tensor(out, affect_table_);

    const auto tokens = vocab_.tokens();
    write_u32(out, static_cast<std::uint32_t>(tokens.size()));
    for (const auto& tok : tokens) {
        write_u32(out, static_cast<std::uint32_t>(tok.size()));
        out.write(tok.data(), static_cast<std::streamsize>(tok.size()));
    }
    if (!out) throw DataError("checkpoint: write failed for '" + path + "'");
}

Seq2SeqModel Seq2SeqModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("checkpoint: cannot open '" + path + "'");
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw DataError("checkpoint: bad magic in '" + path + "'");
    }
    const int version = in.get();
    if (version != kVersion) {
        throw DataError("checkpoint: unsupported version " + std::to_string(version));
    }

    Seq2SeqModel model;
    model.config_.vocab_size = read_u32(in);
    model.config_.embed_dim = read_u32(in);
    model.config_.hidden_dim = read_u32(in);
    model.config_.use_affect_input = (read_u32(in) & 1u) != 0;

    const std::size_t v = model.config_.vocab_size;
    const std::size_t e = model.config_.embed_dim;
    const std::size_t h = model.config_.hidden_dim;
    const std::size_t x = model.config_.input_dim();

    model.embedding_ = read_tensor(in, v, e, true, "embedding");
    for (LstmParams* lstm : {&model.encoder_, &model.decoder_}) {
        lstm->wi = read_tensor(in, x, h, true, "lstm.wi");
        lstm->ui = read_tensor(in, h, h, true, "lstm.ui");
        lstm->bi = read_tensor(in, 1, h, true, "lstm.bi");
        lstm->wf = read_tensor(in, x, h, true, "lstm.wf");
        lstm->uf = read_tensor(in, h, h, true, "lstm.uf");
        lstm->bf = read_tensor(in, 1, h, true, "lstm.bf");
        lstm->wg = read_tensor(in, x, h, true, "lstm.wg");
        lstm->ug = read_tensor(in, h, h, true, "lstm.ug");
        lstm->bg = read_tensor(in, 1, h, true, "lstm.bg");
        lstm->wo = read_tensor(in, x, h, true, "lstm.wo");
        lstm->uo = read_tensor(in, h, h, true, "lstm.uo");
        lstm->bo = read_tensor(in, 1, h, true, "lstm.bo");
    }
    model.w_out_ = read_tensor(in, h, v, true, "w_out");
    model.b_out_ = read_tensor(in, 1, v, true, "b_out");
    model.affect_table_ = read_tensor(in, v, 3, false, "affect_table");

    const std::uint32_t token_count = read_u32(in);
    if (token_count + kNumReserved != v) {
        throw DataError("checkpoint: vocabulary count " + std::to_string(token_count) +
                        " does not match vocab_size " + std::to_string(v));
    }
    std::vector<std::string> tokens;
    tokens.reserve(token_count);
    for (std::uint32_t i = 0; i < token_count; ++i) {
        const std::uint32_t len = read_u32(in);
        std::string tok(len, '\0');
        if (!in.read(tok.data(), len)) throw DataError("checkpoint: truncated token table");
        tokens.push_back(std::move(tok));
    }
    model.vocab_ = Vocabulary::from_tokens(tokens);

    if (in.peek() != std::char_traits<char>::eof()) {
        throw DataError("checkpoint: trailing bytes in '" + path + "'");
    }
    return model;
}

}  // namespace afgn
