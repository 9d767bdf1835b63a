#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace afgn {

using TokenId = std::int32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kSosId = 2;
inline constexpr TokenId kEosId = 3;
inline constexpr std::size_t kNumReserved = 4;

// Lowercase, split on whitespace, and break off the punctuation
// characters .,!?;:'" as single-character tokens.
std::vector<std::string> tokenize(std::string_view text);

// Bidirectional token <-> id map with reserved PAD/UNK/SOS/EOS ids.
class Vocabulary {
  public:
    // Keeps the most frequent tokens up to max_size - 4 slots, ties broken
    // lexicographically. Throws DataError on an empty corpus, ConfigError
    // if max_size < 5.
    static Vocabulary build(const std::vector<std::vector<std::string>>& sequences,
                            std::size_t max_size);

    std::size_t size() const { return id_to_token_.size(); }
    TokenId id(std::string_view token) const;
    const std::string& token(TokenId id) const;
    bool contains(std::string_view token) const;

    std::vector<TokenId> encode(const std::vector<std::string>& tokens) const;
    std::vector<std::string> decode(const std::vector<TokenId>& ids) const;

    // Construct directly from a non-reserved token list (checkpoint load).
    static Vocabulary from_tokens(const std::vector<std::string>& tokens);
    // Non-reserved tokens in id order (checkpoint save).
    std::vector<std::string> tokens() const;

  private:
    Vocabulary();
    std::unordered_map<std::string, TokenId> token_to_id_;
    std::vector<std::string> id_to_token_;
};

struct DialoguePair {
    std::vector<TokenId> prompt_ids;    // x_1..x_m
    std::vector<TokenId> response_ids;  // y_1..y_n, EOS-terminated
};

// Parses tab-separated "prompt<TAB>response" lines. Lines without a tab or
// with an empty side are skipped with a warning; zero usable lines is a
// DataError. Sequences are truncated to max_len (response keeps a slot
// for EOS within max_len + 1 total).
std::vector<DialoguePair> load_pairs(std::istream& in, const Vocabulary& vocab,
                                     std::size_t max_len);
std::vector<DialoguePair> load_pairs_file(const std::string& path, const Vocabulary& vocab,
                                          std::size_t max_len);

// One padded batch: row-major [batch x width] id matrices with parallel
// 0/1 masks marking real tokens.
struct Batch {
    std::size_t size = 0;
    std::size_t prompt_width = 0;
    std::size_t response_width = 0;
    std::vector<TokenId> prompt_ids;
    std::vector<float> prompt_mask;
    std::vector<TokenId> response_ids;
    std::vector<float> response_mask;
};

// Shuffles pairs with a generator seeded by (rng_seed, epoch) and packs
// them into padded batches. Deterministic per (seed, epoch).
std::vector<Batch> make_batches(const std::vector<DialoguePair>& pairs,
                                std::size_t batch_size, std::uint64_t rng_seed,
                                std::uint64_t epoch = 0);

// Pairs adjacent utterances within each conversation of the Cornell Movie
// Dialogs corpus (movie_lines.txt + movie_conversations.txt) into
// prompt/response pairs of raw text.
std::vector<std::pair<std::string, std::string>> pair_cornell(
    const std::string& movie_lines_path, const std::string& movie_conversations_path);

}  // namespace afgn
