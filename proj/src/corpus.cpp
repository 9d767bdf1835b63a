#include "afgn/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "afgn/errors.hpp"

namespace afgn {
namespace {

bool is_split_punct(char c) {
    switch (c) {
        case '.': case ',': case '!': case '?':
        case ';': case ':': case '\'': case '"':
            return true;
        default:
            return false;
    }
}

const char* kReservedTokens[] = {"<pad>", "<unk>", "<sos>", "<eos>"};

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            tokens.push_back(current);
            current.clear();
        }
    };
    for (char raw : text) {
        char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
        if (std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else if (is_split_punct(c)) {
            flush();
            tokens.emplace_back(1, c);
        } else {
            current.push_back(c);
        }
    }
    flush();
    return tokens;
}

Vocabulary::Vocabulary() {
    for (const char* tok : kReservedTokens) {
        token_to_id_.emplace(tok, static_cast<TokenId>(id_to_token_.size()));
        id_to_token_.emplace_back(tok);
    }
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& sequences,
                             std::size_t max_size) {
    if (max_size < kNumReserved + 1) {
        throw ConfigError("vocabulary: max_size must be at least 5");
    }
    std::map<std::string, std::size_t> counts;
    for (const auto& seq : sequences) {
        for (const auto& tok : seq) ++counts[tok];
    }
    if (counts.empty()) throw DataError("vocabulary: empty corpus");

    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
        if (x.second != y.second) return x.second > y.second;
        return x.first < y.first;
    });

    Vocabulary vocab;
    const std::size_t keep = std::min(ranked.size(), max_size - kNumReserved);
    for (std::size_t i = 0; i < keep; ++i) {
        vocab.token_to_id_.emplace(ranked[i].first,
                                   static_cast<TokenId>(vocab.id_to_token_.size()));
        vocab.id_to_token_.push_back(ranked[i].first);
    }
    return vocab;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
    Vocabulary vocab;
    for (const auto& tok : tokens) {
        auto [it, inserted] =
            vocab.token_to_id_.emplace(tok, static_cast<TokenId>(vocab.id_to_token_.size()));
        if (!inserted) throw DataError("vocabulary: duplicate token '" + tok + "'");
        vocab.id_to_token_.push_back(tok);
    }
    return vocab;
}

std::vector<std::string> Vocabulary::tokens() const {
    return {id_to_token_.begin() + kNumReserved, id_to_token_.end()};
}

TokenId Vocabulary::id(std::string_view token) const {
    auto it = token_to_id_.find(std::string(token));
    return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
        throw ConfigError("vocabulary: token id " + std::to_string(id) + " out of range");
    }
    return id_to_token_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(std::string_view token) const {
    return token_to_id_.find(std::string(token)) != token_to_id_.end();
}

std::vector<TokenId> Vocabulary::encode(const std::vector<std::string>& tokens) const {
    std::vector<TokenId> ids;
    ids.reserve(tokens.size());
    for (const auto& tok : tokens) ids.push_back(id(tok));
    return ids;
}

std::vector<std::string> Vocabulary::decode(const std::vector<TokenId>& ids) const {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (TokenId id : ids) out.push_back(token(id));
    return out;
}

std::vector<DialoguePair> load_pairs(std::istream& in, const Vocabulary& vocab,
                                     std::size_t max_len) {
    std::vector<DialoguePair> pairs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            std::cerr << "warning: pairs line " << line_no << " has no tab, skipped\n";
            continue;
        }
        auto prompt = tokenize(std::string_view(line).substr(0, tab));
        auto response = tokenize(std::string_view(line).substr(tab + 1));
        if (prompt.empty() || response.empty()) {
            std::cerr << "warning: pairs line " << line_no << " has an empty side, skipped\n";
            continue;
        }
        if (prompt.size() > max_len) prompt.resize(max_len);
        if (response.size() > max_len) response.resize(max_len);
        DialoguePair pair{vocab.encode(prompt), vocab.encode(response)};
        pair.response_ids.push_back(kEosId);
        pairs.push_back(std::move(pair));
    }
    if (pairs.empty()) throw DataError("pairs: no usable prompt<TAB>response lines");
    return pairs;
}

std::vector<DialoguePair> load_pairs_file(const std::string& path, const Vocabulary& vocab,
                                          std::size_t max_len) {
    std::ifstream in(path);
    if (!in) throw DataError("pairs: cannot open '" + path + "'");
    return load_pairs(in, vocab, max_len);
}

std::vector<Batch> make_batches(const std::vector<DialoguePair>& pairs,
                                std::size_t batch_size, std::uint64_t rng_seed,
                                std::uint64_t epoch) {
    if (batch_size == 0) throw ConfigError("batches: batch_size must be >= 1");
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    std::seed_seq seq{rng_seed, epoch};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<Batch> batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t count = std::min(batch_size, order.size() - start);
        Batch batch;
        batch.size = count;
        for (std::size_t i = 0; i < count; ++i) {
            const auto& pair = pairs[order[start + i]];
            batch.prompt_width = std::max(batch.prompt_width, pair.prompt_ids.size());
            batch.response_width = std::max(batch.response_width, pair.response_ids.size());
        }
        batch.prompt_ids.assign(count * batch.prompt_width, kPadId);
        batch.prompt_mask.assign(count * batch.prompt_width, 0.0f);
        batch.response_ids.assign(count * batch.response_width, kPadId);
        batch.response_mask.assign(count * batch.response_width, 0.0f);
        for (std::size_t i = 0; i < count; ++i) {
            const auto& pair = pairs[order[start + i]];
            for (std::size_t j = 0; j < pair.prompt_ids.size(); ++j) {
                batch.prompt_ids[i * batch.prompt_width + j] = pair.prompt_ids[j];
                batch.prompt_mask[i * batch.prompt_width + j] = 1.0f;
            }
            for (std::size_t j = 0; j < pair.response_ids.size(); ++j) {
                batch.response_ids[i * batch.response_width + j] = pair.response_ids[j];
                batch.response_mask[i * batch.response_width + j] = 1.0f;
            }
        }
        batches.push_back(std::move(batch));
    }
    return batches;
}

namespace {

std::vector<std::string> split_cornell(const std::string& line) {
    static const std::string kSep = " +++$+++ ";
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (true) {
        const auto next = line.find(kSep, pos);
        if (next == std::string::npos) {
            fields.push_back(line.substr(pos));
            break;
        }
        fields.push_back(line.substr(pos, next - pos));
        pos = next + kSep.size();
    }
    return fields;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> pair_cornell(
    const std::string& movie_lines_path, const std::string& movie_conversations_path) {
    std::ifstream lines_in(movie_lines_path);
    if (!lines_in) throw DataError("prep-cornell: cannot open '" + movie_lines_path + "'");
    std::ifstream convos_in(movie_conversations_path);
    if (!convos_in) {
        throw DataError("prep-cornell: cannot open '" + movie_conversations_path + "'");
    }

    std::unordered_map<std::string, std::string> line_text;
    std::string line;
    while (std::getline(lines_in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_cornell(line);
        if (fields.size() < 5) continue;
        line_text[fields[0]] = fields[4];
    }

    std::vector<std::pair<std::string, std::string>> pairs;
    std::size_t convo_count = 0;
    while (std::getline(convos_in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_cornell(line);
        if (fields.size() < 4) continue;
        ++convo_count;
        // Last field looks like ['L194', 'L195', 'L196'].
        std::vector<std::string> ids;
        std::string id;
        bool in_quote = false;
        for (char c : fields[3]) {
            if (c == '\'') {
                if (in_quote) ids.push_back(id);
                id.clear();
                in_quote = !in_quote;
            } else if (in_quote) {
                id.push_back(c);
            }
        }
        for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
            auto a = line_text.find(ids[i]);
            auto b = line_text.find(ids[i + 1]);
            if (a == line_text.end() || b == line_text.end()) continue;
            if (a->second.empty() || b->second.empty()) continue;
            pairs.emplace_back(a->second, b->second);
        }
    }
    if (convo_count == 0) {
        std::cerr << "warning: prep-cornell: no conversations found in '"
                  << movie_conversations_path << "'\n";
    }
    return pairs;
}

}  // namespace afgn
