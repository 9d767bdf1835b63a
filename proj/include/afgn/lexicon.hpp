#pragma once

#include <istream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "afgn/vad.hpp"

namespace afgn {

// Header names of the word column and the three rating columns in a
// lexicon file. Defaults match the published Warriner norms export.
struct ColumnMap {
    std::string word = "Word";
    std::string valence = "V.Mean.Sum";
    std::string arousal = "A.Mean.Sum";
    std::string dominance = "D.Mean.Sum";
};

// Immutable word -> VAD table. Keys are stored lowercased; lookups go
// through a small suffix-stripping lemmatizer before falling back to the
// neutral vector.
class Lexicon {
  public:
    Lexicon() = default;

    // Reads a delimiter-separated table (comma or tab) with one header row.
    // Ratings outside [1,9] are clamped with a warning on stderr; duplicate
    // words keep the last row.
    static Lexicon load(std::istream& in, const ColumnMap& columns = {});
    static Lexicon load_file(const std::string& path, const ColumnMap& columns = {});

    std::size_t size() const { return entries_.size(); }
    bool contains(std::string_view lemma) const;

    // Lowercases, then tries the word itself and four suffix rules
    // (-s, -es, -ed, -ing with e-restoration and doubled-consonant
    // reduction) against the table. Returns the first hit, else the
    // lowercased input. Total and idempotent.
    std::string lemmatize(std::string_view word) const;

    // W2AV: dictionary VAD of the lemmatized word, neutral (5,1,5) otherwise.
    VadVector w2av(std::string_view word) const;

    // Component-wise sum of w2av over tokens; empty -> (0,0,0).
    VadVector affect_sum(std::span<const std::string> tokens) const;

    // affect_sum / count; throws ConfigError on an empty sequence.
    VadVector affect_mean(std::span<const std::string> tokens) const;

  private:
    std::unordered_map<std::string, VadVector> entries_;
};

}  // namespace afgn
