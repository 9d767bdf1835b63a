#include "afgn/lexicon.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <sstream>

#include "afgn/errors.hpp"

namespace afgn {
namespace {

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, delim)) fields.push_back(field);
    if (!line.empty() && line.back() == delim) fields.emplace_back();
    return fields;
}

std::size_t find_column(const std::vector<std::string>& header, const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
        throw ConfigError("lexicon: required column '" + name + "' not found in header");
    }
    return static_cast<std::size_t>(it - header.begin());
}

double parse_rating(const std::string& field, std::size_t row) {
    std::size_t pos = 0;
    double value = 0.0;
    try {
        value = std::stod(field, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != field.size()) {
        throw DataError("lexicon: unparsable rating '" + field + "' at data row " +
                        std::to_string(row));
    }
    return value;
}

double clamp_rating(double x, const std::string& word) {
    if (x < 1.0 || x > 9.0) {
        std::cerr << "warning: lexicon rating " << x << " for '" << word
                  << "' clamped to [1,9]\n";
        return std::clamp(x, 1.0, 9.0);
    }
    return x;
}

}  // namespace

Lexicon Lexicon::load(std::istream& in, const ColumnMap& columns) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("lexicon: empty input, no header row");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const char delim = line.find('\t') != std::string::npos ? '\t' : ',';
    const auto header = split_line(line, delim);
    const std::size_t wi = find_column(header, columns.word);
    const std::size_t vi = find_column(header, columns.valence);
    const std::size_t ai = find_column(header, columns.arousal);
    const std::size_t di = find_column(header, columns.dominance);
    const std::size_t need = std::max({wi, vi, ai, di}) + 1;

    Lexicon lex;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_line(line, delim);
        if (fields.size() < need) {
            throw DataError("lexicon: data row " + std::to_string(row) + " has " +
                            std::to_string(fields.size()) + " fields, need " +
                            std::to_string(need));
        }
        std::string word = to_lower(fields[wi]);
        VadVector vad{parse_rating(fields[vi], row), parse_rating(fields[ai], row),
                      parse_rating(fields[di], row)};
        vad.v = clamp_rating(vad.v, word);
        vad.a = clamp_rating(vad.a, word);
        vad.d = clamp_rating(vad.d, word);
        auto [it, inserted] = lex.entries_.insert_or_assign(std::move(word), vad);
        if (!inserted) {
            std::cerr << "warning: lexicon duplicate word '" << it->first
                      << "', last row wins\n";
        }
    }
    return lex;
}

Lexicon Lexicon::load_file(const std::string& path, const ColumnMap& columns) {
    std::ifstream in(path);
    if (!in) throw DataError("lexicon: cannot open '" + path + "'");
    return load(in, columns);
}

bool Lexicon::contains(std::string_view lemma) const {
    return entries_.find(std::string(lemma)) != entries_.end();
}

std::string Lexicon::lemmatize(std::string_view word) const {
    std::string w = to_lower(word);
    if (contains(w)) return w;

    struct Rule {
        std::string_view suffix;
        bool restore_e;
    };
    // Order matters: -s before -es so "hates" resolves via the shorter strip.
    static constexpr Rule rules[] = {
        {"s", false}, {"es", false}, {"ed", true}, {"ing", true}};

    for (const auto& rule : rules) {
        if (w.size() <= rule.suffix.size() || !w.ends_with(rule.suffix)) continue;
        std::string base = w.substr(0, w.size() - rule.suffix.size());
        if (contains(base)) return base;
        if (rule.restore_e) {
            if (contains(base + "e")) return base + "e";
            // "stopped" -> "stopp" -> "stop"
            if (base.size() >= 2 && base[base.size() - 1] == base[base.size() - 2]) {
                std::string dedoubled = base.substr(0, base.size() - 1);
                if (contains(dedoubled)) return dedoubled;
            }
        }
    }
    return w;
}

VadVector Lexicon::w2av(std::string_view word) const {
    auto it = entries_.find(lemmatize(word));
    if (it == entries_.end()) return kNeutralVad;
    return it->second;
}

VadVector Lexicon::affect_sum(std::span<const std::string> tokens) const {
    VadVector acc{0.0, 0.0, 0.0};
    for (const auto& tok : tokens) acc = acc + w2av(tok);
    return acc;
}

VadVector Lexicon::affect_mean(std::span<const std::string> tokens) const {
    if (tokens.empty()) throw ConfigError("affect_mean: empty token sequence");
    return affect_sum(tokens) / static_cast<double>(tokens.size());
}

}  // namespace afgn
