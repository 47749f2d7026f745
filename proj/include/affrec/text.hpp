#pragma once
// Small text utilities shared by query generation, rule-based reasoning
// and BM25: lowercase tokenization, word-boundary phrase matching, Jaccard.

#include <cctype>
#include <set>
#include <string>
#include <vector>

namespace affrec {

inline std::string to_lower(const std::string& s) {
    std::string out = s;
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// Lowercase alphanumeric tokens; everything else is a separator.
inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
        const unsigned char c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur += static_cast<char>(std::tolower(c));
        } else if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
}

// Case-insensitive phrase search with alphanumeric word boundaries on both
// ends, so "close" does not match inside "closes". Allocation-free; this
// sits on the hot path of the rule backend.
inline bool phrase_in(const std::string& haystack, const std::string& phrase) {
    if (phrase.empty() || phrase.size() > haystack.size()) return false;
    const auto lower = [](char c) {
        return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    };
    const size_t limit = haystack.size() - phrase.size();
    for (size_t pos = 0; pos <= limit; ++pos) {
        if (lower(haystack[pos]) != lower(phrase[0])) continue;
        bool match = true;
        for (size_t i = 1; i < phrase.size(); ++i) {
            if (lower(haystack[pos + i]) != lower(phrase[i])) {
                match = false;
                break;
            }
        }
        if (!match) continue;
        const bool left_ok =
            pos == 0 || !std::isalnum(static_cast<unsigned char>(haystack[pos - 1]));
        const size_t end = pos + phrase.size();
        const bool right_ok =
            end == haystack.size() || !std::isalnum(static_cast<unsigned char>(haystack[end]));
        if (left_ok && right_ok) return true;
    }
    return false;
}

inline double token_jaccard(const std::string& a, const std::string& b) {
    const auto ta = tokenize(a);
    const auto tb = tokenize(b);
    const std::set<std::string> sa(ta.begin(), ta.end());
    const std::set<std::string> sb(tb.begin(), tb.end());
    if (sa.empty() && sb.empty()) return 1.0;
    size_t inter = 0;
    for (const auto& t : sa) inter += sb.count(t);
    const size_t uni = sa.size() + sb.size() - inter;
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// Light stem used for unknown intent strings: lowercase tokens with a
// trailing plural 's' stripped, joined by '_'.
inline std::string stem_key(const std::string& s) {
    std::string out;
    for (auto& tok : tokenize(s)) {
        std::string t = tok;
        if (t.size() > 3 && t.back() == 's' && t[t.size() - 2] != 's') t.pop_back();
        if (!out.empty()) out += '_';
        out += t;
    }
    return out;
}

inline std::string truncate_snippet(const std::string& s, size_t max_len = 60) {
    if (s.size() <= max_len) return s;
    return s.substr(0, max_len - 3) + "...";
}

}  // namespace affrec
