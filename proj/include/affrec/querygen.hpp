#pragma once
// Phase 1: context discretization and generation of the K context-specific
// affordance queries through a reasoner backend, enforcing the three
// structural constraints (groundability, contextual isolation,
// orthogonality). A parametrized template bank backs the deterministic rule
// backend and fills slots when backend output fails deduplication.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "affrec/backend.hpp"
#include "affrec/domain.hpp"
#include "affrec/text.hpp"

namespace affrec {

struct QueryGenConfig {
    int k = 5;
    double temperature = 0.0;
    double similarity_dedup_threshold = 0.8;  // pairwise token-Jaccard must stay below
    int max_reprompts = 3;

    void validate() const {
        if (k < 1) throw ValidationError("QueryGenConfig: k must be >= 1");
        if (temperature < 0.0) throw ValidationError("QueryGenConfig: temperature must be >= 0");
        if (!(similarity_dedup_threshold >= 0.0 && similarity_dedup_threshold <= 1.0))
            throw ValidationError("QueryGenConfig: similarity_dedup_threshold out of [0, 1]");
    }
};

// ---------------------------------------------------------------------------
// Intent synonym table. Maps free-text intents to stable cluster keys;
// unknown intents fall back to their stemmed form, absent intent to
// "general". File format: one "cluster<TAB>phrase" per line, '#' comments.

class SynonymTable {
public:
    static SynonymTable builtin() {
        SynonymTable t;
        const std::pair<const char*, const char*> rows[] = {
            {"celebration", "birthday"},
            {"celebration", "birthday celebration"},
            {"celebration", "birthday dinner"},
            {"celebration", "anniversary"},
            {"celebration", "party"},
            {"celebration", "celebrate"},
            {"celebration", "celebration"},
            {"romance", "date night"},
            {"romance", "romantic dinner"},
            {"romance", "romantic"},
            {"romance", "date"},
            {"work", "solo work"},
            {"work", "study"},
            {"work", "focus"},
            {"work", "focused work"},
            {"work", "remote work"},
            {"work", "work"},
        };
        for (const auto& [cluster, phrase] : rows) t.add(cluster, phrase);
        return t;
    }

    static SynonymTable load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error("SynonymTable: cannot open " + path);
        SynonymTable t;
        std::string line;
        size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line[0] == '#') continue;
            const auto tab = line.find('\t');
            if (tab == std::string::npos)
                throw ValidationError("SynonymTable: missing tab at " + path + ":" +
                                      std::to_string(lineno));
            t.add(line.substr(0, tab), line.substr(tab + 1));
        }
        return t;
    }

    void add(const std::string& cluster, const std::string& phrase) {
        if (cluster.empty() || phrase.empty())
            throw ValidationError("SynonymTable: empty cluster or phrase");
        rows_.emplace_back(to_lower(phrase), to_lower(cluster));
    }

    std::string canonicalize(const std::optional<std::string>& intent_text) const {
        if (!intent_text) return "general";
        const std::string lowered = to_lower(*intent_text);
        if (tokenize(lowered).empty()) return "general";
        // Exact phrase first, then longest contained synonym.
        for (const auto& [phrase, cluster] : rows_) {
            if (lowered == phrase) return cluster;
        }
        const std::string* best = nullptr;
        size_t best_len = 0;
        for (const auto& [phrase, cluster] : rows_) {
            if (phrase.size() > best_len && phrase_in(lowered, phrase)) {
                best = &cluster;
                best_len = phrase.size();
            }
        }
        if (best) return *best;
        return stem_key(lowered);
    }

    size_t size() const { return rows_.size(); }

private:
    std::vector<std::pair<std::string, std::string>> rows_;  // phrase -> cluster
};

// ---------------------------------------------------------------------------
// Template bank. One parametrized query list per
// (day_part x social_situation x intent_cluster) cell with "*" wildcards;
// lookup walks cell -> (day_part x social) -> social -> generic.
// File format per line:
//   day_part<TAB>social<TAB>intent<TAB>grounding-csv<TAB>dimension<TAB>text

struct QueryTemplate {
    std::string day_part;   // "*" or a DayPart name
    std::string social;     // "*" or a SocialSituation name
    std::string intent;     // "*" or an intent cluster
    std::vector<Modality> grounding;
    std::string dimension;  // primary affordance dimension probed
    std::string text;
};

class TemplateBank {
public:
    static TemplateBank builtin();

    static TemplateBank load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error("TemplateBank: cannot open " + path);
        TemplateBank bank;
        std::string line;
        size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line[0] == '#') continue;
            std::vector<std::string> cols;
            std::string cur;
            for (char c : line) {
                if (c == '\t') {
                    cols.push_back(cur);
                    cur.clear();
                } else {
                    cur += c;
                }
            }
            cols.push_back(cur);
            if (cols.size() != 6)
                throw ValidationError("TemplateBank: expected 6 tab-separated columns at " +
                                      path + ":" + std::to_string(lineno));
            QueryTemplate t;
            t.day_part = cols[0];
            t.social = cols[1];
            t.intent = cols[2];
            std::string g;
            for (char c : cols[3] + ",") {
                if (c == ',') {
                    if (!g.empty()) t.grounding.push_back(modality_from_string(g));
                    g.clear();
                } else {
                    g += c;
                }
            }
            t.dimension = cols[4];
            t.text = cols[5];
            if (t.text.empty() || t.grounding.empty())
                throw ValidationError("TemplateBank: empty text or grounding at " + path + ":" +
                                      std::to_string(lineno));
            bank.rows_.push_back(std::move(t));
        }
        return bank;
    }

    void add(QueryTemplate t) { rows_.push_back(std::move(t)); }

    // Renders up to k queries for the context type, walking the fallback
    // chain and skipping near-duplicates of already collected texts.
    std::vector<AffordanceQuery> render(const ContextType& ct, int k,
                                        double dedup_threshold = 0.8) const {
        const std::string dp = to_string(ct.day_part);
        const std::string soc = to_string(ct.social_situation);
        const std::string intent = ct.intent_cluster;

        std::vector<AffordanceQuery> out;
        auto collect = [&](auto&& match) {
            for (const auto& t : rows_) {
                if (static_cast<int>(out.size()) >= k) return;
                if (!match(t)) continue;
                bool dup = false;
                for (const auto& q : out) {
                    if (token_jaccard(q.text, t.text) >= dedup_threshold) {
                        dup = true;
                        break;
                    }
                }
                if (dup) continue;
                out.emplace_back(static_cast<int>(out.size()) + 1, t.text, t.grounding);
            }
        };
        collect([&](const QueryTemplate& t) {
            return t.day_part == dp && t.social == soc && t.intent == intent;
        });
        collect([&](const QueryTemplate& t) {
            return t.day_part == dp && t.social == soc && t.intent == "*";
        });
        collect([&](const QueryTemplate& t) {
            return t.day_part == "*" && t.social == soc && t.intent == "*";
        });
        collect([&](const QueryTemplate& t) {
            return t.day_part == "*" && t.social == "*" && t.intent == "*";
        });
        return out;
    }

    // The context-independent generic cell (ablation A1).
    std::vector<AffordanceQuery> render_generic(int k) const {
        std::vector<AffordanceQuery> out;
        for (const auto& t : rows_) {
            if (static_cast<int>(out.size()) >= k) break;
            if (t.day_part == "*" && t.social == "*" && t.intent == "*")
                out.emplace_back(static_cast<int>(out.size()) + 1, t.text, t.grounding);
        }
        return out;
    }

    // Primary dimension of a query text, as declared by the matching
    // template row; empty when unknown.
    std::string dimension_of(const std::string& text) const {
        for (const auto& t : rows_) {
            if (t.text == text) return t.dimension;
        }
        return "";
    }

    const std::vector<QueryTemplate>& rows() const { return rows_; }

private:
    std::vector<QueryTemplate> rows_;
};

inline TemplateBank TemplateBank::builtin() {
    TemplateBank bank;
    auto add = [&bank](const char* dp, const char* soc, const char* intent,
                       std::vector<Modality> g, const char* dim, const char* text) {
        bank.add(QueryTemplate{dp, soc, intent, std::move(g), dim, text});
    };
    using M = Modality;

    // morning / solo / work
    add("morning", "solo", "work", {M::visual}, "quiet",
        "Does visual evidence suggest a quiet, well-lit focused atmosphere?");
    add("morning", "solo", "work", {M::review}, "wifi",
        "Do reviews confirm reliable wifi for laptop work?");
    add("morning", "solo", "work", {M::review}, "outlets",
        "Do reviews mention accessible power outlets for devices?");
    add("morning", "solo", "work", {M::metadata}, "hours",
        "Is the venue open during morning hours?");
    add("morning", "solo", "work", {M::metadata}, "price",
        "Is the venue affordably priced for a long working session?");

    // evening / friends / celebration
    add("evening", "friends", "celebration", {M::visual, M::metadata}, "seating",
        "Does the imagery or metadata confirm group seating configurations capable of "
        "accommodating larger parties?");
    add("evening", "friends", "celebration", {M::review}, "celebration",
        "Do reviews positively associate the venue with energetic celebrations or birthday "
        "events?");
    add("evening", "friends", "celebration", {M::metadata}, "hours",
        "Are the operating hours confirmed to extend late into the evening?");
    add("evening", "friends", "celebration", {M::visual}, "celebration",
        "Does the visual atmosphere suggest a lively, social setting?");
    add("evening", "friends", "celebration", {M::review}, "booking",
        "Do reviews suggest reservations or advance booking for busy evenings?");

    // any / family
    add("*", "family", "*", {M::visual, M::metadata}, "seating",
        "Does the imagery or metadata confirm seating that accommodates larger groups?");
    add("*", "family", "*", {M::review}, "family",
        "Do reviews describe the venue as welcoming for families with children?");
    add("*", "family", "*", {M::metadata}, "hours",
        "Is the venue open at typical outing times?");
    add("*", "family", "*", {M::review, M::metadata}, "price",
        "Do reviews mention good value or reasonable prices?");
    add("*", "family", "*", {M::review}, "booking",
        "Do reviews indicate reservations are accepted in advance?");

    // any / date
    add("*", "date", "*", {M::visual}, "romance",
        "Does visual evidence suggest an intimate, cozy setting suited to a date?");
    add("*", "date", "*", {M::review}, "romance",
        "Do reviews describe the venue as romantic or well-suited to couples?");
    add("*", "date", "*", {M::metadata}, "hours",
        "Is the venue open late enough for an evening dinner?");
    add("*", "date", "*", {M::metadata}, "price",
        "Is the price tier consistent with an upscale special-occasion dinner?");
    add("*", "date", "*", {M::review}, "booking",
        "Do reviews recommend a reservation in advance for dinner?");

    // evening / solo fallback cell
    add("evening", "solo", "*", {M::visual}, "quiet",
        "Does the imagery indicate a calm setting comfortable for dining alone?");
    add("evening", "solo", "*", {M::metadata}, "hours",
        "Is the venue open late for a solo evening visit?");

    // group parties reuse the friends evening set
    add("evening", "group", "*", {M::visual, M::metadata}, "seating",
        "Does the imagery or metadata confirm group seating configurations capable of "
        "accommodating larger parties?");
    add("evening", "group", "*", {M::review}, "celebration",
        "Do reviews positively associate the venue with energetic celebrations or birthday "
        "events?");
    add("evening", "group", "*", {M::metadata}, "hours",
        "Are the operating hours confirmed to extend late into the evening?");

    // generic cell (also the A1 fixed set)
    add("*", "*", "*", {M::metadata}, "hours", "Is the venue open at the time of the visit?");
    add("*", "*", "*", {M::review}, "sentiment",
        "Do recent reviews indicate a generally positive visitor experience?");
    add("*", "*", "*", {M::visual, M::metadata}, "category",
        "Does the imagery suggest the space matches its listed category?");
    add("*", "*", "*", {M::metadata}, "price", "Is the price tier reasonable for a typical visit?");
    add("*", "*", "*", {M::review}, "access",
        "Do reviews mention convenient access or an easy-to-find location?");
    return bank;
}

// ---------------------------------------------------------------------------
// Structural constraint validation

enum class QueryConstraint { groundability, contextual_isolation, orthogonality };

inline const char* to_string(QueryConstraint c) {
    switch (c) {
        case QueryConstraint::groundability: return "groundability";
        case QueryConstraint::contextual_isolation: return "contextual_isolation";
        default: return "orthogonality";
    }
}

struct ConstraintViolation {
    QueryConstraint constraint;
    std::vector<size_t> indices;  // offending query positions, 0-based
    std::string detail;
};

namespace detail {
inline const std::vector<std::string>& isolation_forbidden_tokens() {
    static const std::vector<std::string> tokens = {
        "user", "users", "history", "histories", "historical", "habitually",
        "personalized", "regulars",
    };
    return tokens;
}
}  // namespace detail

inline std::vector<ConstraintViolation> validate_query_set(
    const std::vector<AffordanceQuery>& queries, double similarity_threshold = 0.8) {
    std::vector<ConstraintViolation> out;
    for (size_t i = 0; i < queries.size(); ++i) {
        if (queries[i].grounding.empty()) {
            out.push_back({QueryConstraint::groundability,
                           {i},
                           "query " + std::to_string(i + 1) + " has no grounding modality"});
        }
        for (const auto& tok : detail::isolation_forbidden_tokens()) {
            if (phrase_in(queries[i].text, tok)) {
                out.push_back({QueryConstraint::contextual_isolation,
                               {i},
                               "query " + std::to_string(i + 1) +
                                   " references user identity or history ('" + tok + "')"});
                break;
            }
        }
    }
    for (size_t i = 0; i < queries.size(); ++i) {
        for (size_t j = i + 1; j < queries.size(); ++j) {
            const double sim = token_jaccard(queries[i].text, queries[j].text);
            if (sim >= similarity_threshold) {
                std::ostringstream msg;
                msg << "queries " << (i + 1) << " and " << (j + 1)
                    << " overlap (jaccard=" << sim << ")";
                out.push_back({QueryConstraint::orthogonality, {i, j}, msg.str()});
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Backend prompt protocol. The first two lines are machine-parseable so the
// deterministic rule backend can serve the request; the prose below them is
// for remote LLM backends.

inline constexpr const char* kQueryGenHeader = "AFFORDANCE_QUERY_REQUEST";

inline std::string context_type_to_json_string(const ContextType& ct) {
    nlohmann::json j;
    j["day_part"] = to_string(ct.day_part);
    j["day_class"] = to_string(ct.day_class);
    j["social_situation"] = to_string(ct.social_situation);
    j["intent_cluster"] = ct.intent_cluster;
    return j.dump();
}

inline ContextType context_type_from_json(const nlohmann::json& j) {
    ContextType ct;
    ct.day_part = day_part_from_string(j.at("day_part").get<std::string>());
    ct.day_class = day_class_from_string(j.at("day_class").get<std::string>());
    ct.social_situation = social_situation_from_string(j.at("social_situation").get<std::string>());
    ct.intent_cluster = j.at("intent_cluster").get<std::string>();
    return ct;
}

inline std::string build_querygen_prompt(const ContextType& ct, int k, int attempt) {
    std::ostringstream p;
    p << kQueryGenHeader << " k=" << k << " attempt=" << attempt << "\n";
    p << "context: " << context_type_to_json_string(ct) << "\n\n";
    p << "Generate exactly " << k
      << " yes/no affordance questions about a candidate venue for the situational "
         "context above. Each question must be answerable from at least one of: the "
         "venue's visual description, its user reviews, or its structured metadata. "
         "Questions must not reference any individual visitor's identity or long-term "
         "history, and must be semantically distinct from each other.\n";
    p << "Respond with a fenced JSON array of objects: "
         "[{\"text\": \"...\", \"grounding\": [\"visual\"|\"review\"|\"metadata\", ...]}]\n";
    return p.str();
}

// Returns the embedded request when `prompt` follows the query-gen protocol.
inline std::optional<std::pair<ContextType, int>> parse_querygen_prompt(
    const std::string& prompt) {
    if (prompt.rfind(kQueryGenHeader, 0) != 0) return std::nullopt;
    const auto k_pos = prompt.find("k=");
    const auto ctx_pos = prompt.find("context: ");
    if (k_pos == std::string::npos || ctx_pos == std::string::npos) return std::nullopt;
    int k = 0;
    try {
        k = std::stoi(prompt.substr(k_pos + 2));
    } catch (const std::exception&) {
        return std::nullopt;
    }
    const auto line_end = prompt.find('\n', ctx_pos);
    const std::string blob =
        prompt.substr(ctx_pos + 9, line_end == std::string::npos ? std::string::npos
                                                                 : line_end - ctx_pos - 9);
    try {
        return std::make_pair(context_type_from_json(nlohmann::json::parse(blob)), k);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

// Extracts {text, grounding} items from a backend response; tolerates prose
// around the JSON array and skips malformed items.
inline std::vector<std::pair<std::string, std::vector<Modality>>> parse_query_response(
    const std::string& text) {
    std::vector<std::pair<std::string, std::vector<Modality>>> out;
    const auto open = text.find('[');
    const auto close = text.rfind(']');
    if (open == std::string::npos || close == std::string::npos || close < open) return out;
    nlohmann::json arr;
    try {
        arr = nlohmann::json::parse(text.substr(open, close - open + 1));
    } catch (const std::exception&) {
        return out;
    }
    if (!arr.is_array()) return out;
    for (const auto& item : arr) {
        if (!item.is_object() || !item.contains("text") || !item.contains("grounding")) continue;
        if (!item["text"].is_string() || !item["grounding"].is_array()) continue;
        std::string qtext = item["text"].get<std::string>();
        std::vector<Modality> grounding;
        bool ok = !qtext.empty();
        for (const auto& g : item["grounding"]) {
            if (!g.is_string()) {
                ok = false;
                break;
            }
            try {
                grounding.push_back(modality_from_string(g.get<std::string>()));
            } catch (const ValidationError&) {
                ok = false;
                break;
            }
        }
        if (ok && !grounding.empty()) out.emplace_back(std::move(qtext), std::move(grounding));
    }
    return out;
}

// ---------------------------------------------------------------------------
// QueryGen engine

class QueryGen {
public:
    explicit QueryGen(QueryGenConfig cfg = {}, TemplateBank bank = TemplateBank::builtin(),
                      SynonymTable synonyms = SynonymTable::builtin())
        : cfg_(cfg), bank_(std::move(bank)), synonyms_(std::move(synonyms)) {
        cfg_.validate();
    }

    const QueryGenConfig& config() const { return cfg_; }
    const TemplateBank& bank() const { return bank_; }
    const SynonymTable& synonyms() const { return synonyms_; }

    ContextType discretize(const Context& c) const {
        ContextType ct;
        ct.day_part = day_part_of_minute(c.minute_of_day());
        ct.day_class = day_class_of(c.day_of_week);
        ct.social_situation = c.social_situation;
        ct.intent_cluster = synonyms_.canonicalize(c.intent_text);
        return ct;
    }

    // Context-independent generic set (ablation A1).
    std::vector<AffordanceQuery> generate_fixed() const {
        return bank_.render_generic(cfg_.k);
    }

    std::vector<AffordanceQuery> generate(const Context& c, ReasonerBackend& backend) const {
        return generate_for_type(discretize(c), backend);
    }

    std::vector<AffordanceQuery> generate_for_type(const ContextType& ct,
                                                   ReasonerBackend& backend) const {
        std::vector<AffordanceQuery> accepted;
        for (int attempt = 0; attempt <= cfg_.max_reprompts; ++attempt) {
            const std::string prompt = build_querygen_prompt(ct, cfg_.k, attempt);
            const std::string response = backend.generate(prompt, cfg_.temperature);
            for (auto& [text, grounding] : parse_query_response(response)) {
                if (static_cast<int>(accepted.size()) >= cfg_.k) break;
                if (!admissible(text, accepted)) continue;
                accepted.emplace_back(static_cast<int>(accepted.size()) + 1, text, grounding);
            }
            if (static_cast<int>(accepted.size()) >= cfg_.k) break;
        }
        if (static_cast<int>(accepted.size()) < cfg_.k) {
            // Remaining slots come from the template bank's fallback chain.
            for (const auto& q :
                 bank_.render(ct, cfg_.k * 2, cfg_.similarity_dedup_threshold)) {
                if (static_cast<int>(accepted.size()) >= cfg_.k) break;
                if (!admissible(q.text, accepted)) continue;
                accepted.emplace_back(static_cast<int>(accepted.size()) + 1, q.text, q.grounding);
            }
        }
        if (static_cast<int>(accepted.size()) != cfg_.k)
            throw Error("QueryGen: could not assemble " + std::to_string(cfg_.k) +
                        " admissible queries for context type " + ct.key());
        return accepted;
    }

private:
    bool admissible(const std::string& text,
                    const std::vector<AffordanceQuery>& accepted) const {
        for (const auto& tok : detail::isolation_forbidden_tokens()) {
            if (phrase_in(text, tok)) return false;
        }
        for (const auto& q : accepted) {
            if (token_jaccard(q.text, text) >= cfg_.similarity_dedup_threshold) return false;
        }
        return true;
    }

    QueryGenConfig cfg_;
    TemplateBank bank_;
    SynonymTable synonyms_;
};

// Builds a QueryGen from a data directory when templates.tsv / synonyms.tsv
// are present there, falling back to the built-in tables otherwise.
inline QueryGen make_querygen(const QueryGenConfig& cfg, const std::string& data_dir) {
    namespace fs = std::filesystem;
    TemplateBank bank = TemplateBank::builtin();
    SynonymTable synonyms = SynonymTable::builtin();
    if (!data_dir.empty()) {
        const auto templates = fs::path(data_dir) / "templates.tsv";
        const auto syn = fs::path(data_dir) / "synonyms.tsv";
        if (fs::exists(templates)) bank = TemplateBank::load(templates.string());
        if (fs::exists(syn)) synonyms = SynonymTable::load(syn.string());
    }
    return QueryGen(cfg, std::move(bank), std::move(synonyms));
}

inline ContextType discretize_context(const Context& c,
                                      const SynonymTable& synonyms = SynonymTable::builtin()) {
    ContextType ct;
    ct.day_part = day_part_of_minute(c.minute_of_day());
    ct.day_class = day_class_of(c.day_of_week);
    ct.social_situation = c.social_situation;
    ct.intent_cluster = synonyms.canonicalize(c.intent_text);
    return ct;
}

}  // namespace affrec
