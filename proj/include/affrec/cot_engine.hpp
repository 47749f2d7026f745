#pragma once
// Phase 2: per (query, POI) execution of the five-step cross-modal
// chain-of-thought through a pluggable backend. Ships a deterministic
// rule backend (keyword lexicons + emergent rule table) and a remote HTTP
// backend speaking a {prompt, temperature, max_tokens} -> {text} protocol.

#include <atomic>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "affrec/ablation.hpp"
#include "affrec/affordance.hpp"
#include "affrec/backend.hpp"
#include "affrec/json_codec.hpp"
#include "affrec/querygen.hpp"
#include "affrec/text.hpp"

namespace affrec {

// Rule-backend confidence calibration. Confidences from a real LLM are
// model-internal; these constants are an explicit stand-in calibration.
inline constexpr double kBaseConfidence = 0.5;
inline constexpr double kSignalWeight = 0.1;
inline constexpr double kMaxSoftConfidence = 0.95;
inline constexpr double kNoEvidenceConfidence = 0.2;
// Leaning confidences of an uncertain verdict when a conflicting review is
// newer than the image-staleness horizon: the review side sets the leaning.
// A recent review refuting the queried affordance leaves low-ish confidence
// that it holds; a recent review supporting it leaves high confidence.
inline constexpr double kConflictRefuteConfidence = 0.71;
inline constexpr double kConflictSupportConfidence = 0.71;

// ---------------------------------------------------------------------------
// Affordance dimension lexicons. Negative phrases take precedence over
// positive ones within the same dimension, so "no wifi" never counts as a
// wifi-positive mention. The synthetic corpus generator renders venue
// content through these same lists.

struct DimensionLexicon {
    std::string name;
    std::vector<std::string> triggers;  // query terms that select the dimension
    std::vector<std::string> positive;  // evidence phrases supporting it
    std::vector<std::string> negative;  // evidence phrases refuting it
};

inline const std::vector<DimensionLexicon>& affordance_lexicons() {
    static const std::vector<DimensionLexicon> lexicons = {
        {"seating",
         {"seating", "seats", "seat", "table", "tables", "group", "groups", "accommodate",
          "accommodating", "capacity", "parties"},
         {"spacious", "group seating", "large tables", "communal table", "dense static seating",
          "dense seating", "high capacity", "roomy", "plenty of seats", "big booths",
          "seats large groups"},
         {"cramped", "tiny tables", "limited seating", "few seats", "tight space"}},
        {"quiet",
         {"quiet", "silent", "noise", "noisy", "focused", "calm", "peaceful", "study"},
         {"quiet", "serene", "calm", "peaceful", "reading-room", "reading room", "silent",
          "tranquil", "hushed"},
         {"noisy", "loud", "construction", "blaring", "deafening", "noise"}},
        {"wifi",
         {"wifi", "wi-fi", "internet", "wireless"},
         {"wifi", "wi-fi", "fast internet", "reliable wireless"},
         {"no wifi", "wifi down", "spotty wifi", "slow wifi", "wifi kept dropping"}},
        {"outlets",
         {"outlet", "outlets", "power", "plug", "plugs", "charging"},
         {"outlets", "power outlets", "plugs", "charging points", "sockets", "outlet"},
         {"no outlets", "no power outlets", "few outlets"}},
        {"celebration",
         {"celebration", "celebrations", "celebrate", "celebratory", "celebrating", "birthday",
          "party", "festive", "lively", "energetic"},
         {"birthday", "celebration", "party", "festive", "lively", "energetic", "vibrant",
          "celebrate", "buzzing"},
         {"dull", "somber", "sleepy", "lifeless"}},
        {"booking",
         {"booking", "reservation", "reservations", "reserve", "book"},
         {"reservation recommended", "reservations recommended", "book ahead", "booking required",
          "make a reservation", "reserve in advance"},
         {"walk-in", "walk-ins welcome", "no reservations"}},
        {"family",
         {"family", "families", "kids", "children"},
         {"family-friendly", "kids menu", "children welcome", "high chairs", "great for kids",
          "family"},
         {"adults only", "not for kids", "no children"}},
        {"romance",
         {"romantic", "intimate", "date", "couples", "cozy"},
         {"romantic", "intimate", "cozy", "candlelit", "perfect date", "couples"},
         {"rowdy", "unromantic"}},
        {"sentiment",
         {"positive", "experience", "enjoy", "visitor"},
         {"great", "excellent", "amazing", "wonderful", "friendly staff", "highly recommend",
          "loved"},
         {"terrible", "awful", "rude", "dirty", "avoid", "disappointing"}},
        {"price",
         {"price", "prices", "priced", "budget", "affordable", "affordably", "cheap", "expensive",
          "upscale", "value"},
         {"affordable", "good value", "reasonable prices", "cheap eats", "fair prices"},
         {"overpriced", "expensive", "rip-off"}},
        // metadata-driven; review text plays no role
        {"hours",
         {"open", "opens", "opening", "hours", "late", "close", "closes", "closed", "closing"},
         {},
         {}},
        {"category", {"category", "listed"}, {}, {}},
        {"access",
         {"access", "location", "find", "convenient"},
         {"convenient location", "easy to find", "central location"},
         {"hard to find", "out of the way"}},
        // auxiliary: only reachable through emergent rules
        {"fullness", {}, {"always full", "packed", "crowded", "always busy", "full on"}, {}},
    };
    return lexicons;
}

inline const DimensionLexicon* lexicon_by_name(const std::string& name) {
    for (const auto& lex : affordance_lexicons()) {
        if (lex.name == name) return &lex;
    }
    return nullptr;
}

inline std::vector<const DimensionLexicon*> detect_dimensions(const std::string& query_text) {
    // Query texts repeat heavily across candidates; memoize per thread.
    thread_local std::unordered_map<std::string, std::vector<const DimensionLexicon*>> cache;
    if (const auto it = cache.find(query_text); it != cache.end()) return it->second;
    std::vector<const DimensionLexicon*> dims;
    for (const auto& lex : affordance_lexicons()) {
        for (const auto& trig : lex.triggers) {
            if (phrase_in(query_text, trig)) {
                dims.push_back(&lex);
                break;
            }
        }
    }
    if (cache.size() > 4096) cache.clear();
    cache.emplace(query_text, dims);
    return dims;
}

// ---------------------------------------------------------------------------
// Emergent rule table (cross-modal synthesis, Step 4). A rule fires for a
// query probing `dimension` when the image shows `image_dim` positively,
// some review hits `review_dim` positively and the venue's review_count
// reaches the threshold. File format:
//   dimension<TAB>image_dim<TAB>review_dim<TAB>min_review_count<TAB>conclusion

struct EmergentRule {
    std::string dimension;
    std::string image_dim;
    std::string review_dim;
    std::int64_t min_review_count = 0;
    std::string conclusion;
};

class EmergentRuleTable {
public:
    static EmergentRuleTable builtin() {
        EmergentRuleTable t;
        t.rules_.push_back(
            {"booking", "seating", "fullness", 50, "Advance booking is strictly advisable."});
        return t;
    }

    static EmergentRuleTable load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error("EmergentRuleTable: cannot open " + path);
        EmergentRuleTable t;
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
            if (cols.size() != 5)
                throw ValidationError("EmergentRuleTable: expected 5 columns at " + path + ":" +
                                      std::to_string(lineno));
            t.rules_.push_back({cols[0], cols[1], cols[2], std::stoll(cols[3]), cols[4]});
        }
        return t;
    }

    const std::vector<EmergentRule>& rules() const { return rules_; }

private:
    std::vector<EmergentRule> rules_;
};

// ---------------------------------------------------------------------------
// Review selection (Step 2 input) honoring the temporal cutoff: only
// reviews created at or before `cutoff` qualify, newest first, at most `l`,
// ties keeping input order.

inline std::vector<Review> select_recent_reviews(const std::vector<Review>& reviews, int l,
                                                 std::int64_t cutoff) {
    if (l <= 0) return {};
    std::vector<Review> out;
    out.reserve(reviews.size());
    for (const auto& r : reviews) {
        if (r.created_at <= cutoff) out.push_back(r);
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const Review& a, const Review& b) { return a.created_at > b.created_at; });
    if (out.size() > static_cast<size_t>(l)) out.resize(static_cast<size_t>(l));
    return out;
}

// ---------------------------------------------------------------------------
// Step 3 hard constraints: metadata that logically negates a query yields a
// definitive veto overriding every other signal. Currently the only
// predicate is operating hours versus the context time.

namespace detail {
inline bool query_has_dimension(const std::vector<const DimensionLexicon*>& dims,
                                const char* name) {
    for (const auto* d : dims) {
        if (d->name == name) return true;
    }
    return false;
}

inline std::string format_minute(int minute) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%02d:%02d", minute / 60, minute % 60);
    return buf;
}
}  // namespace detail

inline std::optional<Verdict> evaluate_hard_constraints(const Metadata& m, const Context& c,
                                                        const AffordanceQuery& query) {
    const auto dims = detect_dimensions(query.text);
    if (!detail::query_has_dimension(dims, "hours")) return std::nullopt;
    const int minute = c.minute_of_day();
    if (m.hours.is_open(c.day_of_week, minute)) return std::nullopt;

    Verdict v;
    v.answer = Answer::no;
    v.confidence = 1.0;
    const std::string cite = std::string("metadata: closed at ") + detail::format_minute(minute) +
                             " on " + to_string(c.day_of_week);
    v.evidence.metadata.push_back(cite);
    v.traces.push_back({ReasoningStep::metadata, Signal::refutes, cite});
    v.traces.push_back(
        {ReasoningStep::verdict, Signal::refutes, "hard constraint veto: venue closed"});
    return v;
}

// ---------------------------------------------------------------------------
// Deterministic rule backend

struct RuleBackendConfig {
    TemplateBank bank = TemplateBank::builtin();
    EmergentRuleTable rules = EmergentRuleTable::builtin();
    int max_citations = 4;
};

class RuleBackend : public ReasonerBackend {
public:
    RuleBackend() : cfg_(RuleBackendConfig{}) {}
    explicit RuleBackend(RuleBackendConfig cfg) : cfg_(std::move(cfg)) {}

    Verdict answer(const AffordanceQuery& query, const std::string& image_description,
                   const std::vector<Review>& reviews, const Metadata& metadata,
                   const Context& context, const ReasoningOptions& opts) override {
        answer_calls_.fetch_add(1, std::memory_order_relaxed);
        const auto dims = detect_dimensions(query.text);

        const Scan visual = scan_image(dims, image_description);
        const Scan review = scan_reviews(dims, reviews);
        const Scan meta = opts.use_metadata
                              ? scan_metadata(dims, query.text, image_description, metadata,
                                              context)
                              : Scan{};

        Verdict v;
        v.evidence.visual = visual.citations;
        v.evidence.review = review.citations;
        v.evidence.metadata = meta.citations;
        v.traces.push_back({ReasoningStep::visual, visual.signal, visual.note});
        v.traces.push_back({ReasoningStep::review, review.signal, review.note});
        v.traces.push_back({ReasoningStep::metadata, meta.signal,
                            opts.use_metadata ? meta.note : "metadata evidence disabled"});

        if (opts.late_fusion_only) {
            late_fusion(v, visual, review, meta);
            return v;
        }

        const bool any_support = visual.signal == Signal::supports ||
                                 review.signal == Signal::supports ||
                                 meta.signal == Signal::supports;
        const bool any_refute = visual.signal == Signal::refutes ||
                                review.signal == Signal::refutes ||
                                meta.signal == Signal::refutes;
        const int support_units = units_of(visual, Signal::supports) +
                                  units_of(review, Signal::supports) +
                                  units_of(meta, Signal::supports);
        const int refute_units = units_of(visual, Signal::refutes) +
                                 units_of(review, Signal::refutes) +
                                 units_of(meta, Signal::refutes);

        bool conflicted = false;
        if (any_support && any_refute && !opts.disable_conflict) {
            conflicted = true;
            v.answer = Answer::uncertain;
            v.conflict = conflict_description(dims, visual, review, meta);
            std::int64_t newest_review_ts = -1;
            if (review.signal == Signal::supports) newest_review_ts = review.newest_support_ts;
            if (review.signal == Signal::refutes) newest_review_ts = review.newest_refute_ts;
            const bool recent_review =
                newest_review_ts >= 0 &&
                newest_review_ts >= context.timestamp - opts.image_staleness_horizon_s;
            // Temporal precedence: a review newer than the image-staleness
            // horizon sets the leaning of the uncertain verdict.
            if (!recent_review) {
                v.confidence = kBaseConfidence;
            } else if (review.signal == Signal::supports) {
                v.confidence = kConflictSupportConfidence;
            } else {
                v.confidence = kConflictRefuteConfidence;
            }
        } else if (any_support && any_refute) {  // A4: contradictions silently averaged
            const int net = support_units - refute_units;
            if (net > 0) {
                v.answer = Answer::yes;
                v.confidence = soft_confidence(net);
            } else if (net < 0) {
                v.answer = Answer::no;
                v.confidence = soft_confidence(-net);
            } else {
                v.answer = Answer::uncertain;
                v.confidence = kBaseConfidence;
            }
        } else if (any_support) {
            v.answer = Answer::yes;
            v.confidence = soft_confidence(support_units);
        } else if (any_refute) {
            v.answer = Answer::no;
            v.confidence = soft_confidence(refute_units);
        } else {
            v.answer = Answer::uncertain;
            v.confidence = kNoEvidenceConfidence;
        }

        if (!opts.disable_emergent) {
            synthesize(v, dims, image_description, reviews, metadata, opts.use_metadata,
                       conflicted);
        }

        v.traces.push_back({ReasoningStep::verdict, verdict_signal(v.answer),
                            std::string("answer=") + to_string(v.answer) +
                                " confidence=" + format_confidence(v.confidence)});
        v.validate();
        return v;
    }

    std::string generate(const std::string& prompt, double /*temperature*/) override {
        generate_calls_.fetch_add(1, std::memory_order_relaxed);
        const auto request = parse_querygen_prompt(prompt);
        if (!request) return "[]";
        const auto queries = cfg_.bank.render(request->first, request->second);
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& q : queries) {
            nlohmann::json g = nlohmann::json::array();
            for (Modality m : q.grounding) g.push_back(to_string(m));
            arr.push_back({{"text", q.text}, {"grounding", std::move(g)}});
        }
        return "```json\n" + arr.dump() + "\n```";
    }

    std::uint64_t answer_calls() const { return answer_calls_.load(std::memory_order_relaxed); }
    std::uint64_t generate_calls() const {
        return generate_calls_.load(std::memory_order_relaxed);
    }
    void reset_counters() {
        answer_calls_.store(0, std::memory_order_relaxed);
        generate_calls_.store(0, std::memory_order_relaxed);
    }

    const RuleBackendConfig& config() const { return cfg_; }

private:
    struct Scan {
        Signal signal = Signal::neutral;
        int units = 0;
        std::vector<std::string> citations;
        std::string note = "no signal";
        std::int64_t newest_support_ts = -1;
        std::int64_t newest_refute_ts = -1;
    };

    static int units_of(const Scan& s, Signal want) { return s.signal == want ? s.units : 0; }

    static double soft_confidence(int units) {
        return std::min(kMaxSoftConfidence, kBaseConfidence + kSignalWeight * units);
    }

    static Signal verdict_signal(Answer a) {
        switch (a) {
            case Answer::yes: return Signal::supports;
            case Answer::no: return Signal::refutes;
            default: return Signal::neutral;
        }
    }

    // Per-dimension polarity with negative-phrase precedence.
    static int polarity(const DimensionLexicon& lex, const std::string& text) {
        for (const auto& p : lex.negative) {
            if (phrase_in(text, p)) return -1;
        }
        for (const auto& p : lex.positive) {
            if (phrase_in(text, p)) return +1;
        }
        return 0;
    }

    static std::string first_match(const std::vector<std::string>& phrases,
                                   const std::string& text) {
        for (const auto& p : phrases) {
            if (phrase_in(text, p)) return p;
        }
        return "";
    }

    Scan scan_image(const std::vector<const DimensionLexicon*>& dims,
                    const std::string& image) const {
        Scan s;
        if (image.empty() || dims.empty()) {
            s.note = image.empty() ? "no image evidence" : "no matching dimension";
            return s;
        }
        int pos = 0, neg = 0;
        for (const auto* lex : dims) {
            const int p = polarity(*lex, image);
            if (p > 0) {
                ++pos;
                s.citations.push_back("image: " + first_match(lex->positive, image));
            } else if (p < 0) {
                ++neg;
                s.citations.push_back("image: " + first_match(lex->negative, image));
            }
        }
        if (pos > neg) {
            s.signal = Signal::supports;
            s.units = 1;
            s.note = "visual layout supports the query";
        } else if (neg > pos) {
            s.signal = Signal::refutes;
            s.units = 1;
            s.note = "visual layout contradicts the query";
        } else {
            s.note = pos > 0 ? "mixed visual signals" : "no relevant visual signal";
        }
        return s;
    }

    Scan scan_reviews(const std::vector<const DimensionLexicon*>& dims,
                      const std::vector<Review>& reviews) const {
        Scan s;
        if (reviews.empty() || dims.empty()) {
            s.note = reviews.empty() ? "no review evidence" : "no matching dimension";
            return s;
        }
        int r_pos = 0, r_neg = 0;
        for (const auto& r : reviews) {
            int pos = 0, neg = 0;
            std::string phrase;
            for (const auto* lex : dims) {
                const int p = polarity(*lex, r.text);
                if (p > 0) {
                    ++pos;
                    if (phrase.empty()) phrase = first_match(lex->positive, r.text);
                } else if (p < 0) {
                    ++neg;
                    if (phrase.empty()) phrase = first_match(lex->negative, r.text);
                }
            }
            if (pos == neg) continue;  // no signal or internally balanced
            const bool positive = pos > neg;
            if (positive) {
                ++r_pos;
                s.newest_support_ts = std::max(s.newest_support_ts, r.created_at);
            } else {
                ++r_neg;
                s.newest_refute_ts = std::max(s.newest_refute_ts, r.created_at);
            }
            if (static_cast<int>(s.citations.size()) < cfg_.max_citations) {
                s.citations.push_back("review@" + std::to_string(r.created_at) + ": " +
                                      truncate_snippet(r.text));
            }
        }
        if (r_pos > r_neg) {
            s.signal = Signal::supports;
            s.units = std::min(2, r_pos - r_neg);
            s.note = std::to_string(r_pos) + " supporting review(s)";
        } else if (r_neg > r_pos) {
            s.signal = Signal::refutes;
            s.units = std::min(2, r_neg - r_pos);
            s.note = std::to_string(r_neg) + " contradicting review(s)";
        } else {
            s.note = r_pos > 0 ? "balanced review signals" : "no relevant review signal";
        }
        return s;
    }

    Scan scan_metadata(const std::vector<const DimensionLexicon*>& dims,
                       const std::string& query_text, const std::string& image,
                       const Metadata& m, const Context& c) const {
        Scan s;
        s.note = "no metadata predicate applies";
        if (detail::query_has_dimension(dims, "hours")) {
            const int minute = c.minute_of_day();
            const bool open_now = m.hours.is_open(c.day_of_week, minute);
            const bool wants_late = phrase_in(query_text, "late");
            bool ok = open_now;
            if (open_now && wants_late) ok = m.hours.is_open(c.day_of_week, 21 * 60 + 30);
            s.signal = ok ? Signal::supports : Signal::refutes;
            s.units = 1;
            std::string cite = std::string("metadata: ") + (open_now ? "open" : "closed") +
                               " at " + detail::format_minute(minute) + " on " +
                               to_string(c.day_of_week);
            if (open_now && wants_late && !ok) cite += " but closes before late evening";
            s.citations.push_back(cite);
            s.note = ok ? "operating hours satisfy the query" : "operating hours contradict the query";
            return s;
        }
        if (detail::query_has_dimension(dims, "price")) {
            const bool budget = phrase_in(query_text, "affordable") ||
                                phrase_in(query_text, "affordably") ||
                                phrase_in(query_text, "budget") || phrase_in(query_text, "cheap");
            const bool upscale = phrase_in(query_text, "upscale") ||
                                 phrase_in(query_text, "special-occasion") ||
                                 phrase_in(query_text, "special occasion") ||
                                 phrase_in(query_text, "fine dining");
            Signal sig = Signal::neutral;
            if (budget) {
                sig = m.price_tier <= 2 ? Signal::supports
                                        : (m.price_tier >= 4 ? Signal::refutes : Signal::neutral);
            } else if (upscale) {
                sig = m.price_tier >= 3 ? Signal::supports
                                        : (m.price_tier <= 1 ? Signal::refutes : Signal::neutral);
            } else {
                sig = m.price_tier <= 3 ? Signal::supports : Signal::refutes;
            }
            if (sig != Signal::neutral) {
                s.signal = sig;
                s.units = 1;
                s.citations.push_back("metadata: price tier " + std::to_string(m.price_tier));
                s.note = sig == Signal::supports ? "price tier satisfies the query"
                                                 : "price tier contradicts the query";
            } else {
                s.note = "price tier inconclusive";
            }
            return s;
        }
        if (detail::query_has_dimension(dims, "category") && !m.category.empty()) {
            bool matched = false;
            for (const auto& tok : tokenize(m.category)) {
                if (tok.size() >= 3 && phrase_in(image, tok)) {
                    matched = true;
                    break;
                }
            }
            if (matched) {
                s.signal = Signal::supports;
                s.units = 1;
                s.citations.push_back("metadata: category '" + m.category + "'");
                s.note = "imagery consistent with listed category";
            } else {
                s.note = "category not visible in imagery";
            }
            return s;
        }
        return s;
    }

    void late_fusion(Verdict& v, const Scan& visual, const Scan& review, const Scan& meta) const {
        auto score = [](const Scan& s) {
            switch (s.signal) {
                case Signal::supports: return 0.75;
                case Signal::refutes: return 0.25;
                default: return 0.5;
            }
        };
        const double m = (score(visual) + score(review) + score(meta)) / 3.0;
        if (m >= 0.6) {
            v.answer = Answer::yes;
        } else if (m <= 0.4) {
            v.answer = Answer::no;
        } else {
            v.answer = Answer::uncertain;
        }
        v.confidence = m;
        v.traces.push_back({ReasoningStep::verdict, verdict_signal(v.answer),
                            std::string("late-fusion answer=") + to_string(v.answer) +
                                " confidence=" + format_confidence(v.confidence)});
        v.validate();
    }

    void synthesize(Verdict& v, const std::vector<const DimensionLexicon*>& dims,
                    const std::string& image, const std::vector<Review>& reviews,
                    const Metadata& metadata, bool use_metadata, bool conflicted) const {
        bool fired = false;
        for (const auto& rule : cfg_.rules.rules()) {
            if (!detail::query_has_dimension(dims, rule.dimension.c_str())) continue;
            const auto* image_lex = lexicon_by_name(rule.image_dim);
            const auto* review_lex = lexicon_by_name(rule.review_dim);
            if (!image_lex || !review_lex) continue;
            if (image.empty() || polarity(*image_lex, image) <= 0) continue;
            std::string review_phrase;
            std::int64_t review_ts = -1;
            for (const auto& r : reviews) {
                if (polarity(*review_lex, r.text) > 0) {
                    review_phrase = first_match(review_lex->positive, r.text);
                    review_ts = r.created_at;
                    break;
                }
            }
            if (review_phrase.empty()) continue;
            if (!use_metadata || metadata.review_count < rule.min_review_count) continue;

            fired = true;
            if (v.answer == Answer::yes) {
                v.emergent = rule.conclusion;
                v.confidence = std::max(v.confidence, soft_confidence(3));
            } else if (v.answer == Answer::uncertain && !conflicted) {
                v.answer = Answer::yes;
                v.confidence = soft_confidence(3);
                v.emergent = rule.conclusion;
            } else {
                // refuted or conflicted verdicts keep their answer; the
                // conclusion is still surfaced for the explanation trace
                v.emergent = rule.conclusion;
            }
            v.evidence.visual.push_back("image: " + first_match(image_lex->positive, image));
            v.evidence.review.push_back("review@" + std::to_string(review_ts) + ": " +
                                        review_phrase);
            v.evidence.metadata.push_back("metadata: review_count=" +
                                          std::to_string(metadata.review_count));
            v.traces.push_back(
                {ReasoningStep::synthesis, Signal::supports, "emergent: " + rule.conclusion});
            break;
        }
        if (!fired) {
            v.traces.push_back({ReasoningStep::synthesis,
                                conflicted ? Signal::refutes : Signal::neutral,
                                conflicted ? "cross-modal contradiction detected"
                                           : "no emergent conclusion"});
        }
    }

    static std::string conflict_description(const std::vector<const DimensionLexicon*>& dims,
                                            const Scan& visual, const Scan& review,
                                            const Scan& meta) {
        auto side = [&](Signal want) {
            std::string out;
            auto append = [&out](const char* name) {
                if (!out.empty()) out += "/";
                out += name;
            };
            if (visual.signal == want) append("visual");
            if (review.signal == want) append("review");
            if (meta.signal == want) append("metadata");
            return out;
        };
        std::string dim = dims.empty() ? "query" : dims.front()->name;
        return "cross-modal conflict on " + dim + ": " + side(Signal::supports) +
               " supports vs " + side(Signal::refutes) + " refutes";
    }

    RuleBackendConfig cfg_;
    std::atomic<std::uint64_t> answer_calls_{0};
    std::atomic<std::uint64_t> generate_calls_{0};
};

// ---------------------------------------------------------------------------
// Remote HTTP backend: single POST endpoint, JSON body
// {prompt, temperature, max_tokens} -> {text}; verdicts are parsed from a
// fenced JSON block with strict schema validation.

struct RemoteBackendConfig {
    std::string url;  // e.g. http://host:8080/v1/complete
    int timeout_ms = 30000;
    int max_tokens = 1024;
    std::string answer_prompt_template;  // optional override; {placeholders} substituted
};

inline std::string default_answer_prompt_template() {
    return "AFFORDANCE_ANSWER_REQUEST\n"
           "query: {query}\n"
           "context: {context}\n"
           "image_description: {image}\n"
           "reviews: {reviews}\n"
           "metadata: {metadata}\n"
           "options: {options}\n\n"
           "Answer the query about this venue by reasoning in five steps: (1) interrogate the "
           "visual description, (2) extract behavioral patterns from the reviews, (3) treat "
           "category, price tier and operating hours as hard logical constraints, (4) synthesize "
           "the modalities for conclusions no single source supports alone, (5) produce the "
           "final verdict, flagging any cross-modal contradiction and defaulting to uncertain "
           "when one exists.\n"
           "Respond with a fenced JSON object: {\"answer\": \"yes|no|uncertain\", "
           "\"confidence\": <0..1>, \"evidence\": {\"visual\": [], \"review\": [], "
           "\"metadata\": []}, \"emergent\": \"...\" (optional), \"conflict\": \"...\" "
           "(optional)}\n";
}

class RemoteBackend : public ReasonerBackend {
public:
    explicit RemoteBackend(RemoteBackendConfig cfg) : cfg_(std::move(cfg)) {
        const auto scheme_end = cfg_.url.find("://");
        if (scheme_end == std::string::npos)
            throw ValidationError("RemoteBackend: url must include a scheme");
        const auto path_start = cfg_.url.find('/', scheme_end + 3);
        base_ = path_start == std::string::npos ? cfg_.url : cfg_.url.substr(0, path_start);
        path_ = path_start == std::string::npos ? "/" : cfg_.url.substr(path_start);
        if (cfg_.answer_prompt_template.empty())
            cfg_.answer_prompt_template = default_answer_prompt_template();
    }

    std::string generate(const std::string& prompt, double temperature) override {
        httplib::Client client(base_);
        client.set_connection_timeout(0, cfg_.timeout_ms * 1000);
        client.set_read_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);
        nlohmann::json body;
        body["prompt"] = prompt;
        body["temperature"] = temperature;
        body["max_tokens"] = cfg_.max_tokens;
        auto res = client.Post(path_, body.dump(), "application/json");
        if (!res) throw BackendError("remote backend unreachable: " + base_);
        if (res->status != 200)
            throw BackendError("remote backend returned status " + std::to_string(res->status));
        nlohmann::json reply;
        try {
            reply = nlohmann::json::parse(res->body);
        } catch (const std::exception&) {
            throw BackendError("remote backend returned invalid JSON");
        }
        if (!reply.is_object() || !reply.contains("text") || !reply["text"].is_string())
            throw BackendError("remote backend response missing 'text'");
        return reply["text"].get<std::string>();
    }

    Verdict answer(const AffordanceQuery& query, const std::string& image_description,
                   const std::vector<Review>& reviews, const Metadata& metadata,
                   const Context& context, const ReasoningOptions& opts) override {
        nlohmann::json reviews_json = nlohmann::json::array();
        for (const auto& r : reviews) reviews_json.push_back(to_json(r));
        nlohmann::json options;
        options["late_fusion_only"] = opts.late_fusion_only;
        options["disable_emergent"] = opts.disable_emergent;
        options["disable_conflict"] = opts.disable_conflict;
        options["use_metadata"] = opts.use_metadata;

        std::string prompt = cfg_.answer_prompt_template;
        substitute(prompt, "{query}", query.text);
        substitute(prompt, "{context}", to_json(context).dump());
        substitute(prompt, "{image}", image_description);
        substitute(prompt, "{reviews}", reviews_json.dump());
        substitute(prompt, "{metadata}", to_json(metadata).dump());
        substitute(prompt, "{options}", options.dump());

        const std::string text = generate(prompt, 0.0);
        return parse_verdict_response(text);
    }

    // Strict parse of the fenced verdict schema; any deviation is a backend
    // protocol error.
    static Verdict parse_verdict_response(const std::string& text) {
        const auto open = text.find('{');
        const auto close = text.rfind('}');
        if (open == std::string::npos || close == std::string::npos || close < open)
            throw BackendError("verdict response contains no JSON object");
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text.substr(open, close - open + 1));
        } catch (const std::exception&) {
            throw BackendError("verdict response is not valid JSON");
        }
        static const std::vector<std::string> allowed = {"answer", "confidence", "evidence",
                                                         "emergent", "conflict"};
        for (const auto& [key, value] : j.items()) {
            if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
                throw BackendError("verdict response has unknown key '" + key + "'");
        }
        if (!j.contains("answer") || !j["answer"].is_string())
            throw BackendError("verdict response missing 'answer'");
        if (!j.contains("confidence") || !j["confidence"].is_number())
            throw BackendError("verdict response missing 'confidence'");
        Verdict v;
        try {
            v.answer = answer_from_string(j["answer"].get<std::string>());
        } catch (const ValidationError& e) {
            throw BackendError(std::string("verdict response: ") + e.what());
        }
        v.confidence = j["confidence"].get<double>();
        if (j.contains("evidence")) {
            const auto& ev = j["evidence"];
            if (!ev.is_object()) throw BackendError("verdict evidence must be an object");
            for (const auto& [key, value] : ev.items()) {
                if (key != "visual" && key != "review" && key != "metadata")
                    throw BackendError("verdict evidence has unknown modality '" + key + "'");
                if (!value.is_array()) throw BackendError("verdict evidence lists must be arrays");
                for (const auto& item : value) {
                    if (!item.is_string())
                        throw BackendError("verdict evidence citations must be strings");
                    v.evidence.for_modality(modality_from_string(key)).push_back(
                        item.get<std::string>());
                }
            }
        }
        if (j.contains("emergent") && !j["emergent"].is_null()) {
            if (!j["emergent"].is_string()) throw BackendError("verdict emergent must be a string");
            v.emergent = j["emergent"].get<std::string>();
        }
        if (j.contains("conflict") && !j["conflict"].is_null()) {
            if (!j["conflict"].is_string()) throw BackendError("verdict conflict must be a string");
            v.conflict = j["conflict"].get<std::string>();
        }
        try {
            v.validate();
        } catch (const ValidationError& e) {
            throw BackendError(std::string("verdict response violates schema: ") + e.what());
        }
        return v;
    }

private:
    static void substitute(std::string& text, const std::string& key, const std::string& value) {
        const auto pos = text.find(key);
        if (pos != std::string::npos) text.replace(pos, key.size(), value);
    }

    RemoteBackendConfig cfg_;
    std::string base_;
    std::string path_;
};

// ---------------------------------------------------------------------------
// Joint inference over one (POI, context) pair

enum class FailMode { closed, open };

struct InferConfig {
    AblationFlags ablation;
    UncertaintyConfig uncertainty;
    int review_limit = 20;
    FailMode fail_mode = FailMode::closed;
    std::int64_t image_staleness_horizon_s = 180LL * 86400;

    double resolved_alpha() const { return ablation.alpha_one ? 1.0 : uncertainty.alpha; }
};

inline AffordanceRepresentation infer_affordance(const std::string& poi_id,
                                                 const ContextType& context_type,
                                                 const std::vector<AffordanceQuery>& queries,
                                                 const MultimodalContent& content,
                                                 const Context& c, ReasonerBackend& backend,
                                                 const InferConfig& cfg = {}) {
    const std::string image =
        cfg.ablation.drop_image ? std::string{} : content.image_description;
    const std::vector<Review> reviews =
        cfg.ablation.drop_reviews
            ? std::vector<Review>{}
            : select_recent_reviews(content.reviews, cfg.review_limit, c.timestamp);

    ReasoningOptions opts;
    opts.late_fusion_only = cfg.ablation.late_fusion_only;
    opts.disable_emergent = cfg.ablation.disable_emergent || cfg.ablation.late_fusion_only;
    opts.disable_conflict = cfg.ablation.disable_conflict || cfg.ablation.late_fusion_only;
    opts.use_metadata = !cfg.ablation.drop_metadata;
    opts.image_staleness_horizon_s = cfg.image_staleness_horizon_s;

    std::vector<AffordanceEntry> entries;
    entries.reserve(queries.size());
    for (const auto& q : queries) {
        if (opts.use_metadata) {
            // Hard constraints veto before any backend synthesis.
            if (auto veto = evaluate_hard_constraints(content.metadata, c, q)) {
                entries.push_back({q, std::move(*veto)});
                continue;
            }
        }
        Verdict v;
        try {
            v = backend.answer(q, image, reviews, content.metadata, c, opts);
        } catch (const BackendError& e) {
            if (cfg.fail_mode == FailMode::closed) throw;
            v = Verdict{};
            v.answer = Answer::uncertain;
            v.confidence = 0.0;
            for (Modality m : q.grounding) v.evidence.for_modality(m).push_back("backend_error");
            v.traces.push_back({ReasoningStep::verdict, Signal::neutral,
                                std::string("backend_error: ") + e.what()});
        }
        if (v.conflict && v.answer != Answer::uncertain) v.answer = Answer::uncertain;
        entries.push_back({q, std::move(v)});
    }
    return assemble_representation(poi_id, context_type, std::move(entries),
                                   UncertaintyConfig{cfg.resolved_alpha()});
}

}  // namespace affrec
