#pragma once
// Synthetic corpus generator with planted affordances. Each POI draws a
// venue archetype whose dimension states are rendered into image text,
// reviews and metadata through the same lexicons the rule backend reads, so
// inference can recover the planted profile. Users draw personas with
// per-context preference vectors and check-ins are sampled proportionally
// to planted alignment. Deterministic per seed.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "affrec/cot_engine.hpp"
#include "affrec/domain.hpp"
#include "affrec/io.hpp"
#include "affrec/querygen.hpp"
#include "affrec/rng.hpp"

namespace affrec {

struct SynthConfig {
    std::uint64_t seed = 42;
    int n_users = 50;
    int n_pois = 200;
    int n_checkins = 5000;

    void validate() const {
        if (n_users < 10 || n_pois < 50)
            throw ValidationError("SynthConfig: need at least 10 users and 50 pois");
        if (n_checkins < n_users) throw ValidationError("SynthConfig: too few check-ins");
    }
};

// Per-dimension planting states and how they are rendered / recovered.
enum class DimState {
    absent,         // nothing rendered -> uncertain floor
    high,           // image phrase + two reviews -> yes
    high_review,    // two positive reviews -> yes
    low,            // negative image phrase + two reviews -> no
    low_review,     // two negative reviews -> no
    conflict_bad,   // positive image vs recurring negative reviews; truth low
    conflict_good,  // stale negative image vs recurring positive reviews; truth high
    emergent,       // only recoverable through the cross-modal synthesis rule
};

struct ExpectedVerdict {
    Answer answer = Answer::uncertain;
    double confidence = 0.0;
};

struct Scenario {
    std::string name;
    ContextType ctype;
    DayOfWeek dow = DayOfWeek::mon;
    int minute = 0;
    SocialSituation social = SocialSituation::solo;
    std::optional<int> group_size;
    std::optional<std::string> intent;
    std::vector<AffordanceQuery> queries;
    std::vector<std::string> dims;  // primary dimension per query
};

struct GroundTruth {
    std::vector<Scenario> scenarios;
    std::vector<std::string> dim_space;  // sorted union of scenario dims
    // poi -> ctype key -> per-query values
    std::map<std::string, std::map<std::string, std::vector<ExpectedVerdict>>> expected;
    std::map<std::string, std::map<std::string, std::vector<double>>> truth;
    // user -> ctype key -> simplex over the scenario's queries
    std::map<std::string, std::map<std::string, std::vector<double>>> user_pref;
    std::map<std::string, std::string> poi_archetype;

    const Scenario* scenario_for(const std::string& ctype_key) const {
        for (const auto& s : scenarios) {
            if (s.ctype.key() == ctype_key) return &s;
        }
        return nullptr;
    }

    std::vector<double> expected_effective(const std::string& poi_id,
                                           const std::string& ctype_key, double alpha) const {
        const auto& verdicts = expected.at(poi_id).at(ctype_key);
        std::vector<double> out;
        out.reserve(verdicts.size());
        const UncertaintyConfig cfg{alpha};
        for (const auto& v : verdicts) {
            Verdict verdict;
            verdict.answer = v.answer;
            verdict.confidence = v.confidence;
            out.push_back(effective_confidence(verdict, cfg));
        }
        return out;
    }

    // Context-free item embedding for the static baseline: per-dimension
    // mean of the planted per-context affordance vectors (what a perfect
    // offline encoder could extract from the content), over every
    // (scenario, query) probing the dimension.
    std::vector<double> item_embedding(const std::string& poi_id, double alpha) const {
        std::vector<double> sums(dim_space.size(), 0.0);
        std::vector<int> counts(dim_space.size(), 0);
        for (const auto& s : scenarios) {
            const auto values = expected_effective(poi_id, s.ctype.key(), alpha);
            for (size_t q = 0; q < s.dims.size(); ++q) {
                const auto it = std::find(dim_space.begin(), dim_space.end(), s.dims[q]);
                const size_t d = static_cast<size_t>(it - dim_space.begin());
                sums[d] += values[q];
                ++counts[d];
            }
        }
        for (size_t d = 0; d < sums.size(); ++d) {
            if (counts[d] > 0) sums[d] /= static_cast<double>(counts[d]);
        }
        return sums;
    }

    // True preference weights mapped onto the dimension space.
    std::vector<double> user_dim_vector(const std::string& user_id,
                                        const std::string& ctype_key) const {
        std::vector<double> out(dim_space.size(), 0.0);
        const auto uit = user_pref.find(user_id);
        if (uit == user_pref.end()) return out;
        const auto cit = uit->second.find(ctype_key);
        const Scenario* s = scenario_for(ctype_key);
        if (cit == uit->second.end() || !s) return out;
        for (size_t q = 0; q < s->dims.size(); ++q) {
            const auto it = std::find(dim_space.begin(), dim_space.end(), s->dims[q]);
            out[static_cast<size_t>(it - dim_space.begin())] += cit->second[q];
        }
        return out;
    }
};

struct SyntheticCorpus {
    Corpus corpus;
    GroundTruth truth;
};

namespace synth_detail {

struct HoursVariant {
    int open_minute = 0;
    int close_minute = 1440;
    int weight = 1;
};

struct Archetype {
    std::string name;
    std::string category;
    int price_tier = 1;
    std::vector<HoursVariant> hours;  // per-POI draw; varies within archetype
    std::int64_t review_count = 0;
    bool value_reviews = false;  // "good value" price reviews
    int weight = 0;              // relative share of the catalog
    std::map<std::string, DimState> dims;
};

inline const std::vector<Archetype>& archetypes() {
    using DS = DimState;
    // plain cafes keep one daytime schedule; a slice of the renovated ones
    // opens too late for the morning work crowd
    static const std::vector<HoursVariant> cafe_hours = {{6 * 60, 18 * 60, 1}};
    static const std::vector<HoursVariant> calmed_hours = {
        {6 * 60, 18 * 60, 75}, {10 * 60, 18 * 60, 25}};
    // bars: most run deep into the night, some close before late evening,
    // some open from noon
    static const std::vector<HoursVariant> bar_hours = {
        {17 * 60, 26 * 60, 60}, {17 * 60, 21 * 60 + 15, 25}, {12 * 60, 26 * 60, 15}};
    // family restaurants close before late evening, so they live almost
    // entirely off weekend daytime traffic; some only open mid-afternoon
    static const std::vector<HoursVariant> restaurant_hours = {
        {11 * 60, 21 * 60 + 15, 70}, {14 * 60, 21 * 60 + 15, 30}};
    static const std::vector<HoursVariant> bistro_hours = {
        {17 * 60, 23 * 60, 70}, {17 * 60, 21 * 60 + 15, 30}};
    static const std::vector<HoursVariant> diner_hours = {{8 * 60, 22 * 60, 1}};

    static const std::vector<Archetype> list = {
        {"work_cafe", "cafe", 2, cafe_hours, 30, false, 15,
         {{"quiet", DS::high},
          {"wifi", DS::high_review},
          {"seating", DS::low_review},
          {"celebration", DS::low_review},
          {"sentiment", DS::high_review}}},
        {"party_bar", "bar", 3, bar_hours, 120, false, 18,
         {{"seating", DS::high},
          {"celebration", DS::high},
          {"quiet", DS::low},
          {"booking", DS::emergent},
          {"outlets", DS::low_review},
          {"family", DS::low_review},
          {"sentiment", DS::high_review}}},
        {"family_restaurant", "restaurant", 2, restaurant_hours, 80, true, 16,
         {{"seating", DS::high},
          {"family", DS::high_review},
          {"booking", DS::high_review},
          {"sentiment", DS::high_review}}},
        {"romantic_bistro", "bistro", 4, bistro_hours, 45, false, 14,
         {{"romance", DS::high},
          {"quiet", DS::high},
          {"booking", DS::high_review},
          {"seating", DS::low_review},
          {"sentiment", DS::high_review}}},
        {"diner", "diner", 1, diner_hours, 20, false, 14,
         {{"sentiment", DS::high_review}, {"family", DS::high_review}}},
        {"noisy_reno", "cafe", 3, cafe_hours, 40, false, 9,
         {{"quiet", DS::conflict_bad},
          {"wifi", DS::high_review},
          {"outlets", DS::high_review},
          {"seating", DS::low_review},
          {"celebration", DS::low_review},
          {"sentiment", DS::high_review}}},
        {"calmed_cafe", "cafe", 2, calmed_hours, 35, false, 11,
         {{"quiet", DS::conflict_good},
          {"wifi", DS::high_review},
          {"outlets", DS::high},
          {"seating", DS::low_review},
          {"celebration", DS::low_review},
          {"sentiment", DS::high_review}}},
        {"hidden_gem", "bar", 3, bar_hours, 60, false, 8,
         {{"celebration", DS::conflict_good},
          {"seating", DS::high},
          {"booking", DS::emergent},
          {"quiet", DS::low_review},
          {"family", DS::low_review},
          {"sentiment", DS::high_review}}},
    };
    return list;
}

struct RenderPhrases {
    std::string image_pos, image_neg;
    std::string review_pos, review_neg;
};

inline const std::map<std::string, RenderPhrases>& render_phrases() {
    static const std::map<std::string, RenderPhrases> phrases = {
        {"quiet",
         {"serene reading room corner", "loud music most nights",
          "Nice and quiet in the mornings.", "Way too noisy for me."}},
        {"wifi", {"", "", "Solid wifi the whole visit.", "No wifi to speak of."}},
        {"outlets",
         {"visible power outlets along the walls", "",
          "Power outlets by most chairs.", "No outlets anywhere to charge."}},
        {"seating",
         {"spacious group seating area", "cramped interior",
          "Plenty of seats even on weekends.", "Cramped little room."}},
        {"celebration",
         {"lively colorful dining room", "somber half-empty room",
          "Perfect party atmosphere on weekends.", "A bit dull in the evenings."}},
        {"booking",
         {"", "", "Reservations recommended on weekends.", "Walk-ins welcome anytime."}},
        {"family",
         {"", "", "Kids menu and high chairs available.", "Adults only after noon."}},
        {"romance",
         {"candlelit corner nooks", "",
          "Very romantic spot for couples.", "Too rowdy for a date."}},
        {"sentiment", {"", "", "Excellent service overall.", "Awful experience, avoid."}},
    };
    return phrases;
}

inline const std::vector<std::string>& filler_sentences() {
    static const std::vector<std::string> fillers = {
        "Stopped by on a weekday.",   "Service was prompt.",
        "Ordered the daily special.", "Came back the following month.",
        "Parking was straightforward.", "Menu rotates seasonally.",
    };
    return fillers;
}

struct PersonaSpec {
    std::string name;
    double share = 0.0;
    std::map<std::string, double> scenario_weights;
};

inline const std::vector<PersonaSpec>& personas() {
    static const std::vector<PersonaSpec> list = {
        {"worker",
         0.4,
         {{"weekday_work", 0.55},
          {"weekday_celebration", 0.05},
          {"weekday_romance", 0.10},
          {"weekend_family", 0.07},
          {"weekend_party", 0.09},
          {"weekend_brunch", 0.14}}},
        {"social",
         0.3,
         {{"weekday_work", 0.30},
          {"weekday_celebration", 0.20},
          {"weekday_romance", 0.05},
          {"weekend_family", 0.05},
          {"weekend_party", 0.30},
          {"weekend_brunch", 0.10}}},
        {"household",
         0.3,
         {{"weekday_work", 0.30},
          {"weekday_celebration", 0.05},
          {"weekday_romance", 0.10},
          {"weekend_family", 0.37},
          {"weekend_party", 0.10},
          {"weekend_brunch", 0.08}}},
    };
    return list;
}

// Base preference weights per (persona, scenario) over that scenario's
// queries, jittered per user and normalized onto the simplex. Weekend
// scenarios lean harder on operating hours, where a context-free item
// vector blurs the most.
inline std::vector<double> base_pref(const std::string& persona, const std::string& scenario) {
    if (scenario == "weekday_work") {
        if (persona == "worker") return {0.34, 0.27, 0.17, 0.10, 0.12};
        if (persona == "social") return {0.26, 0.32, 0.12, 0.12, 0.18};
        return {0.30, 0.24, 0.12, 0.14, 0.20};
    }
    if (scenario == "weekend_brunch") {
        if (persona == "worker") return {0.28, 0.22, 0.14, 0.22, 0.14};
        if (persona == "social") return {0.22, 0.26, 0.12, 0.22, 0.18};
        return {0.26, 0.20, 0.12, 0.24, 0.18};
    }
    if (scenario == "weekday_celebration" || scenario == "weekend_party")
        return {0.18, 0.26, 0.24, 0.15, 0.17};
    if (scenario == "weekday_romance") return {0.28, 0.22, 0.12, 0.23, 0.15};
    return {0.20, 0.25, 0.28, 0.15, 0.12};  // family outing
}

inline std::int64_t first_monday_after(std::int64_t ts) {
    std::int64_t days = ts / 86400;
    while ((days + 3) % 7 != 0) ++days;
    return days * 86400;
}

// Dims whose planted strength varies per POI (quality tiers); seating stays
// fixed so the emergent-rule precondition (visible capacity) is stable, and
// sentiment stays uniformly weak-positive by design.
inline bool tierable_dim(const std::string& dim) {
    return dim == "quiet" || dim == "wifi" || dim == "outlets" || dim == "celebration" ||
           dim == "family" || dim == "romance";
}

struct DimPlan {
    DimState state = DimState::absent;
    int tier = 0;  // 0 strongest
};

inline ExpectedVerdict state_expectation(const DimPlan& plan) {
    switch (plan.state) {
        case DimState::high:
            return {Answer::yes, plan.tier == 0 ? 0.8 : (plan.tier == 1 ? 0.7 : 0.6)};
        case DimState::high_review: return {Answer::yes, plan.tier >= 2 ? 0.6 : 0.7};
        case DimState::low: return {Answer::no, 0.8};
        case DimState::low_review: return {Answer::no, 0.7};
        case DimState::conflict_bad: return {Answer::uncertain, kConflictRefuteConfidence};
        case DimState::conflict_good: return {Answer::uncertain, kConflictSupportConfidence};
        case DimState::emergent: return {Answer::yes, 0.8};
        case DimState::absent: break;
    }
    return {Answer::uncertain, kNoEvidenceConfidence};
}

inline ExpectedVerdict expected_verdict(const Archetype& arch,
                                        const std::map<std::string, DimPlan>& plan,
                                        const HoursVariant& poi_hours, const std::string& dim,
                                        const std::string& query_text, DayOfWeek dow,
                                        int minute) {
    if (dim == "hours") {
        OpeningHours hours = OpeningHours::daily(poi_hours.open_minute, poi_hours.close_minute);
        if (!hours.is_open(dow, minute)) return {Answer::no, 1.0};  // veto
        if (phrase_in(query_text, "late") && !hours.is_open(dow, 21 * 60 + 30))
            return {Answer::no, 0.6};
        return {Answer::yes, 0.6};
    }
    if (dim == "price") {
        const bool budget = phrase_in(query_text, "affordable") ||
                            phrase_in(query_text, "affordably") ||
                            phrase_in(query_text, "budget") || phrase_in(query_text, "cheap");
        const bool upscale = phrase_in(query_text, "upscale") ||
                             phrase_in(query_text, "special-occasion") ||
                             phrase_in(query_text, "special occasion") ||
                             phrase_in(query_text, "fine dining");
        int meta = 0;  // -1 refute, 0 neutral, +1 support
        if (budget) {
            meta = arch.price_tier <= 2 ? 1 : (arch.price_tier >= 4 ? -1 : 0);
        } else if (upscale) {
            meta = arch.price_tier >= 3 ? 1 : (arch.price_tier <= 1 ? -1 : 0);
        } else {
            meta = arch.price_tier <= 3 ? 1 : -1;
        }
        const int support = (meta > 0 ? 1 : 0) + (arch.value_reviews ? 2 : 0);
        const int refute = meta < 0 ? 1 : 0;
        if (support > 0 && refute == 0)
            return {Answer::yes, std::min(kMaxSoftConfidence,
                                          kBaseConfidence + kSignalWeight * support)};
        if (refute > 0 && support == 0)
            return {Answer::no, kBaseConfidence + kSignalWeight * refute};
        if (refute > 0 && support > 0) return {Answer::uncertain, kConflictRefuteConfidence};
        return {Answer::uncertain, kNoEvidenceConfidence};
    }
    if (dim == "category") return {Answer::yes, 0.6};
    if (dim == "sentiment") return {Answer::yes, 0.7};
    if (dim == "access") return {Answer::uncertain, kNoEvidenceConfidence};
    const auto it = plan.find(dim);
    return state_expectation(it == plan.end() ? DimPlan{} : it->second);
}

inline double truth_value(const std::map<std::string, DimPlan>& plan, const std::string& dim,
                          const ExpectedVerdict& expected) {
    const auto it = plan.find(dim);
    if (it != plan.end()) {
        if (it->second.state == DimState::conflict_bad) return 0.10;
        if (it->second.state == DimState::conflict_good) return 0.60;
    }
    Verdict v;
    v.answer = expected.answer;
    v.confidence = expected.confidence;
    return effective_confidence(v, UncertaintyConfig{0.5});
}

}  // namespace synth_detail

inline SyntheticCorpus generate_synthetic_corpus(const SynthConfig& cfg) {
    using namespace synth_detail;
    cfg.validate();

    SyntheticCorpus out;
    GroundTruth& truth = out.truth;
    Corpus& corpus = out.corpus;

    const TemplateBank bank = TemplateBank::builtin();
    const std::int64_t monday0 = first_monday_after(1'600'000'000);
    constexpr std::int64_t kWeek = 7LL * 86400;

    // --- scenarios -----------------------------------------------------------
    auto make_scenario = [&](const char* name, DayOfWeek dow, int minute,
                             SocialSituation social, std::optional<int> gsize,
                             std::optional<std::string> intent) {
        Scenario s;
        s.name = name;
        s.dow = dow;
        s.minute = minute;
        s.social = social;
        s.group_size = gsize;
        s.intent = std::move(intent);
        s.ctype.day_part = day_part_of_minute(minute);
        s.ctype.day_class = day_class_of(dow);
        s.ctype.social_situation = social;
        s.ctype.intent_cluster = SynonymTable::builtin().canonicalize(s.intent);
        s.queries = bank.render(s.ctype, 5);
        for (const auto& q : s.queries) s.dims.push_back(bank.dimension_of(q.text));
        return s;
    };
    truth.scenarios.push_back(make_scenario("weekday_work", DayOfWeek::tue, 9 * 60 + 30,
                                            SocialSituation::solo, std::nullopt, "solo work"));
    truth.scenarios.push_back(make_scenario("weekday_celebration", DayOfWeek::fri, 19 * 60 + 30,
                                            SocialSituation::friends, 4, "birthday celebration"));
    truth.scenarios.push_back(make_scenario("weekday_romance", DayOfWeek::wed, 19 * 60,
                                            SocialSituation::date, std::nullopt, "date night"));
    truth.scenarios.push_back(make_scenario("weekend_family", DayOfWeek::sat, 13 * 60,
                                            SocialSituation::family, 3, std::nullopt));
    truth.scenarios.push_back(make_scenario("weekend_party", DayOfWeek::sat, 20 * 60,
                                            SocialSituation::friends, 5, "party"));
    truth.scenarios.push_back(make_scenario("weekend_brunch", DayOfWeek::sun, 10 * 60 + 30,
                                            SocialSituation::solo, std::nullopt, "study"));

    {
        std::set<std::string> dims;
        for (const auto& s : truth.scenarios)
            for (const auto& d : s.dims) dims.insert(d);
        truth.dim_space.assign(dims.begin(), dims.end());
    }

    // --- POIs ----------------------------------------------------------------
    Rng poi_rng(mix64(cfg.seed ^ 0x1001));
    int total_weight = 0;
    for (const auto& a : archetypes()) total_weight += a.weight;
    std::vector<const Archetype*> assignment;
    for (const auto& a : archetypes()) {
        const int n = cfg.n_pois * a.weight / total_weight;
        for (int i = 0; i < n; ++i) assignment.push_back(&a);
    }
    while (static_cast<int>(assignment.size()) < cfg.n_pois)
        assignment.push_back(&archetypes().front());
    // Fisher-Yates so archetypes do not correlate with poi ids.
    for (size_t i = assignment.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(poi_rng.below(i));
        std::swap(assignment[i - 1], assignment[j]);
    }

    const std::vector<std::int64_t> review_weeks = {-4, 2,  10, 18, 26, 34, 42,
                                                    50, 58, 66, 74, 82, 90, 98};

    for (int p = 0; p < cfg.n_pois; ++p) {
        const Archetype& arch = *assignment[static_cast<size_t>(p)];
        char id[16];
        std::snprintf(id, sizeof(id), "p%04d", p);
        char name[32];
        std::snprintf(name, sizeof(name), "Venue %03d", p);

        // resolve the POI's hours variant, quality tiers and the
        // emergent-booking mix
        std::vector<double> hour_weights;
        for (const auto& hv : arch.hours) hour_weights.push_back(hv.weight);
        const HoursVariant poi_hours = arch.hours[poi_rng.weighted_pick(hour_weights)];

        std::map<std::string, DimPlan> plan;
        for (const auto& [dim, state] : arch.dims) {
            DimPlan dp{state, 0};
            if (tierable_dim(dim)) {
                const double u = poi_rng.unit();
                if (state == DimState::high) {
                    dp.tier = u < 0.35 ? 0 : (u < 0.70 ? 1 : 2);
                } else if (state == DimState::high_review) {
                    dp.tier = u < 0.6 ? 0 : 2;
                }
            }
            if (state == DimState::emergent && arch.name == "party_bar" &&
                poi_rng.unit() < 0.4) {
                dp.state = DimState::absent;  // some bars simply never fill up
            }
            plan[dim] = dp;
        }

        // image: category sentence plus plan-scheduled phrases
        std::string image = "A " + arch.category + " interior.";
        for (const auto& [dim, dp] : plan) {
            const auto pit = render_phrases().find(dim);
            if (pit == render_phrases().end()) continue;
            const auto& ph = pit->second;
            switch (dp.state) {
                case DimState::high:
                    if (dp.tier == 0 && !ph.image_pos.empty()) image += " " + ph.image_pos + ".";
                    break;
                case DimState::conflict_bad:
                    if (!ph.image_pos.empty()) image += " " + ph.image_pos + ".";
                    break;
                case DimState::low:
                case DimState::conflict_good:
                    if (!ph.image_neg.empty()) image += " " + ph.image_neg + ".";
                    break;
                default: break;
            }
        }

        // reviews: signal phrases sit in the earliest slots so every cutoff
        // sees them; conflict sagas and fullness mentions recur across the
        // whole timeline.
        std::vector<std::string> slot_text(review_weeks.size());
        std::vector<int> slot_rating(review_weeks.size(), 4);
        int next_slot = 0;
        auto schedule_pair = [&](const std::string& phrase) {
            slot_text[0] += " " + phrase;
            slot_text[1] += " " + phrase;
            slot_text[static_cast<size_t>(4 + next_slot % 9)] += " " + phrase;
            ++next_slot;
        };
        auto schedule_single = [&](const std::string& phrase) {
            slot_text[0] += " " + phrase;
        };
        for (const auto& [dim, dp] : plan) {
            const auto pit = render_phrases().find(dim);
            if (pit == render_phrases().end()) continue;
            const auto& ph = pit->second;
            switch (dp.state) {
                case DimState::high:
                case DimState::high_review:
                    if (dp.tier >= 2) {
                        schedule_single(ph.review_pos);
                    } else {
                        schedule_pair(ph.review_pos);
                    }
                    break;
                case DimState::low:
                case DimState::low_review:
                    schedule_pair(ph.review_neg);
                    break;
                case DimState::conflict_bad:
                    for (size_t s = 0; s < slot_text.size(); ++s) {
                        slot_text[s] += " " + ph.review_neg;
                        slot_rating[s] = 2;
                    }
                    break;
                case DimState::conflict_good:
                    for (size_t s = 0; s < slot_text.size(); ++s)
                        slot_text[s] += " " + ph.review_pos;
                    break;
                case DimState::emergent:
                    for (size_t s = 0; s < slot_text.size(); s += 2)
                        slot_text[s] += " Always packed after dark.";
                    break;
                case DimState::absent: break;
            }
        }
        if (arch.value_reviews) schedule_pair("Good value for the money.");

        MultimodalContent content;
        content.image_description = image;
        for (size_t s = 0; s < review_weeks.size(); ++s) {
            const std::int64_t ts =
                monday0 + review_weeks[s] * kWeek + (p % 5) * 3600 + static_cast<int>(s) * 60;
            const std::string text =
                filler_sentences()[s % filler_sentences().size()] + slot_text[s];
            content.reviews.emplace_back(text, ts, slot_rating[s]);
        }
        const GeoPoint location(40.70 + poi_rng.unit() * 0.10, -74.02 + poi_rng.unit() * 0.10);
        content.metadata =
            Metadata(arch.category, arch.price_tier,
                     OpeningHours::daily(poi_hours.open_minute, poi_hours.close_minute),
                     location, arch.review_count);
        corpus.pois.emplace(id, Poi(id, name, std::move(content)));
        truth.poi_archetype[id] = arch.name;

        // planted per-scenario expectations and truth
        for (const auto& s : truth.scenarios) {
            std::vector<ExpectedVerdict> expected;
            std::vector<double> values;
            for (size_t q = 0; q < s.queries.size(); ++q) {
                const auto ev = expected_verdict(arch, plan, poi_hours, s.dims[q],
                                                 s.queries[q].text, s.dow, s.minute);
                expected.push_back(ev);
                values.push_back(truth_value(plan, s.dims[q], ev));
            }
            truth.expected[id][s.ctype.key()] = std::move(expected);
            truth.truth[id][s.ctype.key()] = std::move(values);
        }
    }

    // --- users ----------------------------------------------------------------
    Rng user_rng(mix64(cfg.seed ^ 0x2002));
    std::vector<const PersonaSpec*> persona_of;
    for (const auto& ps : personas()) {
        const int n = static_cast<int>(ps.share * cfg.n_users + 0.5);
        for (int i = 0; i < n && static_cast<int>(persona_of.size()) < cfg.n_users; ++i)
            persona_of.push_back(&ps);
    }
    while (static_cast<int>(persona_of.size()) < cfg.n_users)
        persona_of.push_back(&personas().back());
    for (size_t i = persona_of.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(user_rng.below(i));
        std::swap(persona_of[i - 1], persona_of[j]);
    }

    std::vector<std::string> user_ids;
    for (int u = 0; u < cfg.n_users; ++u) {
        char id[16];
        std::snprintf(id, sizeof(id), "u%03d", u);
        user_ids.push_back(id);
        for (const auto& s : truth.scenarios) {
            auto base = base_pref(persona_of[static_cast<size_t>(u)]->name, s.name);
            // one focal affordance dominates each user's needs in a context;
            // histories therefore carry a recoverable personal signal
            const size_t focus = user_rng.weighted_pick(base);
            for (double& w : base) w *= std::exp(0.25 * user_rng.gauss());
            base[focus] += 0.8;
            double sum = 0.0;
            for (double w : base) sum += w;
            for (double& w : base) w /= sum;
            truth.user_pref[id][s.ctype.key()] = std::move(base);
        }
    }

    // --- check-ins -------------------------------------------------------------
    const auto poi_ids = corpus.poi_ids();
    Rng checkin_rng(mix64(cfg.seed ^ 0x3003));
    const int per_user = cfg.n_checkins / cfg.n_users;
    const int remainder = cfg.n_checkins % cfg.n_users;
    constexpr double kSharpness = 16.0;

    for (int u = 0; u < cfg.n_users; ++u) {
        const std::string& user_id = user_ids[static_cast<size_t>(u)];
        const PersonaSpec& persona = *persona_of[static_cast<size_t>(u)];
        const int n_u = per_user + (u < remainder ? 1 : 0);
        std::vector<TrajectoryPoint> recent;

        for (int j = 0; j < n_u; ++j) {
            // scenario by persona weights
            std::vector<double> weights;
            for (const auto& s : truth.scenarios)
                weights.push_back(persona.scenario_weights.at(s.name));
            const Scenario& scenario = truth.scenarios[checkin_rng.weighted_pick(weights)];

            // POI proportional to exp(sharpness * planted alignment)
            const auto& pref = truth.user_pref.at(user_id).at(scenario.ctype.key());
            std::vector<double> scores(poi_ids.size(), 0.0);
            double max_score = -1e9;
            for (size_t p = 0; p < poi_ids.size(); ++p) {
                const auto& values = truth.truth.at(poi_ids[p]).at(scenario.ctype.key());
                double s = 0.0;
                for (size_t q = 0; q < values.size(); ++q) s += pref[q] * values[q];
                scores[p] = s;
                max_score = std::max(max_score, s);
            }
            std::vector<double> probs(scores.size());
            for (size_t p = 0; p < scores.size(); ++p)
                probs[p] = std::exp(kSharpness * (scores[p] - max_score));
            const std::string& poi_id = poi_ids[checkin_rng.weighted_pick(probs)];

            const long long jitter = checkin_rng.range(-20, 20);
            const std::int64_t ts = monday0 + static_cast<std::int64_t>(j) * kWeek +
                                    static_cast<int>(scenario.dow) * 86400 +
                                    (scenario.minute + jitter) * 60;
            Context ctx(ts, scenario.dow, scenario.social, scenario.group_size, recent,
                        scenario.intent);
            corpus.checkins.emplace_back(user_id, poi_id, ts, std::move(ctx));

            recent.push_back({poi_id, ts});
            if (recent.size() > 3) recent.erase(recent.begin());
        }
    }
    return out;
}

// Writes the corpus JSONL files plus the hidden profiles for oracle
// evaluation (ground_truth.json).
inline void write_synthetic_corpus(const std::string& dir, const SyntheticCorpus& synth) {
    save_corpus(dir, synth.corpus);
    json j;
    json scenarios = json::array();
    for (const auto& s : synth.truth.scenarios) {
        json sj;
        sj["name"] = s.name;
        sj["context_type"] = s.ctype.key();
        sj["day_of_week"] = to_string(s.dow);
        sj["minute"] = s.minute;
        json queries = json::array();
        for (size_t q = 0; q < s.queries.size(); ++q)
            queries.push_back({{"text", s.queries[q].text}, {"dimension", s.dims[q]}});
        sj["queries"] = std::move(queries);
        scenarios.push_back(std::move(sj));
    }
    j["scenarios"] = std::move(scenarios);
    json pois = json::object();
    for (const auto& [poi_id, per_ctype] : synth.truth.truth) {
        json pj;
        pj["archetype"] = synth.truth.poi_archetype.at(poi_id);
        json values = json::object();
        for (const auto& [ctype_key, vec] : per_ctype) values[ctype_key] = vec;
        pj["truth"] = std::move(values);
        pois[poi_id] = std::move(pj);
    }
    j["pois"] = std::move(pois);
    json users = json::object();
    for (const auto& [user_id, per_ctype] : synth.truth.user_pref) {
        json uj = json::object();
        for (const auto& [ctype_key, vec] : per_ctype) uj[ctype_key] = vec;
        users[user_id] = std::move(uj);
    }
    j["users"] = std::move(users);

    std::ofstream out((std::filesystem::path(dir) / "ground_truth.json").string());
    if (!out) throw Error("cannot write ground_truth.json under " + dir);
    out << j.dump(2) << '\n';
}

}  // namespace affrec
