#pragma once
// Core data model: situational contexts, venue content, affordance
// queries/verdicts, preference vectors, and the geodesic primitive.
// All types validate their field constraints at construction and are
// immutable by convention afterwards; invalid input raises a typed error,
// never a silent clamp.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace affrec {

// ---------------------------------------------------------------------------
// Errors

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ValidationError : Error {
    using Error::Error;
};
struct LengthMismatchError : Error {
    using Error::Error;
};
struct BackendError : Error {
    using Error::Error;
};
struct EmptyAfterFilterError : Error {
    using Error::Error;
};
struct DivergenceError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Enums and string forms

enum class DayOfWeek { mon = 0, tue, wed, thu, fri, sat, sun };
enum class SocialSituation { solo, friends, family, date, group };
enum class DayPart { morning, afternoon, evening, late_night };
enum class DayClass { weekday, weekend };
enum class Answer { yes, no, uncertain };
enum class Modality { visual, review, metadata };
enum class WeightSource { estimated, uniform_fallback, bm25, trained };
enum class ReasoningStep { visual, review, metadata, synthesis, verdict };
enum class Signal { supports, refutes, neutral };

inline const char* to_string(DayOfWeek d) {
    static const char* names[] = {"mon", "tue", "wed", "thu", "fri", "sat", "sun"};
    return names[static_cast<int>(d)];
}
inline const char* to_string(SocialSituation s) {
    static const char* names[] = {"solo", "friends", "family", "date", "group"};
    return names[static_cast<int>(s)];
}
inline const char* to_string(DayPart p) {
    static const char* names[] = {"morning", "afternoon", "evening", "late_night"};
    return names[static_cast<int>(p)];
}
inline const char* to_string(DayClass c) {
    return c == DayClass::weekday ? "weekday" : "weekend";
}
inline const char* to_string(Answer a) {
    static const char* names[] = {"yes", "no", "uncertain"};
    return names[static_cast<int>(a)];
}
inline const char* to_string(Modality m) {
    static const char* names[] = {"visual", "review", "metadata"};
    return names[static_cast<int>(m)];
}
inline const char* to_string(WeightSource s) {
    static const char* names[] = {"estimated", "uniform_fallback", "bm25", "trained"};
    return names[static_cast<int>(s)];
}
inline const char* to_string(ReasoningStep s) {
    static const char* names[] = {"visual", "review", "metadata", "synthesis", "verdict"};
    return names[static_cast<int>(s)];
}
inline const char* to_string(Signal s) {
    static const char* names[] = {"supports", "refutes", "neutral"};
    return names[static_cast<int>(s)];
}

namespace detail {
template <typename E>
E enum_from_string(const std::string& s, const char* what, int count) {
    for (int i = 0; i < count; ++i) {
        if (s == to_string(static_cast<E>(i))) return static_cast<E>(i);
    }
    throw ValidationError(std::string(what) + ": unknown value '" + s + "'");
}
}  // namespace detail

inline DayOfWeek day_of_week_from_string(const std::string& s) {
    return detail::enum_from_string<DayOfWeek>(s, "day_of_week", 7);
}
inline SocialSituation social_situation_from_string(const std::string& s) {
    return detail::enum_from_string<SocialSituation>(s, "social_situation", 5);
}
inline DayPart day_part_from_string(const std::string& s) {
    return detail::enum_from_string<DayPart>(s, "day_part", 4);
}
inline DayClass day_class_from_string(const std::string& s) {
    return detail::enum_from_string<DayClass>(s, "day_class", 2);
}
inline Answer answer_from_string(const std::string& s) {
    return detail::enum_from_string<Answer>(s, "answer", 3);
}
inline Modality modality_from_string(const std::string& s) {
    return detail::enum_from_string<Modality>(s, "modality", 3);
}
inline WeightSource weight_source_from_string(const std::string& s) {
    return detail::enum_from_string<WeightSource>(s, "source", 4);
}
inline ReasoningStep reasoning_step_from_string(const std::string& s) {
    return detail::enum_from_string<ReasoningStep>(s, "step", 5);
}
inline Signal signal_from_string(const std::string& s) {
    return detail::enum_from_string<Signal>(s, "signal", 3);
}

// ---------------------------------------------------------------------------
// Calendar helpers. Timestamps are civil seconds since epoch; derivations
// use flat 86400-second days (no timezone handling).

inline DayClass day_class_of(DayOfWeek d) {
    return (d == DayOfWeek::sat || d == DayOfWeek::sun) ? DayClass::weekend
                                                        : DayClass::weekday;
}

// morning [05:00,12:00), afternoon [12:00,17:00), evening [17:00,22:00),
// late_night otherwise.
inline DayPart day_part_of_minute(int minute_of_day) {
    if (minute_of_day >= 5 * 60 && minute_of_day < 12 * 60) return DayPart::morning;
    if (minute_of_day >= 12 * 60 && minute_of_day < 17 * 60) return DayPart::afternoon;
    if (minute_of_day >= 17 * 60 && minute_of_day < 22 * 60) return DayPart::evening;
    return DayPart::late_night;
}

inline int minute_of_day(std::int64_t timestamp) {
    return static_cast<int>((timestamp % 86400) / 60);
}

// 1970-01-01 was a Thursday.
inline DayOfWeek day_of_week_from_timestamp(std::int64_t timestamp) {
    const std::int64_t days = timestamp / 86400;
    return static_cast<DayOfWeek>((days + 3) % 7);
}

// ---------------------------------------------------------------------------
// Situational context

struct TrajectoryPoint {
    std::string poi_id;
    std::int64_t timestamp = 0;

    bool operator==(const TrajectoryPoint&) const = default;
};

struct Context {
    std::int64_t timestamp = 0;                         // target time of the visit
    DayOfWeek day_of_week = DayOfWeek::mon;
    SocialSituation social_situation = SocialSituation::solo;
    std::optional<int> group_size;                      // only for friends/family/group
    std::vector<TrajectoryPoint> trajectory;            // most-recent-last
    std::optional<std::string> intent_text;             // free-text intent

    Context() = default;
    Context(std::int64_t ts, DayOfWeek dow, SocialSituation social,
            std::optional<int> gsize = std::nullopt,
            std::vector<TrajectoryPoint> traj = {},
            std::optional<std::string> intent = std::nullopt)
        : timestamp(ts),
          day_of_week(dow),
          social_situation(social),
          group_size(gsize),
          trajectory(std::move(traj)),
          intent_text(std::move(intent)) {
        validate();
    }

    void validate() const {
        if (timestamp < 0) throw ValidationError("Context: timestamp must be non-negative");
        if (group_size) {
            if (*group_size <= 0)
                throw ValidationError("Context: group_size must be positive");
            const bool allowed = social_situation == SocialSituation::friends ||
                                 social_situation == SocialSituation::family ||
                                 social_situation == SocialSituation::group;
            if (!allowed)
                throw ValidationError(
                    "Context: group_size only valid for friends/family/group situations");
        }
        std::int64_t prev = std::numeric_limits<std::int64_t>::min();
        for (const auto& p : trajectory) {
            if (p.poi_id.empty())
                throw ValidationError("Context: trajectory poi_id must be non-empty");
            if (p.timestamp <= prev)
                throw ValidationError("Context: trajectory timestamps must be strictly increasing");
            if (p.timestamp > timestamp)
                throw ValidationError("Context: trajectory timestamps must not exceed timestamp");
            prev = p.timestamp;
        }
    }

    int minute_of_day() const { return affrec::minute_of_day(timestamp); }
};

// Discretized cluster of a context; structural equality, used as cache key.
struct ContextType {
    DayPart day_part = DayPart::morning;
    DayClass day_class = DayClass::weekday;
    SocialSituation social_situation = SocialSituation::solo;
    std::string intent_cluster = "general";

    bool operator==(const ContextType&) const = default;

    std::string key() const {
        std::string k = to_string(day_part);
        k += '|';
        k += to_string(day_class);
        k += '|';
        k += to_string(social_situation);
        k += '|';
        k += intent_cluster;
        return k;
    }
};

struct ContextTypeHash {
    size_t operator()(const ContextType& c) const {
        return std::hash<std::string>{}(c.key());
    }
};

// ---------------------------------------------------------------------------
// Geography

struct GeoPoint {
    double lat = 0.0;  // degrees in [-90, 90]
    double lon = 0.0;  // degrees in [-180, 180]

    GeoPoint() = default;
    GeoPoint(double la, double lo) : lat(la), lon(lo) { validate(); }

    void validate() const {
        if (!(lat >= -90.0 && lat <= 90.0))
            throw ValidationError("GeoPoint: lat out of [-90, 90]");
        if (!(lon >= -180.0 && lon <= 180.0))
            throw ValidationError("GeoPoint: lon out of [-180, 180]");
    }

    bool operator==(const GeoPoint&) const = default;
};

inline constexpr double kEarthRadiusKm = 6371.0;

inline double haversine_km(const GeoPoint& a, const GeoPoint& b) {
    constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
    const double lat1 = a.lat * kDegToRad;
    const double lat2 = b.lat * kDegToRad;
    const double dlat = (b.lat - a.lat) * kDegToRad;
    const double dlon = (b.lon - a.lon) * kDegToRad;
    const double s1 = std::sin(dlat / 2.0);
    const double s2 = std::sin(dlon / 2.0);
    const double h = s1 * s1 + std::cos(lat1) * std::cos(lat2) * s2 * s2;
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

// ---------------------------------------------------------------------------
// Venue content

struct Review {
    std::string text;
    std::int64_t created_at = 0;
    std::optional<int> rating;  // 1..5

    Review() = default;
    Review(std::string t, std::int64_t ts, std::optional<int> r = std::nullopt)
        : text(std::move(t)), created_at(ts), rating(r) {
        validate();
    }

    void validate() const {
        if (text.empty()) throw ValidationError("Review: text must be non-empty");
        if (rating && (*rating < 1 || *rating > 5))
            throw ValidationError("Review: rating out of 1..5");
    }
};

// Weekly opening intervals in minutes from local midnight; close past 1440
// denotes closing after midnight (e.g. 17:00-02:00 is {1020, 1560}).
struct OpeningHours {
    struct Interval {
        int open_minute = 0;
        int close_minute = 0;
        bool operator==(const Interval&) const = default;
    };

    std::array<std::vector<Interval>, 7> by_day;  // indexed by DayOfWeek

    OpeningHours() = default;

    static OpeningHours daily(int open_minute, int close_minute) {
        OpeningHours h;
        for (auto& day : h.by_day) day.push_back({open_minute, close_minute});
        h.validate();
        return h;
    }

    void validate() const {
        for (const auto& day : by_day) {
            int prev_close = -1;
            for (const auto& iv : day) {
                if (!(iv.open_minute >= 0 && iv.open_minute < iv.close_minute &&
                      iv.close_minute <= 2880))
                    throw ValidationError("OpeningHours: interval must satisfy 0 <= open < close <= 2880");
                if (iv.open_minute < prev_close)
                    throw ValidationError("OpeningHours: intervals within a day must not overlap");
                prev_close = iv.close_minute;
            }
        }
    }

    // Open at `minute` (0..1439) on day `d`, including spillover from the
    // previous day's past-midnight intervals.
    bool is_open(DayOfWeek d, int minute) const {
        for (const auto& iv : by_day[static_cast<size_t>(d)]) {
            if (minute >= iv.open_minute && minute < iv.close_minute) return true;
        }
        const int prev = (static_cast<int>(d) + 6) % 7;
        for (const auto& iv : by_day[static_cast<size_t>(prev)]) {
            if (iv.close_minute > 1440 && minute + 1440 >= iv.open_minute &&
                minute + 1440 < iv.close_minute)
                return true;
        }
        return false;
    }

    bool operator==(const OpeningHours&) const = default;
};

struct Metadata {
    std::string category;
    int price_tier = 1;  // 1..4
    OpeningHours hours;
    GeoPoint location;
    std::int64_t review_count = 0;

    Metadata() = default;
    Metadata(std::string cat, int price, OpeningHours h, GeoPoint loc, std::int64_t rc)
        : category(std::move(cat)),
          price_tier(price),
          hours(std::move(h)),
          location(loc),
          review_count(rc) {
        validate();
    }

    void validate() const {
        if (price_tier < 1 || price_tier > 4)
            throw ValidationError("Metadata: price_tier out of 1..4");
        if (review_count < 0)
            throw ValidationError("Metadata: review_count must be non-negative");
        hours.validate();
        location.validate();
    }
};

struct MultimodalContent {
    std::string image_description;  // pre-extracted dense text; may be empty
    std::vector<Review> reviews;
    Metadata metadata;

    void validate() const {
        for (const auto& r : reviews) r.validate();
        metadata.validate();
    }
};

struct Poi {
    std::string id;
    std::string name;
    MultimodalContent content;

    Poi() = default;
    Poi(std::string poi_id, std::string n, MultimodalContent c)
        : id(std::move(poi_id)), name(std::move(n)), content(std::move(c)) {
        validate();
    }

    void validate() const {
        if (id.empty()) throw ValidationError("Poi: id must be non-empty");
        content.validate();
    }
};

struct CheckIn {
    std::string user_id;
    std::string poi_id;
    std::int64_t timestamp = 0;
    Context context;  // visit-time context

    CheckIn() = default;
    CheckIn(std::string uid, std::string pid, std::int64_t ts, Context ctx)
        : user_id(std::move(uid)), poi_id(std::move(pid)), timestamp(ts), context(std::move(ctx)) {
        validate();
    }

    void validate() const {
        if (user_id.empty()) throw ValidationError("CheckIn: user_id must be non-empty");
        if (poi_id.empty()) throw ValidationError("CheckIn: poi_id must be non-empty");
        context.validate();
        if (context.timestamp != timestamp)
            throw ValidationError("CheckIn: context.timestamp must equal timestamp");
    }
};

// ---------------------------------------------------------------------------
// Affordance layer

struct AffordanceQuery {
    int index = 0;                    // 1-based position in the query set
    std::string text;
    std::vector<Modality> grounding;  // sorted, unique, non-empty

    AffordanceQuery() = default;
    AffordanceQuery(int i, std::string t, std::vector<Modality> g)
        : index(i), text(std::move(t)), grounding(std::move(g)) {
        std::sort(grounding.begin(), grounding.end());
        grounding.erase(std::unique(grounding.begin(), grounding.end()), grounding.end());
        validate();
    }

    void validate() const {
        if (index < 1) throw ValidationError("AffordanceQuery: index must be >= 1");
        if (text.empty()) throw ValidationError("AffordanceQuery: text must be non-empty");
        if (grounding.empty())
            throw ValidationError("AffordanceQuery: grounding must be non-empty");
    }

    bool grounded_in(Modality m) const {
        return std::find(grounding.begin(), grounding.end(), m) != grounding.end();
    }

    bool operator==(const AffordanceQuery&) const = default;
};

struct StepTrace {
    ReasoningStep step = ReasoningStep::verdict;
    Signal signal = Signal::neutral;
    std::string note;

    bool operator==(const StepTrace&) const = default;
};

struct Evidence {
    std::vector<std::string> visual;
    std::vector<std::string> review;
    std::vector<std::string> metadata;

    bool empty() const { return visual.empty() && review.empty() && metadata.empty(); }

    std::vector<std::string>& for_modality(Modality m) {
        switch (m) {
            case Modality::visual: return visual;
            case Modality::review: return review;
            default: return metadata;
        }
    }
    const std::vector<std::string>& for_modality(Modality m) const {
        return const_cast<Evidence*>(this)->for_modality(m);
    }

    bool operator==(const Evidence&) const = default;
};

struct Verdict {
    Answer answer = Answer::uncertain;
    double confidence = 0.0;  // in [0, 1]
    Evidence evidence;
    std::optional<std::string> emergent;  // cross-modal conclusion, if any
    std::optional<std::string> conflict;  // contradiction description; implies uncertain
    std::vector<StepTrace> traces;

    Verdict() = default;
    Verdict(Answer a, double conf, Evidence ev = {},
            std::optional<std::string> em = std::nullopt,
            std::optional<std::string> cf = std::nullopt)
        : answer(a), confidence(conf), evidence(std::move(ev)),
          emergent(std::move(em)), conflict(std::move(cf)) {
        validate();
    }

    void validate() const {
        if (!(confidence >= 0.0 && confidence <= 1.0))
            throw ValidationError("Verdict: confidence out of [0, 1]");
        if (conflict && answer != Answer::uncertain)
            throw ValidationError("Verdict: conflict flag requires answer == uncertain");
    }
};

struct AffordanceEntry {
    AffordanceQuery query;
    Verdict verdict;
};

// The K-entry structured representation of one (poi, context-type) pair,
// with the uncertainty-adjusted effective-confidence vector.
struct AffordanceRepresentation {
    std::string poi_id;
    ContextType context_type;
    std::vector<AffordanceEntry> entries;
    std::vector<double> effective;  // effective[i] derived from entries[i] under alpha
    double alpha = 0.5;

    size_t k() const { return entries.size(); }
};

struct PreferenceVector {
    std::vector<double> weights;  // non-negative, sums to 1
    WeightSource source = WeightSource::estimated;

    PreferenceVector() = default;
    PreferenceVector(std::vector<double> w, WeightSource s)
        : weights(std::move(w)), source(s) {
        validate();
    }

    void validate() const {
        if (weights.empty()) throw ValidationError("PreferenceVector: weights must be non-empty");
        double sum = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0)) throw ValidationError("PreferenceVector: weights must be non-negative");
            sum += w;
        }
        if (std::fabs(sum - 1.0) > 1e-12)
            throw ValidationError("PreferenceVector: weights must sum to 1 within 1e-12");
    }

    size_t k() const { return weights.size(); }
};

struct RankedItem {
    std::string poi_id;
    double score = 0.0;
    std::string explanation;
};

}  // namespace affrec
