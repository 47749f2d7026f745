#pragma once
// Shared fixtures: canonical contexts, venues and query sets used across
// the suites.

#include <string>
#include <vector>

#include "affrec/cot_engine.hpp"
#include "affrec/domain.hpp"
#include "affrec/querygen.hpp"

namespace affrec::testing {

// 2020-09-14 was a Monday (first Monday after 1.6e9).
inline constexpr std::int64_t kMonday0 = 1600041600;

inline std::int64_t at(DayOfWeek dow, int hour, int minute = 0) {
    return kMonday0 + static_cast<int>(dow) * 86400 + hour * 3600 + minute * 60;
}

// Friday 19:30, four friends, birthday celebration.
inline Context friday_birthday() {
    return Context(at(DayOfWeek::fri, 19, 30), DayOfWeek::fri, SocialSituation::friends, 4, {},
                   std::string("birthday celebration"));
}

// Tuesday 09:30, solo work session.
inline Context monday_work() {
    return Context(at(DayOfWeek::tue, 9, 30), DayOfWeek::tue, SocialSituation::solo,
                   std::nullopt, {}, std::string("solo work"));
}

inline Metadata default_metadata(int open_minute = 8 * 60, int close_minute = 23 * 60,
                                 int price_tier = 2, std::int64_t review_count = 25) {
    return Metadata("cafe", price_tier, OpeningHours::daily(open_minute, close_minute),
                    GeoPoint(40.75, -73.98), review_count);
}

inline AffordanceQuery booking_query(int index = 1) {
    return AffordanceQuery(index, "Do reviews suggest reservations or advance booking for busy evenings?",
                           {Modality::review});
}

inline AffordanceQuery quiet_query(int index = 1) {
    return AffordanceQuery(index, "Does visual evidence suggest a quiet, well-lit focused atmosphere?",
                           {Modality::visual});
}

inline AffordanceQuery late_hours_query(int index = 1) {
    return AffordanceQuery(index, "Are the operating hours confirmed to extend late into the evening?",
                           {Modality::metadata});
}

// Emergent-synthesis fixture: dense seating imagery, fullness complaints,
// high review volume. No single modality answers the booking query alone.
inline MultimodalContent booking_synthesis_content(std::int64_t review_ts) {
    MultimodalContent content;
    content.image_description = "Dense static seating";
    content.reviews.emplace_back("Always full on Fridays", review_ts, 4);
    content.metadata = default_metadata(8 * 60, 26 * 60, 2, 120);
    return content;
}

// Conflict fixture: serene imagery against a recent construction-noise
// review.
inline MultimodalContent conflicted_quiet_content(std::int64_t review_ts) {
    MultimodalContent content;
    content.image_description = "Serene reading-room layout";
    content.reviews.emplace_back("Unbearable construction noise---avoid", review_ts, 2);
    content.metadata = default_metadata(8 * 60, 22 * 60, 2, 40);
    return content;
}

}  // namespace affrec::testing
