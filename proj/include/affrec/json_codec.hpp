#pragma once
// Plain JSON forms for the domain types (JSONL records, HTTP bodies,
// backend prompts). Field names mirror the type fields in snake_case.

#include <json.hpp>

#include "affrec/domain.hpp"

namespace affrec {

using json = nlohmann::json;

// --- Context ---------------------------------------------------------------

inline json to_json(const Context& c) {
    json j;
    j["timestamp"] = c.timestamp;
    j["day_of_week"] = to_string(c.day_of_week);
    j["social_situation"] = to_string(c.social_situation);
    if (c.group_size) j["group_size"] = *c.group_size;
    json traj = json::array();
    for (const auto& p : c.trajectory)
        traj.push_back({{"poi_id", p.poi_id}, {"timestamp", p.timestamp}});
    j["trajectory"] = std::move(traj);
    if (c.intent_text) j["intent_text"] = *c.intent_text;
    return j;
}

inline Context context_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("context: expected object");
    std::optional<int> group_size;
    if (j.contains("group_size") && !j["group_size"].is_null())
        group_size = j["group_size"].get<int>();
    std::vector<TrajectoryPoint> traj;
    if (j.contains("trajectory")) {
        for (const auto& p : j["trajectory"]) {
            traj.push_back({p.at("poi_id").get<std::string>(),
                            p.at("timestamp").get<std::int64_t>()});
        }
    }
    std::optional<std::string> intent;
    if (j.contains("intent_text") && !j["intent_text"].is_null())
        intent = j["intent_text"].get<std::string>();
    return Context(j.at("timestamp").get<std::int64_t>(),
                   day_of_week_from_string(j.at("day_of_week").get<std::string>()),
                   social_situation_from_string(j.at("social_situation").get<std::string>()),
                   group_size, std::move(traj), std::move(intent));
}

// --- Venue content ----------------------------------------------------------

inline json to_json(const Review& r) {
    json j;
    j["text"] = r.text;
    j["created_at"] = r.created_at;
    if (r.rating) j["rating"] = *r.rating;
    return j;
}

inline Review review_from_json(const json& j) {
    std::optional<int> rating;
    if (j.contains("rating") && !j["rating"].is_null()) rating = j["rating"].get<int>();
    return Review(j.at("text").get<std::string>(), j.at("created_at").get<std::int64_t>(),
                  rating);
}

inline json to_json(const OpeningHours& h) {
    json j = json::object();
    for (int d = 0; d < 7; ++d) {
        json day = json::array();
        for (const auto& iv : h.by_day[static_cast<size_t>(d)])
            day.push_back({iv.open_minute, iv.close_minute});
        j[to_string(static_cast<DayOfWeek>(d))] = std::move(day);
    }
    return j;
}

inline OpeningHours opening_hours_from_json(const json& j) {
    OpeningHours h;
    for (int d = 0; d < 7; ++d) {
        const char* name = to_string(static_cast<DayOfWeek>(d));
        if (!j.contains(name)) continue;
        for (const auto& iv : j[name]) {
            if (!iv.is_array() || iv.size() != 2)
                throw ValidationError("hours: interval must be [open_minute, close_minute]");
            h.by_day[static_cast<size_t>(d)].push_back(
                {iv[0].get<int>(), iv[1].get<int>()});
        }
    }
    h.validate();
    return h;
}

inline json to_json(const Metadata& m) {
    json j;
    j["category"] = m.category;
    j["price_tier"] = m.price_tier;
    j["hours"] = to_json(m.hours);
    j["location"] = {{"lat", m.location.lat}, {"lon", m.location.lon}};
    j["review_count"] = m.review_count;
    return j;
}

inline Metadata metadata_from_json(const json& j) {
    const auto& loc = j.at("location");
    return Metadata(j.at("category").get<std::string>(), j.at("price_tier").get<int>(),
                    opening_hours_from_json(j.at("hours")),
                    GeoPoint(loc.at("lat").get<double>(), loc.at("lon").get<double>()),
                    j.at("review_count").get<std::int64_t>());
}

inline json to_json(const Poi& p) {
    json j;
    j["poi_id"] = p.id;
    j["name"] = p.name;
    j["image_description"] = p.content.image_description;
    json reviews = json::array();
    for (const auto& r : p.content.reviews) reviews.push_back(to_json(r));
    j["reviews"] = std::move(reviews);
    j["metadata"] = to_json(p.content.metadata);
    return j;
}

inline Poi poi_from_json(const json& j) {
    MultimodalContent content;
    content.image_description = j.value("image_description", std::string{});
    if (j.contains("reviews")) {
        for (const auto& r : j["reviews"]) content.reviews.push_back(review_from_json(r));
    }
    content.metadata = metadata_from_json(j.at("metadata"));
    return Poi(j.at("poi_id").get<std::string>(), j.value("name", std::string{}),
               std::move(content));
}

inline json to_json(const CheckIn& c) {
    json j;
    j["user_id"] = c.user_id;
    j["poi_id"] = c.poi_id;
    j["timestamp"] = c.timestamp;
    j["context"] = to_json(c.context);
    return j;
}

inline CheckIn checkin_from_json(const json& j) {
    return CheckIn(j.at("user_id").get<std::string>(), j.at("poi_id").get<std::string>(),
                   j.at("timestamp").get<std::int64_t>(),
                   context_from_json(j.at("context")));
}

}  // namespace affrec
