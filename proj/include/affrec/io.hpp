#pragma once
// JSONL corpus ingestion and emission. Three record files live in a corpus
// directory: pois.jsonl (one venue + multimodal content per line),
// checkins.jsonl (one check-in per line) and reviews.jsonl (one
// (poi_id, review) per line, merged into the owning venue).

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "affrec/domain.hpp"
#include "affrec/json_codec.hpp"

namespace affrec {

struct Corpus {
    std::map<std::string, Poi> pois;  // ordered for deterministic iteration
    std::vector<CheckIn> checkins;

    std::vector<std::string> poi_ids() const {
        std::vector<std::string> ids;
        ids.reserve(pois.size());
        for (const auto& [id, poi] : pois) ids.push_back(id);
        return ids;
    }
};

namespace detail {
template <typename Fn>
void for_each_jsonl_line(const std::string& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const std::exception& e) {
            throw ValidationError(path + ":" + std::to_string(lineno) + ": invalid JSON: " +
                                  e.what());
        }
        try {
            fn(j);
        } catch (const std::exception& e) {
            throw ValidationError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}
}  // namespace detail

inline Corpus load_corpus(const std::string& dir) {
    namespace fs = std::filesystem;
    Corpus corpus;
    const std::string pois_path = (fs::path(dir) / "pois.jsonl").string();
    const std::string checkins_path = (fs::path(dir) / "checkins.jsonl").string();
    const std::string reviews_path = (fs::path(dir) / "reviews.jsonl").string();

    detail::for_each_jsonl_line(pois_path, [&corpus](const json& j) {
        Poi poi = poi_from_json(j);
        if (corpus.pois.count(poi.id)) throw ValidationError("duplicate poi_id " + poi.id);
        corpus.pois.emplace(poi.id, std::move(poi));
    });
    if (fs::exists(reviews_path)) {
        detail::for_each_jsonl_line(reviews_path, [&corpus](const json& j) {
            const std::string poi_id = j.at("poi_id").get<std::string>();
            const auto it = corpus.pois.find(poi_id);
            if (it == corpus.pois.end())
                throw ValidationError("review references unknown poi_id " + poi_id);
            it->second.content.reviews.push_back(review_from_json(j));
        });
    }
    detail::for_each_jsonl_line(checkins_path, [&corpus](const json& j) {
        CheckIn c = checkin_from_json(j);
        if (!corpus.pois.count(c.poi_id))
            throw ValidationError("check-in references unknown poi_id " + c.poi_id);
        corpus.checkins.push_back(std::move(c));
    });
    return corpus;
}

// Writes pois.jsonl (reviews embedded per venue) and checkins.jsonl plus a
// flat reviews.jsonl mirror.
inline void save_corpus(const std::string& dir, const Corpus& corpus) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    std::ofstream pois_out((fs::path(dir) / "pois.jsonl").string());
    std::ofstream reviews_out((fs::path(dir) / "reviews.jsonl").string());
    if (!pois_out || !reviews_out) throw Error("cannot write corpus files under " + dir);
    for (const auto& [id, poi] : corpus.pois) {
        Poi stripped = poi;
        stripped.content.reviews.clear();  // reviews travel via reviews.jsonl
        pois_out << to_json(stripped).dump() << '\n';
        for (const auto& r : poi.content.reviews) {
            json row = to_json(r);
            row["poi_id"] = id;
            reviews_out << row.dump() << '\n';
        }
    }

    std::ofstream checkins_out((fs::path(dir) / "checkins.jsonl").string());
    if (!checkins_out) throw Error("cannot write checkins.jsonl under " + dir);
    for (const auto& c : corpus.checkins) checkins_out << to_json(c).dump() << '\n';
}

}  // namespace affrec
