#pragma once
// Dataset preprocessing and evaluation: iterative 10-core filtering, the
// review-timestamp leakage filter, social-situation derivation, the three
// split configurations (standard chronological 80/10/10, cold-start with
// structurally masked POIs, weekday-train/weekend-test context shift),
// full-catalog Recall@K / NDCG@K, and the end-to-end pipeline runner with
// ablation flags, alpha sweeps and the planted static-bilinear baseline.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "affrec/ablation.hpp"
#include "affrec/cot_engine.hpp"
#include "affrec/io.hpp"
#include "affrec/preference.hpp"
#include "affrec/querygen.hpp"
#include "affrec/ranking.hpp"
#include "affrec/rng.hpp"
#include "affrec/synth.hpp"

namespace affrec {

// ---------------------------------------------------------------------------
// 10-core filtering: drop users and POIs with fewer than `core` interactions
// until a fixpoint where every survivor has at least `core`.

inline std::vector<CheckIn> ten_core_filter(std::vector<CheckIn> checkins, int core = 10) {
    bool changed = true;
    while (changed) {
        changed = false;
        std::unordered_map<std::string, int> user_count, poi_count;
        for (const auto& c : checkins) {
            ++user_count[c.user_id];
            ++poi_count[c.poi_id];
        }
        std::vector<CheckIn> kept;
        kept.reserve(checkins.size());
        for (auto& c : checkins) {
            if (user_count[c.user_id] >= core && poi_count[c.poi_id] >= core) {
                kept.push_back(std::move(c));
            } else {
                changed = true;
            }
        }
        checkins = std::move(kept);
    }
    if (checkins.empty()) throw EmptyAfterFilterError("ten_core_filter: nothing survives");
    return checkins;
}

// ---------------------------------------------------------------------------
// Social situation derivation: an explicit group-type field maps directly;
// otherwise a keyword heuristic over review text, first match in the order
// family > date > group > we (-> friends), defaulting to solo.

inline SocialSituation derive_social_situation(const std::optional<std::string>& group_type,
                                               const std::vector<std::string>& review_texts) {
    if (group_type) {
        const std::string g = to_lower(*group_type);
        if (g == "friends") return SocialSituation::friends;
        if (g == "family") return SocialSituation::family;
        if (g == "solo") return SocialSituation::solo;
        throw ValidationError("derive_social_situation: unknown groupType '" + *group_type + "'");
    }
    static const std::pair<const char*, SocialSituation> keyword_order[] = {
        {"family", SocialSituation::family},
        {"date", SocialSituation::date},
        {"group", SocialSituation::group},
        {"we", SocialSituation::friends},
    };
    for (const auto& [keyword, situation] : keyword_order) {
        for (const auto& text : review_texts) {
            if (phrase_in(text, keyword)) return situation;
        }
    }
    return SocialSituation::solo;
}

// ---------------------------------------------------------------------------
// Splits

enum class SplitKind { standard, cold_start, context_shift };

inline const char* to_string(SplitKind k) {
    switch (k) {
        case SplitKind::standard: return "standard";
        case SplitKind::cold_start: return "cold_start";
        default: return "context_shift";
    }
}

inline SplitKind split_kind_from_string(const std::string& s) {
    if (s == "standard") return SplitKind::standard;
    if (s == "cold_start" || s == "cold-start") return SplitKind::cold_start;
    if (s == "context_shift" || s == "context-shift") return SplitKind::context_shift;
    throw ValidationError("split: unknown kind '" + s + "'");
}

struct EvalSplit {
    std::vector<CheckIn> train, valid, test;
    SplitKind config = SplitKind::standard;
};

namespace detail {
inline std::map<std::string, std::vector<CheckIn>> by_user_chronological(
    const std::vector<CheckIn>& checkins) {
    std::map<std::string, std::vector<CheckIn>> users;
    for (const auto& c : checkins) users[c.user_id].push_back(c);
    for (auto& [user, list] : users) {
        std::stable_sort(list.begin(), list.end(),
                         [](const CheckIn& a, const CheckIn& b) { return a.timestamp < b.timestamp; });
    }
    return users;
}

// Moves a cut point forward past timestamp ties so ordering stays strict.
inline size_t strict_cut(const std::vector<CheckIn>& list, size_t cut) {
    while (cut > 0 && cut < list.size() && list[cut].timestamp <= list[cut - 1].timestamp) ++cut;
    return std::min(cut, list.size());
}
}  // namespace detail

inline EvalSplit build_split(const std::vector<CheckIn>& checkins, SplitKind kind,
                             std::uint64_t seed = 1, double cold_fraction = 0.20) {
    EvalSplit split;
    split.config = kind;

    if (kind == SplitKind::context_shift) {
        for (const auto& c : checkins) {
            if (day_class_of(c.context.day_of_week) == DayClass::weekday) {
                split.train.push_back(c);
            } else {
                split.test.push_back(c);
            }
        }
        return split;
    }

    EvalSplit standard;
    for (auto& [user, list] : detail::by_user_chronological(checkins)) {
        const size_t n = list.size();
        size_t train_cut = detail::strict_cut(list, (n * 8) / 10);
        size_t valid_cut = detail::strict_cut(list, std::max(train_cut, (n * 9) / 10));
        for (size_t i = 0; i < n; ++i) {
            if (i < train_cut) {
                standard.train.push_back(list[i]);
            } else if (i < valid_cut) {
                standard.valid.push_back(list[i]);
            } else {
                standard.test.push_back(list[i]);
            }
        }
    }
    if (kind == SplitKind::standard) {
        standard.config = kind;
        return standard;
    }

    // cold_start: mask a deterministic popularity-stratified sample of POIs
    // out of train/valid and keep only masked-POI cases in test, so every
    // test POI is unseen. Stratification keeps enough test volume to
    // measure.
    (void)seed;
    std::map<std::string, int> counts;
    for (const auto& c : checkins) ++counts[c.poi_id];
    std::vector<std::pair<std::string, int>> ordered(counts.begin(), counts.end());
    std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    const size_t stride =
        std::max<size_t>(2, static_cast<size_t>(std::lround(1.0 / cold_fraction)));
    std::set<std::string> masked;
    for (size_t i = 0; i < ordered.size(); ++i) {
        if (i % stride == 2 % stride) masked.insert(ordered[i].first);
    }
    for (const auto& c : standard.train) {
        if (!masked.count(c.poi_id)) split.train.push_back(c);
    }
    for (const auto& c : standard.valid) {
        if (!masked.count(c.poi_id)) split.valid.push_back(c);
    }
    for (const auto& c : standard.test) {
        if (masked.count(c.poi_id)) split.test.push_back(c);
    }
    return split;
}

// ---------------------------------------------------------------------------
// Metrics: full-catalog leave-one-out Recall@K and binary-relevance NDCG@K
// (1/log2(rank+1) when the held-out item ranks within k, else 0).

struct RankingCase {
    std::vector<std::string> ranked;  // full catalog, best first
    std::string held_out;
};

inline std::map<std::string, double> compute_metrics_from_ranks(const std::vector<size_t>& ranks,
                                                                const std::vector<int>& ks = {5,
                                                                                              10}) {
    std::map<std::string, double> out;
    for (int k : ks) {
        double recall = 0.0, ndcg = 0.0;
        for (size_t rank : ranks) {
            if (rank >= 1 && rank <= static_cast<size_t>(k)) {
                recall += 1.0;
                ndcg += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
            }
        }
        const double n = ranks.empty() ? 1.0 : static_cast<double>(ranks.size());
        out["recall@" + std::to_string(k)] = recall / n;
        out["ndcg@" + std::to_string(k)] = ndcg / n;
    }
    return out;
}

inline std::map<std::string, double> compute_metrics(const std::vector<RankingCase>& cases,
                                                     const std::vector<int>& ks = {5, 10}) {
    std::vector<size_t> ranks;
    ranks.reserve(cases.size());
    for (const auto& c : cases) {
        size_t rank = 0;
        for (size_t i = 0; i < c.ranked.size(); ++i) {
            if (c.ranked[i] == c.held_out) {
                rank = i + 1;
                break;
            }
        }
        if (rank == 0) rank = c.ranked.size() + 1;  // not ranked: beyond the list
        ranks.push_back(rank);
    }
    return compute_metrics_from_ranks(ranks, ks);
}

// ---------------------------------------------------------------------------
// End-to-end evaluation runner

struct EvalOptions {
    SplitKind split = SplitKind::standard;
    AblationFlags flags;
    double alpha = 0.5;
    int k = 5;
    std::vector<int> metric_ks = {5, 10};
    int min_context_matched = 5;
    int review_limit = 20;
    int min_test_cases_per_user = 3;
    std::uint64_t seed = 1;
    bool with_baseline = false;  // requires planted ground truth
    int threads = 0;             // 0: hardware concurrency
};

struct EvalReport {
    std::string split;
    std::string ablation;
    double alpha = 0.5;
    size_t cases = 0;
    size_t users_dropped = 0;
    std::map<std::string, double> pipeline;
    std::map<std::string, double> baseline;  // empty unless with_baseline
    // Metrics over the fixed weekend tail of the standard chronology; the
    // same physical cases exist in standard and context-shift runs, so
    // shift degradation can be compared on matched cases.
    size_t weekend_tail_cases = 0;
    std::map<std::string, double> pipeline_weekend_tail;
    std::map<std::string, double> baseline_weekend_tail;

    json to_json() const {
        json j;
        j["split"] = split;
        j["ablation"] = ablation;
        j["alpha"] = alpha;
        j["cases"] = cases;
        j["users_dropped"] = users_dropped;
        j["pipeline"] = pipeline;
        if (!baseline.empty()) j["baseline"] = baseline;
        if (weekend_tail_cases > 0) {
            j["weekend_tail_cases"] = weekend_tail_cases;
            j["pipeline_weekend_tail"] = pipeline_weekend_tail;
            if (!baseline_weekend_tail.empty())
                j["baseline_weekend_tail"] = baseline_weekend_tail;
        }
        return j;
    }
};

namespace detail {

// Charitable static bilinear scorer: item embeddings are the context-free
// mean of the planted per-context affordance profiles (the best any offline
// encoder could extract), for train items only — unseen items stay
// zero-initialized. The user-context vector lives in the same static space:
// the mean embedding of the user's context-matched training items, falling
// back to the user's overall training mean and then the global mean, so the
// whole scorer operates strictly within the pre-computed-representation
// regime.
struct PlantedBaseline {
    const GroundTruth* truth = nullptr;
    int min_context_matched = 5;
    std::map<std::string, std::vector<double>> embeddings;  // train items only
    std::map<std::string, std::vector<double>> user_context_profiles;  // "user|ctype"
    std::map<std::string, std::vector<double>> user_profiles;
    std::vector<double> global_profile;

    void build(const std::vector<CheckIn>& train,
               const std::map<std::string, std::string>& checkin_ctype, double alpha) {
        std::set<std::string> train_pois;
        for (const auto& c : train) train_pois.insert(c.poi_id);
        for (const auto& poi : train_pois)
            embeddings[poi] = truth->item_embedding(poi, alpha);

        const size_t dims = truth->dim_space.size();
        global_profile.assign(dims, 0.0);
        std::map<std::string, std::pair<std::vector<double>, int>> by_key, by_user;
        for (const auto& c : train) {
            const auto& emb = embeddings.at(c.poi_id);
            for (size_t d = 0; d < dims; ++d) global_profile[d] += emb[d];
            const std::string ctype = checkin_ctype.at(c.user_id + '\x1f' + c.poi_id + '\x1f' +
                                                       std::to_string(c.timestamp));
            auto& ctx = by_key[c.user_id + '|' + ctype];
            auto& overall = by_user[c.user_id];
            if (ctx.first.empty()) ctx.first.assign(dims, 0.0);
            if (overall.first.empty()) overall.first.assign(dims, 0.0);
            for (size_t d = 0; d < dims; ++d) {
                ctx.first[d] += emb[d];
                overall.first[d] += emb[d];
            }
            ++ctx.second;
            ++overall.second;
        }
        if (!train.empty()) {
            for (double& v : global_profile) v /= static_cast<double>(train.size());
        }
        for (auto& [key, acc] : by_key) {
            if (acc.second < min_context_matched) continue;  // fall through
            for (double& v : acc.first) v /= static_cast<double>(acc.second);
            user_context_profiles[key] = std::move(acc.first);
        }
        for (auto& [user, acc] : by_user) {
            for (double& v : acc.first) v /= static_cast<double>(acc.second);
            user_profiles[user] = std::move(acc.first);
        }
    }

    const std::vector<double>& user_vector(const std::string& user,
                                           const std::string& ctype_key) const {
        if (const auto it = user_context_profiles.find(user + '|' + ctype_key);
            it != user_context_profiles.end())
            return it->second;
        if (const auto it = user_profiles.find(user); it != user_profiles.end())
            return it->second;
        return global_profile;
    }

    double score(const std::vector<double>& user_dims, const std::string& poi) const {
        const auto it = embeddings.find(poi);
        if (it == embeddings.end()) return 0.0;
        double acc = 0.0;
        for (size_t i = 0; i < user_dims.size(); ++i) acc += user_dims[i] * it->second[i];
        return acc;
    }
};

template <typename Fn>
void parallel_for(size_t n, int threads, Fn&& fn) {
    int n_threads = threads > 0 ? threads
                                : static_cast<int>(std::thread::hardware_concurrency());
    if (n_threads < 1) n_threads = 1;
    n_threads = std::min<int>(n_threads, 16);
    if (n < 2 || n_threads == 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    for (int t = 0; t < n_threads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace detail

inline EvalReport run_eval(const Corpus& corpus, const GroundTruth* truth,
                           const EvalOptions& opt) {
    EvalReport report;
    report.split = to_string(opt.split);
    report.ablation = opt.flags.label();
    report.alpha = opt.flags.alpha_one ? 1.0 : opt.alpha;

    const auto filtered = ten_core_filter(corpus.checkins);
    const EvalSplit split = build_split(filtered, opt.split, opt.seed);

    std::set<std::string> catalog_set;
    for (const auto& c : filtered) catalog_set.insert(c.poi_id);
    const std::vector<std::string> catalog(catalog_set.begin(), catalog_set.end());

    QueryGen querygen(QueryGenConfig{opt.k});
    RuleBackend backend;
    InferConfig infer_cfg;
    infer_cfg.ablation = opt.flags;
    infer_cfg.uncertainty.alpha = opt.alpha;
    infer_cfg.review_limit = opt.review_limit;

    std::map<std::string, std::vector<AffordanceQuery>> queries_by_ctype;
    auto queries_for = [&](const ContextType& ct) -> const std::vector<AffordanceQuery>& {
        const std::string key = ct.key();
        auto it = queries_by_ctype.find(key);
        if (it == queries_by_ctype.end()) {
            auto queries = opt.flags.fixed_queries ? querygen.generate_fixed()
                                                   : querygen.generate_for_type(ct, backend);
            it = queries_by_ctype.emplace(key, std::move(queries)).first;
        }
        return it->second;
    };

    // Pre-resolve every context type appearing anywhere (query generation is
    // not thread-safe through the memo above).
    for (const auto& c : filtered) queries_for(querygen.discretize(c.context));

    // History index over the training split; representations are computed
    // under the visit context at the visit-time cutoff.
    HistoryIndex history;
    {
        std::vector<HistoryEntry> entries(split.train.size());
        detail::parallel_for(split.train.size(), opt.threads, [&](size_t i) {
            const CheckIn& c = split.train[i];
            const ContextType ct = querygen.discretize(c.context);
            const auto& queries = queries_by_ctype.at(ct.key());
            const Poi& poi = corpus.pois.at(c.poi_id);
            entries[i] = HistoryEntry{
                c, ct,
                infer_affordance(c.poi_id, ct, queries, poi.content, c.context, backend,
                                 infer_cfg)};
        });
        for (auto& e : entries) history.add(std::move(e));
    }

    // Test cases grouped per user; degenerate users are dropped from the
    // metric averages.
    std::map<std::string, std::vector<CheckIn>> test_by_user;
    for (const auto& c : split.test) test_by_user[c.user_id].push_back(c);
    std::vector<CheckIn> cases;
    for (auto& [user, list] : test_by_user) {
        if (static_cast<int>(list.size()) < opt.min_test_cases_per_user) {
            ++report.users_dropped;
            continue;
        }
        std::stable_sort(list.begin(), list.end(),
                         [](const CheckIn& a, const CheckIn& b) { return a.timestamp < b.timestamp; });
        for (auto& c : list) cases.push_back(std::move(c));
    }
    report.cases = cases.size();

    detail::PlantedBaseline baseline;
    if (opt.with_baseline) {
        if (!truth) throw ValidationError("run_eval: with_baseline requires ground truth");
        baseline.truth = truth;
        baseline.min_context_matched = opt.min_context_matched;
        std::map<std::string, std::string> checkin_ctype;
        for (const auto& c : split.train) {
            checkin_ctype[c.user_id + '\x1f' + c.poi_id + '\x1f' +
                          std::to_string(c.timestamp)] =
                querygen.discretize(c.context).key();
        }
        baseline.build(split.train, checkin_ctype, opt.flags.alpha_one ? 1.0 : opt.alpha);
    }

    PreferenceConfig pref_cfg;
    pref_cfg.min_context_matched = opt.min_context_matched;

    std::vector<size_t> pipeline_ranks(cases.size(), 0);
    std::vector<size_t> baseline_ranks(cases.size(), 0);

    detail::parallel_for(cases.size(), opt.threads, [&](size_t idx) {
        const CheckIn& test = cases[idx];
        const ContextType ct = querygen.discretize(test.context);
        const auto& queries = queries_by_ctype.at(ct.key());
        const PreferenceVector phi =
            opt.flags.bm25_user_weights
                ? bm25_weights(test.user_id, ct, queries, history, corpus.pois, pref_cfg)
                : estimate_weights(test.user_id, ct, queries, history, pref_cfg);

        double held_score = 0.0;
        std::vector<std::pair<std::string, double>> scored;
        scored.reserve(catalog.size());
        for (const auto& poi_id : catalog) {
            const Poi& poi = corpus.pois.at(poi_id);
            const auto rep = infer_affordance(poi_id, ct, queries, poi.content, test.context,
                                              backend, infer_cfg);
            const double s = score(phi, rep);
            scored.emplace_back(poi_id, s);
            if (poi_id == test.poi_id) held_score = s;
        }
        size_t rank = 1;
        for (const auto& [poi_id, s] : scored) {
            if (poi_id == test.poi_id) continue;
            if (s > held_score || (s == held_score && poi_id < test.poi_id)) ++rank;
        }
        pipeline_ranks[idx] = rank;

        if (opt.with_baseline) {
            const auto& user_dims = baseline.user_vector(test.user_id, ct.key());
            double held_base = 0.0;
            std::vector<std::pair<std::string, double>> base_scored;
            base_scored.reserve(catalog.size());
            for (const auto& poi_id : catalog) {
                const double s = baseline.score(user_dims, poi_id);
                base_scored.emplace_back(poi_id, s);
                if (poi_id == test.poi_id) held_base = s;
            }
            size_t base_rank = 1;
            for (const auto& [poi_id, s] : base_scored) {
                if (poi_id == test.poi_id) continue;
                if (s > held_base || (s == held_base && poi_id < test.poi_id)) ++base_rank;
            }
            baseline_ranks[idx] = base_rank;
        }
    });

    report.pipeline = compute_metrics_from_ranks(pipeline_ranks, opt.metric_ks);
    if (opt.with_baseline)
        report.baseline = compute_metrics_from_ranks(baseline_ranks, opt.metric_ks);

    // Matched-case weekend-tail metrics (see EvalReport).
    {
        std::set<std::string> tail_keys;
        const EvalSplit std_split = build_split(filtered, SplitKind::standard, opt.seed);
        for (const auto& c : std_split.test) {
            if (day_class_of(c.context.day_of_week) == DayClass::weekend)
                tail_keys.insert(c.user_id + '|' + c.poi_id + '|' + std::to_string(c.timestamp));
        }
        std::vector<size_t> tail_pipeline, tail_baseline;
        for (size_t i = 0; i < cases.size(); ++i) {
            const auto& c = cases[i];
            const std::string key = c.user_id + '|' + c.poi_id + '|' + std::to_string(c.timestamp);
            if (!tail_keys.count(key)) continue;
            tail_pipeline.push_back(pipeline_ranks[i]);
            if (opt.with_baseline) tail_baseline.push_back(baseline_ranks[i]);
        }
        report.weekend_tail_cases = tail_pipeline.size();
        if (!tail_pipeline.empty()) {
            report.pipeline_weekend_tail =
                compute_metrics_from_ranks(tail_pipeline, opt.metric_ks);
            if (opt.with_baseline)
                report.baseline_weekend_tail =
                    compute_metrics_from_ranks(tail_baseline, opt.metric_ks);
        }
    }
    return report;
}

// Alpha sensitivity sweep: one eval per alpha, everything else fixed.
inline std::vector<EvalReport> sweep_alpha(const Corpus& corpus, const GroundTruth* truth,
                                           EvalOptions opt,
                                           const std::vector<double>& alphas = {0.1, 0.25, 0.5,
                                                                                0.75, 1.0}) {
    std::vector<EvalReport> reports;
    for (double alpha : alphas) {
        opt.alpha = alpha;
        reports.push_back(run_eval(corpus, truth, opt));
    }
    return reports;
}

inline std::string ablation_grid_csv(const std::vector<EvalReport>& reports) {
    std::string csv = "flag_set,recall@5,recall@10,ndcg@5,ndcg@10\n";
    char line[256];
    for (const auto& r : reports) {
        std::snprintf(line, sizeof(line), "%s,%.6f,%.6f,%.6f,%.6f\n", r.ablation.c_str(),
                      r.pipeline.at("recall@5"), r.pipeline.at("recall@10"),
                      r.pipeline.at("ndcg@5"), r.pipeline.at("ndcg@10"));
        csv += line;
    }
    return csv;
}

// Aligned plain-text companion to the JSON report.
inline std::string report_table(const std::vector<EvalReport>& reports) {
    std::string out =
        "split          ablation   alpha  cases  recall@5  recall@10  ndcg@5   ndcg@10\n";
    char line[192];
    for (const auto& r : reports) {
        std::snprintf(line, sizeof(line), "%-14s %-10s %5.2f %6zu  %8.4f  %9.4f  %7.4f  %7.4f\n",
                      r.split.c_str(), r.ablation.c_str(), r.alpha, r.cases,
                      r.pipeline.at("recall@5"), r.pipeline.at("recall@10"),
                      r.pipeline.at("ndcg@5"), r.pipeline.at("ndcg@10"));
        out += line;
        if (!r.baseline.empty()) {
            std::snprintf(line, sizeof(line),
                          "%-14s %-10s %5.2f %6zu  %8.4f  %9.4f  %7.4f  %7.4f\n", r.split.c_str(),
                          "baseline", r.alpha, r.cases, r.baseline.at("recall@5"),
                          r.baseline.at("recall@10"), r.baseline.at("ndcg@5"),
                          r.baseline.at("ndcg@10"));
            out += line;
        }
    }
    return out;
}

inline std::string alpha_sweep_csv(const std::vector<EvalReport>& reports) {
    std::string csv = "alpha,recall@5,recall@10,ndcg@5,ndcg@10\n";
    char line[256];
    for (const auto& r : reports) {
        std::snprintf(line, sizeof(line), "%.2f,%.6f,%.6f,%.6f,%.6f\n", r.alpha,
                      r.pipeline.at("recall@5"), r.pipeline.at("recall@10"),
                      r.pipeline.at("ndcg@5"), r.pipeline.at("ndcg@10"));
        csv += line;
    }
    return csv;
}

}  // namespace affrec
