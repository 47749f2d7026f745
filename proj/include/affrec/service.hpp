#pragma once
// Operational surface: the Engine executes the full inference protocol
// (discretize -> cached query set -> user weights -> per-candidate
// cache-or-infer -> score -> top-N with explanations) over an ingested
// corpus; HttpService exposes it as a JSON-over-HTTP API with metrics.

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "affrec/cache.hpp"
#include "affrec/config.hpp"
#include "affrec/cot_engine.hpp"
#include "affrec/io.hpp"
#include "affrec/prefetch.hpp"
#include "affrec/preference.hpp"
#include "affrec/querygen.hpp"
#include "affrec/ranking.hpp"

namespace affrec {

struct NotFoundError : Error {
    using Error::Error;
};

class Engine {
public:
    Engine(Corpus corpus, ServiceConfig cfg,
           std::shared_ptr<ReasonerBackend> backend = nullptr)
        : cfg_(std::move(cfg)),
          backend_(backend ? std::move(backend)
                           : std::make_shared<RuleBackend>(rule_config_for(cfg_.data_dir))),
          querygen_(make_querygen(QueryGenConfig{cfg_.k}, cfg_.data_dir)),
          cache_(cfg_.cache_capacity),
          checkins_(std::move(corpus.checkins)) {
        cfg_.validate();
        std::map<std::string, GeoPoint> locations;
        for (auto& [id, poi] : corpus.pois) {
            locations.emplace(id, poi.content.metadata.location);
            pois_.emplace(id, std::make_shared<const Poi>(std::move(poi)));
        }
        for (const auto& c : checkins_) users_.insert(c.user_id);
        build_history();
        prefetcher_ = std::make_unique<Prefetcher>(
            cache_, locations,
            [this](const std::string& poi_id, const Context& ctx) {
                return infer_for(poi_id, ctx);
            },
            PrefetcherConfig{cfg_.prefetch_radius_km, cfg_.prefetch_workers,
                             cfg_.prefetch_lookahead_s});
    }

    struct Recommendation {
        std::vector<RankedItem> ranked;
        std::uint64_t cache_hits = 0;
        std::uint64_t cache_misses = 0;
        std::int64_t scoring_us = 0;
    };

    Recommendation recommend(const std::string& user_id, const Context& context,
                             const std::optional<std::vector<std::string>>& candidates,
                             size_t n) {
        if (!users_.count(user_id)) throw NotFoundError("unknown user " + user_id);
        std::vector<std::string> pool;
        if (candidates) {
            if (candidates->empty())
                throw ValidationError("candidate_poi_ids must be non-empty when present");
            for (const auto& id : *candidates) {
                if (!find_poi(id)) throw NotFoundError("unknown poi " + id);
                pool.push_back(id);
            }
        } else {
            std::shared_lock lock(poi_mu_);
            for (const auto& [id, poi] : pois_) pool.push_back(id);
        }

        const ContextType ct = querygen_.discretize(context);
        const auto queries = queries_for(ct);
        const PreferenceVector phi =
            estimate_weights(user_id, ct, queries, history_,
                             PreferenceConfig{/*min_context_matched=*/5});

        const auto stats_before = cache_.stats();
        std::vector<std::shared_ptr<const AffordanceRepresentation>> reps;
        reps.reserve(pool.size());
        for (const auto& poi_id : pool) {
            auto result = cache_.get_or_infer(
                poi_id, ct, [&] { return infer_for(poi_id, context); });
            reps.push_back(std::make_shared<const AffordanceRepresentation>(
                std::move(result.rep)));
        }
        const auto stats_after = cache_.stats();

        const auto t0 = std::chrono::steady_clock::now();
        std::vector<std::pair<std::string, double>> scored;
        scored.reserve(pool.size());
        for (size_t i = 0; i < pool.size(); ++i)
            scored.emplace_back(pool[i], score(phi, *reps[i]));
        auto ranked = top_n(std::move(scored), n);
        const auto t1 = std::chrono::steady_clock::now();

        for (auto& item : ranked) {
            for (size_t i = 0; i < pool.size(); ++i) {
                if (pool[i] == item.poi_id) {
                    item.explanation = render_explanation(*reps[i], phi);
                    break;
                }
            }
        }

        Recommendation out;
        out.ranked = std::move(ranked);
        out.cache_hits = stats_after.hits - stats_before.hits;
        out.cache_misses = stats_after.misses - stats_before.misses;
        out.scoring_us =
            std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count();
        return out;
    }

    // Applies a metadata update and evicts every cached representation of
    // the POI; subsequent requests re-infer against the new metadata.
    size_t invalidate(const std::string& poi_id, const Metadata& new_metadata) {
        {
            std::unique_lock lock(poi_mu_);
            const auto it = pois_.find(poi_id);
            if (it == pois_.end()) throw NotFoundError("unknown poi " + poi_id);
            auto updated = std::make_shared<Poi>(*it->second);
            updated->content.metadata = new_metadata;
            updated->validate();
            it->second = std::move(updated);
        }
        return cache_.invalidate(poi_id);
    }

    size_t prefetch(const std::string& user_id, const std::vector<TrajectoryPoint>& trajectory,
                    std::optional<Context> context, std::optional<std::int64_t> now) {
        if (!users_.count(user_id)) throw NotFoundError("unknown user " + user_id);
        const std::int64_t at = now ? *now
                                    : std::chrono::duration_cast<std::chrono::seconds>(
                                          std::chrono::system_clock::now().time_since_epoch())
                                          .count();
        Context ctx = context ? *context
                              : Context(at, day_of_week_from_timestamp(at),
                                        SocialSituation::solo);
        const ContextType ct = querygen_.discretize(ctx);
        return prefetcher_->prefetch_for_trajectory(trajectory, at, ctx, ct).size();
    }

    std::map<std::string, double> metrics() const {
        const auto s = cache_.stats();
        std::map<std::string, double> out;
        out["hits"] = static_cast<double>(s.hits);
        out["misses"] = static_cast<double>(s.misses);
        out["hit_rate"] = s.hit_rate();
        out["entries"] = static_cast<double>(s.entries);
        out["evictions"] = static_cast<double>(s.evictions);
        out["pending_prefetch"] = static_cast<double>(prefetcher_->pending());
        return out;
    }

    bool known_user(const std::string& user_id) const { return users_.count(user_id) > 0; }
    bool known_poi(const std::string& poi_id) const { return find_poi(poi_id) != nullptr; }
    const ServiceConfig& config() const { return cfg_; }
    AffordanceCache& cache() { return cache_; }
    Prefetcher& prefetcher() { return *prefetcher_; }
    void drain_prefetch() { prefetcher_->drain(); }

private:
    static RuleBackendConfig rule_config_for(const std::string& data_dir) {
        RuleBackendConfig cfg;
        if (!data_dir.empty()) {
            namespace fs = std::filesystem;
            const auto templates = fs::path(data_dir) / "templates.tsv";
            const auto rules = fs::path(data_dir) / "emergent_rules.tsv";
            if (fs::exists(templates)) cfg.bank = TemplateBank::load(templates.string());
            if (fs::exists(rules)) cfg.rules = EmergentRuleTable::load(rules.string());
        }
        return cfg;
    }

    std::shared_ptr<const Poi> find_poi(const std::string& poi_id) const {
        std::shared_lock lock(poi_mu_);
        const auto it = pois_.find(poi_id);
        return it == pois_.end() ? nullptr : it->second;
    }

    const std::vector<AffordanceQuery> queries_for(const ContextType& ct) {
        std::lock_guard<std::mutex> lock(queries_mu_);
        const std::string key = ct.key();
        auto it = queries_by_ctype_.find(key);
        if (it == queries_by_ctype_.end()) {
            it = queries_by_ctype_.emplace(key, querygen_.generate_for_type(ct, *backend_)).first;
        }
        return it->second;
    }

    AffordanceRepresentation infer_for(const std::string& poi_id, const Context& ctx) {
        const auto poi = find_poi(poi_id);
        if (!poi) throw NotFoundError("unknown poi " + poi_id);
        const ContextType ct = querygen_.discretize(ctx);
        InferConfig icfg;
        icfg.uncertainty.alpha = cfg_.alpha;
        icfg.fail_mode = cfg_.fail_open ? FailMode::open : FailMode::closed;
        return infer_affordance(poi_id, ct, queries_for(ct), poi->content, ctx, *backend_, icfg);
    }

    void build_history() {
        for (const auto& c : checkins_) {
            const auto poi = find_poi(c.poi_id);
            if (!poi) continue;
            const ContextType ct = querygen_.discretize(c.context);
            InferConfig icfg;
            icfg.uncertainty.alpha = cfg_.alpha;
            icfg.fail_mode = cfg_.fail_open ? FailMode::open : FailMode::closed;
            history_.add(HistoryEntry{
                c, ct,
                infer_affordance(c.poi_id, ct, queries_for(ct), poi->content, c.context,
                                 *backend_, icfg)});
        }
    }

    ServiceConfig cfg_;
    std::shared_ptr<ReasonerBackend> backend_;
    QueryGen querygen_;
    AffordanceCache cache_;
    std::vector<CheckIn> checkins_;
    std::set<std::string> users_;
    mutable std::shared_mutex poi_mu_;
    std::map<std::string, std::shared_ptr<const Poi>> pois_;
    std::mutex queries_mu_;
    std::map<std::string, std::vector<AffordanceQuery>> queries_by_ctype_;
    HistoryIndex history_;
    std::unique_ptr<Prefetcher> prefetcher_;
};

// ---------------------------------------------------------------------------
// HTTP layer

class HttpService {
public:
    explicit HttpService(Engine& engine) : engine_(engine) { install_routes(); }

    ~HttpService() { stop(); }

    int bind_any(const std::string& host) { return server_.bind_to_any_port(host); }
    bool bind(const std::string& host, int port) { return server_.bind_to_port(host, port); }

    void start() {
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    void listen_blocking() { server_.listen_after_bind(); }

    void stop() {
        if (server_.is_running()) server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    httplib::Server& server() { return server_; }

private:
    static void reply_json(httplib::Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    static void reply_error(httplib::Response& res, int status, const std::string& message) {
        reply_json(res, status, json{{"error", message}});
    }

    void install_routes() {
        server_.Post("/recommend", [this](const httplib::Request& req, httplib::Response& res) {
            json body;
            std::optional<std::vector<std::string>> candidates;
            std::string user_id;
            size_t n = 10;
            Context context;
            try {
                body = json::parse(req.body);
                user_id = body.at("user_id").get<std::string>();
                context = context_from_json(body.at("context"));
                if (body.contains("candidate_poi_ids") && !body["candidate_poi_ids"].is_null())
                    candidates = body["candidate_poi_ids"].get<std::vector<std::string>>();
                if (body.contains("n")) n = body["n"].get<size_t>();
                if (n < 1) throw ValidationError("n must be >= 1");
                if (candidates && candidates->empty())
                    throw ValidationError("candidate_poi_ids must be non-empty when present");
            } catch (const std::exception& e) {
                reply_error(res, 400, std::string("malformed request: ") + e.what());
                return;
            }
            try {
                const auto out = engine_.recommend(user_id, context, candidates, n);
                json ranked = json::array();
                for (const auto& item : out.ranked) {
                    ranked.push_back({{"poi_id", item.poi_id},
                                      {"score", item.score},
                                      {"explanation", item.explanation}});
                }
                reply_json(res, 200,
                           json{{"ranked", std::move(ranked)},
                                {"timing",
                                 {{"cache_hits", out.cache_hits},
                                  {"misses", out.cache_misses},
                                  {"scoring_us", out.scoring_us}}}});
            } catch (const NotFoundError& e) {
                reply_error(res, 404, e.what());
            } catch (const BackendError& e) {
                reply_error(res, 503, e.what());
            } catch (const std::exception& e) {
                reply_error(res, 500, e.what());
            }
        });

        server_.Post("/admin/invalidate",
                     [this](const httplib::Request& req, httplib::Response& res) {
                         std::string poi_id;
                         Metadata metadata;
                         try {
                             const json body = json::parse(req.body);
                             poi_id = body.at("poi_id").get<std::string>();
                             metadata = metadata_from_json(body.at("metadata"));
                         } catch (const std::exception& e) {
                             reply_error(res, 400, std::string("malformed request: ") + e.what());
                             return;
                         }
                         try {
                             const size_t evicted = engine_.invalidate(poi_id, metadata);
                             reply_json(res, 200, json{{"evicted", evicted}});
                         } catch (const NotFoundError& e) {
                             reply_error(res, 404, e.what());
                         } catch (const std::exception& e) {
                             reply_error(res, 500, e.what());
                         }
                     });

        server_.Post("/prefetch", [this](const httplib::Request& req, httplib::Response& res) {
            std::string user_id;
            std::vector<TrajectoryPoint> trajectory;
            std::optional<Context> context;
            std::optional<std::int64_t> now;
            try {
                const json body = json::parse(req.body);
                user_id = body.at("user_id").get<std::string>();
                for (const auto& p : body.at("trajectory")) {
                    trajectory.push_back({p.at("poi_id").get<std::string>(),
                                          p.at("timestamp").get<std::int64_t>()});
                }
                if (trajectory.empty()) throw ValidationError("trajectory must be non-empty");
                if (body.contains("context")) context = context_from_json(body["context"]);
                if (body.contains("now")) now = body["now"].get<std::int64_t>();
            } catch (const std::exception& e) {
                reply_error(res, 400, std::string("malformed request: ") + e.what());
                return;
            }
            try {
                const size_t enqueued = engine_.prefetch(user_id, trajectory, context, now);
                reply_json(res, 200, json{{"enqueued", enqueued}});
            } catch (const NotFoundError& e) {
                reply_error(res, 404, e.what());
            } catch (const std::exception& e) {
                reply_error(res, 500, e.what());
            }
        });

        server_.Get("/metrics", [this](const httplib::Request&, httplib::Response& res) {
            reply_json(res, 200, json(engine_.metrics()));
        });

        server_.Get("/health", [](const httplib::Request&, httplib::Response& res) {
            reply_json(res, 200, json{{"status", "ok"}});
        });
    }

    Engine& engine_;
    httplib::Server server_;
    std::thread thread_;
};

}  // namespace affrec
