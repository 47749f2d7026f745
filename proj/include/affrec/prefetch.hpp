#pragma once
// Asynchronous prefetching along projected trajectories: the next position
// is extrapolated at constant velocity from the last two trajectory points
// (radius-only around the last point when only one exists), nearby POIs are
// enqueued priority = 1/(1+distance) and drained by background workers that
// populate the affordance cache without blocking the online scoring path.

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <queue>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "affrec/cache.hpp"
#include "affrec/domain.hpp"

namespace affrec {

struct PrefetchTask {
    std::string poi_id;
    ContextType context_type;
    std::int64_t enqueued_at = 0;
    double priority = 0.0;  // 1 / (1 + distance_km)
};

struct PrefetcherConfig {
    double radius_km = 2.0;
    int workers = 4;
    std::int64_t lookahead_s = 900;  // project 15 minutes ahead
};

class Prefetcher {
public:
    // infer_fn computes a representation for (poi_id, context); it is called
    // from worker threads through the cache's single-flight path.
    using InferFn =
        std::function<AffordanceRepresentation(const std::string&, const Context&)>;

    Prefetcher(AffordanceCache& cache,
               const std::map<std::string, GeoPoint>& poi_locations, InferFn infer_fn,
               PrefetcherConfig cfg = {})
        : cache_(cache), locations_(poi_locations), infer_fn_(std::move(infer_fn)), cfg_(cfg) {
        const int workers = cfg_.workers < 1 ? 1 : cfg_.workers;
        for (int i = 0; i < workers; ++i)
            workers_.emplace_back([this] { worker_loop(); });
    }

    ~Prefetcher() { stop(); }

    Prefetcher(const Prefetcher&) = delete;
    Prefetcher& operator=(const Prefetcher&) = delete;

    // Projects the user's next position and enqueues every not-yet-cached,
    // not-yet-pending POI within the radius for the context's type.
    std::vector<PrefetchTask> prefetch_for_trajectory(
        const std::vector<TrajectoryPoint>& trajectory, std::int64_t now, const Context& ctx,
        const ContextType& ctx_type) {
        if (trajectory.empty())
            throw ValidationError("prefetch_for_trajectory: trajectory must be non-empty");
        const auto center = project_position(trajectory, now);
        if (!center) return {};

        std::vector<PrefetchTask> enqueued;
        std::lock_guard<std::mutex> lock(mu_);
        for (const auto& [poi_id, loc] : locations_) {
            const double dist = haversine_km(*center, loc);
            if (dist > cfg_.radius_km) continue;
            const std::string key = AffordanceCache::make_key(poi_id, ctx_type);
            if (pending_.count(key)) continue;  // deduplicated while pending
            if (cache_.contains(poi_id, ctx_type)) continue;
            PrefetchTask task{poi_id, ctx_type, now, 1.0 / (1.0 + dist)};
            pending_.insert(key);
            queue_.push(QueueItem{task, ctx, seq_++});
            enqueued.push_back(std::move(task));
        }
        if (!enqueued.empty()) cv_.notify_all();
        return enqueued;
    }

    size_t pending() const {
        std::lock_guard<std::mutex> lock(mu_);
        return pending_.size();
    }

    std::uint64_t completed() const {
        std::lock_guard<std::mutex> lock(mu_);
        return completed_;
    }

    std::uint64_t failed() const {
        std::lock_guard<std::mutex> lock(mu_);
        return failed_;
    }

    // Blocks until the queue is empty and all workers are idle.
    void drain() {
        std::unique_lock<std::mutex> lock(mu_);
        idle_cv_.wait(lock, [this] { return queue_.empty() && active_ == 0; });
    }

    void stop() {
        {
            std::lock_guard<std::mutex> lock(mu_);
            if (stopping_) return;
            stopping_ = true;
        }
        cv_.notify_all();
        for (auto& w : workers_) {
            if (w.joinable()) w.join();
        }
    }

private:
    struct QueueItem {
        PrefetchTask task;
        Context ctx;
        std::uint64_t seq = 0;  // FIFO among equal priorities

        bool operator<(const QueueItem& other) const {
            if (task.priority != other.task.priority) return task.priority < other.task.priority;
            return seq > other.seq;
        }
    };

    std::optional<GeoPoint> project_position(const std::vector<TrajectoryPoint>& trajectory,
                                             std::int64_t now) const {
        const auto locate = [this](const std::string& poi_id) -> std::optional<GeoPoint> {
            const auto it = locations_.find(poi_id);
            if (it == locations_.end()) return std::nullopt;
            return it->second;
        };
        const auto& last = trajectory.back();
        const auto last_loc = locate(last.poi_id);
        if (!last_loc) return std::nullopt;
        if (trajectory.size() < 2) return last_loc;  // radius-only around last point
        const auto& prev = trajectory[trajectory.size() - 2];
        const auto prev_loc = locate(prev.poi_id);
        const std::int64_t dt = last.timestamp - prev.timestamp;
        if (!prev_loc || dt <= 0) return last_loc;
        const double horizon =
            static_cast<double>((now - last.timestamp) + cfg_.lookahead_s);
        const double vlat = (last_loc->lat - prev_loc->lat) / static_cast<double>(dt);
        const double vlon = (last_loc->lon - prev_loc->lon) / static_cast<double>(dt);
        const double lat = std::clamp(last_loc->lat + vlat * horizon, -90.0, 90.0);
        const double lon = std::clamp(last_loc->lon + vlon * horizon, -180.0, 180.0);
        return GeoPoint(lat, lon);
    }

    void worker_loop() {
        for (;;) {
            QueueItem item;
            {
                std::unique_lock<std::mutex> lock(mu_);
                cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
                if (stopping_ && queue_.empty()) return;
                item = queue_.top();
                queue_.pop();
                ++active_;
            }
            const std::string key =
                AffordanceCache::make_key(item.task.poi_id, item.task.context_type);
            bool ok = true;
            try {
                cache_.get_or_infer(item.task.poi_id, item.task.context_type,
                                    [&] { return infer_fn_(item.task.poi_id, item.ctx); });
            } catch (...) {
                ok = false;
            }
            {
                std::lock_guard<std::mutex> lock(mu_);
                pending_.erase(key);
                --active_;
                if (ok) {
                    ++completed_;
                } else {
                    ++failed_;
                }
                if (queue_.empty() && active_ == 0) idle_cv_.notify_all();
            }
        }
    }

    AffordanceCache& cache_;
    std::map<std::string, GeoPoint> locations_;
    InferFn infer_fn_;
    PrefetcherConfig cfg_;

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable idle_cv_;
    std::priority_queue<QueueItem> queue_;
    std::unordered_set<std::string> pending_;
    std::vector<std::thread> workers_;
    int active_ = 0;
    std::uint64_t seq_ = 0;
    std::uint64_t completed_ = 0;
    std::uint64_t failed_ = 0;
    bool stopping_ = false;
};

}  // namespace affrec
