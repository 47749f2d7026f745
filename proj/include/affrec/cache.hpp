#pragma once
// Affordance cache keyed (poi_id, context_type): bounded LRU with per-key
// single-flight inference, event-driven invalidation on metadata updates
// and exact hit/miss accounting. Values are stored in the canonical
// encoding so cached and freshly inferred representations are bit-equal.

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "affrec/affordance.hpp"
#include "affrec/domain.hpp"

namespace affrec {

struct CacheStats {
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
    std::uint64_t evictions = 0;
    std::uint64_t entries = 0;

    double hit_rate() const {
        const std::uint64_t total = hits + misses;
        return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
    }
};

class AffordanceCache {
public:
    explicit AffordanceCache(size_t capacity = 1'000'000)
        : capacity_(capacity == 0 ? 1 : capacity) {}

    struct GetResult {
        AffordanceRepresentation rep;
        bool hit = false;
    };

    static std::string make_key(const std::string& poi_id, const ContextType& ct) {
        return poi_id + '\x1f' + ct.key();
    }

    // On hit returns the cached value without invoking infer_fn; on miss
    // exactly one in-flight computation runs per key and concurrent missers
    // share its result. Failures propagate to every waiter and are never
    // cached.
    GetResult get_or_infer(const std::string& poi_id, const ContextType& ct,
                           const std::function<AffordanceRepresentation()>& infer_fn) {
        const std::string key = make_key(poi_id, ct);
        std::unique_lock<std::mutex> lock(mu_);
        for (;;) {
            if (const auto it = entries_.find(key); it != entries_.end()) {
                lru_.splice(lru_.begin(), lru_, it->second.lru_it);
                ++hits_;
                const std::string value = it->second.value;
                lock.unlock();
                return {canonical_decode(value), true};
            }
            const auto fit = inflight_.find(key);
            if (fit != inflight_.end() && fit->second->valid_for == poi_version_of(poi_id)) {
                auto flight = fit->second;
                ++misses_;
                flight->cv.wait(lock, [&] { return flight->done; });
                if (flight->error) std::rethrow_exception(flight->error);
                const std::string value = flight->value;
                lock.unlock();
                return {canonical_decode(value), false};
            }
            if (fit != inflight_.end()) {
                // Orphaned flight from before an invalidation; start anew.
                inflight_.erase(fit);
            }
            auto flight = std::make_shared<InFlight>();
            flight->valid_for = poi_version_of(poi_id);
            inflight_[key] = flight;
            ++misses_;
            lock.unlock();

            AffordanceRepresentation rep;
            std::string encoded;
            try {
                rep = infer_fn();
                encoded = canonical_encode(rep);
            } catch (...) {
                lock.lock();
                flight->error = std::current_exception();
                flight->done = true;
                erase_flight(key, flight);
                flight->cv.notify_all();
                throw;
            }

            lock.lock();
            flight->value = encoded;
            flight->done = true;
            if (flight->valid_for == poi_version_of(poi_id)) insert_locked(poi_id, key, encoded);
            erase_flight(key, flight);
            flight->cv.notify_all();
            lock.unlock();
            return {std::move(rep), false};
        }
    }

    bool contains(const std::string& poi_id, const ContextType& ct) const {
        std::lock_guard<std::mutex> lock(mu_);
        return entries_.count(make_key(poi_id, ct)) > 0;
    }

    // Cached encoding without touching LRU order or counters.
    std::optional<std::string> peek(const std::string& poi_id, const ContextType& ct) const {
        std::lock_guard<std::mutex> lock(mu_);
        const auto it = entries_.find(make_key(poi_id, ct));
        if (it == entries_.end()) return std::nullopt;
        return it->second.value;
    }

    // Evicts every context-type entry of the POI and bumps its metadata
    // version so in-flight computations started earlier cannot repopulate
    // the cache with stale values.
    size_t invalidate(const std::string& poi_id) {
        std::lock_guard<std::mutex> lock(mu_);
        ++poi_version_[poi_id];
        size_t evicted = 0;
        const auto it = keys_by_poi_.find(poi_id);
        if (it != keys_by_poi_.end()) {
            for (const auto& key : it->second) {
                const auto eit = entries_.find(key);
                if (eit != entries_.end()) {
                    lru_.erase(eit->second.lru_it);
                    entries_.erase(eit);
                    ++evicted;
                }
            }
            keys_by_poi_.erase(it);
        }
        evictions_ += evicted;
        return evicted;
    }

    std::uint64_t metadata_version(const std::string& poi_id) const {
        std::lock_guard<std::mutex> lock(mu_);
        return poi_version_of(poi_id);
    }

    CacheStats stats() const {
        std::lock_guard<std::mutex> lock(mu_);
        CacheStats s;
        s.hits = hits_;
        s.misses = misses_;
        s.evictions = evictions_;
        s.entries = entries_.size();
        return s;
    }

    size_t size() const {
        std::lock_guard<std::mutex> lock(mu_);
        return entries_.size();
    }

    void clear() {
        std::lock_guard<std::mutex> lock(mu_);
        entries_.clear();
        lru_.clear();
        keys_by_poi_.clear();
    }

private:
    struct Entry {
        std::string value;
        std::string poi_id;
        std::list<std::string>::iterator lru_it;
    };

    struct InFlight {
        std::condition_variable cv;
        bool done = false;
        std::string value;
        std::exception_ptr error;
        std::uint64_t valid_for = 0;
    };

    std::uint64_t poi_version_of(const std::string& poi_id) const {
        const auto it = poi_version_.find(poi_id);
        return it == poi_version_.end() ? 0 : it->second;
    }

    void insert_locked(const std::string& poi_id, const std::string& key,
                       const std::string& value) {
        if (entries_.count(key)) return;
        lru_.push_front(key);
        entries_[key] = Entry{value, poi_id, lru_.begin()};
        keys_by_poi_[poi_id].insert(key);
        while (entries_.size() > capacity_) {
            const std::string& victim = lru_.back();
            const auto vit = entries_.find(victim);
            if (vit != entries_.end()) {
                auto pit = keys_by_poi_.find(vit->second.poi_id);
                if (pit != keys_by_poi_.end()) {
                    pit->second.erase(victim);
                    if (pit->second.empty()) keys_by_poi_.erase(pit);
                }
                entries_.erase(vit);
            }
            lru_.pop_back();
            ++evictions_;
        }
    }

    void erase_flight(const std::string& key, const std::shared_ptr<InFlight>& flight) {
        const auto it = inflight_.find(key);
        if (it != inflight_.end() && it->second == flight) inflight_.erase(it);
    }

    const size_t capacity_;
    mutable std::mutex mu_;
    std::list<std::string> lru_;  // most-recent first
    std::unordered_map<std::string, Entry> entries_;
    std::unordered_map<std::string, std::unordered_set<std::string>> keys_by_poi_;
    std::unordered_map<std::string, std::shared_ptr<InFlight>> inflight_;
    std::unordered_map<std::string, std::uint64_t> poi_version_;
    std::uint64_t hits_ = 0;
    std::uint64_t misses_ = 0;
    std::uint64_t evictions_ = 0;
};

}  // namespace affrec
