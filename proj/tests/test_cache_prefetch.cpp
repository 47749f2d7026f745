#include <doctest.h>

#include <atomic>
#include <thread>

#include "affrec/cache.hpp"
#include "affrec/cot_engine.hpp"
#include "affrec/prefetch.hpp"
#include "affrec/rng.hpp"
#include "helpers.hpp"

using namespace affrec;
using namespace affrec::testing;

namespace {

AffordanceRepresentation make_rep(const std::string& poi, const ContextType& ct,
                                  double conf = 0.8) {
    Verdict v;
    v.answer = Answer::yes;
    v.confidence = conf;
    std::vector<AffordanceEntry> entries;
    entries.push_back({AffordanceQuery(1, "cached?", {Modality::review}), std::move(v)});
    return assemble_representation(poi, ct, std::move(entries));
}

ContextType ct_of(const char* intent) {
    return ContextType{DayPart::evening, DayClass::weekday, SocialSituation::friends, intent};
}

}  // namespace

TEST_CASE("cache hit path never re-invokes inference") {
    AffordanceCache cache(100);
    const ContextType ct = ct_of("celebration");
    std::atomic<int> invocations{0};
    auto infer = [&] {
        ++invocations;
        return make_rep("p1", ct);
    };
    const auto first = cache.get_or_infer("p1", ct, infer);
    CHECK_FALSE(first.hit);
    const auto second = cache.get_or_infer("p1", ct, infer);
    CHECK(second.hit);
    CHECK(invocations.load() == 1);
    CHECK(canonical_encode(first.rep) == canonical_encode(second.rep));

    const auto stats = cache.stats();
    CHECK(stats.hits == 1);
    CHECK(stats.misses == 1);
    CHECK(stats.entries == 1);
}

TEST_CASE("single-flight: 100 concurrent first calls run inference once") {
    AffordanceCache cache(100);
    const ContextType ct = ct_of("celebration");
    std::atomic<int> invocations{0};
    std::atomic<int> ready{0};
    std::vector<std::thread> threads;
    std::vector<std::string> results(100);
    for (int i = 0; i < 100; ++i) {
        threads.emplace_back([&, i] {
            ++ready;
            while (ready.load() < 100) std::this_thread::yield();
            auto out = cache.get_or_infer("p1", ct, [&] {
                ++invocations;
                std::this_thread::sleep_for(std::chrono::milliseconds(50));
                return make_rep("p1", ct);
            });
            results[static_cast<size_t>(i)] = canonical_encode(out.rep);
        });
    }
    for (auto& t : threads) t.join();
    CHECK(invocations.load() == 1);
    for (const auto& r : results) CHECK(r == results[0]);
}

TEST_CASE("failures propagate to waiters and are never cached") {
    AffordanceCache cache(100);
    const ContextType ct = ct_of("celebration");
    CHECK_THROWS_AS(cache.get_or_infer("p1", ct,
                                       []() -> AffordanceRepresentation {
                                           throw BackendError("boom");
                                       }),
                    BackendError);
    CHECK(cache.size() == 0);
    // the key recovers after the failure
    const auto ok = cache.get_or_infer("p1", ct, [&] { return make_rep("p1", ct); });
    CHECK_FALSE(ok.hit);
    CHECK(cache.size() == 1);
}

TEST_CASE("invalidation evicts every context type of the poi") {
    AffordanceCache cache(100);
    const ContextType a = ct_of("celebration");
    const ContextType b = ct_of("romance");
    const ContextType c = ct_of("work");
    for (const auto& ct : {a, b, c})
        cache.get_or_infer("p1", ct, [&] { return make_rep("p1", ct); });
    cache.get_or_infer("p2", a, [&] { return make_rep("p2", a); });

    CHECK(cache.invalidate("p1") == 3);
    CHECK(cache.size() == 1);
    CHECK(cache.invalidate("uncached") == 0);

    // subsequent gets are misses and no stale value is observable
    std::atomic<int> fresh{0};
    const auto again = cache.get_or_infer("p1", a, [&] {
        ++fresh;
        return make_rep("p1", a, 0.5);
    });
    CHECK_FALSE(again.hit);
    CHECK(fresh.load() == 1);
    CHECK(again.rep.entries[0].verdict.confidence == 0.5);
}

TEST_CASE("metadata update flips a vetoed verdict after re-inference") {
    RuleBackend backend;
    AffordanceCache cache(100);
    const Context friday = friday_birthday();
    ContextType ct{DayPart::evening, DayClass::weekday, SocialSituation::friends, "celebration"};
    std::vector<AffordanceQuery> queries = {late_hours_query(1)};

    MultimodalContent content = booking_synthesis_content(friday.timestamp - 86400);
    content.metadata = default_metadata(8 * 60, 18 * 60);  // closes 18:00

    auto infer = [&] {
        return infer_affordance("p1", ct, queries, content, friday, backend, {});
    };
    const auto before = cache.get_or_infer("p1", ct, infer);
    CHECK(before.rep.entries[0].verdict.answer == Answer::no);

    content.metadata = default_metadata(8 * 60, 23 * 60);  // hours change 18 -> 23
    CHECK(cache.invalidate("p1") == 1);
    const auto after = cache.get_or_infer("p1", ct, infer);
    CHECK_FALSE(after.hit);
    CHECK(after.rep.entries[0].verdict.answer == Answer::yes);
}

TEST_CASE("in-flight results do not repopulate the cache across invalidation") {
    AffordanceCache cache(100);
    const ContextType ct = ct_of("celebration");
    std::atomic<bool> started{false};
    std::atomic<bool> proceed{false};

    std::thread slow([&] {
        cache.get_or_infer("p1", ct, [&] {
            started = true;
            while (!proceed.load()) std::this_thread::yield();
            return make_rep("p1", ct, 0.3);  // computed against stale metadata
        });
    });
    while (!started.load()) std::this_thread::yield();
    cache.invalidate("p1");
    proceed = true;
    slow.join();
    // nothing stale was stored
    CHECK_FALSE(cache.contains("p1", ct));
}

TEST_CASE("lru eviction respects capacity") {
    AffordanceCache cache(3);
    for (int i = 0; i < 5; ++i) {
        const std::string poi = "p" + std::to_string(i);
        cache.get_or_infer(poi, ct_of("celebration"), [&] { return make_rep(poi, ct_of("celebration")); });
    }
    CHECK(cache.size() == 3);
    CHECK(cache.stats().evictions == 2);
    CHECK_FALSE(cache.contains("p0", ct_of("celebration")));
    CHECK(cache.contains("p4", ct_of("celebration")));
}

TEST_CASE("zipf replay reaches a 90 percent hit rate") {
    AffordanceCache cache(10000);
    Rng rng(2020);
    // zipf-ish popularity over 200 (poi, context-type) keys
    std::vector<double> weights;
    for (int i = 1; i <= 200; ++i) weights.push_back(1.0 / std::pow(i, 1.1));
    int inferences = 0;
    for (int i = 0; i < 20000; ++i) {
        const size_t key = rng.weighted_pick(weights);
        const std::string poi = "p" + std::to_string(key);
        cache.get_or_infer(poi, ct_of("celebration"), [&] {
            ++inferences;
            return make_rep(poi, ct_of("celebration"));
        });
    }
    const auto stats = cache.stats();
    CHECK(stats.hits + stats.misses == 20000);
    CHECK(stats.hit_rate() >= 0.90);
    CHECK(inferences == static_cast<int>(stats.misses));
}

TEST_CASE("cached results are byte-identical to uncached inference") {
    RuleBackend backend;
    AffordanceCache cache(1000);
    const Context friday = friday_birthday();
    ContextType ct{DayPart::evening, DayClass::weekday, SocialSituation::friends, "celebration"};
    std::vector<AffordanceQuery> queries = {booking_query(1), quiet_query(2), late_hours_query(3)};

    for (int i = 0; i < 10; ++i) {
        const std::string poi = "p" + std::to_string(i);
        MultimodalContent content = booking_synthesis_content(friday.timestamp - (i + 1) * 86400);
        auto direct = canonical_encode(
            infer_affordance(poi, ct, queries, content, friday, backend, {}));
        auto infer = [&] {
            return infer_affordance(poi, ct, queries, content, friday, backend, {});
        };
        const auto cold = cache.get_or_infer(poi, ct, infer);
        const auto warm = cache.get_or_infer(poi, ct, infer);
        CHECK(canonical_encode(cold.rep) == direct);
        CHECK(canonical_encode(warm.rep) == direct);
    }
}

// --- prefetcher --------------------------------------------------------------

namespace {

struct PrefetchRig {
    AffordanceCache cache{1000};
    std::map<std::string, GeoPoint> locations;
    std::atomic<int> inferences{0};
    std::unique_ptr<Prefetcher> prefetcher;

    explicit PrefetchRig(PrefetcherConfig cfg = {}) {
        // five venues within 2 km of the anchor, two beyond
        locations.emplace("anchor", GeoPoint(40.0, -74.0));
        for (int i = 0; i < 4; ++i)
            locations.emplace("near" + std::to_string(i), GeoPoint(40.0 + 0.004 * (i + 1), -74.0));
        locations.emplace("far0", GeoPoint(40.5, -74.0));
        locations.emplace("far1", GeoPoint(41.0, -74.0));
        prefetcher = std::make_unique<Prefetcher>(
            cache, locations,
            [this](const std::string& poi, const Context& ctx) {
                ++inferences;
                return make_rep(poi, ContextType{day_part_of_minute(minute_of_day(ctx.timestamp)),
                                                 day_class_of(ctx.day_of_week),
                                                 ctx.social_situation, "general"});
            },
            cfg);
    }
};

}  // namespace

TEST_CASE("stationary prefetch enqueues all nearby venues once") {
    PrefetchRig rig;
    const std::int64_t now = at(DayOfWeek::fri, 19, 0);
    Context ctx(now, DayOfWeek::fri, SocialSituation::solo);
    const ContextType ct{DayPart::evening, DayClass::weekday, SocialSituation::solo, "general"};

    const auto tasks =
        rig.prefetcher->prefetch_for_trajectory({{"anchor", now - 600}}, now, ctx, ct);
    CHECK(tasks.size() == 5);  // anchor + four near, far ones excluded
    for (const auto& t : tasks) {
        CHECK(t.priority > 0.0);
        CHECK(t.priority <= 1.0);
    }

    // repeated call before drain adds nothing (pending or cached keys skip)
    const auto again =
        rig.prefetcher->prefetch_for_trajectory({{"anchor", now - 600}}, now, ctx, ct);
    CHECK(again.empty());

    rig.prefetcher->drain();
    CHECK(rig.inferences.load() == 5);
    CHECK(rig.cache.size() == 5);

    // after drain everything is cached: still nothing to enqueue
    const auto cached =
        rig.prefetcher->prefetch_for_trajectory({{"anchor", now - 600}}, now, ctx, ct);
    CHECK(cached.empty());
}

TEST_CASE("constant-velocity projection shifts the prefetch disk") {
    PrefetchRig rig;
    const std::int64_t now = at(DayOfWeek::fri, 19, 0);
    Context ctx(now, DayOfWeek::fri, SocialSituation::solo);
    const ContextType ct{DayPart::evening, DayClass::weekday, SocialSituation::solo, "general"};

    // moving north from far0 towards... the projection lands beyond near3
    const std::vector<TrajectoryPoint> moving = {{"anchor", now - 1200}, {"near1", now - 600}};
    const auto tasks = rig.prefetcher->prefetch_for_trajectory(moving, now, ctx, ct);
    CHECK(!tasks.empty());
    // the anchor itself may fall out of the projected disk; regardless, the
    // projection is deterministic
    const auto repeat = rig.prefetcher->prefetch_for_trajectory(moving, now, ctx, ct);
    CHECK(repeat.empty());
    rig.prefetcher->drain();

    CHECK_THROWS_AS(rig.prefetcher->prefetch_for_trajectory({}, now, ctx, ct), ValidationError);
}

TEST_CASE("prefetched replay serves the online path without inline inference") {
    PrefetchRig rig;
    const std::int64_t query_time = at(DayOfWeek::fri, 19, 30);
    const std::int64_t prefetch_time = query_time - 15 * 60;  // 15 minutes ahead
    Context ctx(prefetch_time, DayOfWeek::fri, SocialSituation::solo);
    const ContextType ct{DayPart::evening, DayClass::weekday, SocialSituation::solo, "general"};

    rig.prefetcher->prefetch_for_trajectory({{"anchor", prefetch_time - 300}}, prefetch_time,
                                            ctx, ct);
    rig.prefetcher->drain();
    const int prefetch_inferences = rig.inferences.load();

    // online pass over the same candidates: pure hits, zero inline inference
    const auto before = rig.cache.stats();
    for (const auto& poi : {"anchor", "near0", "near1", "near2", "near3"}) {
        const auto out = rig.cache.get_or_infer(poi, ct, [&] {
            ++rig.inferences;
            return make_rep(poi, ct);
        });
        CHECK(out.hit);
    }
    const auto after = rig.cache.stats();
    CHECK(after.hits - before.hits == 5);
    CHECK(after.misses == before.misses);
    CHECK(rig.inferences.load() == prefetch_inferences);
}
