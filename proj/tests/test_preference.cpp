#include <doctest.h>

#include <cmath>

#include "affrec/preference.hpp"
#include "affrec/cot_engine.hpp"
#include "affrec/rng.hpp"
#include "helpers.hpp"

using namespace affrec;
using namespace affrec::testing;

namespace {

std::vector<AffordanceQuery> five_queries() {
    std::vector<AffordanceQuery> qs;
    for (int i = 1; i <= 5; ++i)
        qs.emplace_back(i, "query number " + std::to_string(i) + "?",
                        std::vector<Modality>{Modality::review});
    return qs;
}

AffordanceRepresentation rep_with_effective(const std::vector<double>& eff,
                                            const ContextType& ct) {
    std::vector<AffordanceEntry> entries;
    for (size_t i = 0; i < eff.size(); ++i) {
        Verdict v;
        v.answer = Answer::yes;
        v.confidence = eff[i];
        entries.push_back({AffordanceQuery(static_cast<int>(i) + 1, "q" + std::to_string(i) + "?",
                                           {Modality::review}),
                           std::move(v)});
    }
    return assemble_representation("p", ct, std::move(entries), UncertaintyConfig{0.5});
}

HistoryEntry entry_for(const std::string& user, const ContextType& ct,
                       const std::vector<double>& eff, std::int64_t ts, const std::string& poi) {
    Context ctx(ts, DayOfWeek::tue, ct.social_situation,
                ct.social_situation == SocialSituation::friends ? std::optional<int>(3)
                                                                : std::nullopt);
    CheckIn checkin(user, poi, ts, ctx);
    return {checkin, ct, rep_with_effective(eff, ct)};
}

// softmax oracle at extended precision
std::vector<double> softmax_oracle(const std::vector<double>& z) {
    long double maxz = z[0];
    for (double v : z) maxz = std::max<long double>(maxz, v);
    std::vector<long double> e(z.size());
    long double sum = 0.0L;
    for (size_t i = 0; i < z.size(); ++i) {
        e[i] = expl(static_cast<long double>(z[i]) - maxz);
        sum += e[i];
    }
    std::vector<double> out(z.size());
    for (size_t i = 0; i < z.size(); ++i) out[i] = static_cast<double>(e[i] / sum);
    return out;
}

}  // namespace

TEST_CASE("estimate_weights: uniform fallback below the matched-history threshold") {
    HistoryIndex idx;
    const ContextType ct{DayPart::morning, DayClass::weekday, SocialSituation::solo, "work"};
    const auto queries = five_queries();

    const auto empty = estimate_weights("u1", ct, queries, idx);
    CHECK(empty.source == WeightSource::uniform_fallback);
    for (double w : empty.weights) CHECK(w == 0.2);

    // four matched entries: still below the threshold of five
    for (int i = 0; i < 4; ++i)
        idx.add(entry_for("u1", ct, {0.9, 0.1, 0.5, 0.5, 0.5}, 1000 + i, "p1"));
    CHECK(estimate_weights("u1", ct, queries, idx).source == WeightSource::uniform_fallback);

    // matched count is what gates the fallback, not raw history size
    const ContextType other{DayPart::evening, DayClass::weekday, SocialSituation::solo, "work"};
    for (int i = 0; i < 10; ++i)
        idx.add(entry_for("u1", other, {0.9, 0.1, 0.5, 0.5, 0.5}, 2000 + i, "p2"));
    CHECK(estimate_weights("u1", ct, queries, idx).source == WeightSource::uniform_fallback);

    idx.add(entry_for("u1", ct, {0.9, 0.1, 0.5, 0.5, 0.5}, 3000, "p1"));
    CHECK(estimate_weights("u1", ct, queries, idx).source == WeightSource::estimated);
}

TEST_CASE("estimate_weights matches a high-precision softmax oracle") {
    HistoryIndex idx;
    const ContextType ct{DayPart::morning, DayClass::weekday, SocialSituation::solo, "work"};
    for (int i = 0; i < 6; ++i)
        idx.add(entry_for("u1", ct, {0.9, 0.1, 0.5, 0.5, 0.5}, 1000 + i, "p" + std::to_string(i)));
    const auto phi = estimate_weights("u1", ct, five_queries(), idx);
    CHECK(phi.source == WeightSource::estimated);
    const auto oracle = softmax_oracle({0.9, 0.1, 0.5, 0.5, 0.5});
    for (size_t i = 0; i < 5; ++i) CHECK(std::fabs(phi.weights[i] - oracle[i]) < 1e-12);

    // softmax of a constant vector is uniform
    HistoryIndex flat;
    for (int i = 0; i < 6; ++i)
        flat.add(entry_for("u1", ct, {0.0, 0.0, 0.0, 0.0, 0.0}, 1000 + i, "p"));
    const auto uniform = estimate_weights("u1", ct, five_queries(), flat);
    for (double w : uniform.weights) CHECK(w == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("preference vectors stay on the simplex for random inputs") {
    Rng rng(77);
    for (int trial = 0; trial < 10000; ++trial) {
        std::vector<double> z(5);
        for (double& v : z) v = rng.uniform(-30.0, 30.0);
        const auto w = softmax(z);
        double sum = 0.0;
        for (double v : w) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(std::fabs(sum - 1.0) <= 1e-12);
        CHECK_NOTHROW(PreferenceVector(w, WeightSource::estimated));
    }
}

TEST_CASE("anti-circularity: estimation never touches the backend") {
    RuleBackend backend;
    QueryGen qg;
    const Context friday = friday_birthday();
    const ContextType ct = qg.discretize(friday);
    const auto queries = qg.generate(friday, backend);

    HistoryIndex idx;
    for (int i = 0; i < 8; ++i) {
        // history stored under the visit context type, pre-inferred
        Poi poi("p" + std::to_string(i), "venue", booking_synthesis_content(friday.timestamp - 10 * 86400));
        Context visit = friday;
        visit.timestamp -= (8 - i) * 7 * 86400;
        visit.trajectory.clear();
        CheckIn checkin("u9", poi.id, visit.timestamp, visit);
        idx.add({checkin, ct,
                 infer_affordance(poi.id, ct, queries, poi.content, visit, backend, {})});
    }
    backend.reset_counters();
    const auto phi = estimate_weights("u9", ct, queries, idx);
    CHECK(phi.source == WeightSource::estimated);
    CHECK(backend.answer_calls() == 0);   // warm cache: zero re-inference
    CHECK(backend.generate_calls() == 0); // and no query regeneration
}

TEST_CASE("bm25 weights: fallbacks and hand-computed oracle") {
    const ContextType ct{DayPart::morning, DayClass::weekday, SocialSituation::solo, "work"};
    std::map<std::string, Poi> catalog;
    HistoryIndex idx;
    const auto queries = five_queries();

    // empty history: uniform
    CHECK(bm25_weights("u1", ct, queries, idx, catalog).source ==
          WeightSource::uniform_fallback);

    // the matched history yields five identical documents (one per visit),
    // so N=5, df=5: idf = ln(1 + 0.5/5.5); dl = avgdl -> norm term is 1
    MultimodalContent content;
    content.metadata = default_metadata();
    content.reviews.emplace_back("wifi wifi outlets quiet room here", 100);
    catalog.emplace("p1", Poi("p1", "venue", content));
    for (int i = 0; i < 5; ++i) {
        Context ctx(1000 + i, DayOfWeek::tue, SocialSituation::solo);
        CheckIn checkin("u1", "p1", 1000 + i, ctx);
        idx.add({checkin, ct, rep_with_effective({0.5, 0.5, 0.5, 0.5, 0.5}, ct)});
    }
    std::vector<AffordanceQuery> probe = {
        AffordanceQuery(1, "wifi?", {Modality::review}),
        AffordanceQuery(2, "quiet room?", {Modality::review}),
        AffordanceQuery(3, "parking space?", {Modality::review}),
        AffordanceQuery(4, "outlets?", {Modality::review}),
        AffordanceQuery(5, "wifi outlets?", {Modality::review}),
    };
    const auto phi = bm25_weights("u1", ct, probe, idx, catalog);
    CHECK(phi.source == WeightSource::bm25);

    const double idf = std::log(1.0 + 0.5 / 5.5);
    const double tf1 = 1.0 * 2.2 / (1.0 + 1.2);
    const double tf2 = 2.0 * 2.2 / (2.0 + 1.2);
    const double s_wifi = idf * tf2;                 // "wifi" twice
    const double s_quiet_room = idf * tf1 * 2.0;     // "quiet" + "room", once each
    const double s_parking = 0.0;
    const double s_outlets = idf * tf1;
    const double s_both = idf * tf2 + idf * tf1;     // wifi + outlets
    const auto oracle = softmax_oracle({s_wifi, s_quiet_room, s_parking, s_outlets, s_both});
    for (size_t i = 0; i < 5; ++i) CHECK(std::fabs(phi.weights[i] - oracle[i]) < 1e-9);

    // query terms absent from every document: uniform weights via zero scores
    std::vector<AffordanceQuery> misses = {
        AffordanceQuery(1, "zeppelin?", {Modality::review}),
        AffordanceQuery(2, "submarine?", {Modality::review}),
    };
    const auto zero = bm25_weights("u1", ct, misses, idx, catalog);
    for (double w : zero.weights) CHECK(w == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("geo negatives: determinism, radius and uniformity") {
    std::vector<std::pair<std::string, GeoPoint>> catalog;
    catalog.emplace_back("anchor", GeoPoint(40.0, -74.0));
    catalog.emplace_back("near", GeoPoint(40.009, -74.0));  // ~1 km

    // two POIs a kilometre apart: the other one with probability 1
    const auto only = sample_geo_negative("anchor", catalog, 5);
    REQUIRE(only.has_value());
    CHECK(*only == "near");

    // all others beyond the radius
    std::vector<std::pair<std::string, GeoPoint>> sparse = {
        {"anchor", GeoPoint(40.0, -74.0)}, {"far", GeoPoint(41.0, -74.0)}};
    CHECK_FALSE(sample_geo_negative("anchor", sparse, 5).has_value());

    CHECK_THROWS_AS(sample_geo_negative("ghost", catalog, 5), ValidationError);

    // ten candidates in the disk: draw histogram uniform within 3 sigma
    std::vector<std::pair<std::string, GeoPoint>> disk;
    disk.emplace_back("anchor", GeoPoint(40.0, -74.0));
    for (int i = 0; i < 10; ++i)
        disk.emplace_back("cand" + std::to_string(i), GeoPoint(40.0 + 0.001 * (i + 1), -74.0));
    std::map<std::string, int> histogram;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
        const auto pick = sample_geo_negative("anchor", disk, 1000 + i);
        REQUIRE(pick.has_value());
        ++histogram[*pick];
    }
    CHECK(histogram.size() == 10);
    const double expected = draws / 10.0;
    const double sigma = std::sqrt(draws * 0.1 * 0.9);
    for (const auto& [id, count] : histogram)
        CHECK(std::fabs(count - expected) <= 3.0 * sigma);
    // determinism per seed
    CHECK(*sample_geo_negative("anchor", disk, 1234) == *sample_geo_negative("anchor", disk, 1234));
}

TEST_CASE("bpr trainer: separable pair, finite differences, zero-init identity") {
    const std::vector<std::string> ctypes = {"a", "b"};

    // one pair where the positive dominates every effective confidence
    BprPair dominant;
    dominant.user_id = "u";
    dominant.context_type_index = 0;
    dominant.phi_hat = {0.2, 0.4, 0.6, 0.1, 0.3};
    dominant.pos_effective = {0.9, 0.8, 0.9, 0.7, 0.8};
    dominant.neg_effective = {0.1, 0.2, 0.1, 0.0, 0.2};
    TrainerConfig cfg;
    cfg.steps = 100;
    const auto result = train_preference_estimator({dominant}, ctypes, 5, cfg);
    REQUIRE(result.loss_history.size() == 101);
    for (size_t i = 1; i < result.loss_history.size(); ++i)
        CHECK(result.loss_history[i] <= result.loss_history[i - 1] + 1e-12);

    // analytic gradient vs central finite differences on a 5-pair batch
    Rng rng(11);
    std::vector<BprPair> batch;
    for (int i = 0; i < 5; ++i) {
        BprPair p;
        p.user_id = "u" + std::to_string(i);
        p.context_type_index = static_cast<int>(rng.below(2));
        for (int d = 0; d < 5; ++d) {
            p.phi_hat.push_back(rng.unit());
            p.pos_effective.push_back(rng.unit());
            p.neg_effective.push_back(rng.unit());
        }
        batch.push_back(std::move(p));
    }
    PreferenceModel model = PreferenceModel::zeros(5, ctypes);
    for (double& w : model.w) w = rng.uniform(-0.5, 0.5);
    const auto grad = bpr_gradient(model, batch);
    const double eps = 1e-5;
    double max_rel_err = 0.0;
    for (size_t i = 0; i < model.w.size(); ++i) {
        PreferenceModel plus = model, minus = model;
        plus.w[i] += eps;
        minus.w[i] -= eps;
        const double numeric = (bpr_loss(plus, batch) - bpr_loss(minus, batch)) / (2 * eps);
        const double denom = std::max(1e-8, std::fabs(numeric));
        max_rel_err = std::max(max_rel_err, std::fabs(grad[i] - numeric) / denom);
    }
    CHECK(max_rel_err < 1e-4);

    // zero-initialized weights reproduce the plain estimate exactly
    const PreferenceModel zeros = PreferenceModel::zeros(5, ctypes);
    const auto phi0 = zeros.preference(batch[0]);
    const auto plain = softmax(batch[0].phi_hat);
    for (size_t i = 0; i < plain.size(); ++i) CHECK(phi0.weights[i] == plain[i]);
}

TEST_CASE("trained model persists through the canonical encoding") {
    PreferenceModel model = PreferenceModel::zeros(3, {"x", "y"});
    model.w[0] = 0.25;
    model.w[7] = -0.5;
    const std::string saved = model.save();
    const auto loaded = PreferenceModel::parse(saved);
    CHECK(loaded.k == 3);
    CHECK(loaded.context_types == std::vector<std::string>{"x", "y"});
    CHECK(loaded.w[0] == 0.25);
    CHECK(loaded.w[7] == -0.5);
    CHECK_THROWS_AS(PreferenceModel::parse("{}"), ValidationError);
    CHECK_THROWS_AS(PreferenceModel::parse("not json"), ValidationError);
}

TEST_CASE("bm25 swap changes only the preference vector") {
    // the representation side never depends on the weight source
    RuleBackend backend;
    const Context friday = friday_birthday();
    const auto content = booking_synthesis_content(friday.timestamp - 86400);
    ContextType ct{DayPart::evening, DayClass::weekday, SocialSituation::friends, "celebration"};
    std::vector<AffordanceQuery> queries = {booking_query(1), quiet_query(2)};
    const auto rep_before = canonical_encode(
        infer_affordance("p1", ct, queries, content, friday, backend, {}));

    HistoryIndex idx;
    std::map<std::string, Poi> catalog;
    catalog.emplace("p1", Poi("p1", "venue", content));
    for (int i = 0; i < 6; ++i) {
        Context ctx(friday.timestamp - (10 - i) * 86400, DayOfWeek::fri,
                    SocialSituation::friends, 4);
        CheckIn checkin("u1", "p1", ctx.timestamp, ctx);
        idx.add({checkin, ct, rep_with_effective({0.7, 0.2}, ct)});
    }
    const auto est = estimate_weights("u1", ct, queries, idx);
    const auto bm = bm25_weights("u1", ct, queries, idx, catalog);
    CHECK(est.weights != bm.weights);

    const auto rep_after = canonical_encode(
        infer_affordance("p1", ct, queries, content, friday, backend, {}));
    CHECK(rep_before == rep_after);
}
