#pragma once
// Phase 4 item-user alignment: dot-product scoring over the shared K-query
// space, deterministic top-N selection, human-readable explanation traces,
// the static bilinear baseline, and the fixed-vector compromise demo for
// two conflicting context constraints.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "affrec/affordance.hpp"
#include "affrec/domain.hpp"
#include "affrec/rng.hpp"

namespace affrec {

// Operation counter proving the online path is exactly K multiplies and
// K-1 adds per candidate. One relaxed atomic update per score call.
struct ScoreOpCounter {
    static std::atomic<std::uint64_t>& multiplies() {
        static std::atomic<std::uint64_t> count{0};
        return count;
    }
    static std::atomic<std::uint64_t>& adds() {
        static std::atomic<std::uint64_t> count{0};
        return count;
    }
    static void reset() {
        multiplies().store(0, std::memory_order_relaxed);
        adds().store(0, std::memory_order_relaxed);
    }
};

inline double score(const std::vector<double>& weights, const std::vector<double>& effective) {
    if (weights.size() != effective.size())
        throw LengthMismatchError("score: weight and effective vector lengths differ");
    if (weights.empty()) throw LengthMismatchError("score: empty vectors");
    double acc = weights[0] * effective[0];
    for (size_t i = 1; i < weights.size(); ++i) acc += weights[i] * effective[i];
    ScoreOpCounter::multiplies().fetch_add(weights.size(), std::memory_order_relaxed);
    ScoreOpCounter::adds().fetch_add(weights.size() - 1, std::memory_order_relaxed);
    return acc;
}

inline double score(const PreferenceVector& phi, const AffordanceRepresentation& rep) {
    return score(phi.weights, rep.effective);
}

// Descending by score, ties ascending by poi_id; length min(n, candidates).
inline std::vector<RankedItem> top_n(std::vector<std::pair<std::string, double>> candidates,
                                     size_t n) {
    if (n == 0) throw ValidationError("top_n: n must be >= 1");
    const size_t take = std::min(n, candidates.size());
    auto cmp = [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    };
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                      candidates.end(), cmp);
    std::vector<RankedItem> out;
    out.reserve(take);
    for (size_t i = 0; i < take; ++i)
        out.push_back({candidates[i].first, candidates[i].second, {}});
    return out;
}

// ---------------------------------------------------------------------------
// Explanation rendering

namespace detail {
inline std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", std::round(v * 100.0) / 100.0);
    return buf;
}
inline std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}
inline std::string fmtg(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}
inline std::string join(const std::vector<std::string>& parts, const char* sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}
}  // namespace detail

// Plain-text trace: one block per query with answer, confidences, weight,
// evidence, emergent conclusion and conflict flag, then the score line.
inline std::string render_explanation(const AffordanceRepresentation& rep,
                                      const PreferenceVector& phi) {
    if (phi.weights.size() != rep.effective.size())
        throw LengthMismatchError("render_explanation: weight/effective length mismatch");
    std::ostringstream out;
    out << "affordance trace for " << rep.poi_id << " @ " << rep.context_type.key() << "\n";
    for (size_t i = 0; i < rep.entries.size(); ++i) {
        const auto& q = rep.entries[i].query;
        const auto& v = rep.entries[i].verdict;
        out << "[" << q.index << "] " << q.text << "\n";
        out << "    answer=" << to_string(v.answer) << " confidence=" << detail::fmt2(v.confidence)
            << " weight=" << detail::fmt3(phi.weights[i]) << "\n";
        switch (v.answer) {
            case Answer::yes:
                out << "    effective: " << detail::fmt2(rep.effective[i]) << "\n";
                break;
            case Answer::uncertain:
                out << "    effective: " << detail::fmtg(rep.alpha) << " × "
                    << detail::fmt2(v.confidence) << " = " << detail::fmt2(rep.effective[i])
                    << "\n";
                break;
            case Answer::no:
                out << "    effective: " << detail::fmt2(0.0) << "\n";
                break;
        }
        std::vector<std::string> cites;
        for (const auto& c : v.evidence.visual) cites.push_back(c);
        for (const auto& c : v.evidence.review) cites.push_back(c);
        for (const auto& c : v.evidence.metadata) cites.push_back(c);
        if (!cites.empty()) out << "    evidence: " << detail::join(cites, " | ") << "\n";
        if (v.emergent) out << "    emergent: " << *v.emergent << "\n";
        if (v.conflict) out << "    conflict: " << *v.conflict << "\n";
    }
    std::vector<std::string> terms;
    double total = 0.0;
    for (size_t i = 0; i < rep.effective.size(); ++i) {
        terms.push_back(detail::fmt3(phi.weights[i]) + "×" +
                        detail::fmt2(rep.effective[i]));
        total += phi.weights[i] * rep.effective[i];
    }
    out << "score = " << detail::join(terms, " + ") << " = " << detail::fmt2(total) << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Static bilinear baseline: s(u, p, c) = e_u(c)^T W e_p with item embeddings
// fixed before any context is observed. Unknown items score as zero vectors.

struct StaticBilinearModel {
    std::unordered_map<std::string, std::vector<double>> item_embeddings;
    std::function<std::vector<double>(const std::string&, const Context&)> user_context_encoder;
    std::vector<std::vector<double>> w;  // d_u x d

    double score(const std::string& user_id, const Context& c, const std::string& poi_id) const {
        const auto e_u = user_context_encoder(user_id, c);
        if (e_u.size() != w.size())
            throw LengthMismatchError("StaticBilinearModel: user vector / W row mismatch");
        const auto it = item_embeddings.find(poi_id);
        if (it == item_embeddings.end()) return 0.0;  // unseen item: zero embedding
        const auto& e_p = it->second;
        double acc = 0.0;
        for (size_t i = 0; i < w.size(); ++i) {
            if (w[i].size() != e_p.size())
                throw LengthMismatchError("StaticBilinearModel: W column / item dim mismatch");
            double row = 0.0;
            for (size_t j = 0; j < e_p.size(); ++j) row += w[i][j] * e_p[j];
            acc += e_u[i] * row;
        }
        return acc;
    }

    static std::vector<std::vector<double>> identity(size_t d) {
        std::vector<std::vector<double>> m(d, std::vector<double>(d, 0.0));
        for (size_t i = 0; i < d; ++i) m[i][i] = 1.0;
        return m;
    }
};

// ---------------------------------------------------------------------------
// Compromise demo: the best unit-norm static vector against two unit
// constraint directions that each demand score 1. For an orthonormal pair
// the optimum is the bisector, each constraint reaches 1/sqrt(2), and the
// loss 1 - 1/sqrt(2) does not shrink with dimension.

struct ImpossibilityReport {
    int dim = 0;
    double per_context_score = 0.0;      // min achieved constraint score
    double per_context_shortfall = 0.0;  // max over constraints of 1 - score
    double compromise_loss = 0.0;        // 1 - min score
    double remark_identity_max_err = 0.0;
};

namespace detail {
inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}
inline double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }
}  // namespace detail

// Max |e_u^T (W e_p) - (W^T e_u)^T e_p| over random instances: moving the
// context-conditioned matrix onto the user side is an algebraic identity.
inline double context_reduction_identity_max_err(int d_u, int d, int instances,
                                                 std::uint64_t seed) {
    Rng rng(seed);
    double max_err = 0.0;
    for (int it = 0; it < instances; ++it) {
        std::vector<std::vector<double>> w(static_cast<size_t>(d_u),
                                           std::vector<double>(static_cast<size_t>(d)));
        std::vector<double> e_u(static_cast<size_t>(d_u)), e_p(static_cast<size_t>(d));
        for (auto& row : w)
            for (auto& v : row) v = rng.uniform(-1.0, 1.0);
        for (auto& v : e_u) v = rng.uniform(-1.0, 1.0);
        for (auto& v : e_p) v = rng.uniform(-1.0, 1.0);

        double lhs = 0.0;  // e_u^T (W e_p)
        for (int i = 0; i < d_u; ++i) {
            double row = 0.0;
            for (int j = 0; j < d; ++j)
                row += w[static_cast<size_t>(i)][static_cast<size_t>(j)] *
                       e_p[static_cast<size_t>(j)];
            lhs += e_u[static_cast<size_t>(i)] * row;
        }
        double rhs = 0.0;  // (W^T e_u)^T e_p
        for (int j = 0; j < d; ++j) {
            double col = 0.0;
            for (int i = 0; i < d_u; ++i)
                col += w[static_cast<size_t>(i)][static_cast<size_t>(j)] *
                       e_u[static_cast<size_t>(i)];
            rhs += col * e_p[static_cast<size_t>(j)];
        }
        max_err = std::max(max_err, std::fabs(lhs - rhs));
    }
    return max_err;
}

// Seeded random orthonormal pair in R^d via Gram-Schmidt.
inline std::pair<std::vector<double>, std::vector<double>> random_orthonormal_pair(
    int d, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> u(static_cast<size_t>(d)), v(static_cast<size_t>(d));
    for (;;) {
        for (auto& x : u) x = rng.gauss();
        for (auto& x : v) x = rng.gauss();
        const double nu = detail::norm(u);
        if (nu < 1e-9) continue;
        for (auto& x : u) x /= nu;
        const double proj = detail::dot(u, v);
        for (size_t i = 0; i < v.size(); ++i) v[i] -= proj * u[i];
        const double nv = detail::norm(v);
        if (nv < 1e-9) continue;
        for (auto& x : v) x /= nv;
        return {u, v};
    }
}

inline ImpossibilityReport demonstrate_impossibility(
    int d, std::optional<std::pair<std::vector<double>, std::vector<double>>> directions =
               std::nullopt,
    std::uint64_t seed = 20240501) {
    if (d < 2) throw ValidationError("demonstrate_impossibility: d must be >= 2");
    auto [u1, u2] = directions ? *directions : random_orthonormal_pair(d, seed);
    if (static_cast<int>(u1.size()) != d || static_cast<int>(u2.size()) != d)
        throw LengthMismatchError("demonstrate_impossibility: direction dims differ from d");

    // Best unit-norm compromise for equal demands: the normalized bisector;
    // identical directions are satisfiable exactly.
    std::vector<double> e(static_cast<size_t>(d));
    std::vector<double> bisector(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i)
        bisector[static_cast<size_t>(i)] =
            u1[static_cast<size_t>(i)] + u2[static_cast<size_t>(i)];
    const double nb = detail::norm(bisector);
    if (nb < 1e-9) {
        e = u1;  // opposed constraints: satisfy the first exactly
    } else {
        for (int i = 0; i < d; ++i) e[static_cast<size_t>(i)] = bisector[static_cast<size_t>(i)] / nb;
    }

    const double s1 = detail::dot(u1, e);
    const double s2 = detail::dot(u2, e);
    ImpossibilityReport report;
    report.dim = d;
    report.per_context_score = std::min(s1, s2);
    report.per_context_shortfall = std::max(1.0 - s1, 1.0 - s2);
    report.compromise_loss = 1.0 - report.per_context_score;
    report.remark_identity_max_err =
        context_reduction_identity_max_err(d, d, 100, mix64(seed));
    return report;
}

}  // namespace affrec
