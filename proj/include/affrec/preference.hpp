#pragma once
// Phase 4 user side: K-dimensional preference estimation from context-matched
// history with a uniform cold-start fallback, the BM25 independence variant,
// geo-constrained negative sampling, and a minimal trainable estimator under
// the BPR objective (one linear layer over context one-hot + estimate
// features, softmax-normalized).

#include <cmath>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "affrec/affordance.hpp"
#include "affrec/domain.hpp"
#include "affrec/rng.hpp"
#include "affrec/text.hpp"

namespace affrec {

struct PreferenceConfig {
    int min_context_matched = 5;  // below this the uniform prior applies
    double bm25_k1 = 1.2;
    double bm25_b = 0.75;
};

// History entry: the affordance representation of a past visit, stored under
// the visit-time context type (never the query context).
struct HistoryEntry {
    CheckIn checkin;
    ContextType context_type;
    AffordanceRepresentation representation;
};

class HistoryIndex {
public:
    void add(HistoryEntry entry) {
        by_user_[entry.checkin.user_id].push_back(std::move(entry));
    }

    const std::vector<HistoryEntry>* entries(const std::string& user_id) const {
        const auto it = by_user_.find(user_id);
        return it == by_user_.end() ? nullptr : &it->second;
    }

    std::vector<const HistoryEntry*> matched(const std::string& user_id,
                                             const ContextType& ct) const {
        std::vector<const HistoryEntry*> out;
        if (const auto* all = entries(user_id)) {
            for (const auto& e : *all) {
                if (e.context_type == ct) out.push_back(&e);
            }
        }
        return out;
    }

    size_t user_count() const { return by_user_.size(); }

private:
    std::unordered_map<std::string, std::vector<HistoryEntry>> by_user_;
};

inline std::vector<double> softmax(const std::vector<double>& logits) {
    double max_logit = -std::numeric_limits<double>::infinity();
    for (double v : logits) max_logit = std::max(max_logit, v);
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - max_logit);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

inline PreferenceVector uniform_preference(size_t k) {
    if (k == 0) throw ValidationError("uniform_preference: k must be >= 1");
    return PreferenceVector(std::vector<double>(k, 1.0 / static_cast<double>(k)),
                            WeightSource::uniform_fallback);
}

// Mean effective confidence over context-matched history, softmax-normalized.
// Falls back to the uniform prior when fewer than min_context_matched visits
// share the context type.
inline PreferenceVector estimate_weights(const std::string& user_id, const ContextType& ct,
                                         const std::vector<AffordanceQuery>& queries,
                                         const HistoryIndex& idx,
                                         const PreferenceConfig& cfg = {}) {
    const size_t k = queries.size();
    if (k == 0) throw ValidationError("estimate_weights: queries must be non-empty");
    const auto matched = idx.matched(user_id, ct);
    if (matched.size() < static_cast<size_t>(cfg.min_context_matched))
        return uniform_preference(k);

    std::vector<double> mean(k, 0.0);
    for (const auto* e : matched) {
        if (e->representation.effective.size() != k)
            throw LengthMismatchError(
                "estimate_weights: history representation length differs from query set");
        for (size_t i = 0; i < k; ++i) mean[i] += e->representation.effective[i];
    }
    for (double& v : mean) v /= static_cast<double>(matched.size());
    return PreferenceVector(softmax(mean), WeightSource::estimated);
}

// ---------------------------------------------------------------------------
// BM25 user weights (independence variant): query terms scored against the
// concatenated review texts of context-matched historical POIs, one document
// per matched visit, reviews cut at the visit timestamp.

namespace detail {

struct Bm25Corpus {
    std::vector<std::unordered_map<std::string, int>> docs;  // term frequencies
    std::vector<size_t> lengths;
    double avgdl = 0.0;
};

inline Bm25Corpus build_bm25_corpus(const std::vector<std::string>& documents) {
    Bm25Corpus corpus;
    size_t total = 0;
    for (const auto& doc : documents) {
        std::unordered_map<std::string, int> tf;
        const auto tokens = tokenize(doc);
        for (const auto& t : tokens) ++tf[t];
        corpus.lengths.push_back(tokens.size());
        total += tokens.size();
        corpus.docs.push_back(std::move(tf));
    }
    corpus.avgdl = corpus.docs.empty()
                       ? 0.0
                       : static_cast<double>(total) / static_cast<double>(corpus.docs.size());
    return corpus;
}

}  // namespace detail

// Okapi BM25 with the +1 idf smoothing (idf = ln(1 + (N - df + 0.5)/(df + 0.5)))
// summed over unique query terms; the score of a query against the corpus is
// the mean of its per-document scores.
inline double bm25_score(const std::string& query_text, const detail::Bm25Corpus& corpus,
                         size_t doc, double k1, double b) {
    const auto terms_vec = tokenize(query_text);
    std::vector<std::string> terms;
    for (const auto& t : terms_vec) {
        if (std::find(terms.begin(), terms.end(), t) == terms.end()) terms.push_back(t);
    }
    const double n = static_cast<double>(corpus.docs.size());
    const double dl = static_cast<double>(corpus.lengths[doc]);
    const double norm = corpus.avgdl > 0.0 ? dl / corpus.avgdl : 1.0;
    double score = 0.0;
    for (const auto& term : terms) {
        const auto it = corpus.docs[doc].find(term);
        if (it == corpus.docs[doc].end()) continue;
        double df = 0.0;
        for (const auto& d : corpus.docs) df += d.count(term) ? 1.0 : 0.0;
        const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        const double tf = static_cast<double>(it->second);
        score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm));
    }
    return score;
}

inline PreferenceVector bm25_weights(const std::string& user_id, const ContextType& ct,
                                     const std::vector<AffordanceQuery>& queries,
                                     const HistoryIndex& idx,
                                     const std::map<std::string, Poi>& catalog,
                                     const PreferenceConfig& cfg = {}) {
    const size_t k = queries.size();
    if (k == 0) throw ValidationError("bm25_weights: queries must be non-empty");
    const auto matched = idx.matched(user_id, ct);
    if (matched.size() < static_cast<size_t>(cfg.min_context_matched))
        return uniform_preference(k);

    std::vector<std::string> documents;
    for (const auto* e : matched) {
        const auto it = catalog.find(e->checkin.poi_id);
        std::string doc;
        if (it != catalog.end()) {
            for (const auto& r : it->second.content.reviews) {
                if (r.created_at <= e->checkin.timestamp) {
                    doc += r.text;
                    doc += ' ';
                }
            }
        }
        documents.push_back(std::move(doc));
    }
    const auto corpus = detail::build_bm25_corpus(documents);
    std::vector<double> logits(k, 0.0);
    for (size_t i = 0; i < k; ++i) {
        double total = 0.0;
        for (size_t d = 0; d < corpus.docs.size(); ++d)
            total += bm25_score(queries[i].text, corpus, d, cfg.bm25_k1, cfg.bm25_b);
        logits[i] = total / static_cast<double>(corpus.docs.size());
    }
    return PreferenceVector(softmax(logits), WeightSource::bm25);
}

// ---------------------------------------------------------------------------
// Geo-constrained negative sampling: a uniformly chosen POI (other than the
// positive) within radius_km. Empty optional when the disk holds only the
// positive; callers fall back to global sampling.

inline std::optional<std::string> sample_geo_negative(
    const std::string& positive_poi, const std::vector<std::pair<std::string, GeoPoint>>& catalog,
    std::uint64_t rng_seed, double radius_km = 2.0) {
    GeoPoint anchor;
    bool found = false;
    for (const auto& [id, loc] : catalog) {
        if (id == positive_poi) {
            anchor = loc;
            found = true;
            break;
        }
    }
    if (!found) throw ValidationError("sample_geo_negative: unknown positive poi " + positive_poi);

    std::vector<std::string> candidates;
    for (const auto& [id, loc] : catalog) {
        if (id != positive_poi && haversine_km(anchor, loc) <= radius_km)
            candidates.push_back(id);
    }
    if (candidates.empty()) return std::nullopt;
    std::sort(candidates.begin(), candidates.end());
    Rng rng(rng_seed);
    return candidates[static_cast<size_t>(rng.below(candidates.size()))];
}

// ---------------------------------------------------------------------------
// Trainable preference estimator. Logits are phi_hat + W x with features
// x = [context-type one-hot ; phi_hat]; zero weights reproduce the plain
// estimate exactly. Trained with BPR: minimize -ln sigmoid(s+ - s-).

struct BprPair {
    std::string user_id;
    int context_type_index = 0;  // position in the model's context-type list
    std::vector<double> phi_hat;
    std::vector<double> pos_effective;
    std::vector<double> neg_effective;
};

struct PreferenceModel {
    int k = 0;
    std::vector<std::string> context_types;  // stable ordering for the one-hot
    std::vector<double> w;                   // k x (|context_types| + k), row-major

    size_t feature_dim() const { return context_types.size() + static_cast<size_t>(k); }

    static PreferenceModel zeros(int k, std::vector<std::string> context_types) {
        PreferenceModel m;
        m.k = k;
        m.context_types = std::move(context_types);
        m.w.assign(static_cast<size_t>(k) * m.feature_dim(), 0.0);
        return m;
    }

    std::vector<double> features(const BprPair& p) const {
        std::vector<double> x(feature_dim(), 0.0);
        if (p.context_type_index >= 0 &&
            p.context_type_index < static_cast<int>(context_types.size()))
            x[static_cast<size_t>(p.context_type_index)] = 1.0;
        for (int i = 0; i < k; ++i)
            x[context_types.size() + static_cast<size_t>(i)] = p.phi_hat[static_cast<size_t>(i)];
        return x;
    }

    std::vector<double> logits(const BprPair& p) const {
        const auto x = features(p);
        std::vector<double> z(static_cast<size_t>(k));
        for (int i = 0; i < k; ++i) {
            double acc = p.phi_hat[static_cast<size_t>(i)];
            const size_t row = static_cast<size_t>(i) * feature_dim();
            for (size_t j = 0; j < x.size(); ++j) acc += w[row + j] * x[j];
            z[static_cast<size_t>(i)] = acc;
        }
        return z;
    }

    PreferenceVector preference(const BprPair& p) const {
        return PreferenceVector(softmax(logits(p)), WeightSource::trained);
    }

    std::string save() const {
        nlohmann::json j;
        j["schema_version"] = 1;
        j["k"] = k;
        j["context_types"] = context_types;
        nlohmann::json weights = nlohmann::json::array();
        for (double v : w) weights.push_back(format_confidence(v));
        j["w"] = std::move(weights);
        return j.dump();
    }

    static PreferenceModel parse(const std::string& text) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const std::exception& e) {
            throw ValidationError(std::string("PreferenceModel: invalid JSON: ") + e.what());
        }
        if (j.value("schema_version", 0) != 1)
            throw ValidationError("PreferenceModel: unsupported schema_version");
        PreferenceModel m;
        m.k = j.at("k").get<int>();
        m.context_types = j.at("context_types").get<std::vector<std::string>>();
        for (const auto& v : j.at("w")) m.w.push_back(parse_confidence(v.get<std::string>()));
        if (m.w.size() != static_cast<size_t>(m.k) * m.feature_dim())
            throw ValidationError("PreferenceModel: weight matrix size mismatch");
        return m;
    }
};

namespace detail {
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double pair_margin(const PreferenceModel& m, const BprPair& p,
                          std::vector<double>* phi_out = nullptr) {
    const auto phi = softmax(m.logits(p));
    double s_pos = 0.0, s_neg = 0.0;
    for (int i = 0; i < m.k; ++i) {
        s_pos += phi[static_cast<size_t>(i)] * p.pos_effective[static_cast<size_t>(i)];
        s_neg += phi[static_cast<size_t>(i)] * p.neg_effective[static_cast<size_t>(i)];
    }
    if (phi_out) *phi_out = phi;
    return s_pos - s_neg;
}
}  // namespace detail

inline double bpr_loss(const PreferenceModel& m, const std::vector<BprPair>& batch) {
    double loss = 0.0;
    for (const auto& p : batch)
        loss += -std::log(detail::sigmoid(detail::pair_margin(m, p)));
    return loss / static_cast<double>(batch.size());
}

// Analytic gradient of the mean BPR loss w.r.t. the weight matrix. The
// positive and negative item share the context, so one softmax Jacobian
// serves both sides: d(margin)/dz_i = phi_i * ((e+_i - s+) - (e-_i - s-)).
inline std::vector<double> bpr_gradient(const PreferenceModel& m,
                                        const std::vector<BprPair>& batch) {
    std::vector<double> grad(m.w.size(), 0.0);
    for (const auto& p : batch) {
        std::vector<double> phi;
        const double margin = detail::pair_margin(m, p, &phi);
        const double coeff = -(1.0 - detail::sigmoid(margin));
        double s_pos = 0.0, s_neg = 0.0;
        for (int i = 0; i < m.k; ++i) {
            s_pos += phi[static_cast<size_t>(i)] * p.pos_effective[static_cast<size_t>(i)];
            s_neg += phi[static_cast<size_t>(i)] * p.neg_effective[static_cast<size_t>(i)];
        }
        const auto x = m.features(p);
        for (int i = 0; i < m.k; ++i) {
            const double dmargin_dz = phi[static_cast<size_t>(i)] *
                                      ((p.pos_effective[static_cast<size_t>(i)] - s_pos) -
                                       (p.neg_effective[static_cast<size_t>(i)] - s_neg));
            const size_t row = static_cast<size_t>(i) * m.feature_dim();
            for (size_t j = 0; j < x.size(); ++j)
                grad[row + j] += coeff * dmargin_dz * x[j];
        }
    }
    for (double& g : grad) g /= static_cast<double>(batch.size());
    return grad;
}

struct TrainerConfig {
    double learning_rate = 0.5;
    int steps = 200;
    std::uint64_t seed = 7;
};

struct TrainResult {
    PreferenceModel model;
    std::vector<double> loss_history;
};

inline TrainResult train_preference_estimator(const std::vector<BprPair>& dataset,
                                              const std::vector<std::string>& context_types,
                                              int k, const TrainerConfig& cfg = {}) {
    if (dataset.empty()) throw ValidationError("train_preference_estimator: empty dataset");
    TrainResult result;
    result.model = PreferenceModel::zeros(k, context_types);
    for (int step = 0; step < cfg.steps; ++step) {
        const double loss = bpr_loss(result.model, dataset);
        if (!std::isfinite(loss))
            throw DivergenceError("train_preference_estimator: non-finite loss at step " +
                                  std::to_string(step));
        result.loss_history.push_back(loss);
        const auto grad = bpr_gradient(result.model, dataset);
        for (size_t i = 0; i < result.model.w.size(); ++i)
            result.model.w[i] -= cfg.learning_rate * grad[i];
    }
    result.loss_history.push_back(bpr_loss(result.model, dataset));
    return result;
}

}  // namespace affrec
