#pragma once
// Phase 3: uncertainty-adjusted effective confidences and assembly of the
// structured affordance representation, plus the canonical JSON encoding
// used for cache values, fixtures and persisted artifacts.

#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "affrec/domain.hpp"

namespace affrec {

struct UncertaintyConfig {
    double alpha = 0.5;  // down-weight for unresolved cross-modal ambiguity

    void validate() const {
        if (!(alpha >= 0.0 && alpha <= 1.0))
            throw ValidationError("UncertaintyConfig: alpha out of [0, 1]");
    }
};

// yes -> conf, uncertain -> alpha * conf, no -> 0. Exact arithmetic.
inline double effective_confidence(const Verdict& v, const UncertaintyConfig& cfg = {}) {
    cfg.validate();
    v.validate();
    switch (v.answer) {
        case Answer::yes: return v.confidence;
        case Answer::uncertain: return cfg.alpha * v.confidence;
        case Answer::no: return 0.0;
    }
    return 0.0;
}

inline AffordanceRepresentation assemble_representation(
    const std::string& poi_id, const ContextType& context_type,
    std::vector<AffordanceEntry> entries, const UncertaintyConfig& cfg = {}) {
    cfg.validate();
    if (entries.empty())
        throw LengthMismatchError("assemble_representation: entries must be non-empty");
    for (size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].query.index != static_cast<int>(i) + 1)
            throw LengthMismatchError(
                "assemble_representation: query indices must run 1..K in order");
        entries[i].query.validate();
        entries[i].verdict.validate();
    }
    AffordanceRepresentation rep;
    rep.poi_id = poi_id;
    rep.context_type = context_type;
    rep.alpha = cfg.alpha;
    rep.effective.reserve(entries.size());
    for (const auto& e : entries) rep.effective.push_back(effective_confidence(e.verdict, cfg));
    rep.entries = std::move(entries);
    return rep;
}

// ---------------------------------------------------------------------------
// Canonical encoding: JSON with sorted keys and confidences rendered as
// decimal strings with 6 fractional digits, so cache entries and fixtures
// are diff-stable.

inline std::string format_confidence(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

inline double parse_confidence(const std::string& s) {
    try {
        size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw ValidationError("confidence: trailing characters in '" + s + "'");
        return v;
    } catch (const std::invalid_argument&) {
        throw ValidationError("confidence: not a number: '" + s + "'");
    }
}

namespace detail {

inline nlohmann::json context_type_to_canonical(const ContextType& ct) {
    nlohmann::json j;
    j["day_class"] = to_string(ct.day_class);
    j["day_part"] = to_string(ct.day_part);
    j["intent_cluster"] = ct.intent_cluster;
    j["social_situation"] = to_string(ct.social_situation);
    return j;
}

inline ContextType context_type_from_canonical(const nlohmann::json& j) {
    ContextType ct;
    ct.day_class = day_class_from_string(j.at("day_class").get<std::string>());
    ct.day_part = day_part_from_string(j.at("day_part").get<std::string>());
    ct.intent_cluster = j.at("intent_cluster").get<std::string>();
    ct.social_situation =
        social_situation_from_string(j.at("social_situation").get<std::string>());
    return ct;
}

}  // namespace detail

inline std::string canonical_encode(const AffordanceRepresentation& rep) {
    nlohmann::json j;
    j["alpha"] = format_confidence(rep.alpha);
    j["context_type"] = detail::context_type_to_canonical(rep.context_type);
    j["poi_id"] = rep.poi_id;
    nlohmann::json effective = nlohmann::json::array();
    for (double e : rep.effective) effective.push_back(format_confidence(e));
    j["effective"] = std::move(effective);
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : rep.entries) {
        nlohmann::json q;
        nlohmann::json grounding = nlohmann::json::array();
        for (Modality m : e.query.grounding) grounding.push_back(to_string(m));
        q["grounding"] = std::move(grounding);
        q["index"] = e.query.index;
        q["text"] = e.query.text;

        nlohmann::json v;
        v["answer"] = to_string(e.verdict.answer);
        v["confidence"] = format_confidence(e.verdict.confidence);
        nlohmann::json ev;
        ev["metadata"] = e.verdict.evidence.metadata;
        ev["review"] = e.verdict.evidence.review;
        ev["visual"] = e.verdict.evidence.visual;
        v["evidence"] = std::move(ev);
        if (e.verdict.emergent) v["emergent"] = *e.verdict.emergent;
        if (e.verdict.conflict) v["conflict"] = *e.verdict.conflict;
        nlohmann::json traces = nlohmann::json::array();
        for (const auto& t : e.verdict.traces) {
            nlohmann::json tj;
            tj["note"] = t.note;
            tj["signal"] = to_string(t.signal);
            tj["step"] = to_string(t.step);
            traces.push_back(std::move(tj));
        }
        v["traces"] = std::move(traces);

        nlohmann::json entry;
        entry["query"] = std::move(q);
        entry["verdict"] = std::move(v);
        entries.push_back(std::move(entry));
    }
    j["entries"] = std::move(entries);
    return j.dump();
}

inline AffordanceRepresentation canonical_decode(const std::string& encoded) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(encoded);
    } catch (const std::exception& e) {
        throw ValidationError(std::string("canonical_decode: invalid JSON: ") + e.what());
    }
    AffordanceRepresentation rep;
    try {
        rep.alpha = parse_confidence(j.at("alpha").get<std::string>());
        rep.context_type = detail::context_type_from_canonical(j.at("context_type"));
        rep.poi_id = j.at("poi_id").get<std::string>();
        for (const auto& e : j.at("effective"))
            rep.effective.push_back(parse_confidence(e.get<std::string>()));
        for (const auto& entry : j.at("entries")) {
            const auto& q = entry.at("query");
            std::vector<Modality> grounding;
            for (const auto& g : q.at("grounding"))
                grounding.push_back(modality_from_string(g.get<std::string>()));
            AffordanceQuery query(q.at("index").get<int>(), q.at("text").get<std::string>(),
                                  std::move(grounding));

            const auto& v = entry.at("verdict");
            Verdict verdict;
            verdict.answer = answer_from_string(v.at("answer").get<std::string>());
            verdict.confidence = parse_confidence(v.at("confidence").get<std::string>());
            const auto& ev = v.at("evidence");
            verdict.evidence.metadata = ev.at("metadata").get<std::vector<std::string>>();
            verdict.evidence.review = ev.at("review").get<std::vector<std::string>>();
            verdict.evidence.visual = ev.at("visual").get<std::vector<std::string>>();
            if (v.contains("emergent")) verdict.emergent = v["emergent"].get<std::string>();
            if (v.contains("conflict")) verdict.conflict = v["conflict"].get<std::string>();
            for (const auto& t : v.at("traces")) {
                StepTrace trace;
                trace.note = t.at("note").get<std::string>();
                trace.signal = signal_from_string(t.at("signal").get<std::string>());
                trace.step = reasoning_step_from_string(t.at("step").get<std::string>());
                verdict.traces.push_back(std::move(trace));
            }
            verdict.validate();
            rep.entries.push_back({std::move(query), std::move(verdict)});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("canonical_decode: malformed representation: ") +
                              e.what());
    }
    if (rep.entries.size() != rep.effective.size())
        throw ValidationError("canonical_decode: entries/effective length mismatch");
    // Effective values must still agree with the recorded alpha; serialized
    // confidences carry 6 fractional digits, so allow that quantization.
    const UncertaintyConfig cfg{rep.alpha};
    for (size_t i = 0; i < rep.entries.size(); ++i) {
        const double expect = effective_confidence(rep.entries[i].verdict, cfg);
        if (std::fabs(expect - rep.effective[i]) > 1.01e-6)
            throw ValidationError("canonical_decode: effective[" + std::to_string(i) +
                                  "] inconsistent with verdict and alpha");
    }
    return rep;
}

}  // namespace affrec
