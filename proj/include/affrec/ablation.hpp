#pragma once
// Pipeline ablation switches. All default off; flags compose freely.

#include <string>
#include <vector>

#include "affrec/domain.hpp"

namespace affrec {

struct AblationFlags {
    bool fixed_queries = false;     // A1: generic query set, ignores context
    bool late_fusion_only = false;  // A2: per-modality verdicts averaged, no joint pass
    bool disable_emergent = false;  // A3: skip cross-modal synthesis conclusions
    bool disable_conflict = false;  // A4: average contradictions instead of flagging
    bool drop_image = false;        // A5: ignore image descriptions
    bool drop_reviews = false;      // A6: ignore review evidence
    bool drop_metadata = false;     // A7: ignore metadata (including hard constraints)
    bool alpha_one = false;         // A8: uncertainty weighting off (alpha = 1)
    bool bm25_user_weights = false; // A11: BM25 user weights instead of estimated

    bool any() const {
        return fixed_queries || late_fusion_only || disable_emergent || disable_conflict ||
               drop_image || drop_reviews || drop_metadata || alpha_one || bm25_user_weights;
    }

    std::string label() const {
        std::vector<std::string> on;
        if (fixed_queries) on.push_back("A1");
        if (late_fusion_only) on.push_back("A2");
        if (disable_emergent) on.push_back("A3");
        if (disable_conflict) on.push_back("A4");
        if (drop_image) on.push_back("A5");
        if (drop_reviews) on.push_back("A6");
        if (drop_metadata) on.push_back("A7");
        if (alpha_one) on.push_back("A8");
        if (bm25_user_weights) on.push_back("A11");
        if (on.empty()) return "full";
        std::string out;
        for (size_t i = 0; i < on.size(); ++i) {
            if (i) out += '+';
            out += on[i];
        }
        return out;
    }

    // Parses "A1,A3" / "A1+A3" style lists; empty means no ablation.
    static AblationFlags parse(const std::string& spec) {
        AblationFlags f;
        std::string token;
        auto apply = [&f](const std::string& t) {
            if (t.empty() || t == "full") return;
            if (t == "A1") f.fixed_queries = true;
            else if (t == "A2") f.late_fusion_only = true;
            else if (t == "A3") f.disable_emergent = true;
            else if (t == "A4") f.disable_conflict = true;
            else if (t == "A5") f.drop_image = true;
            else if (t == "A6") f.drop_reviews = true;
            else if (t == "A7") f.drop_metadata = true;
            else if (t == "A8") f.alpha_one = true;
            else if (t == "A11") f.bm25_user_weights = true;
            else throw ValidationError("AblationFlags: unknown flag '" + t + "'");
        };
        for (char c : spec) {
            if (c == ',' || c == '+' || c == ' ') {
                apply(token);
                token.clear();
            } else {
                token += c;
            }
        }
        apply(token);
        return f;
    }
};

}  // namespace affrec
