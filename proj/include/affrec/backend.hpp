#pragma once
// Pluggable reasoner interface. Implementations answer affordance queries
// over a venue's multimodal evidence and serve free-form generation for the
// query-generation phase. At temperature 0 an implementation must be
// deterministic for identical inputs.

#include <cstdint>
#include <string>
#include <vector>

#include "affrec/domain.hpp"

namespace affrec {

struct ReasoningOptions {
    bool late_fusion_only = false;   // per-modality verdicts averaged, no joint pass
    bool disable_emergent = false;   // skip the cross-modal synthesis step
    bool disable_conflict = false;   // average contradictions instead of flagging
    bool use_metadata = true;        // false when the metadata modality is ablated
    // Image evidence older than this horizon yields to newer review signals
    // when the two contradict. Images carry no timestamp, so all image
    // evidence is treated as stale-eligible.
    std::int64_t image_staleness_horizon_s = 180LL * 86400;
};

class ReasonerBackend {
public:
    virtual ~ReasonerBackend() = default;

    virtual Verdict answer(const AffordanceQuery& query,
                           const std::string& image_description,
                           const std::vector<Review>& reviews,
                           const Metadata& metadata,
                           const Context& context,
                           const ReasoningOptions& opts) = 0;

    virtual std::string generate(const std::string& prompt, double temperature) = 0;
};

}  // namespace affrec
