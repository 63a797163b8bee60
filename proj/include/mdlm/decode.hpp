#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mdlm/common.hpp"
#include "mdlm/mat.hpp"
#include "mdlm/model.hpp"
#include "mdlm/tokens.hpp"

namespace mdlm::decode {

// Remasking strategies. All of them decode block by block left to right;
// within the active block they differ in which masked positions a pass
// commits:
//   one_per_step      - the single highest-confidence position
//   fixed_steps       - ceil(remaining / passes left in the block budget)
//                       highest-confidence positions, so each block finishes
//                       in exactly steps/N passes
//   conf_threshold    - every position with confidence >= threshold
//   entropy_threshold - every position with entropy (nats) <= threshold
// Thresholded strategies commit the single best position when nothing
// qualifies, so every pass makes progress.
enum class Strategy {
    one_per_step,
    fixed_steps,
    conf_threshold,
    entropy_threshold,
};

const char* strategy_name(Strategy s);
Strategy parse_strategy(const std::string& name);

struct DecodeConfig {
    Strategy strategy = Strategy::one_per_step;
    int total_len = 0;        // prompt + response
    int block_len = 0;
    int steps = 0;            // fixed_steps only; must be divisible by the block count
    double threshold = 0.0;   // conf/entropy strategies
    double temperature = 0.0; // sampling temperature for committed tokens; 0 = greedy
    uint64_t seed = 0;
    bool record_trace = false;
    // After a block completes with an EOS committed, fill the remaining
    // (all-future) blocks with EOS without further model passes. Off by
    // default so step counts stay exact.
    bool eos_early_fill = false;
};

// Per-pass certainty instrumentation. Row s (0-based; pass s+1) is captured
// after that pass's forward but before its commitment. Confidence is the
// probability of the token the pass would commit; already-committed and
// prompt positions record 1.0 confidence / 0.0 entropy. commit_step is
// 1-based, 0 for prompt positions.
struct CertaintyTrace {
    int total_len = 0;
    int steps_used = 0;
    std::vector<double> confidence; // [steps_used * total_len]
    std::vector<double> entropy;    // [steps_used * total_len]
    std::vector<int> commit_step;   // [total_len]

    double conf_at(int step, int pos) const { return confidence[static_cast<size_t>(step) * total_len + pos]; }
    double entropy_at(int step, int pos) const { return entropy[static_cast<size_t>(step) * total_len + pos]; }
};

struct DecodeResult {
    TokenSeq output;
    int steps_used = 0;
    double tokens_per_step = 0.0;
    std::optional<CertaintyTrace> trace;
};

// Teacher-generated training sample; `correct` and `teacher_id` are filled by
// dataset construction.
struct TrajectoryRecord {
    std::vector<int> prompt_ids;
    std::vector<int> response_ids; // fixed length, EOS-padded, never MASK
    int block_len = 0;
    bool correct = false;
    std::string teacher_id;
};

// Model forward seam: full token sequence in, logits out. Tests wrap it to
// count calls or to rig outputs.
using ForwardFn = std::function<MatF(const std::vector<int>&)>;

// Reverse-process sampler. The response starts all-MASK and is committed
// block by block; steps_used counts model forward passes exactly.
DecodeResult run(const ForwardFn& forward, const std::vector<int>& prompt_ids,
                 const DecodeConfig& cfg);
DecodeResult run(const model::Network<float>& net, const std::vector<int>& prompt_ids,
                 const DecodeConfig& cfg);

// Greedy one-token-per-step decode of a full-length trajectory; steps_used
// equals the response length by construction.
TrajectoryRecord teacher_trajectory(const model::Network<float>& net,
                                    const std::vector<int>& prompt_ids, int total_len,
                                    int block_len);

// Same as run with cfg.record_trace forced on.
DecodeResult trace_certainty(const model::Network<float>& net,
                             const std::vector<int>& prompt_ids, DecodeConfig cfg);

// CSV export: header step,position,confidence,entropy,committed; one row per
// (step, position).
void write_trace_csv(std::ostream& out, const CertaintyTrace& trace);

} // namespace mdlm::decode
