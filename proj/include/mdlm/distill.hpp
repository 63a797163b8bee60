#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mdlm/decode.hpp"
#include "mdlm/losses.hpp"
#include "mdlm/model.hpp"

namespace mdlm::distill {

using decode::TrajectoryRecord;

enum class MaskingMode { semi_ar, whole_sequence };
enum class Ablation { full, consistency_only, certainty_only };

const char* to_string(MaskingMode m);
const char* to_string(Ablation a);
MaskingMode parse_masking_mode(const std::string& s);
Ablation parse_ablation(const std::string& s);

struct DistillConfig {
    double beta = losses::kDefaultBeta;               // certainty weight
    double temperature = losses::kDefaultTemperature; // certainty temperature
    double mask_ratio = 0.5;                          // active-block mask probability q
    bool random_mask_ratio = false;                   // draw q uniformly in (0, 1] per state
    MaskingMode masking_mode = MaskingMode::semi_ar;
    bool complementary = true; // train each state together with its complement
    int epochs = 1;
    int batch_size = 8;
    double learning_rate = 2e-5;
    int adapter_rank = 16;
    uint64_t seed = 0;
    Ablation ablation = Ablation::full;
    int log_every = 25;
    double clip_norm = 1.0; // global gradient-norm clip; 0 = off

    void validate() const;
};

struct DatasetStats {
    int generated = 0;
    int retained = 0;
    double retention_rate() const {
        return generated == 0 ? 0.0 : static_cast<double>(retained) / generated;
    }
};

// Answer verdict for prompt index i given the decoded response ids.
using CheckFn = std::function<bool(size_t, const std::vector<int>&)>;

// One greedy teacher trajectory per prompt; records failing the checker are
// dropped. Prompts decode concurrently; output order follows prompt order.
// Zero retained records is a dataset error.
std::vector<TrajectoryRecord> build_dataset(const model::Network<float>& teacher,
                                            const std::vector<std::vector<int>>& prompts,
                                            int total_len, int block_len,
                                            const CheckFn& checker,
                                            const std::string& teacher_id,
                                            DatasetStats* stats = nullptr,
                                            int num_threads = 1);

// Student initialized as a copy of the teacher: base tensors are bitwise
// copies; adapter_rank > 0 adds zero-initialized low-rank adapters (frozen
// base), so student and teacher logits agree bitwise before the first step.
model::Network<float> make_student(const model::Network<float>& teacher, int adapter_rank,
                                   uint64_t seed);

struct TrainCurvePoint {
    int iteration = 0;
    double combined = 0.0;
    double consistency = 0.0;
    double certainty = 0.0;
};

struct TrainStats {
    int iterations = 0;
    double probe_combined_initial = 0.0;
    double probe_combined_final = 0.0;
    double probe_certainty_initial = 0.0;
    double probe_certainty_final = 0.0;
    std::vector<TrainCurvePoint> curve;
};

// Certainty-forcing distillation loop. Per iteration: sample batch_size
// records with replacement, one block index each, apply the structural mask
// (resampling when the active mask comes out empty), optionally pair each
// state with its complement (gradients summed within the pair, averaged over
// records), and take one optimizer step on the combined objective.
void train_cfd(model::Network<float>& student, const std::vector<TrajectoryRecord>& dataset,
               const DistillConfig& cfg, TrainStats* stats = nullptr);

// Mean CFD loss terms of a model over fixed masked states built from the
// given records (used for probe/before-after comparisons).
losses::LossBreakdown probe_loss(const model::Network<float>& net,
                                 const std::vector<TrajectoryRecord>& records,
                                 const DistillConfig& cfg, uint64_t probe_seed);

struct EvalRow {
    std::string run_id;
    std::string role; // teacher | student
    decode::Strategy strategy = decode::Strategy::one_per_step;
    double threshold = 0.0; // steps count for fixed_steps rows
    double steps_mean = 0.0;
    double steps_std = 0.0;
    double tokens_per_step = 0.0;
    double accuracy = 0.0;
    double speedup = 0.0; // teacher one_per_step steps_mean / this steps_mean
};

// Decodes every prompt under every grid entry for both models and reports
// accuracy, step statistics and speedup against the teacher's one-token-per-
// step baseline.
std::vector<EvalRow> evaluate_pair(const model::Network<float>& teacher,
                                   const model::Network<float>& student,
                                   const std::vector<std::vector<int>>& eval_prompts,
                                   const CheckFn& checker,
                                   const std::vector<decode::DecodeConfig>& grid,
                                   const std::string& run_id, int num_threads = 1);

// Line-delimited JSON dataset file with a versioned header line.
void write_trajectories(const std::string& path, const std::vector<TrajectoryRecord>& records);
std::vector<TrajectoryRecord> read_trajectories(const std::string& path);

} // namespace mdlm::distill
