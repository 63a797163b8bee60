#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mdlm/config.hpp"
#include "mdlm/decode.hpp"
#include "mdlm/distill.hpp"
#include "mdlm/model.hpp"
#include "mdlm/tasks.hpp"

namespace mdlm::harness {

// CLI invocation: `--config <path> --out <dir> --seed <int>` plus optional
// checkpoint/file overrides (config `files.*` keys supply defaults).
struct RunOptions {
    std::string config_path;
    std::string out_dir;
    std::optional<uint64_t> seed;
    std::string teacher_ckpt;
    std::string student_ckpt;
    std::string trajectories;
    std::string model_ckpt;
    std::string prompt_text;
    int threads = 0; // 0 = default_threads()
};

// Declarative run setup shared by all subcommands: task data, sequence
// geometry, model config. Everything derives from the config file plus the
// effective seed.
struct TaskSetup {
    std::string task_name;
    std::string run_name;
    uint64_t seed = 0;
    int prompt_len = 0;
    int response_len = 0;
    int block_len = 0;
    std::vector<tasks::TaskInstance> train;
    std::vector<tasks::TaskInstance> eval;
    model::ModelConfig model_cfg;

    int total_len() const { return prompt_len + response_len; }
    std::vector<int> prompt_ids(const tasks::TaskInstance& inst) const {
        return tasks::encode_prompt(inst, prompt_len);
    }
    distill::CheckFn checker_for(const std::vector<tasks::TaskInstance>& set) const;
};

TaskSetup make_setup(const ConfigMap& cfg, uint64_t effective_seed);
uint64_t effective_seed(const ConfigMap& cfg, const RunOptions& opt);
int effective_threads(const RunOptions& opt);

struct PretrainParams {
    int iterations = 3000;
    int batch_size = 16;
    double learning_rate = 1e-3;
    int log_every = 50;
    int eval_every = 0;     // 0 = no periodic probe
    int eval_probes = 48;
    double stop_accuracy = 0.0; // early stop once the probe reaches this; 0 = off
    double clip_norm = 1.0;     // global gradient-norm clip; 0 = off
    int threads = 1;
    uint64_t seed = 0;
};

struct PretrainResult {
    std::vector<std::pair<int, double>> loss_curve;
    std::vector<std::pair<int, double>> probe_curve;
    double final_probe_accuracy = 0.0;
    int iterations_run = 0;
};

// Masked-NLL teacher training over uniformly sampled mask levels t in (0, 1].
// Single-threaded and seed-deterministic; only the periodic probe decodes
// concurrently. Non-finite loss aborts with a numeric error.
PretrainResult pretrain_teacher(model::Network<float>& net, const TaskSetup& setup,
                                const PretrainParams& p);

// Exact-match accuracy of greedy one-token-per-step decoding over instances.
double exact_match_accuracy(const model::Network<float>& net, const TaskSetup& setup,
                            const std::vector<tasks::TaskInstance>& instances, int threads);

// Metrics CSV with the fixed header
// run_id,role,strategy,threshold,steps_mean,steps_std,tokens_per_step,accuracy,speedup
void write_metrics_csv(const std::string& path, const std::vector<distill::EvalRow>& rows);

// Parses decode grid entries of the form "strategy[:value]" where value is a
// threshold (conf/entropy) or a step count (fixed_steps).
std::vector<decode::DecodeConfig> parse_decode_grid(const std::vector<std::string>& entries,
                                                    int total_len, int block_len);

// Subcommands. Each creates the output directory, echoes the config, and
// writes its artifacts there.
void run_pretrain(const RunOptions& opt);
void run_traject(const RunOptions& opt);
void run_distill(const RunOptions& opt);
void run_decode(const RunOptions& opt);
void run_eval(const RunOptions& opt);
void run_profile(const RunOptions& opt);

} // namespace mdlm::harness
