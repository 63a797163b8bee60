#include "mdlm/distill.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "mdlm/diffusion.hpp"
#include "mdlm/parallel.hpp"
#include "mdlm/rng.hpp"

namespace mdlm::distill {

const char* to_string(MaskingMode m) {
    return m == MaskingMode::semi_ar ? "semi_ar" : "whole_sequence";
}

const char* to_string(Ablation a) {
    switch (a) {
        case Ablation::full: return "full";
        case Ablation::consistency_only: return "consistency_only";
        case Ablation::certainty_only: return "certainty_only";
    }
    return "unknown";
}

MaskingMode parse_masking_mode(const std::string& s) {
    if (s == "semi_ar") return MaskingMode::semi_ar;
    if (s == "whole_sequence") return MaskingMode::whole_sequence;
    raise(ErrorCategory::config, "unknown masking_mode: " + s);
}

Ablation parse_ablation(const std::string& s) {
    if (s == "full") return Ablation::full;
    if (s == "consistency_only") return Ablation::consistency_only;
    if (s == "certainty_only") return Ablation::certainty_only;
    raise(ErrorCategory::config, "unknown ablation: " + s);
}

void DistillConfig::validate() const {
    require(mask_ratio > 0.0 && mask_ratio <= 1.0, ErrorCategory::config,
            "mask_ratio must be in (0, 1], got " + std::to_string(mask_ratio));
    require(temperature > 0.0, ErrorCategory::config,
            "temperature must be positive, got " + std::to_string(temperature));
    require(beta >= 0.0, ErrorCategory::config,
            "beta must be non-negative, got " + std::to_string(beta));
    require(epochs >= 1, ErrorCategory::config, "epochs must be >= 1");
    require(batch_size >= 1, ErrorCategory::config, "batch_size must be >= 1");
    require(adapter_rank >= 0, ErrorCategory::config, "adapter_rank must be >= 0");
    require(learning_rate >= 0.0, ErrorCategory::config, "learning_rate must be >= 0");
}

// ----------------------------------------------------------- construction ---

std::vector<TrajectoryRecord> build_dataset(const model::Network<float>& teacher,
                                            const std::vector<std::vector<int>>& prompts,
                                            int total_len, int block_len,
                                            const CheckFn& checker,
                                            const std::string& teacher_id,
                                            DatasetStats* stats, int num_threads) {
    require(!prompts.empty(), ErrorCategory::usage, "build_dataset: no prompts");
    std::vector<TrajectoryRecord> all(prompts.size());
    std::vector<char> keep(prompts.size(), 0);
    parallel_for(static_cast<int>(prompts.size()), num_threads, [&](int i) {
        TrajectoryRecord rec = decode::teacher_trajectory(
            teacher, prompts[static_cast<size_t>(i)], total_len, block_len);
        rec.correct = checker(static_cast<size_t>(i), rec.response_ids);
        rec.teacher_id = teacher_id;
        keep[static_cast<size_t>(i)] = rec.correct ? 1 : 0;
        all[static_cast<size_t>(i)] = std::move(rec);
    });

    std::vector<TrajectoryRecord> retained;
    retained.reserve(prompts.size());
    for (size_t i = 0; i < all.size(); ++i) {
        if (keep[i] != 0) {
            retained.push_back(std::move(all[i]));
        }
    }
    if (stats != nullptr) {
        stats->generated = static_cast<int>(prompts.size());
        stats->retained = static_cast<int>(retained.size());
    }
    require(!retained.empty(), ErrorCategory::dataset,
            "no trajectories retained; the teacher is too weak for distillation");
    return retained;
}

model::Network<float> make_student(const model::Network<float>& teacher, int adapter_rank,
                                   uint64_t seed) {
    model::ModelConfig cfg = teacher.config();
    cfg.adapter_rank = adapter_rank;
    cfg.seed = seed;
    model::ParamSet<float> params = model::init_params(cfg, model::Role::student);
    // copy base tensors from the teacher by name; adapter tensors keep their
    // fresh init (lora_b is zero, so the student's function equals the teacher's)
    std::unordered_map<std::string, size_t> teacher_index;
    for (size_t i = 0; i < teacher.params().tensors.size(); ++i) {
        teacher_index.emplace(teacher.params().tensors[i].name, i);
    }
    for (auto& t : params.tensors) {
        const auto it = teacher_index.find(t.name);
        if (it != teacher_index.end()) {
            t.value = teacher.params().tensors[it->second].value;
        } else {
            require(t.name.find("lora") != std::string::npos, ErrorCategory::usage,
                    "make_student: teacher is missing tensor " + t.name);
        }
    }
    return model::Network<float>(std::move(params));
}

// ----------------------------------------------------------------- states ---

namespace {

struct MaskedSample {
    diffusion::MaskedState state;
    int record_index = 0;
};

TokenSeq record_to_seq(const TrajectoryRecord& rec) {
    std::vector<int> tokens = rec.prompt_ids;
    tokens.insert(tokens.end(), rec.response_ids.begin(), rec.response_ids.end());
    return TokenSeq(std::move(tokens), static_cast<int>(rec.prompt_ids.size()));
}

// Draws one structural mask with a non-empty active mask set, resampling the
// block index and pattern together.
diffusion::MaskedState draw_state(const TokenSeq& seq, const TrajectoryRecord& rec,
                                  const DistillConfig& cfg, RngStream& rng) {
    const int resp = seq.response_len();
    const int block_len =
        cfg.masking_mode == MaskingMode::whole_sequence ? resp : rec.block_len;
    const int num_blocks = resp / block_len;
    for (int attempt = 0; attempt < 10000; ++attempt) {
        const int n = diffusion::sample_block_index(num_blocks, rng);
        const double q = cfg.random_mask_ratio ? 1.0 - rng.uniform01() : cfg.mask_ratio;
        diffusion::MaskedState st = diffusion::semi_ar_mask(seq, n, q, block_len, rng);
        if (!st.active_mask_set.empty()) {
            return st;
        }
    }
    raise(ErrorCategory::numeric, "draw_state: could not draw a non-empty active mask");
}

// Per-sample objective with the ablation switch. Returns the breakdown;
// accumulates the objective gradient (unscaled) into *grad when non-null.
losses::LossBreakdown sample_objective(const MatF& logits, const TokenSeq& seq,
                                       const std::vector<int>& m_a, const DistillConfig& cfg,
                                       MatF* grad, double* objective) {
    losses::LossBreakdown b;
    switch (cfg.ablation) {
        case Ablation::full:
            b = losses::cfd_loss(logits, seq, m_a, cfg.temperature, cfg.beta, grad);
            *objective = b.combined;
            break;
        case Ablation::consistency_only:
            // identical gradient path to a full run with beta = 0
            b = losses::cfd_loss(logits, seq, m_a, cfg.temperature, 0.0, grad);
            b.beta = cfg.beta;
            b.combined = b.consistency + cfg.beta * b.certainty;
            *objective = b.consistency;
            break;
        case Ablation::certainty_only: {
            b.active_count = static_cast<int>(m_a.size());
            b.consistency = losses::consistency_loss(logits, seq, m_a, nullptr);
            const std::vector<int> m_c = losses::correct_set(logits, seq, m_a);
            b.correct_count = static_cast<int>(m_c.size());
            if (grad != nullptr && !m_c.empty() && cfg.beta > 0.0) {
                MatF cert_grad(logits.rows, logits.cols);
                b.certainty = losses::certainty_loss(logits, m_c, cfg.temperature, &cert_grad);
                kern::axpy(grad->data.data(), cert_grad.data.data(),
                           static_cast<float>(cfg.beta), static_cast<int>(cert_grad.size()));
            } else {
                b.certainty = losses::certainty_loss(logits, m_c, cfg.temperature, nullptr);
            }
            b.beta = cfg.beta;
            b.combined = b.consistency + cfg.beta * b.certainty;
            *objective = cfg.beta * b.certainty;
            break;
        }
    }
    return b;
}

} // namespace

losses::LossBreakdown probe_loss(const model::Network<float>& net,
                                 const std::vector<TrajectoryRecord>& records,
                                 const DistillConfig& cfg, uint64_t probe_seed) {
    require(!records.empty(), ErrorCategory::usage, "probe_loss: no records");
    RngStream rng = RngStream(probe_seed).fork(1);
    losses::LossBreakdown mean;
    int count = 0;
    for (const auto& rec : records) {
        const TokenSeq seq = record_to_seq(rec);
        const diffusion::MaskedState st = draw_state(seq, rec, cfg, rng);
        const MatF logits = net.forward(st.tokens);
        const losses::LossBreakdown b =
            losses::cfd_loss(logits, seq, st.active_mask_set, cfg.temperature, cfg.beta);
        mean.consistency += b.consistency;
        mean.certainty += b.certainty;
        mean.combined += b.combined;
        mean.correct_count += b.correct_count;
        mean.active_count += b.active_count;
        ++count;
    }
    mean.consistency /= count;
    mean.certainty /= count;
    mean.combined /= count;
    mean.beta = cfg.beta;
    return mean;
}

// ---------------------------------------------------------------- training --

void train_cfd(model::Network<float>& student, const std::vector<TrajectoryRecord>& dataset,
               const DistillConfig& cfg, TrainStats* stats) {
    cfg.validate();
    require(!dataset.empty(), ErrorCategory::usage, "train_cfd: empty dataset");

    const int seq_total = static_cast<int>(dataset[0].prompt_ids.size() +
                                           dataset[0].response_ids.size());
    for (const auto& rec : dataset) {
        require(static_cast<int>(rec.prompt_ids.size() + rec.response_ids.size()) == seq_total,
                ErrorCategory::usage, "train_cfd: records have differing lengths");
        require(rec.block_len >= 1 &&
                    static_cast<int>(rec.response_ids.size()) % rec.block_len == 0,
                ErrorCategory::usage, "train_cfd: response length not divisible by block_len");
    }

    const int iterations = static_cast<int>(
        (static_cast<int64_t>(cfg.epochs) * static_cast<int64_t>(dataset.size()) +
         cfg.batch_size - 1) /
        cfg.batch_size);
    if (stats != nullptr) {
        stats->iterations = iterations;
        stats->probe_combined_initial = 0.0;
    }

    // frozen probe batch for the loss-curve sanity check
    const std::vector<TrajectoryRecord> probe(
        dataset.begin(), dataset.begin() + std::min<size_t>(dataset.size(), 16));
    if (stats != nullptr) {
        const losses::LossBreakdown b0 = probe_loss(student, probe, cfg, cfg.seed ^ 0x9e37);
        stats->probe_combined_initial = b0.combined;
        stats->probe_certainty_initial = b0.certainty;
    }

    RngStream rng(cfg.seed);
    model::AdamOptimizer<float> adam;

    for (int it = 0; it < iterations; ++it) {
        std::vector<MaskedSample> items;
        items.reserve(static_cast<size_t>(cfg.batch_size) * (cfg.complementary ? 2 : 1));
        for (int b = 0; b < cfg.batch_size; ++b) {
            const int ri = static_cast<int>(rng.uniform_below(dataset.size()));
            const TokenSeq seq = record_to_seq(dataset[static_cast<size_t>(ri)]);
            diffusion::MaskedState st =
                draw_state(seq, dataset[static_cast<size_t>(ri)], cfg, rng);
            if (cfg.complementary) {
                diffusion::MaskedState comp = diffusion::complementary_mask(st, seq);
                items.push_back({std::move(st), ri});
                // a full active mask leaves the complement with no learning
                // signal; skip it
                if (!comp.active_mask_set.empty()) {
                    items.push_back({std::move(comp), ri});
                }
            } else {
                items.push_back({std::move(st), ri});
            }
        }

        std::vector<int> packed;
        packed.reserve(items.size() * static_cast<size_t>(seq_total));
        for (const auto& item : items) {
            packed.insert(packed.end(), item.state.tokens.begin(), item.state.tokens.end());
        }

        auto [graph, logits_id] = student.record_forward(packed, static_cast<int>(items.size()));
        const double scale = 1.0 / cfg.batch_size;

        double batch_objective = 0.0;
        losses::LossBreakdown batch_breakdown;
        graph->set_loss(logits_id, [&](const MatF& logits, MatF* grad) {
            double total = 0.0;
            MatF sample_logits(seq_total, logits.cols);
            MatF sample_grad(seq_total, logits.cols);
            for (size_t s = 0; s < items.size(); ++s) {
                const int row0 = static_cast<int>(s) * seq_total;
                std::copy(logits.row(row0), logits.row(row0) + sample_logits.size(),
                          sample_logits.data.data());
                sample_grad.zero();
                const TokenSeq seq = record_to_seq(dataset[static_cast<size_t>(
                    items[s].record_index)]);
                double objective = 0.0;
                const losses::LossBreakdown b =
                    sample_objective(sample_logits, seq, items[s].state.active_mask_set, cfg,
                                     grad != nullptr ? &sample_grad : nullptr, &objective);
                total += scale * objective;
                batch_breakdown.consistency += scale * b.consistency;
                batch_breakdown.certainty += scale * b.certainty;
                batch_breakdown.combined += scale * b.combined;
                if (grad != nullptr) {
                    kern::axpy(grad->row(row0), sample_grad.data.data(),
                               static_cast<float>(scale), static_cast<int>(sample_grad.size()));
                }
            }
            batch_objective = total;
            return total;
        });

        require(std::isfinite(batch_objective), ErrorCategory::numeric,
                "train_cfd: loss diverged at iteration " + std::to_string(it));
        model::backward_and_step(student, *graph, adam, cfg.learning_rate, cfg.clip_norm);

        if (stats != nullptr && (it % cfg.log_every == 0 || it == iterations - 1)) {
            stats->curve.push_back({it, batch_breakdown.combined, batch_breakdown.consistency,
                                    batch_breakdown.certainty});
        }
    }

    if (stats != nullptr) {
        const losses::LossBreakdown b1 = probe_loss(student, probe, cfg, cfg.seed ^ 0x9e37);
        stats->probe_combined_final = b1.combined;
        stats->probe_certainty_final = b1.certainty;
    }
}

// -------------------------------------------------------------- evaluation --

std::vector<EvalRow> evaluate_pair(const model::Network<float>& teacher,
                                   const model::Network<float>& student,
                                   const std::vector<std::vector<int>>& eval_prompts,
                                   const CheckFn& checker,
                                   const std::vector<decode::DecodeConfig>& grid,
                                   const std::string& run_id, int num_threads) {
    require(!eval_prompts.empty(), ErrorCategory::usage, "evaluate_pair: no prompts");
    require(!grid.empty(), ErrorCategory::usage, "evaluate_pair: empty decode grid");

    struct RunOutcome {
        double steps_mean = 0.0;
        double steps_std = 0.0;
        double tokens_per_step = 0.0;
        double accuracy = 0.0;
    };

    const auto run_config = [&](const model::Network<float>& net,
                                const decode::DecodeConfig& cfg) {
        std::vector<int> steps(eval_prompts.size(), 0);
        std::vector<char> correct(eval_prompts.size(), 0);
        std::vector<double> tps(eval_prompts.size(), 0.0);
        parallel_for(static_cast<int>(eval_prompts.size()), num_threads, [&](int i) {
            decode::DecodeConfig c = cfg;
            c.seed = cfg.seed + static_cast<uint64_t>(i) * 0x10001;
            const decode::DecodeResult r =
                decode::run(net, eval_prompts[static_cast<size_t>(i)], c);
            steps[static_cast<size_t>(i)] = r.steps_used;
            tps[static_cast<size_t>(i)] = r.tokens_per_step;
            const std::vector<int> resp(r.output.tokens.begin() + r.output.prompt_len,
                                        r.output.tokens.end());
            correct[static_cast<size_t>(i)] = checker(static_cast<size_t>(i), resp) ? 1 : 0;
        });
        RunOutcome o;
        double sum = 0.0;
        double acc = 0.0;
        double tps_sum = 0.0;
        for (size_t i = 0; i < steps.size(); ++i) {
            sum += steps[i];
            acc += correct[i];
            tps_sum += tps[i];
        }
        o.steps_mean = sum / static_cast<double>(steps.size());
        double var = 0.0;
        for (int s : steps) {
            var += (s - o.steps_mean) * (s - o.steps_mean);
        }
        o.steps_std = std::sqrt(var / static_cast<double>(steps.size()));
        o.tokens_per_step = tps_sum / static_cast<double>(steps.size());
        o.accuracy = acc / static_cast<double>(steps.size());
        return o;
    };

    // baseline: teacher at one-token-per-step (reused from the grid when present)
    decode::DecodeConfig baseline_cfg = grid[0];
    baseline_cfg.strategy = decode::Strategy::one_per_step;
    baseline_cfg.temperature = 0.0;
    RunOutcome baseline = run_config(teacher, baseline_cfg);

    std::vector<EvalRow> rows;
    rows.reserve(grid.size() * 2);
    for (const auto& cfg : grid) {
        for (int which = 0; which < 2; ++which) {
            const bool is_teacher = which == 0;
            RunOutcome o;
            if (is_teacher && cfg.strategy == decode::Strategy::one_per_step &&
                cfg.temperature == 0.0) {
                o = baseline;
            } else {
                o = run_config(is_teacher ? teacher : student, cfg);
            }
            EvalRow row;
            row.run_id = run_id;
            row.role = is_teacher ? "teacher" : "student";
            row.strategy = cfg.strategy;
            row.threshold = cfg.strategy == decode::Strategy::fixed_steps
                                ? static_cast<double>(cfg.steps)
                                : cfg.threshold;
            row.steps_mean = o.steps_mean;
            row.steps_std = o.steps_std;
            row.tokens_per_step = o.tokens_per_step;
            row.accuracy = o.accuracy;
            row.speedup = baseline.steps_mean / o.steps_mean;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

// ---------------------------------------------------------------- file io ---

void write_trajectories(const std::string& path, const std::vector<TrajectoryRecord>& records) {
    std::ofstream out(path, std::ios::trunc);
    require(static_cast<bool>(out), ErrorCategory::io, "cannot open for write: " + path);
    nlohmann::json header;
    header["format_version"] = 1;
    header["kind"] = "trajectory_dataset";
    out << header.dump() << '\n';
    for (const auto& rec : records) {
        nlohmann::json j;
        j["prompt_ids"] = rec.prompt_ids;
        j["response_ids"] = rec.response_ids;
        j["block_len"] = rec.block_len;
        j["correct"] = rec.correct;
        j["teacher_checkpoint"] = rec.teacher_id;
        out << j.dump() << '\n';
    }
    require(static_cast<bool>(out), ErrorCategory::io, "write failed: " + path);
}

std::vector<TrajectoryRecord> read_trajectories(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCategory::io, "cannot open: " + path);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), ErrorCategory::io,
            "empty trajectory file: " + path);
    nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
    require(!header.is_discarded() && header.value("format_version", 0) == 1 &&
                header.value("kind", "") == "trajectory_dataset",
            ErrorCategory::io, "bad trajectory file header: " + path);
    std::vector<TrajectoryRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        require(!j.is_discarded(), ErrorCategory::io, "bad trajectory record: " + path);
        TrajectoryRecord rec;
        rec.prompt_ids = j.at("prompt_ids").get<std::vector<int>>();
        rec.response_ids = j.at("response_ids").get<std::vector<int>>();
        rec.block_len = j.at("block_len").get<int>();
        rec.correct = j.at("correct").get<bool>();
        rec.teacher_id = j.at("teacher_checkpoint").get<std::string>();
        for (int tid : rec.response_ids) {
            require(tid != kMaskId, ErrorCategory::io,
                    "trajectory response contains MASK: " + path);
        }
        records.push_back(std::move(rec));
    }
    return records;
}

} // namespace mdlm::distill
