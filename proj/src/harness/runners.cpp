#include "mdlm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <fstream>

#include <json.hpp>

#include "mdlm/csv.hpp"
#include "mdlm/diffusion.hpp"
#include "mdlm/losses.hpp"
#include "mdlm/parallel.hpp"
#include "mdlm/rng.hpp"

namespace fs = std::filesystem;

namespace mdlm::harness {

namespace {

// One experiment config describes the whole run; every subcommand reads its
// own slice, so unknown-key detection checks the full registry instead of
// per-command consumption.
const std::set<std::string> kKnownKeys = {
    "run.name", "seed", "task", "task.num_digits", "task.sort_len", "task.sort_max",
    "task.train_count", "task.eval_count", "seq.prompt_len", "seq.response_len",
    "seq.block_len", "model.num_layers", "model.num_heads", "model.hidden_dim",
    "model.ffn_dim", "pretrain.iterations", "pretrain.batch_size", "pretrain.learning_rate",
    "pretrain.log_every", "pretrain.eval_every", "pretrain.eval_probes",
    "pretrain.stop_accuracy", "pretrain.clip_norm", "traject.count", "distill.beta", "distill.temperature",
    "distill.mask_ratio", "distill.random_mask_ratio", "distill.masking_mode",
    "distill.complementary", "distill.epochs", "distill.batch_size",
    "distill.learning_rate", "distill.adapter_rank", "distill.ablation",
    "distill.ablations", "distill.sweep", "distill.eval_count", "distill.eval_strategy", "distill.clip_norm",
    "distill.log_every", "eval.count", "eval.strategies", "eval.entropy_sweep",
    "eval.conf_sweep", "profile.count", "profile.strategy", "profile.sweep_count",
    "profile.conf_thresholds", "decode.prompt", "decode.strategy", "decode.threshold",
    "decode.steps", "decode.temperature", "decode.eos_early_fill", "files.teacher",
    "files.student", "files.trajectories", "files.model",
};

void check_known_keys(const ConfigMap& cfg) {
    std::string unknown;
    for (const auto& key : cfg.keys()) {
        if (kKnownKeys.count(key) == 0) {
            if (!unknown.empty()) {
                unknown += ", ";
            }
            unknown += key;
        }
    }
    require(unknown.empty(), ErrorCategory::config, "unknown config keys: " + unknown);
}

} // namespace

// ----------------------------------------------------------------- setup ---

uint64_t effective_seed(const ConfigMap& cfg, const RunOptions& opt) {
    if (opt.seed.has_value()) {
        cfg.get_int("seed", 1); // mark consumed; the CLI value wins
        return *opt.seed;
    }
    return static_cast<uint64_t>(cfg.get_int("seed", 1));
}

int effective_threads(const RunOptions& opt) {
    return opt.threads > 0 ? opt.threads : default_threads();
}

distill::CheckFn TaskSetup::checker_for(const std::vector<tasks::TaskInstance>& set) const {
    const std::vector<tasks::TaskInstance>* ptr = &set;
    return [ptr](size_t i, const std::vector<int>& response_ids) {
        const tasks::TaskInstance& inst = (*ptr)[i];
        return tasks::check_answer(inst.task_name, inst.prompt_text, response_ids);
    };
}

TaskSetup make_setup(const ConfigMap& cfg, uint64_t seed) {
    TaskSetup s;
    s.seed = seed;
    s.run_name = cfg.get_str("run.name", "run");
    s.task_name = cfg.get_str("task", "addition");
    const int train_count = static_cast<int>(cfg.get_int("task.train_count", 8192));
    const int eval_count = static_cast<int>(cfg.get_int("task.eval_count", 512));

    std::vector<tasks::TaskInstance> all;
    const uint64_t task_seed = seed ^ 0xA11CEull;
    if (s.task_name == "addition") {
        const int digits = static_cast<int>(cfg.get_int("task.num_digits", 3));
        all = tasks::gen_addition(digits, train_count + eval_count, task_seed);
    } else if (s.task_name == "sort") {
        const int len = static_cast<int>(cfg.get_int("task.sort_len", 6));
        const int max_val = static_cast<int>(cfg.get_int("task.sort_max", 9));
        all = tasks::gen_sort(len, max_val, train_count + eval_count, task_seed);
    } else {
        raise(ErrorCategory::config, "unknown task: " + s.task_name);
    }
    s.train.assign(all.begin(), all.begin() + train_count);
    s.eval.assign(all.begin() + train_count, all.end());

    s.prompt_len = static_cast<int>(cfg.get_int("seq.prompt_len", 16));
    s.response_len = static_cast<int>(cfg.get_int("seq.response_len", 64));
    s.block_len = static_cast<int>(cfg.get_int("seq.block_len", 8));
    require(s.prompt_len >= 1 && s.response_len >= 1, ErrorCategory::config,
            "seq.prompt_len and seq.response_len must be positive");
    require(s.response_len % s.block_len == 0, ErrorCategory::config,
            "seq.response_len must be divisible by seq.block_len");

    s.model_cfg.vocab_size = tasks::Vocab::v1().size();
    s.model_cfg.max_len = s.total_len();
    s.model_cfg.num_layers = static_cast<int>(cfg.get_int("model.num_layers", 4));
    s.model_cfg.num_heads = static_cast<int>(cfg.get_int("model.num_heads", 4));
    s.model_cfg.hidden_dim = static_cast<int>(cfg.get_int("model.hidden_dim", 128));
    s.model_cfg.ffn_dim = static_cast<int>(cfg.get_int("model.ffn_dim", 512));
    s.model_cfg.adapter_rank = 0;
    s.model_cfg.seed = seed;
    s.model_cfg.validate();
    return s;
}

namespace {

void echo_config(const RunOptions& opt, const ConfigMap& cfg, uint64_t seed) {
    fs::create_directories(opt.out_dir);
    std::ofstream out(opt.out_dir + "/config.txt", std::ios::trunc);
    require(static_cast<bool>(out), ErrorCategory::io,
            "cannot write config echo in " + opt.out_dir);
    out << cfg.raw_text();
    out << "\n# effective values\n";
    out << "# seed = " << seed << "\n";
    if (!opt.teacher_ckpt.empty()) out << "# files.teacher = " << opt.teacher_ckpt << "\n";
    if (!opt.student_ckpt.empty()) out << "# files.student = " << opt.student_ckpt << "\n";
    if (!opt.trajectories.empty()) out << "# files.trajectories = " << opt.trajectories << "\n";
    if (!opt.model_ckpt.empty()) out << "# files.model = " << opt.model_ckpt << "\n";
}

std::string pick_path(const std::string& cli_value, const ConfigMap& cfg,
                      const std::string& key, bool required) {
    const std::string from_cfg = cfg.get_str(key, "");
    const std::string path = cli_value.empty() ? from_cfg : cli_value;
    require(!required || !path.empty(), ErrorCategory::config,
            "no checkpoint path given (flag or config key '" + key + "')");
    return path;
}

void write_task_dataset(const std::string& path,
                        const std::vector<tasks::TaskInstance>& instances) {
    std::ofstream out(path, std::ios::trunc);
    require(static_cast<bool>(out), ErrorCategory::io, "cannot open for write: " + path);
    for (const auto& inst : instances) {
        nlohmann::json j;
        j["task"] = inst.task_name;
        j["prompt"] = inst.prompt_text;
        j["gold"] = inst.gold_answer;
        out << j.dump() << '\n';
    }
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    require(static_cast<bool>(out), ErrorCategory::io, "cannot open for write: " + path);
    return out;
}

} // namespace

double exact_match_accuracy(const model::Network<float>& net, const TaskSetup& setup,
                            const std::vector<tasks::TaskInstance>& instances, int threads) {
    if (instances.empty()) {
        return 0.0;
    }
    std::vector<char> correct(instances.size(), 0);
    parallel_for(static_cast<int>(instances.size()), threads, [&](int i) {
        const auto& inst = instances[static_cast<size_t>(i)];
        decode::DecodeConfig dc;
        dc.strategy = decode::Strategy::one_per_step;
        dc.total_len = setup.total_len();
        dc.block_len = setup.block_len;
        const decode::DecodeResult r = decode::run(net, setup.prompt_ids(inst), dc);
        const std::vector<int> resp(r.output.tokens.begin() + r.output.prompt_len,
                                    r.output.tokens.end());
        correct[static_cast<size_t>(i)] =
            tasks::check_answer(inst.task_name, inst.prompt_text, resp) ? 1 : 0;
    });
    double acc = 0.0;
    for (char c : correct) {
        acc += c;
    }
    return acc / static_cast<double>(instances.size());
}

// -------------------------------------------------------------- pretrain ---

PretrainResult pretrain_teacher(model::Network<float>& net, const TaskSetup& setup,
                                const PretrainParams& p) {
    require(!setup.train.empty(), ErrorCategory::usage, "pretrain: empty training set");
    RngStream rng(p.seed ^ 0x9e3779b9ull);
    model::AdamOptimizer<float> adam;
    PretrainResult result;

    const int probe_count = std::min<int>(p.eval_probes, static_cast<int>(setup.eval.size()));
    const std::vector<tasks::TaskInstance> probe(setup.eval.begin(),
                                                 setup.eval.begin() + probe_count);

    const int seq_total = setup.total_len();
    for (int it = 0; it < p.iterations; ++it) {
        std::vector<int> packed;
        packed.reserve(static_cast<size_t>(p.batch_size) * seq_total);
        struct Sample {
            TokenSeq seq;
            diffusion::MaskedState state;
            double t = 0.0;
        };
        std::vector<Sample> samples;
        samples.reserve(static_cast<size_t>(p.batch_size));
        for (int b = 0; b < p.batch_size; ++b) {
            const auto& inst =
                setup.train[static_cast<size_t>(rng.uniform_below(setup.train.size()))];
            Sample s;
            s.seq = tasks::encode_example(inst, setup.prompt_len, setup.response_len);
            // t uniform in (0, 1]; redraw while the mask comes out empty
            for (;;) {
                s.t = 1.0 - rng.uniform01();
                s.state = diffusion::forward_mask(s.seq, diffusion::MaskLevel(s.t), rng);
                if (!s.state.masked_positions.empty()) {
                    break;
                }
            }
            packed.insert(packed.end(), s.state.tokens.begin(), s.state.tokens.end());
            samples.push_back(std::move(s));
        }

        auto [graph, logits_id] = net.record_forward(packed, p.batch_size);
        const double scale = 1.0 / p.batch_size;
        graph->set_loss(logits_id, [&](const MatF& logits, MatF* grad) {
            double total = 0.0;
            MatF sample_logits(seq_total, logits.cols);
            MatF sample_grad(seq_total, logits.cols);
            for (size_t s = 0; s < samples.size(); ++s) {
                const int row0 = static_cast<int>(s) * seq_total;
                std::copy(logits.row(row0), logits.row(row0) + sample_logits.size(),
                          sample_logits.data.data());
                sample_grad.zero();
                total += scale * losses::pretrain_loss(
                                     sample_logits, samples[s].seq, samples[s].state,
                                     diffusion::MaskLevel(samples[s].t),
                                     grad != nullptr ? &sample_grad : nullptr);
                if (grad != nullptr) {
                    kern::axpy(grad->row(row0), sample_grad.data.data(),
                               static_cast<float>(scale), static_cast<int>(sample_grad.size()));
                }
            }
            return total;
        });

        const double loss = graph->loss_value();
        require(std::isfinite(loss), ErrorCategory::numeric,
                "pretraining diverged (non-finite loss) at iteration " + std::to_string(it));
        model::backward_and_step(net, *graph, adam, p.learning_rate, p.clip_norm);
        result.iterations_run = it + 1;

        if (it % p.log_every == 0 || it == p.iterations - 1) {
            result.loss_curve.emplace_back(it, loss);
        }
        if (p.eval_every > 0 && probe_count > 0 &&
            ((it + 1) % p.eval_every == 0 || it == p.iterations - 1)) {
            const double acc = exact_match_accuracy(net, setup, probe, p.threads);
            result.probe_curve.emplace_back(it + 1, acc);
            result.final_probe_accuracy = acc;
            if (p.stop_accuracy > 0.0 && acc >= p.stop_accuracy) {
                break;
            }
        }
    }
    return result;
}

void run_pretrain(const RunOptions& opt) {
    const ConfigMap cfg = ConfigMap::parse_file(opt.config_path);
    const uint64_t seed = effective_seed(cfg, opt);
    const TaskSetup setup = make_setup(cfg, seed);
    echo_config(opt, cfg, seed);

    PretrainParams p;
    p.iterations = static_cast<int>(cfg.get_int("pretrain.iterations", 3000));
    p.batch_size = static_cast<int>(cfg.get_int("pretrain.batch_size", 16));
    p.learning_rate = cfg.get_real("pretrain.learning_rate", 1e-3);
    p.log_every = static_cast<int>(cfg.get_int("pretrain.log_every", 50));
    p.eval_every = static_cast<int>(cfg.get_int("pretrain.eval_every", 0));
    p.eval_probes = static_cast<int>(cfg.get_int("pretrain.eval_probes", 48));
    p.stop_accuracy = cfg.get_real("pretrain.stop_accuracy", 0.0);
    p.clip_norm = cfg.get_real("pretrain.clip_norm", 1.0);
    p.threads = effective_threads(opt);
    p.seed = seed;
    check_known_keys(cfg);

    model::Network<float> net(model::init_params(setup.model_cfg, model::Role::teacher));
    const PretrainResult result = pretrain_teacher(net, setup, p);

    model::save_checkpoint(opt.out_dir + "/teacher.ckpt", net.params());
    {
        auto out = open_out(opt.out_dir + "/train_loss.csv");
        out << "iteration,loss\n";
        for (const auto& [it, loss] : result.loss_curve) {
            out << it << ',' << csv::fmt(loss) << '\n';
        }
    }
    {
        auto out = open_out(opt.out_dir + "/probe_accuracy.csv");
        out << "iteration,exact_match\n";
        for (const auto& [it, acc] : result.probe_curve) {
            out << it << ',' << csv::fmt(acc) << '\n';
        }
    }
    write_task_dataset(opt.out_dir + "/train_data.jsonl", setup.train);
    write_task_dataset(opt.out_dir + "/eval_data.jsonl", setup.eval);
    {
        auto out = open_out(opt.out_dir + "/vocab.txt");
        tasks::Vocab::v1().write_file(out);
    }
}

// --------------------------------------------------------------- traject ---

namespace {

std::vector<std::vector<int>> prompt_id_list(const TaskSetup& setup,
                                             const std::vector<tasks::TaskInstance>& insts,
                                             int count) {
    const int n = count > 0 ? std::min<int>(count, static_cast<int>(insts.size()))
                            : static_cast<int>(insts.size());
    std::vector<std::vector<int>> prompts;
    prompts.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        prompts.push_back(setup.prompt_ids(insts[static_cast<size_t>(i)]));
    }
    return prompts;
}

void write_retention_csv(const std::string& path, const distill::DatasetStats& stats) {
    auto out = open_out(path);
    out << "generated,retained,retention\n";
    out << stats.generated << ',' << stats.retained << ',' << csv::fmt(stats.retention_rate())
        << '\n';
}

} // namespace

void run_traject(const RunOptions& opt) {
    const ConfigMap cfg = ConfigMap::parse_file(opt.config_path);
    const uint64_t seed = effective_seed(cfg, opt);
    const TaskSetup setup = make_setup(cfg, seed);
    echo_config(opt, cfg, seed);

    const std::string teacher_path = pick_path(opt.teacher_ckpt, cfg, "files.teacher", true);
    const int count = static_cast<int>(cfg.get_int("traject.count", 0));
    check_known_keys(cfg);

    const model::Checkpoint ckpt = model::load_checkpoint(teacher_path, setup.model_cfg);
    const model::Network<float> teacher(ckpt.params);

    const auto prompts = prompt_id_list(setup, setup.train, count);
    std::vector<tasks::TaskInstance> used(setup.train.begin(),
                                          setup.train.begin() + prompts.size());
    distill::DatasetStats stats;
    const auto records = distill::build_dataset(teacher, prompts, setup.total_len(),
                                                setup.block_len, setup.checker_for(used),
                                                model::checkpoint_id(teacher_path), &stats,
                                                effective_threads(opt));
    distill::write_trajectories(opt.out_dir + "/trajectories.jsonl", records);
    write_retention_csv(opt.out_dir + "/retention.csv", stats);
}

// --------------------------------------------------------------- distill ---

namespace {

distill::DistillConfig distill_config_from(const ConfigMap& cfg, uint64_t seed) {
    distill::DistillConfig d;
    d.beta = cfg.get_real("distill.beta", d.beta);
    d.temperature = cfg.get_real("distill.temperature", d.temperature);
    d.mask_ratio = cfg.get_real("distill.mask_ratio", d.mask_ratio);
    d.random_mask_ratio = cfg.get_bool("distill.random_mask_ratio", false);
    d.masking_mode = distill::parse_masking_mode(cfg.get_str("distill.masking_mode", "semi_ar"));
    d.complementary = cfg.get_bool("distill.complementary", true);
    d.epochs = static_cast<int>(cfg.get_int("distill.epochs", 4));
    d.batch_size = static_cast<int>(cfg.get_int("distill.batch_size", 8));
    d.learning_rate = cfg.get_real("distill.learning_rate", 2e-5);
    d.adapter_rank = static_cast<int>(cfg.get_int("distill.adapter_rank", 16));
    d.ablation = distill::parse_ablation(cfg.get_str("distill.ablation", "full"));
    d.log_every = static_cast<int>(cfg.get_int("distill.log_every", 25));
    d.clip_norm = cfg.get_real("distill.clip_norm", 1.0);
    d.seed = seed;
    d.validate();
    return d;
}

struct DistillVariant {
    std::string name;
    distill::DistillConfig cfg;
};

} // namespace

void run_distill(const RunOptions& opt) {
    const ConfigMap cfg = ConfigMap::parse_file(opt.config_path);
    const uint64_t seed = effective_seed(cfg, opt);
    const TaskSetup setup = make_setup(cfg, seed);
    echo_config(opt, cfg, seed);

    const std::string teacher_path = pick_path(opt.teacher_ckpt, cfg, "files.teacher", true);
    const std::string traj_path = pick_path(opt.trajectories, cfg, "files.trajectories", false);
    const int traj_count = static_cast<int>(cfg.get_int("traject.count", 0));
    const distill::DistillConfig base = distill_config_from(cfg, seed);
    const auto ablation_list = cfg.get_str_list("distill.ablations");
    const auto sweep_list = cfg.get_str_list("distill.sweep");
    const int eval_count = static_cast<int>(cfg.get_int("distill.eval_count", 200));
    const std::string eval_strategy =
        cfg.get_str("distill.eval_strategy", "entropy_threshold:0.5");
    check_known_keys(cfg);

    const model::Checkpoint ckpt = model::load_checkpoint(teacher_path, setup.model_cfg);
    const model::Network<float> teacher(ckpt.params);
    const std::string teacher_id = model::checkpoint_id(teacher_path);
    const int threads = effective_threads(opt);

    // trajectory dataset: reuse a file when given, otherwise self-generate
    std::vector<distill::TrajectoryRecord> records;
    if (!traj_path.empty()) {
        records = distill::read_trajectories(traj_path);
    } else {
        const auto prompts = prompt_id_list(setup, setup.train, traj_count);
        std::vector<tasks::TaskInstance> used(setup.train.begin(),
                                              setup.train.begin() + prompts.size());
        distill::DatasetStats stats;
        records = distill::build_dataset(teacher, prompts, setup.total_len(), setup.block_len,
                                         setup.checker_for(used), teacher_id, &stats, threads);
        distill::write_trajectories(opt.out_dir + "/trajectories.jsonl", records);
        write_retention_csv(opt.out_dir + "/retention.csv", stats);
    }

    // variant list: masking-ratio sweep, ablation grid, or the single config
    std::vector<DistillVariant> variants;
    if (!sweep_list.empty()) {
        for (const auto& entry : sweep_list) {
            DistillVariant v{"q_" + entry, base};
            if (entry == "random") {
                v.cfg.random_mask_ratio = true;
            } else {
                v.cfg.mask_ratio = std::stod(entry);
                v.cfg.validate();
            }
            variants.push_back(std::move(v));
        }
    } else if (!ablation_list.empty()) {
        for (const auto& entry : ablation_list) {
            DistillVariant v{entry, base};
            v.cfg.ablation = distill::parse_ablation(entry);
            variants.push_back(std::move(v));
        }
    } else {
        variants.push_back({"", base});
    }

    const auto eval_prompts = prompt_id_list(setup, setup.eval, eval_count);
    std::vector<tasks::TaskInstance> eval_used(setup.eval.begin(),
                                               setup.eval.begin() + eval_prompts.size());
    const auto grid = parse_decode_grid({eval_strategy}, setup.total_len(), setup.block_len);

    std::vector<distill::EvalRow> all_rows;
    for (const auto& variant : variants) {
        model::Network<float> student =
            distill::make_student(teacher, variant.cfg.adapter_rank, seed);
        distill::TrainStats stats;
        distill::train_cfd(student, records, variant.cfg, &stats);

        const std::string suffix = variant.name.empty() ? "" : "_" + variant.name;
        model::save_checkpoint(opt.out_dir + "/student" + suffix + ".ckpt", student.params());
        {
            auto out = open_out(opt.out_dir + "/distill_loss" + suffix + ".csv");
            out << "iteration,combined,consistency,certainty\n";
            for (const auto& pt : stats.curve) {
                out << pt.iteration << ',' << csv::fmt(pt.combined) << ','
                    << csv::fmt(pt.consistency) << ',' << csv::fmt(pt.certainty) << '\n';
            }
        }
        {
            auto out = open_out(opt.out_dir + "/probe" + suffix + ".csv");
            out << "stage,combined,certainty\n";
            out << "initial," << csv::fmt(stats.probe_combined_initial) << ','
                << csv::fmt(stats.probe_certainty_initial) << '\n';
            out << "final," << csv::fmt(stats.probe_combined_final) << ','
                << csv::fmt(stats.probe_certainty_final) << '\n';
        }

        const std::string run_id =
            setup.run_name + (variant.name.empty() ? "" : ":" + variant.name);
        const auto rows = distill::evaluate_pair(teacher, student, eval_prompts,
                                                 setup.checker_for(eval_used), grid, run_id,
                                                 threads);
        all_rows.insert(all_rows.end(), rows.begin(), rows.end());
    }
    write_metrics_csv(opt.out_dir + "/metrics.csv", all_rows);
}

// ------------------------------------------------------------------ eval ---

std::vector<decode::DecodeConfig> parse_decode_grid(const std::vector<std::string>& entries,
                                                    int total_len, int block_len) {
    std::vector<decode::DecodeConfig> grid;
    for (const auto& entry : entries) {
        decode::DecodeConfig dc;
        dc.total_len = total_len;
        dc.block_len = block_len;
        const size_t colon = entry.find(':');
        const std::string name = colon == std::string::npos ? entry : entry.substr(0, colon);
        dc.strategy = decode::parse_strategy(name);
        if (colon != std::string::npos) {
            const std::string value = entry.substr(colon + 1);
            try {
                if (dc.strategy == decode::Strategy::fixed_steps) {
                    dc.steps = std::stoi(value);
                } else {
                    dc.threshold = std::stod(value);
                }
            } catch (...) {
                raise(ErrorCategory::config, "bad decode grid entry: " + entry);
            }
        } else if (dc.strategy == decode::Strategy::fixed_steps) {
            raise(ErrorCategory::config, "fixed_steps grid entry needs a step count");
        }
        grid.push_back(dc);
    }
    return grid;
}

void write_metrics_csv(const std::string& path, const std::vector<distill::EvalRow>& rows) {
    auto out = open_out(path);
    out << "run_id,role,strategy,threshold,steps_mean,steps_std,tokens_per_step,accuracy,"
           "speedup\n";
    for (const auto& r : rows) {
        out << r.run_id << ',' << r.role << ',' << decode::strategy_name(r.strategy) << ','
            << csv::fmt(r.threshold) << ',' << csv::fmt(r.steps_mean) << ','
            << csv::fmt(r.steps_std) << ',' << csv::fmt(r.tokens_per_step) << ','
            << csv::fmt(r.accuracy) << ',' << csv::fmt(r.speedup) << '\n';
    }
}

void run_eval(const RunOptions& opt) {
    const ConfigMap cfg = ConfigMap::parse_file(opt.config_path);
    const uint64_t seed = effective_seed(cfg, opt);
    const TaskSetup setup = make_setup(cfg, seed);
    echo_config(opt, cfg, seed);

    const std::string teacher_path = pick_path(opt.teacher_ckpt, cfg, "files.teacher", true);
    const std::string student_path = pick_path(opt.student_ckpt, cfg, "files.student", true);
    const int eval_count = static_cast<int>(cfg.get_int("eval.count", 300));
    const auto strategy_entries = cfg.get_str_list("eval.strategies");
    const auto entropy_sweep = cfg.get_real_list("eval.entropy_sweep");
    const auto conf_sweep = cfg.get_real_list("eval.conf_sweep");
    check_known_keys(cfg);

    const model::Checkpoint tc = model::load_checkpoint(teacher_path, setup.model_cfg);
    const model::Network<float> teacher(tc.params);
    const model::Checkpoint sc = model::load_checkpoint(student_path);
    require(sc.config.vocab_size == setup.model_cfg.vocab_size &&
                sc.config.max_len == setup.model_cfg.max_len &&
                sc.config.num_layers == setup.model_cfg.num_layers &&
                sc.config.hidden_dim == setup.model_cfg.hidden_dim,
            ErrorCategory::config, "student checkpoint disagrees with the requested config");
    const model::Network<float> student(sc.params);

    std::vector<decode::DecodeConfig> grid =
        parse_decode_grid(strategy_entries.empty()
                              ? std::vector<std::string>{"one_per_step"}
                              : strategy_entries,
                          setup.total_len(), setup.block_len);
    const size_t sweep_begin = grid.size();
    for (double th : entropy_sweep) {
        decode::DecodeConfig dc;
        dc.total_len = setup.total_len();
        dc.block_len = setup.block_len;
        dc.strategy = decode::Strategy::entropy_threshold;
        dc.threshold = th;
        grid.push_back(dc);
    }
    for (double th : conf_sweep) {
        decode::DecodeConfig dc;
        dc.total_len = setup.total_len();
        dc.block_len = setup.block_len;
        dc.strategy = decode::Strategy::conf_threshold;
        dc.threshold = th;
        grid.push_back(dc);
    }

    const auto eval_prompts = prompt_id_list(setup, setup.eval, eval_count);
    std::vector<tasks::TaskInstance> eval_used(setup.eval.begin(),
                                               setup.eval.begin() + eval_prompts.size());
    const auto rows = distill::evaluate_pair(teacher, student, eval_prompts,
                                             setup.checker_for(eval_used), grid,
                                             setup.run_name, effective_threads(opt));
    write_metrics_csv(opt.out_dir + "/metrics.csv", rows);
    // sweep rows only: the speed-accuracy trade-off curves
    std::vector<distill::EvalRow> sweep_rows(rows.begin() + 2 * sweep_begin, rows.end());
    write_metrics_csv(opt.out_dir + "/tradeoff.csv", sweep_rows);
}

// ---------------------------------------------------------------- decode ---

void run_decode(const RunOptions& opt) {
    const ConfigMap cfg = ConfigMap::parse_file(opt.config_path);
    const uint64_t seed = effective_seed(cfg, opt);
    const TaskSetup setup = make_setup(cfg, seed);
    echo_config(opt, cfg, seed);

    std::string model_path = opt.model_ckpt;
    for (const std::string& fallback :
         {cfg.get_str("files.model", ""), opt.teacher_ckpt, cfg.get_str("files.teacher", "")}) {
        if (model_path.empty()) {
            model_path = fallback;
        }
    }
    require(!model_path.empty(), ErrorCategory::config,
            "no model checkpoint given (--model or files.model/files.teacher)");

    decode::DecodeConfig dc;
    dc.total_len = setup.total_len();
    dc.block_len = setup.block_len;
    dc.strategy = decode::parse_strategy(cfg.get_str("decode.strategy", "one_per_step"));
    dc.threshold = cfg.get_real("decode.threshold", 0.0);
    dc.steps = static_cast<int>(cfg.get_int("decode.steps", 0));
    dc.temperature = cfg.get_real("decode.temperature", 0.0);
    dc.eos_early_fill = cfg.get_bool("decode.eos_early_fill", false);
    dc.record_trace = true;
    dc.seed = seed;
    std::string prompt_text = opt.prompt_text;
    if (prompt_text.empty()) {
        prompt_text = cfg.get_str("decode.prompt", "");
    } else {
        cfg.get_str("decode.prompt", "");
    }
    check_known_keys(cfg);

    const model::Checkpoint ckpt = model::load_checkpoint(model_path);
    const model::Network<float> net(ckpt.params);

    tasks::TaskInstance inst;
    if (!prompt_text.empty()) {
        inst.task_name = setup.task_name;
        inst.prompt_text = prompt_text;
    } else {
        inst = setup.eval.front();
    }

    const decode::DecodeResult res =
        decode::run(net, tasks::encode_prompt(inst, setup.prompt_len), dc);

    {
        auto out = open_out(opt.out_dir + "/decode_output.txt");
        const std::vector<int> resp(res.output.tokens.begin() + res.output.prompt_len,
                                    res.output.tokens.end());
        out << "prompt: " << inst.prompt_text << "\n";
        out << "response: " << tasks::Vocab::v1().decode_lenient(resp) << "\n";
        out << "steps_used: " << res.steps_used << "\n";
        out << "tokens_per_step: " << csv::fmt(res.tokens_per_step) << "\n";
        out << "correct: "
            << (tasks::check_answer(inst.task_name, inst.prompt_text, resp) ? 1 : 0) << "\n";
    }
    {
        auto out = open_out(opt.out_dir + "/trace.csv");
        decode::write_trace_csv(out, *res.trace);
    }
    {
        // summary row in the metrics schema; the baseline for speedup is the
        // definitional one-commit-per-pass step count
        distill::EvalRow row;
        row.run_id = setup.run_name;
        row.role = ckpt.role == model::Role::teacher ? "teacher" : "student";
        row.strategy = dc.strategy;
        row.threshold = dc.strategy == decode::Strategy::fixed_steps
                            ? static_cast<double>(dc.steps)
                            : dc.threshold;
        row.steps_mean = res.steps_used;
        row.steps_std = 0.0;
        row.tokens_per_step = res.tokens_per_step;
        const std::vector<int> resp(res.output.tokens.begin() + res.output.prompt_len,
                                    res.output.tokens.end());
        row.accuracy =
            tasks::check_answer(inst.task_name, inst.prompt_text, resp) ? 1.0 : 0.0;
        row.speedup = static_cast<double>(setup.response_len) / res.steps_used;
        write_metrics_csv(opt.out_dir + "/decode_summary.csv", {row});
    }
}

// --------------------------------------------------------------- profile ---

void run_profile(const RunOptions& opt) {
    const ConfigMap cfg = ConfigMap::parse_file(opt.config_path);
    const uint64_t seed = effective_seed(cfg, opt);
    const TaskSetup setup = make_setup(cfg, seed);
    echo_config(opt, cfg, seed);

    const std::string teacher_path = pick_path(opt.teacher_ckpt, cfg, "files.teacher", true);
    const std::string student_path = pick_path(opt.student_ckpt, cfg, "files.student", false);
    const int probe_count = static_cast<int>(cfg.get_int("profile.count", 32));
    const int sweep_count = static_cast<int>(cfg.get_int("profile.sweep_count", 128));
    const std::string strategy_entry = cfg.get_str("profile.strategy", "one_per_step");
    std::vector<double> conf_thresholds = cfg.get_real_list("profile.conf_thresholds");
    if (conf_thresholds.empty()) {
        conf_thresholds = {0.3, 0.5, 0.7, 0.9, 0.95, 0.99};
    }
    check_known_keys(cfg);

    const model::Checkpoint tc = model::load_checkpoint(teacher_path, setup.model_cfg);
    std::vector<std::pair<std::string, model::Network<float>>> roles;
    roles.emplace_back("teacher", model::Network<float>(tc.params));
    if (!student_path.empty()) {
        const model::Checkpoint sc = model::load_checkpoint(student_path);
        roles.emplace_back("student", model::Network<float>(sc.params));
    }

    const auto probes = prompt_id_list(setup, setup.eval, probe_count);
    std::vector<tasks::TaskInstance> probe_insts(setup.eval.begin(),
                                                 setup.eval.begin() + probes.size());
    const auto grid = parse_decode_grid({strategy_entry}, setup.total_len(), setup.block_len);
    const int threads = effective_threads(opt);
    const int resp = setup.response_len;
    const int plen = setup.prompt_len;

    auto summary = open_out(opt.out_dir + "/trace_summary.csv");
    summary << "role,probe,step,mean_confidence,mean_entropy,committed\n";
    auto by_pos = open_out(opt.out_dir + "/confidence_by_position.csv");
    by_pos << "role,step,position,mean_confidence,mean_entropy,probes\n";
    auto commits = open_out(opt.out_dir + "/commit_steps.csv");
    commits << "role,probe,position,commit_step\n";

    for (const auto& [role, net] : roles) {
        std::vector<decode::DecodeResult> results(probes.size());
        parallel_for(static_cast<int>(probes.size()), threads, [&](int i) {
            results[static_cast<size_t>(i)] =
                decode::trace_certainty(net, probes[static_cast<size_t>(i)], grid[0]);
        });

        int max_steps = 0;
        for (const auto& r : results) {
            max_steps = std::max(max_steps, r.steps_used);
        }

        // per-probe per-step summary over response positions
        for (size_t pi = 0; pi < results.size(); ++pi) {
            const auto& trace = *results[pi].trace;
            for (int s = 0; s < trace.steps_used; ++s) {
                double conf_sum = 0.0;
                double ent_sum = 0.0;
                int committed = 0;
                for (int pos = plen; pos < setup.total_len(); ++pos) {
                    conf_sum += trace.conf_at(s, pos);
                    ent_sum += trace.entropy_at(s, pos);
                    const int cs = trace.commit_step[static_cast<size_t>(pos)];
                    if (cs > 0 && cs <= s) {
                        ++committed;
                    }
                }
                summary << role << ',' << pi << ',' << (s + 1) << ','
                        << csv::fmt(conf_sum / resp) << ',' << csv::fmt(ent_sum / resp) << ','
                        << committed << '\n';
            }
        }

        // position-resolved means over probes (response-relative positions)
        for (int s = 0; s < max_steps; ++s) {
            for (int rp = 0; rp < resp; ++rp) {
                double conf_sum = 0.0;
                double ent_sum = 0.0;
                int n = 0;
                for (const auto& r : results) {
                    if (s < r.trace->steps_used) {
                        conf_sum += r.trace->conf_at(s, plen + rp);
                        ent_sum += r.trace->entropy_at(s, plen + rp);
                        ++n;
                    }
                }
                if (n > 0) {
                    by_pos << role << ',' << (s + 1) << ',' << rp << ','
                           << csv::fmt(conf_sum / n) << ',' << csv::fmt(ent_sum / n) << ',' << n
                           << '\n';
                }
            }
        }

        for (size_t pi = 0; pi < results.size(); ++pi) {
            const auto& trace = *results[pi].trace;
            for (int rp = 0; rp < resp; ++rp) {
                commits << role << ',' << pi << ',' << rp << ','
                        << trace.commit_step[static_cast<size_t>(plen + rp)] << '\n';
            }
        }
    }

    // confidence-vs-accuracy sweep: conf_threshold decoding at several
    // thresholds, mean committed confidence against task accuracy
    auto sweep = open_out(opt.out_dir + "/conf_vs_accuracy.csv");
    sweep << "role,threshold,mean_committed_confidence,accuracy,steps_mean\n";
    const auto sweep_prompts = prompt_id_list(setup, setup.eval, sweep_count);
    std::vector<tasks::TaskInstance> sweep_insts(setup.eval.begin(),
                                                 setup.eval.begin() + sweep_prompts.size());
    for (const auto& [role, net] : roles) {
        for (double th : conf_thresholds) {
            decode::DecodeConfig dc;
            dc.total_len = setup.total_len();
            dc.block_len = setup.block_len;
            dc.strategy = decode::Strategy::conf_threshold;
            dc.threshold = th;
            dc.record_trace = true;
            std::vector<double> mean_conf(sweep_prompts.size(), 0.0);
            std::vector<char> correct(sweep_prompts.size(), 0);
            std::vector<int> steps(sweep_prompts.size(), 0);
            parallel_for(static_cast<int>(sweep_prompts.size()), threads, [&](int i) {
                const auto r = decode::run(net, sweep_prompts[static_cast<size_t>(i)], dc);
                const auto& trace = *r.trace;
                double conf = 0.0;
                for (int rp = 0; rp < resp; ++rp) {
                    const int cs = trace.commit_step[static_cast<size_t>(plen + rp)];
                    conf += trace.conf_at(cs - 1, plen + rp);
                }
                mean_conf[static_cast<size_t>(i)] = conf / resp;
                steps[static_cast<size_t>(i)] = r.steps_used;
                const auto& inst = sweep_insts[static_cast<size_t>(i)];
                const std::vector<int> response(r.output.tokens.begin() + r.output.prompt_len,
                                                r.output.tokens.end());
                correct[static_cast<size_t>(i)] =
                    tasks::check_answer(inst.task_name, inst.prompt_text, response) ? 1 : 0;
            });
            double conf_total = 0.0;
            double acc = 0.0;
            double steps_total = 0.0;
            for (size_t i = 0; i < sweep_prompts.size(); ++i) {
                conf_total += mean_conf[i];
                acc += correct[i];
                steps_total += steps[i];
            }
            const double n = static_cast<double>(sweep_prompts.size());
            sweep << role << ',' << csv::fmt(th) << ',' << csv::fmt(conf_total / n) << ','
                  << csv::fmt(acc / n) << ',' << csv::fmt(steps_total / n) << '\n';
        }
    }
}

} // namespace mdlm::harness
