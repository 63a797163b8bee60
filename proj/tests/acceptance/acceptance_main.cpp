// Acceptance suite: runs every acceptance criterion end to end against the
// shipped pipeline and prints one PASS/FAIL line per criterion. Exits
// nonzero if any criterion fails. Heavy pipeline stages (pretrain, distill,
// eval, profile) run once and are shared by the criteria that read them.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mdlm/diffusion.hpp"
#include "mdlm/harness.hpp"
#include "mdlm/kernels.hpp"
#include "mdlm/losses.hpp"
#include "mdlm/parallel.hpp"
#include "mdlm/rng.hpp"

using namespace mdlm;
using namespace mdlm::harness;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// ------------------------------------------------------------------ config --

const char* kAcceptanceConfig = R"(# acceptance experiment: 3-digit addition at desk scale
run.name = acceptance
task = addition
task.num_digits = 3
task.train_count = 8192
task.eval_count = 512
seq.prompt_len = 16
seq.response_len = 64
seq.block_len = 8
model.num_layers = 4
model.num_heads = 4
model.hidden_dim = 128
model.ffn_dim = 512
pretrain.iterations = 3000
pretrain.batch_size = 16
pretrain.learning_rate = 0.001
pretrain.log_every = 50
pretrain.eval_every = 250
pretrain.eval_probes = 64
pretrain.stop_accuracy = 0.99
traject.count = 1024
distill.beta = 2
distill.temperature = 0.5
distill.mask_ratio = 0.5
distill.masking_mode = semi_ar
distill.complementary = true
distill.epochs = 3
distill.batch_size = 8
distill.learning_rate = 0.0003
distill.adapter_rank = 16
distill.ablations = full, consistency_only, certainty_only
distill.eval_count = 200
distill.eval_strategy = entropy_threshold:0.5
eval.count = 250
eval.strategies = one_per_step, entropy_threshold:0.5, conf_threshold:0.9, fixed_steps:16
eval.entropy_sweep = 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0, 1.5, 2.0, 3.0
profile.count = 32
profile.sweep_count = 96
profile.conf_thresholds = 0.3, 0.5, 0.7, 0.9, 0.95, 0.99
seed = 1
)";

const char* kDeterminismEvalConfig = R"(run.name = determinism
task = addition
task.num_digits = 3
task.train_count = 8192
task.eval_count = 512
seq.prompt_len = 16
seq.response_len = 64
seq.block_len = 8
model.num_layers = 4
model.num_heads = 4
model.hidden_dim = 128
model.ffn_dim = 512
eval.count = 64
eval.strategies = one_per_step, entropy_threshold:0.5
eval.entropy_sweep = 0.3, 0.7
profile.count = 8
profile.sweep_count = 16
profile.conf_thresholds = 0.5, 0.9
seed = 1
)";

const char* kMicroPretrainConfig = R"(run.name = micro-determinism
task = addition
task.num_digits = 1
task.train_count = 64
task.eval_count = 16
seq.prompt_len = 8
seq.response_len = 16
seq.block_len = 4
model.num_layers = 1
model.num_heads = 2
model.hidden_dim = 32
model.ffn_dim = 48
pretrain.iterations = 60
pretrain.batch_size = 8
pretrain.learning_rate = 0.002
pretrain.log_every = 10
seed = 5
)";

// ----------------------------------------------------------------- helpers --

std::string g_out = "acceptance_runs";

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        raise(ErrorCategory::io, "missing expected output file: " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string write_config(const std::string& name, const char* text) {
    fs::create_directories(g_out);
    const std::string path = g_out + "/" + name;
    std::ofstream out(path, std::ios::trunc);
    out << text;
    return path;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int col(const std::string& name) const {
        for (size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) {
                return static_cast<int>(i);
            }
        }
        raise(ErrorCategory::io, "missing CSV column: " + name);
    }
};

CsvTable read_csv(const std::string& path) {
    CsvTable t;
    std::istringstream in(slurp(path));
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cells.push_back(cell);
        }
        if (first) {
            t.header = cells;
            first = false;
        } else {
            t.rows.push_back(cells);
        }
    }
    return t;
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)});
}

// ----------------------------------------------------------------- pipeline --

// Heavy stages run once; criteria read the outputs.
struct Pipeline {
    std::string cfg_path;
    bool pretrain_done = false;
    bool distill_done = false;
    bool eval_done = false;
    bool profile_done = false;

    std::string dir(const std::string& stage) const { return g_out + "/" + stage; }

    RunOptions base_options() const {
        RunOptions opt;
        opt.config_path = cfg_path;
        opt.threads = 0; // default_threads
        return opt;
    }

    void ensure_pretrain() {
        if (pretrain_done) {
            return;
        }
        std::fprintf(stderr, "[pipeline] pretraining teacher...\n");
        RunOptions opt = base_options();
        opt.out_dir = dir("pretrain");
        run_pretrain(opt);
        pretrain_done = true;
    }

    void ensure_distill() {
        ensure_pretrain();
        if (distill_done) {
            return;
        }
        std::fprintf(stderr, "[pipeline] building trajectories and distilling (3 variants)...\n");
        RunOptions opt = base_options();
        opt.teacher_ckpt = dir("pretrain") + "/teacher.ckpt";
        opt.out_dir = dir("distill");
        run_distill(opt);
        distill_done = true;
    }

    void ensure_eval() {
        ensure_distill();
        if (eval_done) {
            return;
        }
        std::fprintf(stderr, "[pipeline] running the decode-grid evaluation...\n");
        RunOptions opt = base_options();
        opt.teacher_ckpt = dir("pretrain") + "/teacher.ckpt";
        opt.student_ckpt = dir("distill") + "/student_full.ckpt";
        opt.out_dir = dir("eval");
        run_eval(opt);
        eval_done = true;
    }

    void ensure_profile() {
        ensure_distill();
        if (profile_done) {
            return;
        }
        std::fprintf(stderr, "[pipeline] profiling certainty dynamics...\n");
        RunOptions opt = base_options();
        opt.teacher_ckpt = dir("pretrain") + "/teacher.ckpt";
        opt.student_ckpt = dir("distill") + "/student_full.ckpt";
        opt.out_dir = dir("profile");
        run_profile(opt);
        profile_done = true;
    }
};

Pipeline g_pipeline;

// metrics row lookup
struct Row {
    std::string role;
    std::string strategy;
    double threshold = 0;
    double steps_mean = 0;
    double accuracy = 0;
    double speedup = 0;
};

std::vector<Row> metric_rows(const std::string& path) {
    const CsvTable t = read_csv(path);
    const int role = t.col("role");
    const int strategy = t.col("strategy");
    const int threshold = t.col("threshold");
    const int steps_mean = t.col("steps_mean");
    const int accuracy = t.col("accuracy");
    const int speedup = t.col("speedup");
    std::vector<Row> rows;
    for (const auto& r : t.rows) {
        Row row;
        row.role = r[static_cast<size_t>(role)];
        row.strategy = r[static_cast<size_t>(strategy)];
        row.threshold = std::stod(r[static_cast<size_t>(threshold)]);
        row.steps_mean = std::stod(r[static_cast<size_t>(steps_mean)]);
        row.accuracy = std::stod(r[static_cast<size_t>(accuracy)]);
        row.speedup = std::stod(r[static_cast<size_t>(speedup)]);
        rows.push_back(row);
    }
    return rows;
}

const Row* find_row(const std::vector<Row>& rows, const std::string& role,
                    const std::string& strategy, double threshold,
                    const std::string& run_prefix = "") {
    (void)run_prefix;
    for (const auto& r : rows) {
        if (r.role == role && r.strategy == strategy && std::abs(r.threshold - threshold) < 1e-9) {
            return &r;
        }
    }
    return nullptr;
}

// ---------------------------------------------------------------- criteria --

// 1. gradient suite over >= 50 random tiny instances
bool criterion_gradients(std::string& detail) {
    RngStream rng(4242);
    int instances = 0;
    double worst = 0.0;
    while (instances < 50) {
        const int vocab = 5 + static_cast<int>(rng.uniform_below(7));   // 5..11
        const int len = 8 + static_cast<int>(rng.uniform_below(9));     // 8..16
        const int prompt_len = 2 + static_cast<int>(rng.uniform_below(3));
        MatD logits(len, vocab);
        for (auto& v : logits.data) {
            v = rng.gauss() * 2.0;
        }
        std::vector<int> toks(static_cast<size_t>(len));
        for (auto& t : toks) {
            do {
                t = static_cast<int>(rng.uniform_below(static_cast<uint64_t>(vocab)));
            } while (t == kMaskId);
        }
        TokenSeq y(toks, prompt_len);

        std::vector<int> m_a;
        for (int i = prompt_len; i < len; ++i) {
            if (rng.bernoulli(0.5)) {
                m_a.push_back(i);
            }
        }
        if (m_a.empty() || static_cast<int>(m_a.size()) > 8) {
            continue;
        }
        // keep the FD step well inside the argmax margin
        bool margin_ok = true;
        for (int i : m_a) {
            double best = -1e30, second = -1e30;
            for (int c = 0; c < vocab; ++c) {
                const double v = logits.at(i, c);
                if (v > best) {
                    second = best;
                    best = v;
                } else if (v > second) {
                    second = v;
                }
            }
            margin_ok = margin_ok && (best - second > 1e-2);
        }
        if (!margin_ok) {
            continue;
        }

        diffusion::MaskedState st;
        st.tokens = y.tokens;
        st.prompt_len = prompt_len;
        for (int i : m_a) {
            st.tokens[static_cast<size_t>(i)] = kMaskId;
            st.masked_positions.push_back(i);
        }
        const double t_level = 0.25 + 0.75 * rng.uniform01();
        const double temp = 0.25 + rng.uniform01();
        const double beta = 2.0 * rng.uniform01();

        const auto m_c = losses::correct_set(logits, y, m_a);
        const std::vector<std::function<double(const MatD&, MatD*)>> fns = {
            [&](const MatD& z, MatD* g) {
                return losses::pretrain_loss(z, y, st, diffusion::MaskLevel(t_level), g);
            },
            [&](const MatD& z, MatD* g) { return losses::consistency_loss(z, y, m_a, g); },
            [&](const MatD& z, MatD* g) { return losses::certainty_loss(z, m_c, temp, g); },
            [&](const MatD& z, MatD* g) {
                return losses::cfd_loss(z, y, m_a, temp, beta, g).combined;
            },
        };
        for (const auto& fn : fns) {
            MatD grad(len, vocab);
            fn(logits, &grad);
            MatD pert = logits;
            const double h = 1e-4;
            for (size_t e = 0; e < logits.size(); ++e) {
                pert.data[e] = logits.data[e] + h;
                const double up = fn(pert, nullptr);
                pert.data[e] = logits.data[e] - h;
                const double down = fn(pert, nullptr);
                pert.data[e] = logits.data[e];
                const double fd = (up - down) / (2 * h);
                const double err = rel_err(grad.data[e], fd);
                if (err > 1e-3 && std::abs(grad.data[e] - fd) > 1e-7) {
                    detail = "gradient mismatch: instance " + std::to_string(instances) +
                             " entry " + std::to_string(e) + " analytic " +
                             std::to_string(grad.data[e]) + " fd " + std::to_string(fd);
                    return false;
                }
                worst = std::max(worst, std::min(err, std::abs(grad.data[e] - fd)));
            }
        }
        ++instances;
    }
    detail = "50 instances, all four losses, worst deviation " + std::to_string(worst);
    return true;
}

// 2. masking exactness: exhaustive structural + binomial statistics
bool criterion_masking(std::string& detail) {
    struct ScriptedRng {
        uint32_t pattern = 0;
        int bit = 0;
        bool bernoulli(double) { return ((pattern >> bit++) & 1) != 0; }
    };
    std::vector<int> toks(15);
    for (size_t i = 0; i < toks.size(); ++i) {
        toks[i] = 3 + static_cast<int>(i % 5);
    }
    const TokenSeq y(toks, 3); // 12 response positions, block 4
    for (int n = 0; n < 3; ++n) {
        for (uint32_t pattern = 0; pattern < 16; ++pattern) {
            ScriptedRng rng{pattern, 0};
            const auto st = diffusion::semi_ar_mask(y, n, 0.5, 4, rng);
            const int active_begin = 3 + n * 4;
            for (int i = 0; i < y.length(); ++i) {
                const bool masked = st.tokens[static_cast<size_t>(i)] == kMaskId;
                bool want;
                if (i < active_begin) {
                    want = false; // prompt + context
                } else if (i < active_begin + 4) {
                    want = ((pattern >> (i - active_begin)) & 1) != 0;
                } else {
                    want = true; // future
                }
                if (masked != want) {
                    detail = "structural mismatch at n=" + std::to_string(n) +
                             " pattern=" + std::to_string(pattern) + " pos=" + std::to_string(i);
                    return false;
                }
            }
            std::vector<int> want_ma;
            for (int b = 0; b < 4; ++b) {
                if ((pattern >> b) & 1) {
                    want_ma.push_back(active_begin + b);
                }
            }
            if (st.active_mask_set != want_ma) {
                detail = "M_a mismatch at n=" + std::to_string(n);
                return false;
            }
        }
    }

    // binomial statistics over 10k trials (100 trials x 100 positions)
    std::vector<int> long_toks(102, 3);
    const TokenSeq x0(long_toks, 2);
    RngStream rng(99);
    int masked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        masked += static_cast<int>(
            diffusion::forward_mask(x0, diffusion::MaskLevel(0.5), rng).masked_positions.size());
    }
    const double fraction = masked / 10000.0;
    if (std::abs(fraction - 0.5) > 0.015) {
        detail = "masked fraction " + std::to_string(fraction) + " outside 0.5 +/- 0.015";
        return false;
    }
    detail = "exhaustive 3x16 patterns exact; masked fraction " + std::to_string(fraction);
    return true;
}

// 3. loss identities
bool criterion_loss_identities(std::string& detail) {
    MatD uniform(6, 4);
    TokenSeq y(std::vector<int>{3, 3, 2, 2, 3, 2}, 1);
    const double ln4 = std::log(4.0);
    if (std::abs(losses::consistency_loss(uniform, y, {2, 4}) - ln4) > 1e-6) {
        detail = "uniform consistency != ln V";
        return false;
    }
    for (double temp : {0.1, 0.5, 1.0, 2.0}) {
        if (std::abs(losses::certainty_loss(uniform, {1, 3}, temp) - ln4) > 1e-6) {
            detail = "uniform certainty != ln V at T=" + std::to_string(temp);
            return false;
        }
    }
    diffusion::MaskedState st;
    st.tokens = y.tokens;
    st.prompt_len = 1;
    for (int i = 1; i < 6; ++i) {
        st.tokens[static_cast<size_t>(i)] = kMaskId;
        st.masked_positions.push_back(i);
    }
    if (std::abs(losses::pretrain_loss(uniform, y, st, diffusion::MaskLevel(1.0)) - ln4) > 1e-6) {
        detail = "uniform pretrain != ln V";
        return false;
    }

    RngStream rng(7);
    MatD logits(6, 4);
    for (auto& v : logits.data) {
        v = rng.gauss();
    }
    const auto b0 = losses::cfd_loss(logits, y, {2, 4, 5}, 0.5, 0.0);
    if (b0.combined != b0.consistency) {
        detail = "beta=0 combined differs from consistency";
        return false;
    }
    // empty-M_c guard: force every argmax wrong
    MatD wrong(6, 4);
    for (int r = 0; r < 6; ++r) {
        wrong.at(r, 0) = 9.0;
    }
    const auto guard = losses::cfd_loss(wrong, y, {2, 4, 5}, 0.5, 2.0);
    if (guard.correct_count != 0 || guard.certainty != 0.0 ||
        guard.combined != guard.consistency) {
        detail = "empty M_c guard violated";
        return false;
    }
    detail = "uniform ln V, beta=0 identity, |M_c|=0 guard all exact";
    return true;
}

// 4. teacher quality on the held-out eval split
bool criterion_teacher(std::string& detail) {
    g_pipeline.ensure_pretrain();
    const ConfigMap cfg = ConfigMap::parse_file(g_pipeline.cfg_path);
    const TaskSetup setup = make_setup(cfg, 1);
    const model::Checkpoint ckpt =
        model::load_checkpoint(g_pipeline.dir("pretrain") + "/teacher.ckpt", setup.model_cfg);
    const model::Network<float> teacher(ckpt.params);
    const double acc = exact_match_accuracy(teacher, setup, setup.eval, default_threads());
    detail = "held-out one_per_step exact match " + std::to_string(acc) + " over " +
             std::to_string(setup.eval.size()) + " prompts";
    return acc >= 0.95;
}

// 5. step-reduction analog at entropy threshold 0.5
bool criterion_step_reduction(std::string& detail) {
    g_pipeline.ensure_eval();
    const auto rows = metric_rows(g_pipeline.dir("eval") + "/metrics.csv");
    const Row* teacher_base = find_row(rows, "teacher", "one_per_step", 0.0);
    const Row* student = find_row(rows, "student", "entropy_threshold", 0.5);
    if (teacher_base == nullptr || student == nullptr) {
        detail = "missing metrics rows";
        return false;
    }
    detail = "student " + std::to_string(student->steps_mean) + " steps (" +
             std::to_string(student->speedup) + "x), accuracy " +
             std::to_string(student->accuracy) + " vs teacher " +
             std::to_string(teacher_base->accuracy) + " at " +
             std::to_string(teacher_base->steps_mean) + " steps";
    return student->speedup >= 2.0 && student->accuracy >= teacher_base->accuracy - 0.02;
}

// 6. ablation directionals (Table-3 pattern)
bool criterion_ablations(std::string& detail) {
    g_pipeline.ensure_eval();
    const auto eval_rows = metric_rows(g_pipeline.dir("eval") + "/metrics.csv");
    const Row* teacher_base = find_row(eval_rows, "teacher", "one_per_step", 0.0);
    if (teacher_base == nullptr) {
        detail = "missing teacher baseline";
        return false;
    }
    // distill metrics: run_id column distinguishes the variants
    const CsvTable t = read_csv(g_pipeline.dir("distill") + "/metrics.csv");
    const int run_id = t.col("run_id");
    const int role = t.col("role");
    const int accuracy = t.col("accuracy");
    const int speedup = t.col("speedup");
    auto variant_row = [&](const std::string& name) -> std::pair<double, double> {
        for (const auto& r : t.rows) {
            if (r[static_cast<size_t>(role)] == "student" &&
                r[static_cast<size_t>(run_id)].find(name) != std::string::npos) {
                return {std::stod(r[static_cast<size_t>(speedup)]),
                        std::stod(r[static_cast<size_t>(accuracy)])};
            }
        }
        raise(ErrorCategory::io, "missing distill variant row: " + name);
    };
    const auto [full_speedup, full_acc] = variant_row(":full");
    const auto [cons_speedup, cons_acc] = variant_row(":consistency_only");
    const auto [cert_speedup, cert_acc] = variant_row(":certainty_only");
    detail = "full " + std::to_string(full_speedup) + "x/" + std::to_string(full_acc) +
             ", consistency_only " + std::to_string(cons_speedup) + "x/" +
             std::to_string(cons_acc) + ", certainty_only " + std::to_string(cert_speedup) +
             "x/" + std::to_string(cert_acc) + " (teacher acc " +
             std::to_string(teacher_base->accuracy) + ")";
    const bool cons_ok =
        cons_speedup < full_speedup && cons_acc >= teacher_base->accuracy - 0.02;
    const bool cert_ok =
        cert_speedup > full_speedup && cert_acc <= teacher_base->accuracy - 0.05;
    return cons_ok && cert_ok;
}

// 7. certainty dynamics: sequential teacher convergence, faster student
bool criterion_certainty_dynamics(std::string& detail) {
    g_pipeline.ensure_profile();
    // teacher commit_step vs position rank correlation (per probe, averaged)
    const CsvTable commits = read_csv(g_pipeline.dir("profile") + "/commit_steps.csv");
    const int role = commits.col("role");
    const int probe = commits.col("probe");
    const int position = commits.col("position");
    const int commit_step = commits.col("commit_step");
    std::map<int, std::vector<std::pair<int, int>>> by_probe; // pos, step
    for (const auto& r : commits.rows) {
        if (r[static_cast<size_t>(role)] == "teacher") {
            by_probe[std::stoi(r[static_cast<size_t>(probe)])].emplace_back(
                std::stoi(r[static_cast<size_t>(position)]),
                std::stoi(r[static_cast<size_t>(commit_step)]));
        }
    }
    if (by_probe.empty()) {
        detail = "no teacher commit rows";
        return false;
    }
    double corr_sum = 0.0;
    for (auto& [p, entries] : by_probe) {
        // one_per_step commits are distinct, so Spearman needs no tie handling
        std::sort(entries.begin(), entries.end());
        const int n = static_cast<int>(entries.size());
        double d2 = 0.0;
        std::vector<int> steps;
        steps.reserve(static_cast<size_t>(n));
        for (const auto& [pos, step] : entries) {
            steps.push_back(step);
        }
        std::vector<int> order(steps.size());
        for (size_t i = 0; i < order.size(); ++i) {
            order[i] = static_cast<int>(i);
        }
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return steps[static_cast<size_t>(a)] < steps[static_cast<size_t>(b)]; });
        std::vector<int> rank(steps.size());
        for (size_t i = 0; i < order.size(); ++i) {
            rank[static_cast<size_t>(order[i])] = static_cast<int>(i);
        }
        for (size_t i = 0; i < rank.size(); ++i) {
            const double d = static_cast<double>(rank[i]) - static_cast<double>(i);
            d2 += d * d;
        }
        corr_sum += 1.0 - 6.0 * d2 / (static_cast<double>(n) * (static_cast<double>(n) * n - 1));
    }
    const double mean_corr = corr_sum / static_cast<double>(by_probe.size());

    // student mean confidence at step 8 over the first 32 response positions
    const CsvTable conf = read_csv(g_pipeline.dir("profile") + "/confidence_by_position.csv");
    const int c_role = conf.col("role");
    const int c_step = conf.col("step");
    const int c_pos = conf.col("position");
    const int c_conf = conf.col("mean_confidence");
    double teacher_conf = 0.0, student_conf = 0.0;
    int teacher_n = 0, student_n = 0;
    for (const auto& r : conf.rows) {
        if (std::stoi(r[static_cast<size_t>(c_step)]) != 8 ||
            std::stoi(r[static_cast<size_t>(c_pos)]) >= 32) {
            continue;
        }
        if (r[static_cast<size_t>(c_role)] == "teacher") {
            teacher_conf += std::stod(r[static_cast<size_t>(c_conf)]);
            ++teacher_n;
        } else {
            student_conf += std::stod(r[static_cast<size_t>(c_conf)]);
            ++student_n;
        }
    }
    if (teacher_n == 0 || student_n == 0) {
        detail = "missing step-8 confidence rows";
        return false;
    }
    teacher_conf /= teacher_n;
    student_conf /= student_n;
    detail = "teacher commit rank corr " + std::to_string(mean_corr) +
             "; step-8 confidence student " + std::to_string(student_conf) + " vs teacher " +
             std::to_string(teacher_conf);
    return mean_corr > 0.8 && student_conf > teacher_conf;
}

// 8. trade-off curves: a shared speedup point with a >= 5 point accuracy gap
bool criterion_tradeoff(std::string& detail) {
    g_pipeline.ensure_eval();
    const auto rows = metric_rows(g_pipeline.dir("eval") + "/tradeoff.csv");
    std::vector<std::pair<double, double>> teacher_pts, student_pts; // speedup, acc
    for (const auto& r : rows) {
        if (r.strategy != "entropy_threshold") {
            continue;
        }
        (r.role == "teacher" ? teacher_pts : student_pts).emplace_back(r.speedup, r.accuracy);
    }
    if (teacher_pts.empty() || student_pts.empty()) {
        detail = "missing sweep rows";
        return false;
    }
    std::sort(student_pts.begin(), student_pts.end());
    const auto student_acc_at = [&](double speedup) -> double {
        // piecewise-linear interpolation over the student curve
        for (size_t i = 0; i + 1 < student_pts.size(); ++i) {
            const auto& [s0, a0] = student_pts[i];
            const auto& [s1, a1] = student_pts[i + 1];
            if (speedup >= s0 && speedup <= s1) {
                const double w = s1 > s0 ? (speedup - s0) / (s1 - s0) : 0.0;
                return a0 + w * (a1 - a0);
            }
        }
        return -1.0; // outside the shared range
    };
    double best_gap = -1.0;
    double best_speedup = 0.0;
    for (const auto& [speedup, teacher_acc] : teacher_pts) {
        const double student_acc = student_acc_at(speedup);
        if (student_acc < 0.0) {
            continue;
        }
        if (student_acc - teacher_acc > best_gap) {
            best_gap = student_acc - teacher_acc;
            best_speedup = speedup;
        }
    }
    detail = "best shared-speedup accuracy gap " + std::to_string(best_gap) + " at " +
             std::to_string(best_speedup) + "x";
    return best_gap >= 0.05;
}

// 9. determinism: byte-identical reruns
bool criterion_determinism(std::string& detail) {
    g_pipeline.ensure_distill();
    const std::string det_cfg = write_config("determinism.cfg", kDeterminismEvalConfig);
    RunOptions opt;
    opt.config_path = det_cfg;
    opt.teacher_ckpt = g_pipeline.dir("pretrain") + "/teacher.ckpt";
    opt.student_ckpt = g_pipeline.dir("distill") + "/student_full.ckpt";

    opt.out_dir = g_out + "/det_eval1";
    opt.threads = 2;
    run_eval(opt);
    opt.out_dir = g_out + "/det_eval2";
    opt.threads = 1;
    run_eval(opt);
    if (slurp(g_out + "/det_eval1/metrics.csv") != slurp(g_out + "/det_eval2/metrics.csv") ||
        slurp(g_out + "/det_eval1/tradeoff.csv") != slurp(g_out + "/det_eval2/tradeoff.csv")) {
        detail = "eval rerun differs";
        return false;
    }

    opt.out_dir = g_out + "/det_profile1";
    opt.threads = 2;
    run_profile(opt);
    opt.out_dir = g_out + "/det_profile2";
    opt.threads = 1;
    run_profile(opt);
    for (const char* f : {"/trace_summary.csv", "/confidence_by_position.csv",
                          "/commit_steps.csv", "/conf_vs_accuracy.csv"}) {
        if (slurp(g_out + "/det_profile1" + f) != slurp(g_out + "/det_profile2" + f)) {
            detail = std::string("profile rerun differs in ") + f;
            return false;
        }
    }

    const std::string micro_cfg = write_config("micro.cfg", kMicroPretrainConfig);
    RunOptions micro;
    micro.config_path = micro_cfg;
    micro.threads = 2;
    micro.out_dir = g_out + "/det_pre1";
    run_pretrain(micro);
    micro.out_dir = g_out + "/det_pre2";
    run_pretrain(micro);
    if (slurp(g_out + "/det_pre1/train_loss.csv") != slurp(g_out + "/det_pre2/train_loss.csv") ||
        slurp(g_out + "/det_pre1/teacher.ckpt") != slurp(g_out + "/det_pre2/teacher.ckpt")) {
        detail = "pretrain rerun differs";
        return false;
    }
    detail = "eval, profile, and pretrain reruns byte-identical";
    return true;
}

} // namespace

int main(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; i += 2) {
        if (std::string(argv[i]) == "--out") {
            g_out = argv[i + 1];
        }
    }
    fs::create_directories(g_out);
    g_pipeline.cfg_path = write_config("acceptance.cfg", kAcceptanceConfig);

    std::printf("kernel level: %s, worker threads: %d\n",
                kern::level_name(kern::active_level()), default_threads());

    struct Criterion {
        int id;
        const char* name;
        std::function<bool(std::string&)> fn;
    };
    const std::vector<Criterion> criteria = {
        {1, "gradient suite (finite differences, 64-bit)", criterion_gradients},
        {2, "masking exactness (exhaustive + binomial)", criterion_masking},
        {3, "loss identities", criterion_loss_identities},
        {4, "teacher quality (>= 95% held-out exact match)", criterion_teacher},
        {5, "step reduction (>= 2x at entropy 0.5, accuracy within 2 points)",
         criterion_step_reduction},
        {6, "ablation directionals", criterion_ablations},
        {7, "certainty dynamics (rank correlation, step-8 confidence)",
         criterion_certainty_dynamics},
        {8, "trade-off curves (>= 5 point gap at shared speedup)", criterion_tradeoff},
        {9, "determinism (byte-identical reruns)", criterion_determinism},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = Clock::now();
        std::string detail;
        bool ok = false;
        try {
            ok = c.fn(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        std::printf("%s criterion %d: %s [%.1fs] %s\n", ok ? "PASS" : "FAIL", c.id, c.name,
                    secs, detail.c_str());
        std::fflush(stdout);
        if (!ok) {
            ++failures;
        }
    }
    if (failures > 0) {
        std::printf("%d criterion(s) FAILED\n", failures);
        return 1;
    }
    std::printf("all 9 acceptance criteria passed\n");
    return 0;
}
