// mdlm CLI: pretrain | traject | distill | decode | eval | profile.
// Every subcommand takes --config <path> --out <dir> [--seed <int>]; on
// failure it prints one machine-parseable line `error:<category>: <message>`
// and exits nonzero.

#include <clocale>
#include <iostream>

#include <CLI11.hpp>

#include "mdlm/harness.hpp"
#include "mdlm/kernels.hpp"

namespace {

using mdlm::harness::RunOptions;

void add_common(CLI::App* cmd, RunOptions& opt, std::optional<int64_t>& seed) {
    cmd->add_option("--config", opt.config_path, "experiment config file")->required();
    cmd->add_option("--out", opt.out_dir, "output directory")->required();
    cmd->add_option("--seed", seed, "seed override");
    cmd->add_option("--threads", opt.threads, "worker threads for eval phases");
}

int error_exit_code(mdlm::ErrorCategory cat) {
    return 10 + static_cast<int>(cat);
}

} // namespace

int main(int argc, char** argv) {
    std::setlocale(LC_ALL, "C");
    CLI::App app{"masked-diffusion language model laboratory"};
    app.require_subcommand(1);

    RunOptions opt;
    std::optional<int64_t> seed;

    auto* pretrain = app.add_subcommand("pretrain", "train the teacher mask predictor");
    add_common(pretrain, opt, seed);

    auto* traject = app.add_subcommand("traject", "generate and filter teacher trajectories");
    add_common(traject, opt, seed);
    traject->add_option("--teacher", opt.teacher_ckpt, "teacher checkpoint");

    auto* distill = app.add_subcommand("distill", "certainty-forcing distillation");
    add_common(distill, opt, seed);
    distill->add_option("--teacher", opt.teacher_ckpt, "teacher checkpoint");
    distill->add_option("--trajectories", opt.trajectories, "trajectory dataset file");

    auto* decode_cmd = app.add_subcommand("decode", "decode one prompt with tracing");
    add_common(decode_cmd, opt, seed);
    decode_cmd->add_option("--model", opt.model_ckpt, "model checkpoint");
    decode_cmd->add_option("--prompt", opt.prompt_text, "prompt text");

    auto* eval = app.add_subcommand("eval", "teacher/student decode-grid evaluation");
    add_common(eval, opt, seed);
    eval->add_option("--teacher", opt.teacher_ckpt, "teacher checkpoint");
    eval->add_option("--student", opt.student_ckpt, "student checkpoint");

    auto* profile = app.add_subcommand("profile", "certainty profiling and sweeps");
    add_common(profile, opt, seed);
    profile->add_option("--teacher", opt.teacher_ckpt, "teacher checkpoint");
    profile->add_option("--student", opt.student_ckpt, "student checkpoint");

    CLI11_PARSE(app, argc, argv);
    if (seed.has_value()) {
        opt.seed = static_cast<uint64_t>(*seed);
    }

    try {
        if (pretrain->parsed()) {
            mdlm::harness::run_pretrain(opt);
        } else if (traject->parsed()) {
            mdlm::harness::run_traject(opt);
        } else if (distill->parsed()) {
            mdlm::harness::run_distill(opt);
        } else if (decode_cmd->parsed()) {
            mdlm::harness::run_decode(opt);
        } else if (eval->parsed()) {
            mdlm::harness::run_eval(opt);
        } else if (profile->parsed()) {
            mdlm::harness::run_profile(opt);
        }
    } catch (const mdlm::Error& e) {
        std::cerr << "error:" << mdlm::to_string(e.category()) << ": " << e.what() << "\n";
        return error_exit_code(e.category());
    } catch (const std::exception& e) {
        std::cerr << "error:internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
