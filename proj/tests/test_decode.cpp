#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mdlm/decode.hpp"
#include "mdlm/rng.hpp"

using namespace mdlm;
using namespace mdlm::decode;

namespace {

model::Network<float> tiny_net(uint64_t seed) {
    model::ModelConfig cfg;
    cfg.vocab_size = 11;
    cfg.max_len = 20;
    cfg.num_layers = 2;
    cfg.num_heads = 2;
    cfg.hidden_dim = 16;
    cfg.ffn_dim = 24;
    cfg.seed = seed;
    return model::Network<float>(model::init_params(cfg));
}

DecodeConfig base_cfg(Strategy s) {
    DecodeConfig cfg;
    cfg.strategy = s;
    cfg.total_len = 20;
    cfg.block_len = 4; // 4 blocks over a 16-token response
    return cfg;
}

const std::vector<int> kPrompt = {3, 4, 5, 6};

} // namespace

TEST_CASE("one_per_step: exactly one commit per pass, tokens_per_step exactly 1") {
    const auto net = tiny_net(1);
    const DecodeResult r = run(net, kPrompt, base_cfg(Strategy::one_per_step));
    CHECK(r.steps_used == 16);
    CHECK(r.tokens_per_step == 1.0);
    for (int t : r.output.tokens) {
        CHECK(t != kMaskId);
    }
    CHECK(r.output.prompt_len == 4);
}

TEST_CASE("entropy threshold at infinity commits whole blocks: steps = block count") {
    const auto net = tiny_net(2);
    DecodeConfig cfg = base_cfg(Strategy::entropy_threshold);
    cfg.threshold = 1e18;
    const DecodeResult r = run(net, kPrompt, cfg);
    CHECK(r.steps_used == 4);
    CHECK(r.tokens_per_step == 4.0);
}

TEST_CASE("entropy threshold zero forces one commit per pass on a generic model") {
    const auto net = tiny_net(3);
    DecodeConfig cfg = base_cfg(Strategy::entropy_threshold);
    cfg.threshold = 0.0;
    const DecodeResult r = run(net, kPrompt, cfg);
    CHECK(r.steps_used == 16);
}

TEST_CASE("unreachable confidence threshold falls back to forced progress") {
    const auto net = tiny_net(4);
    DecodeConfig cfg = base_cfg(Strategy::conf_threshold);
    cfg.threshold = 1.01;
    const DecodeResult r = run(net, kPrompt, cfg);
    CHECK(r.steps_used == 16);
}

TEST_CASE("fixed steps: block budget is exactly honored") {
    const auto net = tiny_net(5);
    DecodeConfig cfg = base_cfg(Strategy::fixed_steps);
    cfg.steps = 8; // 2 passes per block
    const DecodeResult r = run(net, kPrompt, cfg);
    CHECK(r.steps_used == 8);

    cfg.steps = 16; // 4 passes per block = one commit per pass
    CHECK(run(net, kPrompt, cfg).steps_used == 16);

    cfg.steps = 6; // not divisible by 4 blocks
    CHECK_THROWS_AS(run(net, kPrompt, cfg), Error);
}

TEST_CASE("steps_used equals the number of forward calls") {
    const auto net = tiny_net(6);
    for (const Strategy s : {Strategy::one_per_step, Strategy::conf_threshold,
                             Strategy::entropy_threshold, Strategy::fixed_steps}) {
        DecodeConfig cfg = base_cfg(s);
        cfg.threshold = 0.5;
        cfg.steps = 8;
        int calls = 0;
        const ForwardFn counting = [&](const std::vector<int>& ids) {
            ++calls;
            return net.forward(ids);
        };
        const DecodeResult r = run(counting, kPrompt, cfg);
        CHECK(r.steps_used == calls);
        CHECK(r.steps_used >= 4);  // at least one pass per block
        CHECK(r.steps_used <= 16); // progress guarantee
    }
}

TEST_CASE("block discipline: later blocks commit strictly after earlier ones") {
    const auto net = tiny_net(7);
    for (const Strategy s : {Strategy::one_per_step, Strategy::entropy_threshold}) {
        DecodeConfig cfg = base_cfg(s);
        cfg.threshold = 1.0;
        cfg.record_trace = true;
        const DecodeResult r = run(net, kPrompt, cfg);
        const auto& commit = r.trace->commit_step;
        for (int block = 0; block < 3; ++block) {
            int max_this = 0;
            int min_next = 1 << 30;
            for (int i = 0; i < 4; ++i) {
                max_this = std::max(max_this, commit[static_cast<size_t>(4 + block * 4 + i)]);
                min_next = std::min(min_next, commit[static_cast<size_t>(4 + (block + 1) * 4 + i)]);
            }
            CHECK(max_this < min_next);
        }
    }
}

TEST_CASE("decode is deterministic and matches across threshold extremes") {
    const auto net = tiny_net(8);
    DecodeConfig e = base_cfg(Strategy::entropy_threshold);
    e.threshold = 1e18;
    const DecodeResult r1 = run(net, kPrompt, e);
    const DecodeResult r2 = run(net, kPrompt, e);
    CHECK(r1.output.tokens == r2.output.tokens);

    DecodeConfig f = base_cfg(Strategy::fixed_steps);
    f.steps = 4; // budget 1 pass per block commits everything
    const DecodeResult r3 = run(net, kPrompt, f);
    CHECK(r1.output.tokens == r3.output.tokens);
    CHECK(r1.steps_used == r3.steps_used);
}

TEST_CASE("raising the entropy threshold never increases steps (empirical)") {
    const auto net = tiny_net(9);
    int prev = 1 << 30;
    for (const double th : {0.05, 0.2, 0.5, 1.0, 2.0, 5.0}) {
        DecodeConfig cfg = base_cfg(Strategy::entropy_threshold);
        cfg.threshold = th;
        const int steps = run(net, kPrompt, cfg).steps_used;
        CHECK(steps <= prev);
        prev = steps;
    }
}

TEST_CASE("config and input validation") {
    const auto net = tiny_net(10);
    DecodeConfig cfg = base_cfg(Strategy::one_per_step);
    cfg.threshold = -0.5;
    CHECK_THROWS_AS(run(net, kPrompt, cfg), Error);

    DecodeConfig cfg2 = base_cfg(Strategy::one_per_step);
    const std::vector<int> long_prompt(20, 3);
    CHECK_THROWS_AS(run(net, long_prompt, cfg2), Error);

    DecodeConfig cfg3 = base_cfg(Strategy::one_per_step);
    cfg3.block_len = 3; // response 16 not divisible
    CHECK_THROWS_AS(run(net, kPrompt, cfg3), Error);
}

TEST_CASE("certainty trace: shape, committed rows, prompt rows") {
    const auto net = tiny_net(11);
    DecodeConfig cfg = base_cfg(Strategy::one_per_step);
    cfg.record_trace = true;
    const DecodeResult r = run(net, kPrompt, cfg);
    REQUIRE(r.trace.has_value());
    const CertaintyTrace& tr = *r.trace;
    CHECK(tr.steps_used == r.steps_used);
    CHECK(static_cast<int>(tr.confidence.size()) == tr.steps_used * tr.total_len);

    for (int p = 0; p < tr.total_len; ++p) {
        const int cs = tr.commit_step[static_cast<size_t>(p)];
        if (p < 4) {
            CHECK(cs == 0); // prompt
        } else {
            CHECK(cs >= 1);
        }
        for (int s = 0; s < tr.steps_used; ++s) {
            const double conf = tr.conf_at(s, p);
            CHECK(conf >= 0.0);
            CHECK(conf <= 1.0);
            // committed (or prompt) positions read 1.0 afterwards
            if (cs == 0 || s >= cs) {
                CHECK(conf == 1.0);
                CHECK(tr.entropy_at(s, p) == 0.0);
            }
        }
    }
}

TEST_CASE("trace csv export: header and one row per (step, position)") {
    const auto net = tiny_net(12);
    DecodeConfig cfg = base_cfg(Strategy::entropy_threshold);
    cfg.threshold = 1e18;
    cfg.record_trace = true;
    const DecodeResult r = run(net, kPrompt, cfg);
    std::ostringstream out;
    write_trace_csv(out, *r.trace);
    std::istringstream in(out.str());
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "step,position,confidence,entropy,committed");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
    }
    CHECK(rows == r.steps_used * 20);
}

TEST_CASE("teacher trajectory: deterministic greedy full-length decode") {
    const auto net = tiny_net(13);
    const TrajectoryRecord a = teacher_trajectory(net, kPrompt, 20, 4);
    const TrajectoryRecord b = teacher_trajectory(net, kPrompt, 20, 4);
    CHECK(a.prompt_ids == kPrompt);
    CHECK(a.response_ids == b.response_ids);
    CHECK(static_cast<int>(a.response_ids.size()) == 16);
    CHECK(a.block_len == 4);
    CHECK_FALSE(a.correct);
    for (int t : a.response_ids) {
        CHECK(t != kMaskId);
    }
    // matches a one_per_step decode of the same prompt
    const DecodeResult r = run(net, kPrompt, base_cfg(Strategy::one_per_step));
    CHECK(r.steps_used == 16);
    const std::vector<int> resp(r.output.tokens.begin() + 4, r.output.tokens.end());
    CHECK(resp == a.response_ids);
}

TEST_CASE("EOS early fill skips all-future blocks without model passes") {
    // rigged model: EOS is always the most certain token
    const ForwardFn eos_model = [](const std::vector<int>& ids) {
        MatF logits(static_cast<int>(ids.size()), 11);
        for (int r = 0; r < logits.rows; ++r) {
            logits.at(r, kEosId) = 25.0;
        }
        return logits;
    };
    DecodeConfig cfg = base_cfg(Strategy::entropy_threshold);
    cfg.threshold = 0.5;
    cfg.record_trace = true;

    const DecodeResult without = run(eos_model, kPrompt, cfg);
    CHECK(without.steps_used == 4); // one pass per block

    cfg.eos_early_fill = true;
    const DecodeResult with = run(eos_model, kPrompt, cfg);
    CHECK(with.steps_used == 1);
    for (size_t i = 4; i < with.output.tokens.size(); ++i) {
        CHECK(with.output.tokens[i] == kEosId);
    }
    CHECK(with.output.tokens == without.output.tokens);
}

TEST_CASE("temperature sampling is seed-deterministic and never emits MASK") {
    const auto net = tiny_net(14);
    DecodeConfig cfg = base_cfg(Strategy::one_per_step);
    cfg.temperature = 1.0;
    cfg.seed = 99;
    const DecodeResult a = run(net, kPrompt, cfg);
    const DecodeResult b = run(net, kPrompt, cfg);
    CHECK(a.output.tokens == b.output.tokens);
    for (int t : a.output.tokens) {
        CHECK(t != kMaskId);
    }
    cfg.seed = 100;
    const DecodeResult c = run(net, kPrompt, cfg);
    // different seed, same accounting
    CHECK(c.steps_used == a.steps_used);
}
