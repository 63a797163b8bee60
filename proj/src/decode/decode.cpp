#include "mdlm/decode.hpp"

#include <algorithm>
#include <cmath>

#include "mdlm/csv.hpp"
#include "mdlm/kernels.hpp"
#include "mdlm/rng.hpp"

namespace mdlm::decode {

const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::one_per_step: return "one_per_step";
        case Strategy::fixed_steps: return "fixed_steps";
        case Strategy::conf_threshold: return "conf_threshold";
        case Strategy::entropy_threshold: return "entropy_threshold";
    }
    return "unknown";
}

Strategy parse_strategy(const std::string& name) {
    if (name == "one_per_step") return Strategy::one_per_step;
    if (name == "fixed_steps") return Strategy::fixed_steps;
    if (name == "conf_threshold") return Strategy::conf_threshold;
    if (name == "entropy_threshold") return Strategy::entropy_threshold;
    raise(ErrorCategory::config, "unknown decode strategy: " + name);
}

namespace {

// Per-position pass statistics for a masked position.
struct Candidate {
    int pos = 0;
    int token = 0;      // token a commitment would write
    double conf = 0.0;  // probability of that token at temperature 1
    double entropy = 0.0;
};

// Greedy prediction for a row: argmax with smallest-id tie-break. MASK is
// never a candidate token.
int greedy_token(const float* probs, int vocab) {
    int best = -1;
    for (int j = 0; j < vocab; ++j) {
        if (j == kMaskId) {
            continue;
        }
        if (best < 0 || probs[j] > probs[best]) {
            best = j;
        }
    }
    return best;
}

} // namespace

DecodeResult run(const ForwardFn& forward, const std::vector<int>& prompt_ids,
                 const DecodeConfig& cfg) {
    const int prompt_len = static_cast<int>(prompt_ids.size());
    require(cfg.total_len >= 1, ErrorCategory::config, "decode: total_len must be positive");
    require(cfg.block_len >= 1, ErrorCategory::config, "decode: block_len must be positive");
    require(prompt_len < cfg.total_len, ErrorCategory::input,
            "decode: prompt length " + std::to_string(prompt_len) +
                " must be shorter than total_len " + std::to_string(cfg.total_len));
    const int resp = cfg.total_len - prompt_len;
    require(resp % cfg.block_len == 0, ErrorCategory::config,
            "decode: response length " + std::to_string(resp) +
                " not divisible by block_len " + std::to_string(cfg.block_len));
    require(cfg.threshold >= 0.0, ErrorCategory::config, "decode: threshold must be >= 0");
    const int num_blocks = resp / cfg.block_len;
    int block_budget = 0;
    if (cfg.strategy == Strategy::fixed_steps) {
        require(cfg.steps >= 1, ErrorCategory::config, "decode: steps must be >= 1");
        require(cfg.steps % num_blocks == 0, ErrorCategory::config,
                "decode: steps " + std::to_string(cfg.steps) +
                    " not divisible by block count " + std::to_string(num_blocks));
        block_budget = cfg.steps / num_blocks;
    }

    std::vector<int> tokens = prompt_ids;
    tokens.resize(static_cast<size_t>(cfg.total_len), kMaskId);

    RngStream rng(cfg.seed);
    CertaintyTrace trace;
    trace.total_len = cfg.total_len;
    trace.commit_step.assign(static_cast<size_t>(cfg.total_len), 0);

    std::vector<float> probs(static_cast<size_t>(1), 0.0f);
    int steps_used = 0;

    for (int block = 0; block < num_blocks; ++block) {
        const int begin = prompt_len + block * cfg.block_len;
        const int end = begin + cfg.block_len;
        int passes_in_block = 0;

        for (;;) {
            std::vector<int> masked;
            for (int i = begin; i < end; ++i) {
                if (tokens[static_cast<size_t>(i)] == kMaskId) {
                    masked.push_back(i);
                }
            }
            if (masked.empty()) {
                break;
            }

            const MatF logits = forward(tokens);
            ++steps_used;
            ++passes_in_block;
            const int vocab = logits.cols;
            probs.resize(static_cast<size_t>(vocab));

            std::vector<Candidate> cands;
            cands.reserve(masked.size());
            for (int i : masked) {
                kern::softmax_row(logits.row(i), probs.data(), vocab, 1.0);
                Candidate c;
                c.pos = i;
                // confidence is the max softmax probability at temperature 1
                // regardless of the sampling temperature
                const int greedy = greedy_token(probs.data(), vocab);
                c.conf = static_cast<double>(probs[static_cast<size_t>(greedy)]);
                c.entropy = kern::entropy_row(logits.row(i), vocab, 1.0);
                if (cfg.temperature > 0.0) {
                    // draw from softmax(logits / temperature), MASK excluded
                    std::vector<float> tp(static_cast<size_t>(vocab));
                    kern::softmax_row(logits.row(i), tp.data(), vocab, 1.0 / cfg.temperature);
                    tp[kMaskId] = 0.0f;
                    double total = 0.0;
                    for (int j = 0; j < vocab; ++j) {
                        total += tp[static_cast<size_t>(j)];
                    }
                    double r = rng.uniform01() * total;
                    int chosen = greedy;
                    for (int j = 0; j < vocab; ++j) {
                        if (j == kMaskId) {
                            continue;
                        }
                        r -= tp[static_cast<size_t>(j)];
                        if (r < 0.0) {
                            chosen = j;
                            break;
                        }
                    }
                    c.token = chosen;
                } else {
                    c.token = greedy;
                }
                cands.push_back(c);
            }

            if (cfg.record_trace) {
                const size_t base = trace.confidence.size();
                trace.confidence.resize(base + static_cast<size_t>(cfg.total_len), 1.0);
                trace.entropy.resize(base + static_cast<size_t>(cfg.total_len), 0.0);
                // uncommitted response positions (any block) record live stats
                for (int i = prompt_len; i < cfg.total_len; ++i) {
                    if (tokens[static_cast<size_t>(i)] != kMaskId) {
                        continue;
                    }
                    kern::softmax_row(logits.row(i), probs.data(), vocab, 1.0);
                    const int tok = greedy_token(probs.data(), vocab);
                    trace.confidence[base + static_cast<size_t>(i)] =
                        static_cast<double>(probs[static_cast<size_t>(tok)]);
                    trace.entropy[base + static_cast<size_t>(i)] =
                        kern::entropy_row(logits.row(i), vocab, 1.0);
                }
                ++trace.steps_used;
            }

            // pick the commit set
            std::vector<const Candidate*> commit;
            switch (cfg.strategy) {
                case Strategy::one_per_step: {
                    const Candidate* best = &cands[0];
                    for (const auto& c : cands) {
                        if (c.conf > best->conf) {
                            best = &c;
                        }
                    }
                    commit.push_back(best);
                    break;
                }
                case Strategy::fixed_steps: {
                    const int passes_left = block_budget - (passes_in_block - 1);
                    int count;
                    if (passes_left <= 1) {
                        count = static_cast<int>(cands.size());
                    } else {
                        count = (static_cast<int>(cands.size()) + passes_left - 1) / passes_left;
                    }
                    std::vector<const Candidate*> sorted;
                    sorted.reserve(cands.size());
                    for (const auto& c : cands) {
                        sorted.push_back(&c);
                    }
                    std::sort(sorted.begin(), sorted.end(),
                              [](const Candidate* a, const Candidate* b) {
                                  if (a->conf != b->conf) {
                                      return a->conf > b->conf;
                                  }
                                  return a->pos < b->pos;
                              });
                    sorted.resize(static_cast<size_t>(std::min<int>(count, static_cast<int>(sorted.size()))));
                    commit = std::move(sorted);
                    break;
                }
                case Strategy::conf_threshold: {
                    for (const auto& c : cands) {
                        if (c.conf >= cfg.threshold) {
                            commit.push_back(&c);
                        }
                    }
                    if (commit.empty()) {
                        const Candidate* best = &cands[0];
                        for (const auto& c : cands) {
                            if (c.conf > best->conf) {
                                best = &c;
                            }
                        }
                        commit.push_back(best);
                    }
                    break;
                }
                case Strategy::entropy_threshold: {
                    for (const auto& c : cands) {
                        if (c.entropy <= cfg.threshold) {
                            commit.push_back(&c);
                        }
                    }
                    if (commit.empty()) {
                        const Candidate* best = &cands[0];
                        for (const auto& c : cands) {
                            if (c.entropy < best->entropy) {
                                best = &c;
                            }
                        }
                        commit.push_back(best);
                    }
                    break;
                }
            }

            for (const Candidate* c : commit) {
                tokens[static_cast<size_t>(c->pos)] = c->token;
                trace.commit_step[static_cast<size_t>(c->pos)] = steps_used;
            }
        }

        if (cfg.eos_early_fill && block < num_blocks - 1) {
            bool saw_eos = false;
            for (int i = prompt_len; i < end; ++i) {
                if (tokens[static_cast<size_t>(i)] == kEosId) {
                    saw_eos = true;
                    break;
                }
            }
            if (saw_eos) {
                // the whole remaining suffix lies in future blocks
                for (int i = end; i < cfg.total_len; ++i) {
                    tokens[static_cast<size_t>(i)] = kEosId;
                    trace.commit_step[static_cast<size_t>(i)] = steps_used;
                }
                break;
            }
        }
    }

    DecodeResult res;
    res.output = TokenSeq(std::move(tokens), prompt_len);
    res.steps_used = steps_used;
    res.tokens_per_step = static_cast<double>(resp) / static_cast<double>(steps_used);
    if (cfg.record_trace) {
        res.trace = std::move(trace);
    }
    return res;
}

DecodeResult run(const model::Network<float>& net, const std::vector<int>& prompt_ids,
                 const DecodeConfig& cfg) {
    return run([&net](const std::vector<int>& ids) { return net.forward(ids); }, prompt_ids,
               cfg);
}

TrajectoryRecord teacher_trajectory(const model::Network<float>& net,
                                    const std::vector<int>& prompt_ids, int total_len,
                                    int block_len) {
    DecodeConfig cfg;
    cfg.strategy = Strategy::one_per_step;
    cfg.total_len = total_len;
    cfg.block_len = block_len;
    cfg.temperature = 0.0;
    const DecodeResult res = run(net, prompt_ids, cfg);

    TrajectoryRecord rec;
    rec.prompt_ids = prompt_ids;
    rec.response_ids.assign(res.output.tokens.begin() + static_cast<long>(prompt_ids.size()),
                            res.output.tokens.end());
    rec.block_len = block_len;
    return rec;
}

DecodeResult trace_certainty(const model::Network<float>& net,
                             const std::vector<int>& prompt_ids, DecodeConfig cfg) {
    cfg.record_trace = true;
    return run(net, prompt_ids, cfg);
}

void write_trace_csv(std::ostream& out, const CertaintyTrace& trace) {
    out << "step,position,confidence,entropy,committed\n";
    for (int s = 0; s < trace.steps_used; ++s) {
        for (int p = 0; p < trace.total_len; ++p) {
            const int cs = trace.commit_step[static_cast<size_t>(p)];
            const bool committed = cs > 0 ? cs <= s : true; // prompt counts as committed
            out << (s + 1) << ',' << p << ',' << csv::fmt(trace.conf_at(s, p)) << ','
                << csv::fmt(trace.entropy_at(s, p)) << ',' << (committed ? 1 : 0) << '\n';
        }
    }
}

} // namespace mdlm::decode
