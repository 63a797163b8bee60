#include "mdlm/model.hpp"

namespace mdlm {

const char* to_string(ErrorCategory cat) {
    switch (cat) {
        case ErrorCategory::config: return "config";
        case ErrorCategory::input: return "input";
        case ErrorCategory::domain: return "domain";
        case ErrorCategory::usage: return "usage";
        case ErrorCategory::dataset: return "dataset";
        case ErrorCategory::io: return "io";
        case ErrorCategory::numeric: return "numeric";
    }
    return "unknown";
}

} // namespace mdlm

namespace mdlm::model {

const char* to_string(Role role) {
    return role == Role::teacher ? "teacher" : "student";
}

void ModelConfig::validate() const {
    require(vocab_size >= 3, ErrorCategory::config,
            "vocab_size must be >= 3 (MASK, EOS and one content token), got " +
                std::to_string(vocab_size));
    require(max_len >= 1, ErrorCategory::config,
            "max_len must be positive, got " + std::to_string(max_len));
    require(num_layers >= 0, ErrorCategory::config,
            "num_layers must be non-negative, got " + std::to_string(num_layers));
    require(num_heads >= 1, ErrorCategory::config,
            "num_heads must be positive, got " + std::to_string(num_heads));
    require(hidden_dim >= 1, ErrorCategory::config,
            "hidden_dim must be positive, got " + std::to_string(hidden_dim));
    require(hidden_dim % num_heads == 0, ErrorCategory::config,
            "hidden_dim (" + std::to_string(hidden_dim) + ") not divisible by num_heads (" +
                std::to_string(num_heads) + ")");
    require(ffn_dim >= 1, ErrorCategory::config,
            "ffn_dim must be positive, got " + std::to_string(ffn_dim));
    require(adapter_rank >= 0, ErrorCategory::config,
            "adapter_rank must be non-negative, got " + std::to_string(adapter_rank));
}

bool ModelConfig::same_architecture(const ModelConfig& o) const {
    return vocab_size == o.vocab_size && max_len == o.max_len && num_layers == o.num_layers &&
           num_heads == o.num_heads && hidden_dim == o.hidden_dim && ffn_dim == o.ffn_dim &&
           adapter_rank == o.adapter_rank;
}

namespace {

constexpr float kInitStd = 0.02f;

int add_tensor(ParamSet<float>& ps, const std::string& name, int rows, int cols,
               bool trainable) {
    ParamTensor<float> t;
    t.name = name;
    t.value = MatF(rows, cols);
    t.grad = MatF(rows, cols);
    t.trainable = trainable;
    ps.tensors.push_back(std::move(t));
    return static_cast<int>(ps.tensors.size() - 1);
}

void fill_gauss(MatF& m, RngStream& rng, float std) {
    for (auto& v : m.data) {
        v = static_cast<float>(rng.gauss()) * std;
    }
}

void fill_const(MatF& m, float c) {
    for (auto& v : m.data) {
        v = c;
    }
}

LinearRefs add_linear(ParamSet<float>& ps, RngStream& rng, const std::string& name,
                      int in_dim, int out_dim, int rank, bool base_trainable) {
    LinearRefs lin;
    lin.w = add_tensor(ps, name + ".w", in_dim, out_dim, base_trainable);
    lin.b = add_tensor(ps, name + ".b", 1, out_dim, base_trainable);
    fill_gauss(ps.tensors[lin.w].value, rng, kInitStd);
    if (rank > 0) {
        lin.lora_a = add_tensor(ps, name + ".lora_a", in_dim, rank, true);
        lin.lora_b = add_tensor(ps, name + ".lora_b", rank, out_dim, true);
        fill_gauss(ps.tensors[lin.lora_a].value, rng, kInitStd);
        // lora_b starts at zero so the adapted map equals the base map
    }
    return lin;
}

} // namespace

ParamSet<float> init_params(const ModelConfig& cfg, Role role) {
    cfg.validate();
    RngStream rng(cfg.seed);

    ParamSet<float> ps;
    ps.config = cfg;
    ps.role = role;
    const bool base_trainable = cfg.adapter_rank == 0;

    ps.tok_embed = add_tensor(ps, "tok_embed", cfg.vocab_size, cfg.hidden_dim, base_trainable);
    fill_gauss(ps.tensors[ps.tok_embed].value, rng, kInitStd);
    ps.pos_embed = add_tensor(ps, "pos_embed", cfg.max_len, cfg.hidden_dim, base_trainable);
    fill_gauss(ps.tensors[ps.pos_embed].value, rng, kInitStd);

    ps.layers.reserve(static_cast<size_t>(cfg.num_layers));
    for (int l = 0; l < cfg.num_layers; ++l) {
        const std::string prefix = "layer" + std::to_string(l);
        LayerRefs lr;
        lr.ln1_g = add_tensor(ps, prefix + ".ln1.g", 1, cfg.hidden_dim, base_trainable);
        lr.ln1_b = add_tensor(ps, prefix + ".ln1.b", 1, cfg.hidden_dim, base_trainable);
        fill_const(ps.tensors[lr.ln1_g].value, 1.0f);
        lr.qkv = add_linear(ps, rng, prefix + ".qkv", cfg.hidden_dim, 3 * cfg.hidden_dim,
                            cfg.adapter_rank, base_trainable);
        lr.proj = add_linear(ps, rng, prefix + ".proj", cfg.hidden_dim, cfg.hidden_dim,
                             cfg.adapter_rank, base_trainable);
        lr.ln2_g = add_tensor(ps, prefix + ".ln2.g", 1, cfg.hidden_dim, base_trainable);
        lr.ln2_b = add_tensor(ps, prefix + ".ln2.b", 1, cfg.hidden_dim, base_trainable);
        fill_const(ps.tensors[lr.ln2_g].value, 1.0f);
        lr.up = add_linear(ps, rng, prefix + ".ffn_up", cfg.hidden_dim, cfg.ffn_dim,
                           cfg.adapter_rank, base_trainable);
        lr.down = add_linear(ps, rng, prefix + ".ffn_down", cfg.ffn_dim, cfg.hidden_dim,
                             cfg.adapter_rank, base_trainable);
        ps.layers.push_back(lr);
    }

    if (cfg.num_layers > 0) {
        ps.lnf_g = add_tensor(ps, "ln_final.g", 1, cfg.hidden_dim, base_trainable);
        ps.lnf_b = add_tensor(ps, "ln_final.b", 1, cfg.hidden_dim, base_trainable);
        fill_const(ps.tensors[ps.lnf_g].value, 1.0f);
    }

    // Unembedding never carries adapters; frozen alongside the base in
    // adapter mode.
    ps.unembed.w = add_tensor(ps, "unembed.w", cfg.hidden_dim, cfg.vocab_size, base_trainable);
    ps.unembed.b = add_tensor(ps, "unembed.b", 1, cfg.vocab_size, base_trainable);
    fill_gauss(ps.tensors[ps.unembed.w].value, rng, kInitStd);

    return ps;
}

} // namespace mdlm::model
