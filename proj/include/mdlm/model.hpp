#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mdlm/common.hpp"
#include "mdlm/kernels.hpp"
#include "mdlm/mat.hpp"
#include "mdlm/rng.hpp"
#include "mdlm/tokens.hpp"

namespace mdlm::model {

// ---------------------------------------------------------------- config ---

struct ModelConfig {
    int vocab_size = 0;
    int max_len = 0;
    int num_layers = 4;
    int num_heads = 4;
    int hidden_dim = 128;
    int ffn_dim = 512;
    int adapter_rank = 0; // 0 = full-parameter training
    uint64_t seed = 0;

    void validate() const;
    // Architecture agreement for checkpoint loading; seed is provenance, not
    // architecture.
    bool same_architecture(const ModelConfig& o) const;
};

enum class Role : uint8_t { teacher = 0, student = 1 };

const char* to_string(Role role);

// ------------------------------------------------------------ parameters ---

template <class S>
struct ParamTensor {
    std::string name;
    Mat<S> value;
    Mat<S> grad;
    bool trainable = true;
};

struct LinearRefs {
    int w = -1;
    int b = -1;
    int lora_a = -1; // [in, rank]
    int lora_b = -1; // [rank, out], zero-initialized
};

struct LayerRefs {
    int ln1_g = -1, ln1_b = -1;
    LinearRefs qkv;  // [H, 3H]
    LinearRefs proj; // [H, H]
    int ln2_g = -1, ln2_b = -1;
    LinearRefs up;   // [H, F]
    LinearRefs down; // [F, H]
};

template <class S>
struct ParamSet {
    ModelConfig config;
    Role role = Role::teacher;
    std::vector<ParamTensor<S>> tensors;

    int tok_embed = -1; // [V, H]
    int pos_embed = -1; // [max_len, H]
    std::vector<LayerRefs> layers;
    int lnf_g = -1, lnf_b = -1;
    LinearRefs unembed; // [H, V]

    void zero_grads() {
        for (auto& t : tensors) {
            t.grad.zero();
        }
    }

    template <class U>
    ParamSet<U> cast() const {
        ParamSet<U> out;
        out.config = config;
        out.role = role;
        out.tensors.reserve(tensors.size());
        for (const auto& t : tensors) {
            ParamTensor<U> pt;
            pt.name = t.name;
            pt.value = t.value.template cast<U>();
            pt.grad = Mat<U>(t.value.rows, t.value.cols);
            pt.trainable = t.trainable;
            out.tensors.push_back(std::move(pt));
        }
        out.tok_embed = tok_embed;
        out.pos_embed = pos_embed;
        out.layers = layers;
        out.lnf_g = lnf_g;
        out.lnf_b = lnf_b;
        out.unembed = unembed;
        return out;
    }
};

// Deterministic initialization from config.seed; two inits with an equal
// config are bitwise identical. Weights are drawn in float regardless of S so
// the float and double instantiations start from the same values.
ParamSet<float> init_params(const ModelConfig& cfg, Role role = Role::teacher);

// ------------------------------------------------------------------ tape ---

using NodeId = int32_t;

// Scalar loss on a logit matrix: returns the value and accumulates (+=)
// dLoss/dLogits into *grad when grad is non-null. The losses module provides
// these; keeping the closed-form pair together is what the finite-difference
// suite checks.
template <class S>
using LogitLossFn = std::function<double(const Mat<S>& logits, Mat<S>* grad)>;

enum class OpKind : uint8_t {
    embed,      // gather rows of a param table
    matmul,     // [R,K] x [K,N]
    add,        // elementwise, same shape
    add_bias,   // + row vector [1,N]
    scale,      // * constant
    slice_cols, // column range copy
    silu,
    layer_norm, // per-row, with gamma/beta [1,N]
    attention,  // bidirectional multi-head softmax(QK^T/sqrt(dh))V
    param_ref,  // leaf view of a parameter tensor
    input,      // leaf constant
    logit_loss, // scalar loss with closed-form logit gradient
};

// Recorded forward computation (define-by-run tape). record_forward builds
// one; set_loss attaches the scalar objective; backward accumulates into the
// parameter gradients. A graph can be consumed by backward exactly once.
template <class S>
class Graph {
public:
    explicit Graph(const ParamSet<S>* params) : params_(params) {}

    struct Node {
        OpKind kind;
        NodeId a = -1, b = -1, c = -1;
        int param_index = -1;
        int col0 = 0;
        int num_heads = 0;
        int seq_len = 0;
        S scale_c = S(0);
        S eps = S(0);
        std::vector<int> ids;
        Mat<S> value;
        Mat<S> grad;
        Mat<S> aux;
        LogitLossFn<S> loss_fn;
        double loss_value = 0.0;
    };

    const Mat<S>& value(NodeId id) const {
        const Node& n = nodes_[id];
        if (n.kind == OpKind::param_ref) {
            return params_->tensors[n.param_index].value;
        }
        return n.value;
    }

    NodeId input(Mat<S> v) {
        Node n;
        n.kind = OpKind::input;
        n.value = std::move(v);
        return push(std::move(n));
    }

    NodeId param(int param_index) {
        Node n;
        n.kind = OpKind::param_ref;
        n.param_index = param_index;
        return push(std::move(n));
    }

    NodeId embed(NodeId table, std::vector<int> ids) {
        const Mat<S>& tab = value(table);
        Node n;
        n.kind = OpKind::embed;
        n.a = table;
        n.value = Mat<S>(static_cast<int>(ids.size()), tab.cols);
        for (int r = 0; r < n.value.rows; ++r) {
            const S* src = tab.row(ids[static_cast<size_t>(r)]);
            std::copy(src, src + tab.cols, n.value.row(r));
        }
        n.ids = std::move(ids);
        return push(std::move(n));
    }

    NodeId matmul(NodeId a, NodeId b) {
        const Mat<S>& av = value(a);
        const Mat<S>& bv = value(b);
        Node n;
        n.kind = OpKind::matmul;
        n.a = a;
        n.b = b;
        n.value = Mat<S>(av.rows, bv.cols);
        kern::gemm_nn(av.data.data(), bv.data.data(), n.value.data.data(),
                      av.rows, av.cols, bv.cols, false);
        return push(std::move(n));
    }

    NodeId add(NodeId a, NodeId b) {
        const Mat<S>& av = value(a);
        const Mat<S>& bv = value(b);
        Node n;
        n.kind = OpKind::add;
        n.a = a;
        n.b = b;
        n.value = av;
        kern::add_inplace(n.value.data.data(), bv.data.data(), static_cast<int>(bv.size()));
        return push(std::move(n));
    }

    NodeId add_bias(NodeId x, NodeId bias) {
        const Mat<S>& xv = value(x);
        const Mat<S>& bv = value(bias);
        Node n;
        n.kind = OpKind::add_bias;
        n.a = x;
        n.b = bias;
        n.value = xv;
        for (int r = 0; r < n.value.rows; ++r) {
            kern::add_inplace(n.value.row(r), bv.data.data(), bv.cols);
        }
        return push(std::move(n));
    }

    NodeId scale(NodeId a, S c) {
        const Mat<S>& av = value(a);
        Node n;
        n.kind = OpKind::scale;
        n.a = a;
        n.scale_c = c;
        n.value = Mat<S>(av.rows, av.cols);
        for (size_t i = 0; i < av.size(); ++i) {
            n.value.data[i] = av.data[i] * c;
        }
        return push(std::move(n));
    }

    NodeId slice_cols(NodeId a, int col0, int ncols) {
        const Mat<S>& av = value(a);
        Node n;
        n.kind = OpKind::slice_cols;
        n.a = a;
        n.col0 = col0;
        n.value = Mat<S>(av.rows, ncols);
        for (int r = 0; r < av.rows; ++r) {
            const S* src = av.row(r) + col0;
            std::copy(src, src + ncols, n.value.row(r));
        }
        return push(std::move(n));
    }

    NodeId silu(NodeId a) {
        const Mat<S>& av = value(a);
        Node n;
        n.kind = OpKind::silu;
        n.a = a;
        n.value = Mat<S>(av.rows, av.cols);
        kern::silu(av.data.data(), n.value.data.data(), static_cast<int>(av.size()));
        return push(std::move(n));
    }

    NodeId layer_norm(NodeId x, NodeId gamma, NodeId beta, S eps) {
        const Mat<S>& xv = value(x);
        const Mat<S>& gv = value(gamma);
        const Mat<S>& bv = value(beta);
        Node n;
        n.kind = OpKind::layer_norm;
        n.a = x;
        n.b = gamma;
        n.c = beta;
        n.eps = eps;
        n.value = Mat<S>(xv.rows, xv.cols);
        n.aux = Mat<S>(xv.rows, 2); // per-row mean, rstd
        const int cols = xv.cols;
        for (int r = 0; r < xv.rows; ++r) {
            const S* xr = xv.row(r);
            double mean = 0.0;
            for (int j = 0; j < cols; ++j) {
                mean += static_cast<double>(xr[j]);
            }
            mean /= cols;
            double var = 0.0;
            for (int j = 0; j < cols; ++j) {
                const double d = static_cast<double>(xr[j]) - mean;
                var += d * d;
            }
            var /= cols;
            const double rstd = 1.0 / std::sqrt(var + static_cast<double>(eps));
            n.aux.at(r, 0) = static_cast<S>(mean);
            n.aux.at(r, 1) = static_cast<S>(rstd);
            S* yr = n.value.row(r);
            for (int j = 0; j < cols; ++j) {
                const S xhat = static_cast<S>((static_cast<double>(xr[j]) - mean) * rstd);
                yr[j] = gv.data[j] * xhat + bv.data[j];
            }
        }
        return push(std::move(n));
    }

    // q, k, v: [batch*seq_len, H]. Bidirectional (no causal mask); softmax
    // probabilities are cached per (sample, head) for the backward pass.
    NodeId attention(NodeId q, NodeId k, NodeId v, int num_heads, int seq_len) {
        const Mat<S>& qv = value(q);
        const int hidden = qv.cols;
        const int batch = qv.rows / seq_len;
        const int dh = hidden / num_heads;
        const S inv_sqrt_dh = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));

        Node n;
        n.kind = OpKind::attention;
        n.a = q;
        n.b = k;
        n.c = v;
        n.num_heads = num_heads;
        n.seq_len = seq_len;
        n.value = Mat<S>(qv.rows, hidden);
        n.aux = Mat<S>(batch * num_heads * seq_len, seq_len);

        const Mat<S>& kv = value(k);
        const Mat<S>& vv = value(v);
        Mat<S> qp(seq_len, dh), kp(seq_len, dh), vp(seq_len, dh), op(seq_len, dh);
        Mat<S> scores(seq_len, seq_len);
        for (int bi = 0; bi < batch; ++bi) {
            for (int h = 0; h < num_heads; ++h) {
                pack_head(qv, bi, h, seq_len, dh, inv_sqrt_dh, qp);
                pack_head(kv, bi, h, seq_len, dh, S(1), kp);
                pack_head(vv, bi, h, seq_len, dh, S(1), vp);
                kern::gemm_nt(qp.data.data(), kp.data.data(), scores.data.data(),
                              seq_len, dh, seq_len, false);
                S* probs = n.aux.row((bi * num_heads + h) * seq_len);
                for (int r = 0; r < seq_len; ++r) {
                    kern::softmax_row(scores.row(r), probs + static_cast<size_t>(r) * seq_len,
                                      seq_len, 1.0);
                }
                kern::gemm_nn(probs, vp.data.data(), op.data.data(),
                              seq_len, seq_len, dh, false);
                unpack_head(op, bi, h, seq_len, dh, n.value, false);
            }
        }
        return push(std::move(n));
    }

    // Attaches the scalar training objective. The logit gradient is computed
    // here (closed form) and cached for backward.
    NodeId set_loss(NodeId logits, const LogitLossFn<S>& fn) {
        require(loss_node_ < 0, ErrorCategory::usage, "Graph: loss already attached");
        const Mat<S>& lv = value(logits);
        Node n;
        n.kind = OpKind::logit_loss;
        n.a = logits;
        n.aux = Mat<S>(lv.rows, lv.cols);
        n.loss_value = fn(lv, &n.aux);
        n.value = Mat<S>(1, 1);
        n.value.at(0, 0) = static_cast<S>(n.loss_value);
        const NodeId id = push(std::move(n));
        loss_node_ = id;
        return id;
    }

    bool has_loss() const { return loss_node_ >= 0; }
    bool consumed() const { return consumed_; }
    double loss_value() const {
        require(loss_node_ >= 0, ErrorCategory::usage, "Graph: no loss attached");
        return nodes_[loss_node_].loss_value;
    }

    // Reverse pass from the attached loss; accumulates into params.grad.
    void backward(ParamSet<S>& params) {
        require(loss_node_ >= 0, ErrorCategory::usage,
                "Graph: backward called with no recorded loss");
        require(!consumed_, ErrorCategory::usage, "Graph: backward called on a consumed graph");
        require(&params == params_, ErrorCategory::usage,
                "Graph: backward called with a different ParamSet than recorded");
        consumed_ = true;

        ensure_grad(loss_node_);
        nodes_[loss_node_].grad.at(0, 0) = S(1);

        for (NodeId id = static_cast<NodeId>(nodes_.size()) - 1; id >= 0; --id) {
            Node& n = nodes_[id];
            if (n.grad.size() == 0) {
                continue; // no gradient reached this node
            }
            switch (n.kind) {
                case OpKind::input:
                case OpKind::param_ref:
                    break;
                case OpKind::embed: {
                    if (needs_grad(n.a)) {
                        Mat<S>& tg = grad_of(n.a, params);
                        for (int r = 0; r < n.grad.rows; ++r) {
                            kern::add_inplace(tg.row(n.ids[static_cast<size_t>(r)]),
                                              n.grad.row(r), tg.cols);
                        }
                    }
                    break;
                }
                case OpKind::matmul: {
                    const Mat<S>& av = value(n.a);
                    const Mat<S>& bv = value(n.b);
                    // dA += dC * B^T ; dB += A^T * dC (skipped for frozen params)
                    if (needs_grad(n.a)) {
                        Mat<S>& ga = grad_of(n.a, params);
                        kern::gemm_nt(n.grad.data.data(), bv.data.data(), ga.data.data(),
                                      av.rows, bv.cols, av.cols, true);
                    }
                    if (needs_grad(n.b)) {
                        Mat<S>& gb = grad_of(n.b, params);
                        kern::gemm_tn(av.data.data(), n.grad.data.data(), gb.data.data(),
                                      av.cols, av.rows, bv.cols, true);
                    }
                    break;
                }
                case OpKind::add: {
                    Mat<S>& ga = grad_of(n.a, params);
                    Mat<S>& gb = grad_of(n.b, params);
                    kern::add_inplace(ga.data.data(), n.grad.data.data(),
                                      static_cast<int>(n.grad.size()));
                    kern::add_inplace(gb.data.data(), n.grad.data.data(),
                                      static_cast<int>(n.grad.size()));
                    break;
                }
                case OpKind::add_bias: {
                    Mat<S>& gx = grad_of(n.a, params);
                    Mat<S>& gb = grad_of(n.b, params);
                    kern::add_inplace(gx.data.data(), n.grad.data.data(),
                                      static_cast<int>(n.grad.size()));
                    for (int r = 0; r < n.grad.rows; ++r) {
                        kern::add_inplace(gb.data.data(), n.grad.row(r), gb.cols);
                    }
                    break;
                }
                case OpKind::scale: {
                    Mat<S>& ga = grad_of(n.a, params);
                    kern::axpy(ga.data.data(), n.grad.data.data(), n.scale_c,
                               static_cast<int>(n.grad.size()));
                    break;
                }
                case OpKind::slice_cols: {
                    Mat<S>& ga = grad_of(n.a, params);
                    for (int r = 0; r < n.grad.rows; ++r) {
                        kern::add_inplace(ga.row(r) + n.col0, n.grad.row(r), n.grad.cols);
                    }
                    break;
                }
                case OpKind::silu: {
                    const Mat<S>& av = value(n.a);
                    Mat<S>& ga = grad_of(n.a, params);
                    kern::silu_backward(av.data.data(), n.grad.data.data(), ga.data.data(),
                                        static_cast<int>(av.size()));
                    break;
                }
                case OpKind::layer_norm:
                    backward_layer_norm(n, params);
                    break;
                case OpKind::attention:
                    backward_attention(n, params);
                    break;
                case OpKind::logit_loss: {
                    Mat<S>& gl = grad_of(n.a, params);
                    kern::axpy(gl.data.data(), n.aux.data.data(), n.grad.at(0, 0),
                               static_cast<int>(n.aux.size()));
                    break;
                }
            }
        }
    }

    size_t num_nodes() const { return nodes_.size(); }

private:
    NodeId push(Node n) {
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    void ensure_grad(NodeId id) {
        Node& n = nodes_[id];
        if (n.grad.size() == 0) {
            const Mat<S>& v = value(id);
            n.grad = Mat<S>(v.rows, v.cols);
        }
    }

    // Frozen parameters (adapter mode) never receive updates, so their
    // gradient GEMMs can be skipped.
    bool needs_grad(NodeId id) const {
        const Node& n = nodes_[id];
        if (n.kind == OpKind::param_ref) {
            return params_->tensors[n.param_index].trainable;
        }
        return true;
    }

    // Gradient buffer for a node; param_ref nodes resolve to the parameter's
    // own gradient tensor.
    Mat<S>& grad_of(NodeId id, ParamSet<S>& params) {
        Node& n = nodes_[id];
        if (n.kind == OpKind::param_ref) {
            return params.tensors[n.param_index].grad;
        }
        ensure_grad(id);
        return n.grad;
    }

    static void pack_head(const Mat<S>& src, int sample, int head, int seq_len, int dh,
                          S scale, Mat<S>& dst) {
        const int col0 = head * dh;
        for (int r = 0; r < seq_len; ++r) {
            const S* s = src.row(sample * seq_len + r) + col0;
            S* d = dst.row(r);
            for (int j = 0; j < dh; ++j) {
                d[j] = s[j] * scale;
            }
        }
    }

    static void unpack_head(const Mat<S>& src, int sample, int head, int seq_len, int dh,
                            Mat<S>& dst, bool accumulate) {
        const int col0 = head * dh;
        for (int r = 0; r < seq_len; ++r) {
            const S* s = src.row(r);
            S* d = dst.row(sample * seq_len + r) + col0;
            if (accumulate) {
                for (int j = 0; j < dh; ++j) {
                    d[j] += s[j];
                }
            } else {
                std::copy(s, s + dh, d);
            }
        }
    }

    void backward_layer_norm(Node& n, ParamSet<S>& params) {
        const Mat<S>& xv = value(n.a);
        const Mat<S>& gv = value(n.b);
        Mat<S>& gx = grad_of(n.a, params);
        Mat<S>& gg = grad_of(n.b, params);
        Mat<S>& gb = grad_of(n.c, params);
        const int cols = xv.cols;
        std::vector<double> dyg(static_cast<size_t>(cols));
        for (int r = 0; r < xv.rows; ++r) {
            const S* xr = xv.row(r);
            const S* dyr = n.grad.row(r);
            const double mean = static_cast<double>(n.aux.at(r, 0));
            const double rstd = static_cast<double>(n.aux.at(r, 1));
            double sum_dyg = 0.0;
            double sum_dyg_xhat = 0.0;
            for (int j = 0; j < cols; ++j) {
                const double xhat = (static_cast<double>(xr[j]) - mean) * rstd;
                const double d = static_cast<double>(dyr[j]) * static_cast<double>(gv.data[j]);
                dyg[static_cast<size_t>(j)] = d;
                sum_dyg += d;
                sum_dyg_xhat += d * xhat;
                gg.data[j] += static_cast<S>(static_cast<double>(dyr[j]) * xhat);
                gb.data[j] += dyr[j];
            }
            const double inv_cols = 1.0 / cols;
            S* gxr = gx.row(r);
            for (int j = 0; j < cols; ++j) {
                const double xhat = (static_cast<double>(xr[j]) - mean) * rstd;
                gxr[j] += static_cast<S>(rstd * (dyg[static_cast<size_t>(j)] -
                                                 sum_dyg * inv_cols - xhat * sum_dyg_xhat * inv_cols));
            }
        }
    }

    void backward_attention(Node& n, ParamSet<S>& params) {
        const Mat<S>& qv = value(n.a);
        const Mat<S>& kv = value(n.b);
        const Mat<S>& vv = value(n.c);
        Mat<S>& gq = grad_of(n.a, params);
        Mat<S>& gk = grad_of(n.b, params);
        Mat<S>& gv = grad_of(n.c, params);
        const int seq_len = n.seq_len;
        const int num_heads = n.num_heads;
        const int hidden = qv.cols;
        const int dh = hidden / num_heads;
        const int batch = qv.rows / seq_len;
        const S inv_sqrt_dh = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));

        Mat<S> qp(seq_len, dh), kp(seq_len, dh), vp(seq_len, dh);
        Mat<S> dop(seq_len, dh), dqp(seq_len, dh), dkp(seq_len, dh), dvp(seq_len, dh);
        Mat<S> dprobs(seq_len, seq_len), dscores(seq_len, seq_len);
        for (int bi = 0; bi < batch; ++bi) {
            for (int h = 0; h < num_heads; ++h) {
                // qp holds Q/sqrt(dh), matching the forward pack
                pack_head(qv, bi, h, seq_len, dh, inv_sqrt_dh, qp);
                pack_head(kv, bi, h, seq_len, dh, S(1), kp);
                pack_head(vv, bi, h, seq_len, dh, S(1), vp);
                pack_head(n.grad, bi, h, seq_len, dh, S(1), dop);
                const S* probs = n.aux.row((bi * num_heads + h) * seq_len);
                // dV = P^T dO
                kern::gemm_tn(probs, dop.data.data(), dvp.data.data(), seq_len, seq_len, dh, false);
                // dP = dO V^T
                kern::gemm_nt(dop.data.data(), vp.data.data(), dprobs.data.data(),
                              seq_len, dh, seq_len, false);
                // dS = P o (dP - rowsum(dP o P))
                for (int r = 0; r < seq_len; ++r) {
                    const S* pr = probs + static_cast<size_t>(r) * seq_len;
                    const S* dpr = dprobs.row(r);
                    double dot = 0.0;
                    for (int j = 0; j < seq_len; ++j) {
                        dot += static_cast<double>(pr[j]) * static_cast<double>(dpr[j]);
                    }
                    S* dsr = dscores.row(r);
                    for (int j = 0; j < seq_len; ++j) {
                        dsr[j] = static_cast<S>(static_cast<double>(pr[j]) *
                                                (static_cast<double>(dpr[j]) - dot));
                    }
                }
                // dQs = dS K ; dK = dS^T Qs
                kern::gemm_nn(dscores.data.data(), kp.data.data(), dqp.data.data(),
                              seq_len, seq_len, dh, false);
                for (size_t i = 0; i < dqp.size(); ++i) {
                    dqp.data[i] *= inv_sqrt_dh; // chain through the forward scaling
                }
                kern::gemm_tn(dscores.data.data(), qp.data.data(), dkp.data.data(),
                              seq_len, seq_len, dh, false);
                unpack_head_add(dqp, bi, h, seq_len, dh, gq);
                unpack_head_add(dkp, bi, h, seq_len, dh, gk);
                unpack_head_add(dvp, bi, h, seq_len, dh, gv);
            }
        }
    }

    static void unpack_head_add(const Mat<S>& src, int sample, int head, int seq_len, int dh,
                                Mat<S>& dst) {
        const int col0 = head * dh;
        for (int r = 0; r < seq_len; ++r) {
            const S* s = src.row(r);
            S* d = dst.row(sample * seq_len + r) + col0;
            for (int j = 0; j < dh; ++j) {
                d[j] += s[j];
            }
        }
    }

    const ParamSet<S>* params_;
    std::vector<Node> nodes_;
    NodeId loss_node_ = -1;
    bool consumed_ = false;
};

// --------------------------------------------------------------- network ---

// Bidirectional-attention mask predictor: token + learned-position embeddings,
// pre-norm blocks with SiLU FFN, final layer norm, untied unembedding.
// num_layers == 0 degenerates to embedding -> unembedding (probe config, no
// positional term).
template <class S>
class Network {
public:
    explicit Network(ParamSet<S> params) : params_(std::move(params)) {
        params_.config.validate();
    }

    const ModelConfig& config() const { return params_.config; }
    const ParamSet<S>& params() const { return params_; }
    ParamSet<S>& params() { return params_; }

    // Records the forward pass for `batch` sequences of equal length packed
    // row-wise, and returns the graph plus the logits node.
    std::pair<std::unique_ptr<Graph<S>>, NodeId>
    record_forward(const std::vector<int>& packed_ids, int batch) const {
        const ModelConfig& cfg = params_.config;
        require(batch >= 1, ErrorCategory::input, "record_forward: batch must be >= 1");
        require(packed_ids.size() % static_cast<size_t>(batch) == 0, ErrorCategory::input,
                "record_forward: ids not divisible by batch");
        const int seq_len = static_cast<int>(packed_ids.size()) / batch;
        require(seq_len >= 1 && seq_len <= cfg.max_len, ErrorCategory::input,
                "record_forward: sequence length " + std::to_string(seq_len) +
                    " exceeds max_len " + std::to_string(cfg.max_len));
        for (size_t i = 0; i < packed_ids.size(); ++i) {
            require(packed_ids[i] >= 0 && packed_ids[i] < cfg.vocab_size, ErrorCategory::input,
                    "out-of-range token id at position " + std::to_string(i));
        }

        auto graph = std::make_unique<Graph<S>>(&params_);
        Graph<S>& g = *graph;

        NodeId x = g.embed(g.param(params_.tok_embed), packed_ids);
        if (cfg.num_layers > 0) {
            std::vector<int> pos_ids(packed_ids.size());
            for (int bi = 0; bi < batch; ++bi) {
                for (int p = 0; p < seq_len; ++p) {
                    pos_ids[static_cast<size_t>(bi) * seq_len + p] = p;
                }
            }
            x = g.add(x, g.embed(g.param(params_.pos_embed), std::move(pos_ids)));
        }

        const S ln_eps = static_cast<S>(1e-5);
        for (const LayerRefs& lr : params_.layers) {
            NodeId h = g.layer_norm(x, g.param(lr.ln1_g), g.param(lr.ln1_b), ln_eps);
            NodeId qkv = linear(g, h, lr.qkv);
            NodeId q = g.slice_cols(qkv, 0, cfg.hidden_dim);
            NodeId k = g.slice_cols(qkv, cfg.hidden_dim, cfg.hidden_dim);
            NodeId v = g.slice_cols(qkv, 2 * cfg.hidden_dim, cfg.hidden_dim);
            NodeId attn = g.attention(q, k, v, cfg.num_heads, seq_len);
            x = g.add(x, linear(g, attn, lr.proj));

            NodeId h2 = g.layer_norm(x, g.param(lr.ln2_g), g.param(lr.ln2_b), ln_eps);
            NodeId f = g.silu(linear(g, h2, lr.up));
            x = g.add(x, linear(g, f, lr.down));
        }
        if (cfg.num_layers > 0) {
            x = g.layer_norm(x, g.param(params_.lnf_g), g.param(params_.lnf_b), ln_eps);
        }
        NodeId logits = linear(g, x, params_.unembed);
        return {std::move(graph), logits};
    }

    // Pure forward pass; deterministic for fixed params and input, safe to
    // call concurrently on a shared network.
    Mat<S> forward(const std::vector<int>& ids) const {
        auto [graph, logits] = record_forward(ids, 1);
        return graph->value(logits);
    }

private:
    NodeId linear(Graph<S>& g, NodeId x, const LinearRefs& lin) const {
        NodeId y = g.add_bias(g.matmul(x, g.param(lin.w)), g.param(lin.b));
        if (lin.lora_a >= 0) {
            // alpha == rank, so the scale factor is exactly 1
            NodeId delta = g.matmul(g.matmul(x, g.param(lin.lora_a)), g.param(lin.lora_b));
            y = g.add(y, delta);
        }
        return y;
    }

    ParamSet<S> params_;
};

using NetworkF = Network<float>;

// ------------------------------------------------------------- optimizer ---

// Adam with bias correction and constant learning rate. Moment state persists
// across calls; non-trainable tensors are never touched.
template <class S>
class AdamOptimizer {
public:
    AdamOptimizer(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    // max_grad_norm > 0 rescales the global gradient to that L2 norm before
    // the update (the 1/t weighting of the pretraining loss makes occasional
    // small-t batches spike otherwise).
    void step(ParamSet<S>& params, double lr, double max_grad_norm = 0.0) {
        if (m_.empty()) {
            m_.reserve(params.tensors.size());
            v_.reserve(params.tensors.size());
            for (const auto& t : params.tensors) {
                m_.emplace_back(t.value.rows, t.value.cols);
                v_.emplace_back(t.value.rows, t.value.cols);
            }
        }
        require(m_.size() == params.tensors.size(), ErrorCategory::usage,
                "AdamOptimizer: parameter set changed between steps");
        if (max_grad_norm > 0.0) {
            double sq = 0.0;
            for (const auto& tensor : params.tensors) {
                if (!tensor.trainable) {
                    continue;
                }
                for (const S g : tensor.grad.data) {
                    sq += static_cast<double>(g) * static_cast<double>(g);
                }
            }
            const double norm = std::sqrt(sq);
            if (norm > max_grad_norm) {
                const S scale = static_cast<S>(max_grad_norm / norm);
                for (auto& tensor : params.tensors) {
                    if (!tensor.trainable) {
                        continue;
                    }
                    for (S& g : tensor.grad.data) {
                        g *= scale;
                    }
                }
            }
        }
        ++t_;
        for (size_t i = 0; i < params.tensors.size(); ++i) {
            auto& tensor = params.tensors[i];
            if (tensor.trainable) {
                kern::adam_update(tensor.value.data.data(), tensor.grad.data.data(),
                                  m_[i].data.data(), v_[i].data.data(),
                                  static_cast<int>(tensor.value.size()),
                                  lr, beta1_, beta2_, eps_, t_);
            }
            tensor.grad.zero();
        }
    }

    int64_t steps_taken() const { return t_; }

private:
    double beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<Mat<S>> m_, v_;
};

// Backward through a recorded graph, then one optimizer step over the
// trainable parameters. The graph must carry a loss and is consumed.
template <class S>
void backward_and_step(Network<S>& net, Graph<S>& graph, AdamOptimizer<S>& opt, double lr,
                       double max_grad_norm = 0.0) {
    graph.backward(net.params());
    opt.step(net.params(), lr, max_grad_norm);
}

// -------------------------------------------------------------- checkpoint --

struct Checkpoint {
    ModelConfig config;
    Role role = Role::teacher;
    ParamSet<float> params;
};

void save_checkpoint(const std::string& path, const ParamSet<float>& params);
Checkpoint load_checkpoint(const std::string& path);
// Loading against a requested config; architecture disagreement is an error.
Checkpoint load_checkpoint(const std::string& path, const ModelConfig& expected);
// FNV-1a content hash of the checkpoint file, used as a provenance id.
std::string checkpoint_id(const std::string& path);

} // namespace mdlm::model
