#pragma once

#include <cmath>
#include <type_traits>
#include <string>
#include <vector>

#include "mdlm/common.hpp"
#include "mdlm/diffusion.hpp"
#include "mdlm/kernels.hpp"
#include "mdlm/mat.hpp"
#include "mdlm/tokens.hpp"

// Training objectives. Every loss returns its value (double accumulation
// throughout) and, when grad is non-null, accumulates d(loss)/d(logits) into
// *grad. Value and gradient are a closed-form pair; the finite-difference
// suite checks them against each other.
namespace mdlm::losses {

constexpr double kDefaultBeta = 2.0;
constexpr double kDefaultTemperature = 0.5;

// Probability vector over the vocabulary at a given softmax temperature.
struct Distribution {
    std::vector<double> probs;
    double temperature = 1.0;
};

template <class S>
Distribution softmax_distribution(const Mat<S>& logits, int row, double temperature) {
    require(temperature > 0.0, ErrorCategory::domain,
            "temperature must be positive, got " + std::to_string(temperature));
    Distribution d;
    d.temperature = temperature;
    d.probs.resize(static_cast<size_t>(logits.cols));
    std::vector<double> ls(static_cast<size_t>(logits.cols));
    kern::log_softmax_row(logits.row(row), ls.data(), logits.cols, 1.0 / temperature);
    for (int j = 0; j < logits.cols; ++j) {
        d.probs[static_cast<size_t>(j)] = std::exp(ls[static_cast<size_t>(j)]);
    }
    return d;
}

struct LossBreakdown {
    double consistency = 0.0;
    double certainty = 0.0;
    double combined = 0.0;
    int correct_count = 0;
    int active_count = 0;
    double beta = 0.0;
};

// Masked-NLL pretraining loss: (1/t) * sum over masked positions of
// -log p(x0_i | x_t), divided by the number of eligible response positions so
// magnitudes are comparable across lengths. Returns 0 for an empty mask set.
template <class S>
double pretrain_loss(const Mat<S>& logits, const TokenSeq& x0,
                     const diffusion::MaskedState& state, diffusion::MaskLevel t,
                     std::type_identity_t<Mat<S>>* grad = nullptr) {
    if (state.masked_positions.empty()) {
        return 0.0;
    }
    require(t.t > 0.0, ErrorCategory::domain,
            "pretrain_loss: mask level 0 with a nonempty mask set");
    const int eligible = x0.response_len();
    const double w = 1.0 / (t.t * eligible);
    std::vector<double> ls(static_cast<size_t>(logits.cols));
    double total = 0.0;
    for (int i : state.masked_positions) {
        const int target = x0.tokens[static_cast<size_t>(i)];
        kern::log_softmax_row(logits.row(i), ls.data(), logits.cols, 1.0);
        total += -ls[static_cast<size_t>(target)];
        if (grad != nullptr) {
            S* g = grad->row(i);
            for (int j = 0; j < logits.cols; ++j) {
                const double p = std::exp(ls[static_cast<size_t>(j)]);
                g[j] += static_cast<S>(w * (p - (j == target ? 1.0 : 0.0)));
            }
        }
    }
    return w * total;
}

// Cross-entropy against the trajectory tokens over the masked active block:
// -(1/|M_a|) * sum_{i in M_a} log p_i(y_i), temperature 1.
template <class S>
double consistency_loss(const Mat<S>& logits, const TokenSeq& y, const std::vector<int>& m_a,
                        std::type_identity_t<Mat<S>>* grad = nullptr) {
    require(!m_a.empty(), ErrorCategory::usage,
            "consistency_loss: empty active mask set (caller must resample)");
    const double w = 1.0 / static_cast<double>(m_a.size());
    std::vector<double> ls(static_cast<size_t>(logits.cols));
    double total = 0.0;
    for (int i : m_a) {
        const int target = y.tokens[static_cast<size_t>(i)];
        kern::log_softmax_row(logits.row(i), ls.data(), logits.cols, 1.0);
        total += -ls[static_cast<size_t>(target)];
        if (grad != nullptr) {
            S* g = grad->row(i);
            for (int j = 0; j < logits.cols; ++j) {
                const double p = std::exp(ls[static_cast<size_t>(j)]);
                g[j] += static_cast<S>(w * (p - (j == target ? 1.0 : 0.0)));
            }
        }
    }
    return w * total;
}

// Positions of M_a whose argmax prediction matches the trajectory token.
// Argmax ties resolve to the smallest token id, so a tied position counts as
// correct only if the smallest tied id is the target.
template <class S>
std::vector<int> correct_set(const Mat<S>& logits, const TokenSeq& y,
                             const std::vector<int>& m_a) {
    std::vector<int> m_c;
    for (int i : m_a) {
        const S* row = logits.row(i);
        int best = 0;
        for (int j = 1; j < logits.cols; ++j) {
            if (row[j] > row[best]) {
                best = j;
            }
        }
        if (best == y.tokens[static_cast<size_t>(i)]) {
            m_c.push_back(i);
        }
    }
    return m_c;
}

// Mean entropy (nats) of the temperature-scaled predictive distributions over
// M_c. Returns 0 for an empty set (the |M_c| > 0 guard). Set membership is a
// stop-gradient: the gradient flows into the listed rows only.
template <class S>
double certainty_loss(const Mat<S>& logits, const std::vector<int>& m_c, double temperature,
                      std::type_identity_t<Mat<S>>* grad = nullptr) {
    require(temperature > 0.0, ErrorCategory::domain,
            "certainty temperature must be positive, got " + std::to_string(temperature));
    if (m_c.empty()) {
        return 0.0;
    }
    const double inv_temp = 1.0 / temperature;
    const double w = 1.0 / static_cast<double>(m_c.size());
    std::vector<double> ls(static_cast<size_t>(logits.cols));
    double total = 0.0;
    for (int i : m_c) {
        kern::log_softmax_row(logits.row(i), ls.data(), logits.cols, inv_temp);
        double h = 0.0;
        for (int j = 0; j < logits.cols; ++j) {
            h -= std::exp(ls[static_cast<size_t>(j)]) * ls[static_cast<size_t>(j)];
        }
        total += h;
        if (grad != nullptr) {
            S* g = grad->row(i);
            for (int j = 0; j < logits.cols; ++j) {
                const double p = std::exp(ls[static_cast<size_t>(j)]);
                g[j] += static_cast<S>(-w * inv_temp * p * (ls[static_cast<size_t>(j)] + h));
            }
        }
    }
    return w * total;
}

// Combined objective: consistency + beta * certainty over the live correct
// set. With beta == 0 the certainty gradient path is skipped entirely, which
// keeps a beta=0 run bit-identical to a consistency-only run.
template <class S>
LossBreakdown cfd_loss(const Mat<S>& logits, const TokenSeq& y, const std::vector<int>& m_a,
                       double temperature, double beta, std::type_identity_t<Mat<S>>* grad = nullptr) {
    require(beta >= 0.0, ErrorCategory::domain,
            "beta must be non-negative, got " + std::to_string(beta));
    LossBreakdown b;
    b.beta = beta;
    b.active_count = static_cast<int>(m_a.size());
    b.consistency = consistency_loss(logits, y, m_a, grad);
    const std::vector<int> m_c = correct_set(logits, y, m_a);
    b.correct_count = static_cast<int>(m_c.size());
    if (beta > 0.0 && grad != nullptr && !m_c.empty()) {
        Mat<S> cert_grad(logits.rows, logits.cols);
        b.certainty = certainty_loss(logits, m_c, temperature, &cert_grad);
        kern::axpy(grad->data.data(), cert_grad.data.data(), static_cast<S>(beta),
                   static_cast<int>(cert_grad.size()));
    } else {
        b.certainty = certainty_loss(logits, m_c, temperature, nullptr);
    }
    b.combined = b.consistency + beta * b.certainty;
    return b;
}

} // namespace mdlm::losses
