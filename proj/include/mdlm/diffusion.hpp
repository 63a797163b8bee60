#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "mdlm/common.hpp"
#include "mdlm/tokens.hpp"

namespace mdlm::diffusion {

// Masking level t in [0, 1].
struct MaskLevel {
    double t = 0.0;

    explicit MaskLevel(double level) : t(level) {
        require(t >= 0.0 && t <= 1.0, ErrorCategory::domain,
                "mask level must be in [0, 1], got " + std::to_string(t));
    }
};

// A TokenSeq after a corruption process. block_index/block_len are set only
// by the semi-autoregressive process (-1/0 sentinels otherwise).
// masked_positions and active_mask_set hold absolute sequence indices, sorted.
struct MaskedState {
    std::vector<int> tokens;
    int prompt_len = 0;
    std::vector<int> masked_positions;
    int block_index = -1;
    int block_len = 0;
    std::vector<int> active_mask_set;

    bool has_block_fields() const { return block_index >= 0 && block_len > 0; }
};

// Uniform forward masking at level t: each response position is replaced by
// MASK independently with probability t. Prompt positions are never masked.
// Block fields stay unset.
template <class Rng>
MaskedState forward_mask(const TokenSeq& x0, MaskLevel t, Rng& rng) {
    x0.validate_clean();
    MaskedState st;
    st.tokens = x0.tokens;
    st.prompt_len = x0.prompt_len;
    for (int i = x0.prompt_len; i < x0.length(); ++i) {
        if (rng.bernoulli(t.t)) {
            st.tokens[i] = kMaskId;
            st.masked_positions.push_back(i);
        }
    }
    return st;
}

// Semi-autoregressive structural masking. Response-relative blocks of length
// block_len: blocks before n stay clean (context), block n is masked
// independently with probability q (active), blocks after n are fully masked
// (future). active_mask_set records the masked active-block positions.
template <class Rng>
MaskedState semi_ar_mask(const TokenSeq& y, int n, double q, int block_len, Rng& rng) {
    y.validate_clean();
    const int resp = y.response_len();
    require(block_len >= 1, ErrorCategory::domain,
            "block_len must be positive, got " + std::to_string(block_len));
    require(resp % block_len == 0, ErrorCategory::domain,
            "response length " + std::to_string(resp) + " not divisible by block_len " +
                std::to_string(block_len));
    const int num_blocks = resp / block_len;
    require(n >= 0 && n < num_blocks, ErrorCategory::domain,
            "block index " + std::to_string(n) + " out of range [0, " +
                std::to_string(num_blocks) + ")");
    require(q > 0.0 && q <= 1.0, ErrorCategory::domain,
            "mask probability must be in (0, 1], got " + std::to_string(q));

    MaskedState st;
    st.tokens = y.tokens;
    st.prompt_len = y.prompt_len;
    st.block_index = n;
    st.block_len = block_len;
    const int active_begin = y.prompt_len + n * block_len;
    const int active_end = active_begin + block_len;
    for (int i = active_begin; i < active_end; ++i) {
        if (rng.bernoulli(q)) {
            st.tokens[i] = kMaskId;
            st.masked_positions.push_back(i);
            st.active_mask_set.push_back(i);
        }
    }
    for (int i = active_end; i < y.length(); ++i) {
        st.tokens[i] = kMaskId;
        st.masked_positions.push_back(i);
    }
    return st;
}

// Complement of a semi-AR state within its active block: masked active
// positions are restored from Y, unmasked ones become MASK. Context and
// future parts are untouched. Applying it twice reproduces the input.
inline MaskedState complementary_mask(const MaskedState& st, const TokenSeq& y) {
    require(st.has_block_fields(), ErrorCategory::usage,
            "complementary_mask requires a state produced by semi_ar_mask");
    require(st.tokens.size() == y.tokens.size() && st.prompt_len == y.prompt_len,
            ErrorCategory::usage, "complementary_mask: state and Y shapes disagree");

    MaskedState out;
    out.tokens = st.tokens;
    out.prompt_len = st.prompt_len;
    out.block_index = st.block_index;
    out.block_len = st.block_len;
    const int active_begin = st.prompt_len + st.block_index * st.block_len;
    const int active_end = active_begin + st.block_len;
    for (int i = active_begin; i < active_end; ++i) {
        if (st.tokens[i] == kMaskId) {
            out.tokens[i] = y.tokens[i];
        } else {
            out.tokens[i] = kMaskId;
            out.active_mask_set.push_back(i);
        }
    }
    for (int i = 0; i < static_cast<int>(out.tokens.size()); ++i) {
        if (out.tokens[i] == kMaskId) {
            out.masked_positions.push_back(i);
        }
    }
    return out;
}

// Uniform block index in {0, ..., num_blocks-1}.
template <class Rng>
int sample_block_index(int num_blocks, Rng& rng) {
    require(num_blocks >= 1, ErrorCategory::domain,
            "block count must be >= 1, got " + std::to_string(num_blocks));
    return static_cast<int>(rng.uniform_below(static_cast<uint64_t>(num_blocks)));
}

} // namespace mdlm::diffusion
