#pragma once

#include <vector>

#include "mdlm/common.hpp"

namespace mdlm {

// Reserved token ids, stable across the whole project (tasks::Vocab keeps the
// same layout).
constexpr int kPadId = 0;
constexpr int kMaskId = 1;
constexpr int kEosId = 2;
constexpr int kNumSpecialIds = 3;

// Fixed-length token sequence with a prompt/response boundary. Positions
// [0, prompt_len) are the prompt and are never masked; the rest is the
// response, EOS-padded to fixed length.
struct TokenSeq {
    std::vector<int> tokens;
    int prompt_len = 0;

    TokenSeq() = default;
    TokenSeq(std::vector<int> toks, int plen) : tokens(std::move(toks)), prompt_len(plen) {}

    int length() const { return static_cast<int>(tokens.size()); }
    int response_len() const { return length() - prompt_len; }

    // Clean-sequence invariants: boundary in range, no MASK anywhere.
    void validate_clean() const {
        require(prompt_len >= 0 && prompt_len < length(), ErrorCategory::input,
                "TokenSeq: prompt_len out of range");
        for (int i = 0; i < length(); ++i) {
            require(tokens[i] != kMaskId, ErrorCategory::input,
                    "TokenSeq: MASK id in clean sequence at position " + std::to_string(i));
        }
    }
};

} // namespace mdlm
