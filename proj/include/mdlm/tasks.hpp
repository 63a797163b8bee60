#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "mdlm/common.hpp"
#include "mdlm/tokens.hpp"

namespace mdlm::tasks {

// Fixed character-level symbol table, version-stamped. Ids 0..2 are the
// reserved specials; content symbols are single characters.
class Vocab {
public:
    static const Vocab& v1();

    int version() const { return 1; }
    int size() const { return static_cast<int>(symbols_.size()); }

    // id for a content character; -1 when unknown
    int id(char c) const;
    char ch(int id) const;

    // Strict round-trip text codec over content characters.
    std::vector<int> encode(const std::string& text) const;
    std::string decode(const std::vector<int>& ids) const;

    // Decoder for model outputs: stops at the first EOS, never throws.
    // Non-content ids before EOS decode to '?'.
    std::string decode_lenient(const std::vector<int>& ids) const;

    // symbol list, one per line, line number = id
    void write_file(std::ostream& out) const;
    const std::string& symbol(int id) const { return symbols_[static_cast<size_t>(id)]; }

private:
    Vocab();
    std::vector<std::string> symbols_;
    int char_to_id_[256];
};

struct TaskInstance {
    std::string task_name;     // "addition" | "sort"
    std::string prompt_text;   // e.g. "ADD 347+589="
    std::string gold_answer;   // final answer field, e.g. "936"
    std::string gold_response; // full response text incl. intermediate line
    int difficulty = 0;        // digit count / list length
};

// num_digits-digit addition: prompt "ADD a+b=", response "C<carries>|<sum>"
// where <carries> lists the per-digit carry bits least-significant first.
// Instances are unique by prompt within one call.
std::vector<TaskInstance> gen_addition(int num_digits, int count, uint64_t seed);

// Ascending sort of list_len values in [0, max_val]: prompt "SORT 5 2 9 1 >",
// response is the sorted list.
std::vector<TaskInstance> gen_sort(int list_len, int max_val, int count, uint64_t seed);

// Exact-match answer check. The gold answer is recomputed from the prompt, the
// generated response is decoded up to EOS and the final field after the last
// '|' is compared. Unparseable input yields false, never an exception.
bool check_answer(const std::string& task_name, const std::string& prompt_text,
                  const std::vector<int>& response_ids, const Vocab& vocab = Vocab::v1());

// Fixed-length encodings: prompt left-padded with PAD to prompt_len, response
// EOS-padded to response_len. Errors if the text does not fit.
std::vector<int> encode_prompt(const TaskInstance& inst, int prompt_len,
                               const Vocab& vocab = Vocab::v1());
std::vector<int> encode_response(const TaskInstance& inst, int response_len,
                                 const Vocab& vocab = Vocab::v1());

// Full clean sequence (prompt + gold response) for pretraining.
TokenSeq encode_example(const TaskInstance& inst, int prompt_len, int response_len,
                        const Vocab& vocab = Vocab::v1());

} // namespace mdlm::tasks
