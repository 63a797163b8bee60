#include "mdlm/tasks.hpp"

#include <algorithm>
#include <cstdint>
#include <unordered_set>

#include "mdlm/rng.hpp"

namespace mdlm::tasks {

// ----------------------------------------------------------------- vocab ---

Vocab::Vocab() {
    symbols_ = {"<pad>", "<mask>", "<eos>"};
    for (int i = 0; i < 256; ++i) {
        char_to_id_[i] = -1;
    }
    const std::string content = "0123456789+=| >ACDORSTZ";
    for (char c : content) {
        char_to_id_[static_cast<unsigned char>(c)] = static_cast<int>(symbols_.size());
        symbols_.push_back(std::string(1, c));
    }
}

const Vocab& Vocab::v1() {
    static const Vocab v;
    return v;
}

int Vocab::id(char c) const {
    return char_to_id_[static_cast<unsigned char>(c)];
}

char Vocab::ch(int token_id) const {
    require(token_id >= kNumSpecialIds && token_id < size(), ErrorCategory::input,
            "not a content token id: " + std::to_string(token_id));
    return symbols_[static_cast<size_t>(token_id)][0];
}

std::vector<int> Vocab::encode(const std::string& text) const {
    std::vector<int> ids;
    ids.reserve(text.size());
    for (char c : text) {
        const int tid = id(c);
        require(tid >= 0, ErrorCategory::input,
                std::string("character not in vocabulary: '") + c + "'");
        ids.push_back(tid);
    }
    return ids;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
    std::string text;
    text.reserve(ids.size());
    for (int tid : ids) {
        text.push_back(ch(tid));
    }
    return text;
}

std::string Vocab::decode_lenient(const std::vector<int>& ids) const {
    std::string text;
    text.reserve(ids.size());
    for (int tid : ids) {
        if (tid == kEosId) {
            break;
        }
        if (tid >= kNumSpecialIds && tid < size()) {
            text.push_back(symbols_[static_cast<size_t>(tid)][0]);
        } else {
            text.push_back('?');
        }
    }
    return text;
}

void Vocab::write_file(std::ostream& out) const {
    for (const auto& s : symbols_) {
        out << s << '\n';
    }
}

// ------------------------------------------------------------- generators ---

namespace {

int64_t pow10_int(int d) {
    int64_t p = 1;
    for (int i = 0; i < d; ++i) {
        p *= 10;
    }
    return p;
}

// Intermediate line "R<digits>C<carries>|": R lists the sum digits least
// significant first (num_digits + 1 of them, zero padded), C lists the
// per-digit carry bits in the same order. Every intermediate token is a
// local function of two prompt digits and the previous carry, and the final
// answer is the reversal of the R digits.
std::string zero_pad(int64_t v, int width) {
    std::string s = std::to_string(v);
    return std::string(static_cast<size_t>(width) - s.size(), '0') + s;
}

// Fixed-format intermediate work line, least significant digit first:
//   Z<a0 b0 a1 b1 ...>  the operand digits re-stated as interleaved pairs
//   R<digits>           the sum digits (num_digits + 1 of them, zero padded)
//   C<carries>          the per-digit carry bits
// then '|' and the answer. Each intermediate token is a local function of
// nearby tokens (copy, digit sum, carry) and the answer reverses the R run.
TaskInstance make_addition_instance(int num_digits, int64_t a, int64_t b) {
    TaskInstance inst;
    inst.task_name = "addition";
    inst.difficulty = num_digits;
    // operands are zero padded so every digit sits at a fixed position
    inst.prompt_text =
        "ADD " + zero_pad(a, num_digits) + "+" + zero_pad(b, num_digits) + "=";
    inst.gold_answer = std::to_string(a + b);

    std::string zipped;
    std::string reversed_digits;
    std::string carries;
    int64_t ra = a;
    int64_t rb = b;
    int carry = 0;
    for (int d = 0; d < num_digits; ++d) {
        const int da = static_cast<int>(ra % 10);
        const int db = static_cast<int>(rb % 10);
        zipped.push_back(static_cast<char>('0' + da));
        zipped.push_back(static_cast<char>('0' + db));
        const int sum = da + db + carry;
        reversed_digits.push_back(static_cast<char>('0' + sum % 10));
        carry = sum >= 10 ? 1 : 0;
        carries.push_back(carry == 1 ? '1' : '0');
        ra /= 10;
        rb /= 10;
    }
    reversed_digits.push_back(static_cast<char>('0' + carry)); // overflow digit
    inst.gold_response =
        "Z" + zipped + "R" + reversed_digits + "C" + carries + "|" + inst.gold_answer;
    return inst;
}

} // namespace

std::vector<TaskInstance> gen_addition(int num_digits, int count, uint64_t seed) {
    require(num_digits >= 1 && num_digits <= 5, ErrorCategory::domain,
            "num_digits must be in [1, 5], got " + std::to_string(num_digits));
    require(count >= 0, ErrorCategory::domain, "count must be non-negative");
    const int64_t limit = pow10_int(num_digits);
    require(static_cast<int64_t>(count) <= limit * limit, ErrorCategory::domain,
            "count exceeds the number of distinct operand pairs");

    RngStream rng(seed);
    std::vector<TaskInstance> out;
    out.reserve(static_cast<size_t>(count));
    std::unordered_set<int64_t> seen;
    while (static_cast<int>(out.size()) < count) {
        const int64_t a = static_cast<int64_t>(rng.uniform_below(static_cast<uint64_t>(limit)));
        const int64_t b = static_cast<int64_t>(rng.uniform_below(static_cast<uint64_t>(limit)));
        if (!seen.insert(a * limit + b).second) {
            continue;
        }
        out.push_back(make_addition_instance(num_digits, a, b));
    }
    return out;
}

std::vector<TaskInstance> gen_sort(int list_len, int max_val, int count, uint64_t seed) {
    require(list_len >= 1 && list_len <= 12, ErrorCategory::domain,
            "list_len must be in [1, 12], got " + std::to_string(list_len));
    require(max_val >= 0 && max_val <= 9, ErrorCategory::domain,
            "max_val must be a single digit, got " + std::to_string(max_val));
    require(count >= 0, ErrorCategory::domain, "count must be non-negative");

    RngStream rng(seed);
    std::vector<TaskInstance> out;
    out.reserve(static_cast<size_t>(count));
    std::unordered_set<std::string> seen;
    int attempts = 0;
    const int max_attempts = count * 1000 + 1000;
    while (static_cast<int>(out.size()) < count) {
        require(++attempts <= max_attempts, ErrorCategory::dataset,
                "gen_sort: cannot draw enough distinct instances");
        std::vector<int> vals(static_cast<size_t>(list_len));
        for (auto& v : vals) {
            v = static_cast<int>(rng.uniform_below(static_cast<uint64_t>(max_val) + 1));
        }
        std::string body;
        for (size_t i = 0; i < vals.size(); ++i) {
            if (i > 0) {
                body.push_back(' ');
            }
            body.push_back(static_cast<char>('0' + vals[i]));
        }
        TaskInstance inst;
        inst.task_name = "sort";
        inst.difficulty = list_len;
        inst.prompt_text = "SORT " + body + " >";
        if (!seen.insert(inst.prompt_text).second) {
            continue;
        }
        std::sort(vals.begin(), vals.end());
        std::string sorted;
        for (size_t i = 0; i < vals.size(); ++i) {
            if (i > 0) {
                sorted.push_back(' ');
            }
            sorted.push_back(static_cast<char>('0' + vals[i]));
        }
        inst.gold_answer = sorted;
        inst.gold_response = sorted;
        out.push_back(std::move(inst));
    }
    return out;
}

// ---------------------------------------------------------------- checker ---

namespace {

// Recomputes the gold answer from the prompt; empty string when the prompt
// does not parse.
std::string gold_from_prompt(const std::string& task_name, const std::string& prompt) {
    if (task_name == "addition") {
        if (prompt.rfind("ADD ", 0) != 0 || prompt.empty() || prompt.back() != '=') {
            return "";
        }
        const std::string body = prompt.substr(4, prompt.size() - 5);
        const size_t plus = body.find('+');
        if (plus == std::string::npos) {
            return "";
        }
        const std::string sa = body.substr(0, plus);
        const std::string sb = body.substr(plus + 1);
        if (sa.empty() || sb.empty() || sa.size() > 9 || sb.size() > 9 ||
            sa.find_first_not_of("0123456789") != std::string::npos ||
            sb.find_first_not_of("0123456789") != std::string::npos) {
            return "";
        }
        return std::to_string(std::stoll(sa) + std::stoll(sb));
    }
    if (task_name == "sort") {
        if (prompt.rfind("SORT ", 0) != 0 || prompt.size() < 7 ||
            prompt.substr(prompt.size() - 2) != " >") {
            return "";
        }
        const std::string body = prompt.substr(5, prompt.size() - 7);
        std::vector<int> vals;
        for (size_t i = 0; i < body.size(); ++i) {
            if (i % 2 == 0) {
                if (body[i] < '0' || body[i] > '9') {
                    return "";
                }
                vals.push_back(body[i] - '0');
            } else if (body[i] != ' ') {
                return "";
            }
        }
        if (vals.empty()) {
            return "";
        }
        std::sort(vals.begin(), vals.end());
        std::string sorted;
        for (size_t i = 0; i < vals.size(); ++i) {
            if (i > 0) {
                sorted.push_back(' ');
            }
            sorted.push_back(static_cast<char>('0' + vals[i]));
        }
        return sorted;
    }
    return "";
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(' ');
    if (b == std::string::npos) {
        return "";
    }
    size_t e = s.find_last_not_of(' ');
    return s.substr(b, e - b + 1);
}

} // namespace

bool check_answer(const std::string& task_name, const std::string& prompt_text,
                  const std::vector<int>& response_ids, const Vocab& vocab) {
    const std::string gold = gold_from_prompt(task_name, prompt_text);
    if (gold.empty()) {
        return false;
    }
    const std::string text = vocab.decode_lenient(response_ids);
    // final answer field follows the last format delimiter, if any
    const size_t bar = text.rfind('|');
    const std::string answer = trim(bar == std::string::npos ? text : text.substr(bar + 1));
    return !answer.empty() && answer == gold;
}

// --------------------------------------------------------------- encoding ---

std::vector<int> encode_prompt(const TaskInstance& inst, int prompt_len, const Vocab& vocab) {
    const std::vector<int> ids = vocab.encode(inst.prompt_text);
    require(static_cast<int>(ids.size()) <= prompt_len, ErrorCategory::input,
            "prompt does not fit in " + std::to_string(prompt_len) + " positions: '" +
                inst.prompt_text + "'");
    std::vector<int> out(static_cast<size_t>(prompt_len), kPadId);
    // left padding keeps the prompt adjacent to the response
    std::copy(ids.begin(), ids.end(),
              out.begin() + (prompt_len - static_cast<int>(ids.size())));
    return out;
}

std::vector<int> encode_response(const TaskInstance& inst, int response_len,
                                 const Vocab& vocab) {
    const std::vector<int> ids = vocab.encode(inst.gold_response);
    require(static_cast<int>(ids.size()) < response_len, ErrorCategory::input,
            "response does not fit in " + std::to_string(response_len) + " positions: '" +
                inst.gold_response + "'");
    std::vector<int> out(static_cast<size_t>(response_len), kEosId);
    std::copy(ids.begin(), ids.end(), out.begin());
    return out;
}

TokenSeq encode_example(const TaskInstance& inst, int prompt_len, int response_len,
                        const Vocab& vocab) {
    std::vector<int> tokens = encode_prompt(inst, prompt_len, vocab);
    const std::vector<int> resp = encode_response(inst, response_len, vocab);
    tokens.insert(tokens.end(), resp.begin(), resp.end());
    return TokenSeq(std::move(tokens), prompt_len);
}

} // namespace mdlm::tasks
