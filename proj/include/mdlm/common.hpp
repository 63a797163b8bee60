#pragma once

#include <stdexcept>
#include <string>

namespace mdlm {

// Error taxonomy shared by the library and the CLI. The CLI prints
// "error:<category>: <message>" on one line and maps the category to a
// nonzero exit code.
enum class ErrorCategory {
    config,   // invalid configuration value or file
    input,    // bad runtime input (token ids, lengths)
    domain,   // argument outside its mathematical domain
    usage,    // API called out of contract (stale graph, empty set)
    dataset,  // dataset construction failed
    io,       // file read/write failure
    numeric,  // divergence, NaN loss
};

const char* to_string(ErrorCategory cat);

class Error : public std::runtime_error {
public:
    Error(ErrorCategory cat, const std::string& msg)
        : std::runtime_error(msg), cat_(cat) {}

    ErrorCategory category() const noexcept { return cat_; }

private:
    ErrorCategory cat_;
};

[[noreturn]] inline void raise(ErrorCategory cat, const std::string& msg) {
    throw Error(cat, msg);
}

inline void require(bool cond, ErrorCategory cat, const std::string& msg) {
    if (!cond) {
        raise(cat, msg);
    }
}

} // namespace mdlm
