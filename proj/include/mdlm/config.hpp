#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mdlm/common.hpp"

namespace mdlm::harness {

// Human-editable key/value run description: one `key = value` per line,
// '#' comments, duplicate keys rejected. Reads are tracked so a run can fail
// on unknown (misspelled) keys, and the raw text is preserved for the
// verbatim config echo.
class ConfigMap {
public:
    static ConfigMap parse_file(const std::string& path);
    static ConfigMap parse_string(const std::string& text, const std::string& origin = "<string>");

    const std::string& raw_text() const { return raw_; }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_str(const std::string& key, const std::string& def) const;
    std::string get_str_required(const std::string& key) const;
    int64_t get_int(const std::string& key, int64_t def) const;
    double get_real(const std::string& key, double def) const;
    bool get_bool(const std::string& key, bool def) const;
    std::vector<double> get_real_list(const std::string& key) const; // comma-separated
    std::vector<std::string> get_str_list(const std::string& key) const;

    // Error on keys present in the file but never read.
    void check_all_consumed() const;

    std::vector<std::string> keys() const;

private:
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> consumed_;
    std::string raw_;
};

} // namespace mdlm::harness
