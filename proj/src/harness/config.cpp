#include "mdlm/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace mdlm::harness {

namespace {

std::string trim(const std::string& s) {
    const size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    const size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

ConfigMap ConfigMap::parse_file(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCategory::io, "cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), path);
}

ConfigMap ConfigMap::parse_string(const std::string& text, const std::string& origin) {
    ConfigMap cfg;
    cfg.raw_ = text;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const size_t eq = line.find('=');
        require(eq != std::string::npos, ErrorCategory::config,
                origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        require(!key.empty(), ErrorCategory::config,
                origin + ":" + std::to_string(lineno) + ": empty key");
        require(cfg.values_.emplace(key, value).second, ErrorCategory::config,
                origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    return cfg;
}

std::string ConfigMap::get_str(const std::string& key, const std::string& def) const {
    consumed_.insert(key);
    const auto it = values_.find(key);
    return it == values_.end() ? def : it->second;
}

std::string ConfigMap::get_str_required(const std::string& key) const {
    consumed_.insert(key);
    const auto it = values_.find(key);
    require(it != values_.end(), ErrorCategory::config, "missing required config key: " + key);
    return it->second;
}

int64_t ConfigMap::get_int(const std::string& key, int64_t def) const {
    consumed_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) {
        return def;
    }
    int64_t v = 0;
    const auto res = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    require(res.ec == std::errc() && res.ptr == it->second.data() + it->second.size(),
            ErrorCategory::config, "config key '" + key + "' is not an integer: " + it->second);
    return v;
}

double ConfigMap::get_real(const std::string& key, double def) const {
    consumed_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) {
        return def;
    }
    try {
        size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        require(pos == it->second.size(), ErrorCategory::config,
                "config key '" + key + "' is not a number: " + it->second);
        return v;
    } catch (const Error&) {
        throw;
    } catch (...) {
        raise(ErrorCategory::config, "config key '" + key + "' is not a number: " + it->second);
    }
}

bool ConfigMap::get_bool(const std::string& key, bool def) const {
    consumed_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) {
        return def;
    }
    if (it->second == "true" || it->second == "1") {
        return true;
    }
    if (it->second == "false" || it->second == "0") {
        return false;
    }
    raise(ErrorCategory::config, "config key '" + key + "' is not a boolean: " + it->second);
}

std::vector<double> ConfigMap::get_real_list(const std::string& key) const {
    consumed_.insert(key);
    const auto it = values_.find(key);
    std::vector<double> out;
    if (it == values_.end() || it->second.empty()) {
        return out;
    }
    std::istringstream ss(it->second);
    std::string part;
    while (std::getline(ss, part, ',')) {
        part = trim(part);
        require(!part.empty(), ErrorCategory::config, "config key '" + key + "': empty element");
        try {
            size_t pos = 0;
            out.push_back(std::stod(part, &pos));
            require(pos == part.size(), ErrorCategory::config,
                    "config key '" + key + "': bad number '" + part + "'");
        } catch (const Error&) {
            throw;
        } catch (...) {
            raise(ErrorCategory::config, "config key '" + key + "': bad number '" + part + "'");
        }
    }
    return out;
}

std::vector<std::string> ConfigMap::get_str_list(const std::string& key) const {
    consumed_.insert(key);
    const auto it = values_.find(key);
    std::vector<std::string> out;
    if (it == values_.end() || it->second.empty()) {
        return out;
    }
    std::istringstream ss(it->second);
    std::string part;
    while (std::getline(ss, part, ',')) {
        part = trim(part);
        if (!part.empty()) {
            out.push_back(part);
        }
    }
    return out;
}

std::vector<std::string> ConfigMap::keys() const {
    std::vector<std::string> out;
    out.reserve(values_.size());
    for (const auto& [key, value] : values_) {
        out.push_back(key);
    }
    return out;
}

void ConfigMap::check_all_consumed() const {
    std::string unknown;
    for (const auto& [key, value] : values_) {
        if (consumed_.count(key) == 0) {
            if (!unknown.empty()) {
                unknown += ", ";
            }
            unknown += key;
        }
    }
    require(unknown.empty(), ErrorCategory::config, "unknown config keys: " + unknown);
}

} // namespace mdlm::harness
