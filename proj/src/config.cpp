// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0

#include "tempo/config.hpp"

#include <fstream>
#include <sstream>

#include "tempo/errors.hpp"

namespace tempo {
namespace config {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        std::int64_t v = std::stoll(value, &used);
        if (used != value.size()) {
            throw ParseError("");
        }
        return v;
    } catch (const std::exception&) {
        throw ParseError("config key '" + key + "' needs an integer, got '" +
                         value + "'");
    }
}

double parse_real(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size()) {
            throw ParseError("");
        }
        return v;
    } catch (const std::exception&) {
        throw ParseError("config key '" + key + "' needs a number, got '" +
                         value + "'");
    }
}

}  // namespace

FileConfig parse_string(const std::string& text) {
    FileConfig fc;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') {
            continue;
        }
        std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ParseError("config line " + std::to_string(lineno) +
                             " is not 'key = value': '" + t + "'");
        }
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ParseError("config line " + std::to_string(lineno) +
                             " has an empty key or value");
        }
        if (key == "H") {
            fc.hidden = parse_int(key, value);
        } else if (key == "A") {
            fc.heads = parse_int(key, value);
        } else if (key == "S") {
            fc.seq = parse_int(key, value);
        } else if (key == "B") {
            fc.batch = parse_int(key, value);
        } else if (key == "L") {
            fc.layers = parse_int(key, value);
        } else if (key == "p") {
            fc.dropout_p = parse_real(key, value);
        } else if (key == "epsilon") {
            fc.epsilon = parse_real(key, value);
        } else if (key == "tol") {
            fc.tol = parse_real(key, value);
        } else if (key == "table_path") {
            fc.table_path = value;
        } else {
            throw ParseError("unknown config key '" + key + "' on line " +
                             std::to_string(lineno));
        }
    }
    return fc;
}

FileConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParamError("cannot open config file '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str());
}

memory_model::EncoderConfig FileConfig::apply(
    memory_model::EncoderConfig cfg) const {
    if (hidden) cfg.hidden = *hidden;
    if (heads) cfg.heads = *heads;
    if (seq) cfg.seq = *seq;
    if (batch) cfg.batch = *batch;
    if (layers) cfg.layers = *layers;
    if (dropout_p) cfg.dropout_p = *dropout_p;
    if (epsilon) cfg.epsilon = *epsilon;
    cfg.validate();
    return cfg;
}

}  // namespace config
}  // namespace tempo
