// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0
//
// Flat `key = value` run configuration. Lines starting with '#' and blank
// lines are skipped; unknown keys and malformed values are parse errors, not
// warnings, so a typo cannot silently fall back to a default.

#pragma once

#include <optional>
#include <string>

#include "tempo/memory_model.hpp"

namespace tempo {
namespace config {

struct FileConfig {
    std::optional<std::int64_t> hidden;      // H
    std::optional<std::int64_t> heads;       // A
    std::optional<std::int64_t> seq;         // S
    std::optional<std::int64_t> batch;       // B
    std::optional<std::int64_t> layers;      // L
    std::optional<double> dropout_p;         // p
    std::optional<double> epsilon;           // epsilon
    std::optional<double> tol;               // tol
    std::optional<std::string> table_path;   // table_path

    // Overlays the set fields onto cfg; validates the result.
    memory_model::EncoderConfig apply(memory_model::EncoderConfig cfg) const;
};

FileConfig parse_string(const std::string& text);
FileConfig load(const std::string& path);

}  // namespace config
}  // namespace tempo
