// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0
//
// Byte-exact accounting of tensors retained for the backward pass.
//
// Every stash is recorded with a tag, a role, and the storage identity of the
// object. Recording the same identity again while it is live adds zero bytes
// and bumps a reference count; release drops the count and frees the bytes
// when it reaches zero. Current and peak totals are maintained on every
// record, so the peak is exact without explicit sampling calls.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "tempo/tensor.hpp"

namespace tempo {

enum class StashRole {
    // Retained by the op that produced or consumed it for its own backward.
    OpOwnStash,
    // An op's output kept alive because a downstream consumer stashed it.
    SharedDownstream,
    // Small per-row statistic (e.g. a reciprocal standard deviation).
    Statistic,
};

std::string role_str(StashRole role);

struct LedgerEntry {
    std::string tag;
    StashRole role = StashRole::OpOwnStash;
    std::int64_t elems = 0;
    std::int64_t bytes = 0;
    const void* ident = nullptr;
    int refs = 0;  // 0 once fully released
    bool live = false;
};

class StashLedger {
public:
    std::int64_t record(const std::string& tag, StashRole role,
                        const Tensor& t);
    std::int64_t record(const std::string& tag, StashRole role,
                        const BoolMask& m);
    // Returns bytes added: elems * elem_bytes for a fresh identity, 0 for a
    // duplicate of a live one.
    std::int64_t record_raw(const std::string& tag, StashRole role,
                            std::int64_t elems, std::int64_t elem_bytes,
                            const void* ident);

    // Decrements the reference count; frees the entry's bytes at zero.
    // Unknown or already-freed identities raise LifecycleError.
    void release(const void* ident);

    bool is_live(const void* ident) const;
    // Bytes charged for a live identity, 0 if absent.
    std::int64_t bytes_of(const void* ident) const;

    std::int64_t current_bytes() const { return current_; }
    std::int64_t peak_bytes() const { return peak_; }

    // Full history, frees included (live flag distinguishes).
    const std::vector<LedgerEntry>& entries() const { return entries_; }
    // Live bytes grouped by tag.
    std::map<std::string, std::int64_t> live_by_tag() const;
    std::int64_t live_bytes_with_prefix(const std::string& prefix) const;

private:
    std::vector<LedgerEntry> entries_;
    std::unordered_map<const void*, std::size_t> live_index_;
    std::int64_t current_ = 0;
    std::int64_t peak_ = 0;
};

}  // namespace tempo
