// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0

#include "tempo/ledger.hpp"

namespace tempo {

std::string role_str(StashRole role) {
    switch (role) {
        case StashRole::OpOwnStash: return "op-own-stash";
        case StashRole::SharedDownstream: return "shared-downstream";
        case StashRole::Statistic: return "statistic";
    }
    return "unknown";
}

std::int64_t StashLedger::record(const std::string& tag, StashRole role,
                                 const Tensor& t) {
    if (!t.defined()) throw ParamError("record of undefined tensor: " + tag);
    return record_raw(tag, role, t.numel(),
                      static_cast<std::int64_t>(dtype_bytes(t.dtype())),
                      t.ident());
}

std::int64_t StashLedger::record(const std::string& tag, StashRole role,
                                 const BoolMask& m) {
    if (!m.defined()) throw ParamError("record of undefined mask: " + tag);
    return record_raw(tag, role, m.numel(), 1, m.ident());
}

std::int64_t StashLedger::record_raw(const std::string& tag, StashRole role,
                                     std::int64_t elems,
                                     std::int64_t elem_bytes,
                                     const void* ident) {
    if (elems < 0 || elem_bytes <= 0) {
        throw ParamError("invalid ledger record: " + tag);
    }
    auto it = live_index_.find(ident);
    if (it != live_index_.end()) {
        entries_[it->second].refs++;
        return 0;
    }
    LedgerEntry e;
    e.tag = tag;
    e.role = role;
    e.elems = elems;
    e.bytes = elems * elem_bytes;
    e.ident = ident;
    e.refs = 1;
    e.live = true;
    live_index_[ident] = entries_.size();
    entries_.push_back(e);
    current_ += e.bytes;
    if (current_ > peak_) peak_ = current_;
    return e.bytes;
}

void StashLedger::release(const void* ident) {
    auto it = live_index_.find(ident);
    if (it == live_index_.end()) {
        throw LifecycleError("release of identity not live in ledger");
    }
    LedgerEntry& e = entries_[it->second];
    if (--e.refs == 0) {
        e.live = false;
        current_ -= e.bytes;
        live_index_.erase(it);
    }
}

bool StashLedger::is_live(const void* ident) const {
    return live_index_.count(ident) != 0;
}

std::int64_t StashLedger::bytes_of(const void* ident) const {
    auto it = live_index_.find(ident);
    return it == live_index_.end() ? 0 : entries_[it->second].bytes;
}

std::map<std::string, std::int64_t> StashLedger::live_by_tag() const {
    std::map<std::string, std::int64_t> out;
    for (const LedgerEntry& e : entries_) {
        if (e.live) out[e.tag] += e.bytes;
    }
    return out;
}

std::int64_t StashLedger::live_bytes_with_prefix(
    const std::string& prefix) const {
    std::int64_t total = 0;
    for (const LedgerEntry& e : entries_) {
        if (e.live && e.tag.rfind(prefix, 0) == 0) total += e.bytes;
    }
    return total;
}

}  // namespace tempo
