// Copyright (c) 2026 The dcasim developers
// Distributed under the MIT software license, see the accompanying
// file LICENSE or http://www.opensource.org/licenses/mit-license.php.
//
// Consensus Cycle bookkeeping: the per-cycle seed derived from
// commit-reveals, slot assignment of voices, modulo transaction
// partitioning among co-assigned voices, snapshot boundaries, and the
// silent-voice penalty. Everything is a pure function of its inputs.

#ifndef DCA_CYCLE_HPP
#define DCA_CYCLE_HPP

#include <algorithm>
#include <set>

#include "dca/ledger.hpp"

namespace dca {

struct CycleParams {
    std::uint64_t cycle_length_s = 876'600;
    std::uint64_t slot_duration_s = 10;
    std::uint64_t slices = 87'660;
    std::uint32_t confirm_depth = 10;
    std::uint64_t cycle_lag_slots = 25'920;  // three days of slots
    std::uint64_t prep_period_slots = 8'640; // one day of slots

    static CycleParams full_scale() { return CycleParams{}; }

    /// Small cycles for simulation; preserves slot length, depth, and the
    /// depth << slices ratio while keeping runs fast.
    static CycleParams desk_scale() {
        CycleParams p;
        p.cycle_length_s = 3'600;
        p.slices = 360;
        p.cycle_lag_slots = 12;
        p.prep_period_slots = 6;
        return p;
    }

    std::int64_t slot_ms() const { return static_cast<std::int64_t>(slot_duration_s) * 1000; }

    void validate() const {
        if (cycle_length_s == 0 || slot_duration_s == 0 || slices == 0 || confirm_depth == 0 ||
            cycle_lag_slots == 0 || prep_period_slots == 0)
            throw std::invalid_argument("CycleParams: all parameters must be positive");
        if (slices * slot_duration_s != cycle_length_s)
            throw std::invalid_argument("CycleParams: slices * slot_duration_s != cycle_length_s");
        if (cycle_lag_slots + prep_period_slots >= slices)
            throw std::invalid_argument("CycleParams: lag + prep must fit inside a cycle");
        if (cycle_lag_slots <= confirm_depth)
            throw std::invalid_argument("CycleParams: lag window must exceed confirm depth");
    }
};

enum class CyclePhase : std::uint8_t { Accumulating, LagWindow, PrepWindow };

inline const char* to_string(CyclePhase p) {
    switch (p) {
    case CyclePhase::Accumulating: return "accumulating";
    case CyclePhase::LagWindow: return "lag_window";
    case CyclePhase::PrepWindow: return "prep_window";
    }
    return "?";
}

struct SlotInfo {
    std::uint64_t cycle_index = 0;
    bool is_cb_boundary = false;
    CyclePhase phase = CyclePhase::Accumulating;
};

/// Pure arithmetic classification of a slot. The first cycle_lag_slots of a
/// cycle close out the previous cycle's accounting; the prep window follows.
inline SlotInfo cycle_boundaries(std::uint64_t slot, const CycleParams& p) {
    SlotInfo info;
    info.cycle_index = slot / p.slices;
    info.is_cb_boundary = is_cb_boundary_slot(slot, p.slices, p.cycle_lag_slots);
    const std::uint64_t offset = slot % p.slices;
    if (info.cycle_index == 0) {
        info.phase = CyclePhase::Accumulating; // nothing to lag behind yet
    } else if (offset < p.cycle_lag_slots) {
        info.phase = CyclePhase::LagWindow;
    } else if (offset < p.cycle_lag_slots + p.prep_period_slots) {
        info.phase = CyclePhase::PrepWindow;
    } else {
        info.phase = CyclePhase::Accumulating;
    }
    return info;
}

// ---------------------------------------------------------------------------

/// Reveals gathered over one cycle: each opens the commitment its voice
/// published in the prior cycle. Voices that never revealed are in `missing`.
struct RevealSet {
    std::uint64_t cycle_index = 0;
    std::map<PublicKey, Bytes> reveals;
    std::set<PublicKey> missing;
};

/// Seed = H(tag || sorted (voice, secret) pairs). Order-independent of
/// arrival because the map iterates in key order.
inline Digest derive_seed(const RevealSet& rs) {
    if (rs.reveals.empty()) throw std::invalid_argument("derive_seed: empty reveal set");
    Hasher h;
    h.update(tag::seed);
    for (const auto& [voice, secret] : rs.reveals) {
        h.update(ByteView(voice.bytes.data(), voice.bytes.size()));
        Writer w;
        w.bytes(view_of(secret));
        h.update(view_of(w.out()));
    }
    return h.final();
}

/// Seed for the first cycles, before any commit-reveal round has completed.
inline Digest genesis_cycle_seed(const Digest& genesis, std::uint64_t cycle_index) {
    Writer w;
    w.digest(genesis);
    w.u64(cycle_index);
    return hash_tagged(tag::genesis_seed, view_of(w.out()));
}

// ---------------------------------------------------------------------------

struct Schedule {
    std::uint64_t cycle_index = 0;
    Digest seed;
    std::vector<std::vector<PublicKey>> assignment; // slice -> ordered voices

    const std::vector<PublicKey>& voices_for(std::uint64_t slice) const {
        return assignment.at(slice);
    }
};

/// Deterministic assignment: shuffle the sorted voice list with the cycle
/// seed, then deal voices across slices. With V voices and S slices each
/// voice gets floor(S/V) or ceil(S/V) slices when V <= S, and each slice
/// gets floor(V/S) or ceil(V/S) voices when V > S.
inline Schedule assign_slots(std::vector<PublicKey> active_voices, const Digest& seed,
                             const CycleParams& params) {
    if (active_voices.empty()) throw std::invalid_argument("assign_slots: no active voices");
    std::sort(active_voices.begin(), active_voices.end());
    active_voices.erase(std::unique(active_voices.begin(), active_voices.end()), active_voices.end());

    DigestRng rng(seed);
    rng.shuffle(active_voices);

    const std::uint64_t V = active_voices.size();
    const std::uint64_t S = params.slices;
    Schedule sched;
    sched.seed = seed;
    sched.assignment.resize(S);
    if (V <= S) {
        for (std::uint64_t i = 0; i < S; ++i)
            sched.assignment[i].push_back(active_voices[i % V]);
    } else {
        for (std::uint64_t j = 0; j < V; ++j)
            sched.assignment[j % S].push_back(active_voices[j]);
    }
    return sched;
}

/// Modulo split of one slice's transactions among its co-assigned voices:
/// tx goes to position (first 8 octets of hash(tx)) mod n. Disjoint cover.
inline std::map<PublicKey, std::vector<Transaction>>
partition_transactions(const std::vector<Transaction>& txs, const std::vector<PublicKey>& co_assigned) {
    if (co_assigned.empty()) throw std::invalid_argument("partition_transactions: no voices");
    std::map<PublicKey, std::vector<Transaction>> out;
    for (const auto& v : co_assigned) out[v]; // every voice present, even if empty
    const std::uint64_t n = co_assigned.size();
    for (const auto& tx : txs) {
        std::uint64_t idx = be64_prefix(tx.hash()) % n;
        out[co_assigned[idx]].push_back(tx);
    }
    return out;
}

/// Exactly the active voices that produced no record at all (safe records
/// count as records) over a completed cycle.
inline std::set<PublicKey> penalize_silent_voices(const std::set<PublicKey>& producers,
                                                  const std::vector<PublicKey>& active_voices) {
    std::set<PublicKey> out;
    for (const auto& v : active_voices)
        if (!producers.count(v)) out.insert(v);
    return out;
}

} // namespace dca

#endif // DCA_CYCLE_HPP
