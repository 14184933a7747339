// Copyright (c) 2026 The dcasim developers
// Distributed under the MIT software license, see the accompanying
// file LICENSE or http://www.opensource.org/licenses/mit-license.php.
//
// Records and Safe Records, the acknowledgment DAG, confirmation depth,
// equivocation proofs, and Merkle inclusion proofs for lite clients.
//
// A record's hash covers its header only; transactions are bound through
// tx_root, so header holders and full-record holders agree on identity.

#ifndef DCA_RECORD_HPP
#define DCA_RECORD_HPP

#include <algorithm>
#include <set>

#include "dca/ledger.hpp"

namespace dca {

// ---------------------------------------------------------------------------
// Merkle tree over transaction digests: binary, leaves in record order, odd
// leaf duplicated at each level. The empty tree has a fixed tagged root.

inline Digest merkle_empty_root() { return hash_tagged(tag::merkle_empty, ByteView{}); }

inline Digest merkle_combine(const Digest& left, const Digest& right) {
    Writer w;
    w.digest(left);
    w.digest(right);
    return hash(w.out());
}

inline Digest merkle_root(std::vector<Digest> level) {
    if (level.empty()) return merkle_empty_root();
    while (level.size() > 1) {
        if (level.size() % 2 != 0) level.push_back(level.back());
        std::vector<Digest> next;
        next.reserve(level.size() / 2);
        for (std::size_t i = 0; i < level.size(); i += 2)
            next.push_back(merkle_combine(level[i], level[i + 1]));
        level = std::move(next);
    }
    return level[0];
}

/// One step up the tree: the sibling digest and whether it sits to the right.
struct ProofStep {
    Digest sibling;
    bool sibling_on_right = false;
    auto operator<=>(const ProofStep&) const = default;
};

inline std::vector<ProofStep> merkle_path(std::vector<Digest> level, std::size_t index) {
    if (index >= level.size()) throw std::out_of_range("merkle_path: index out of bounds");
    std::vector<ProofStep> path;
    while (level.size() > 1) {
        if (level.size() % 2 != 0) level.push_back(level.back());
        std::size_t sib = index ^ 1;
        path.push_back(ProofStep{level[sib], (index % 2) == 0});
        std::vector<Digest> next;
        next.reserve(level.size() / 2);
        for (std::size_t i = 0; i < level.size(); i += 2)
            next.push_back(merkle_combine(level[i], level[i + 1]));
        level = std::move(next);
        index /= 2;
    }
    return path;
}

inline Digest merkle_fold(const Digest& leaf, const std::vector<ProofStep>& path) {
    Digest cur = leaf;
    for (const auto& step : path)
        cur = step.sibling_on_right ? merkle_combine(cur, step.sibling)
                                    : merkle_combine(step.sibling, cur);
    return cur;
}

// ---------------------------------------------------------------------------

struct Record {
    std::uint64_t slot = 0;
    PublicKey creator;
    Digest prior_cb_hash;
    std::vector<Digest> acknowledged;
    Digest tx_root;
    std::vector<Transaction> transactions;
    bool safe = false;
    Commitment rng_commitment;   // for the next cycle
    Bytes rng_reveal;            // opens the prior cycle's commitment; may be empty
    std::int64_t created_at_ms = 0;
    Signature signature;

    /// Canonical serialization of every field the signature covers.
    /// Transactions enter through tx_root only.
    Bytes signed_bytes() const {
        Writer w;
        w.u64(slot);
        w.raw(ByteView(creator.bytes.data(), creator.bytes.size()));
        w.digest(prior_cb_hash);
        w.u32(static_cast<std::uint32_t>(acknowledged.size()));
        for (const auto& a : acknowledged) w.digest(a);
        w.digest(tx_root);
        w.u8(safe ? 1 : 0);
        w.digest(rng_commitment.digest);
        w.bytes(view_of(rng_reveal));
        w.i64(created_at_ms);
        return w.take();
    }

    Bytes header_bytes() const {
        Writer w;
        w.raw(view_of(signed_bytes()));
        w.raw(ByteView(signature.bytes.data(), signature.bytes.size()));
        return w.take();
    }

    Digest hash() const { return dca::hash(header_bytes()); }

    bool signature_valid() const { return verify(creator, view_of(signed_bytes()), signature); }

    std::vector<Digest> tx_hashes() const {
        std::vector<Digest> out;
        out.reserve(transactions.size());
        for (const auto& t : transactions) out.push_back(t.hash());
        return out;
    }
};

/// All record fields except the transactions themselves.
struct RecordHeader {
    std::uint64_t slot = 0;
    PublicKey creator;
    Digest prior_cb_hash;
    std::vector<Digest> acknowledged;
    Digest tx_root;
    bool safe = false;
    Commitment rng_commitment;
    Bytes rng_reveal;
    std::int64_t created_at_ms = 0;
    Signature signature;

    Bytes signed_bytes() const {
        Record r;
        r.slot = slot;
        r.creator = creator;
        r.prior_cb_hash = prior_cb_hash;
        r.acknowledged = acknowledged;
        r.tx_root = tx_root;
        r.safe = safe;
        r.rng_commitment = rng_commitment;
        r.rng_reveal = rng_reveal;
        r.created_at_ms = created_at_ms;
        return r.signed_bytes();
    }

    Digest hash() const {
        Writer w;
        w.raw(view_of(signed_bytes()));
        w.raw(ByteView(signature.bytes.data(), signature.bytes.size()));
        return dca::hash(w.out());
    }

    bool signature_valid() const { return verify(creator, view_of(signed_bytes()), signature); }
};

inline RecordHeader header_of(const Record& r) {
    return RecordHeader{r.slot,          r.creator,    r.prior_cb_hash, r.acknowledged, r.tx_root,
                        r.safe,          r.rng_commitment, r.rng_reveal, r.created_at_ms, r.signature};
}

// Full-record serialization, used for the CLI debug dumps.
inline Bytes serialize_record(const Record& r) {
    Writer w;
    w.bytes(view_of(r.signed_bytes()));
    w.raw(ByteView(r.signature.bytes.data(), r.signature.bytes.size()));
    w.u32(static_cast<std::uint32_t>(r.transactions.size()));
    for (const auto& tx : r.transactions) {
        w.bytes(view_of(tx.body_bytes()));
        w.raw(ByteView(tx.signature.bytes.data(), tx.signature.bytes.size()));
    }
    return w.take();
}

// ---------------------------------------------------------------------------

struct InclusionProof {
    Digest tx_hash;
    std::vector<ProofStep> path;
    RecordHeader header;
};

inline InclusionProof build_inclusion_proof(const Record& record, std::size_t tx_index) {
    if (tx_index >= record.transactions.size())
        throw std::out_of_range("build_inclusion_proof: index out of bounds");
    auto leaves = record.tx_hashes();
    return InclusionProof{leaves[tx_index], merkle_path(leaves, tx_index), header_of(record)};
}

inline bool verify_inclusion_proof(const InclusionProof& proof) {
    if (!proof.header.signature_valid()) return false;
    return merkle_fold(proof.tx_hash, proof.path) == proof.header.tx_root;
}

// ---------------------------------------------------------------------------
// Equivocation: one creator, one slot, two distinct records. The proof is
// the pair itself; anyone holding both can check it.

struct EquivocationProof {
    Record first;
    Record second;

    bool valid() const {
        return first.creator == second.creator && first.slot == second.slot &&
               first.hash() != second.hash() && first.signature_valid() && second.signature_valid();
    }
};

inline std::optional<EquivocationProof> detect_equivocation(const Record& a, const Record& b) {
    EquivocationProof p{a, b};
    if (!p.valid()) return std::nullopt;
    return p;
}

// ---------------------------------------------------------------------------

/// Acknowledgment DAG. Single writer; records are immutable once inserted.
struct RecordDag {
    std::map<Digest, Record> records;
    std::map<std::uint64_t, std::vector<Digest>> by_slot; // arrival order within a slot
    std::set<Digest> tips;                                // unacknowledged records
    std::map<Digest, std::vector<Digest>> acked_by;       // edge target -> acknowledgers
    std::set<Digest> referenced;                          // every hash ever acknowledged

    bool contains(const Digest& h) const { return records.count(h) != 0; }

    const Record* get(const Digest& h) const {
        auto it = records.find(h);
        return it == records.end() ? nullptr : &it->second;
    }

    /// Returns false on duplicate insert.
    bool insert(const Record& r) {
        Digest h = r.hash();
        if (contains(h)) return false;
        records.emplace(h, r);
        by_slot[r.slot].push_back(h);
        for (const auto& a : r.acknowledged) {
            acked_by[a].push_back(h);
            referenced.insert(a);
            tips.erase(a);
        }
        if (!referenced.count(h)) tips.insert(h);
        return true;
    }

    /// Number of distinct slots whose records transitively acknowledge `h`.
    std::uint64_t confirmation_depth(const Digest& h) const {
        if (!contains(h)) throw std::out_of_range("confirmation_depth: unknown record");
        std::set<Digest> visited{h};
        std::set<std::uint64_t> slots;
        std::vector<Digest> frontier{h};
        while (!frontier.empty()) {
            Digest cur = frontier.back();
            frontier.pop_back();
            auto it = acked_by.find(cur);
            if (it == acked_by.end()) continue;
            for (const auto& up : it->second) {
                if (!visited.insert(up).second) continue;
                slots.insert(records.at(up).slot);
                frontier.push_back(up);
            }
        }
        return slots.size();
    }

    /// Tip set restricted to records below `slot`, sorted for canonical use
    /// in new acknowledgment lists.
    std::vector<Digest> tips_below(std::uint64_t slot) const {
        std::vector<Digest> out;
        for (const auto& t : tips)
            if (records.at(t).slot < slot) out.push_back(t);
        return out;
    }
};

// ---------------------------------------------------------------------------

enum class RecordError : std::uint8_t {
    BadSignature,
    WrongCreator,
    UnknownCb,
    BadAcknowledgment,
    InvalidTransactionIncluded, // slashable
    BadTxRoot,
};

inline const char* to_string(RecordError e) {
    switch (e) {
    case RecordError::BadSignature: return "bad_signature";
    case RecordError::WrongCreator: return "wrong_creator";
    case RecordError::UnknownCb: return "unknown_cb";
    case RecordError::BadAcknowledgment: return "bad_acknowledgment";
    case RecordError::InvalidTransactionIncluded: return "invalid_transaction_included";
    case RecordError::BadTxRoot: return "bad_tx_root";
    }
    return "?";
}

/// Structural and transactional validity of a record against a local view.
/// `state` is the ledger as of the record's position on the chosen fork;
/// transaction timestamps are judged against the record's slot window.
inline std::optional<RecordError> validate_record(const RecordDag& dag, const Record& record,
                                                  const std::vector<PublicKey>& scheduled_creators,
                                                  const std::set<Digest>& known_cb_hashes,
                                                  const LedgerState& state, const TxValidationCtx& base_ctx) {
    if (!record.signature_valid()) return RecordError::BadSignature;

    if (std::find(scheduled_creators.begin(), scheduled_creators.end(), record.creator) ==
        scheduled_creators.end())
        return RecordError::WrongCreator;

    if (!known_cb_hashes.count(record.prior_cb_hash)) return RecordError::UnknownCb;

    std::set<Digest> seen;
    for (const auto& a : record.acknowledged) {
        if (!seen.insert(a).second) return RecordError::BadAcknowledgment; // duplicate
        const Record* prior = dag.get(a);
        if (!prior || prior->slot >= record.slot) return RecordError::BadAcknowledgment;
    }

    if (record.tx_root != merkle_root(record.tx_hashes())) return RecordError::BadTxRoot;

    if (record.safe && !record.transactions.empty()) return RecordError::InvalidTransactionIncluded;

    // Transactions must be valid in order against the record's state view and
    // timestamped in a completed slot window.
    LedgerState scratch = state;
    TxValidationCtx ctx = base_ctx;
    ctx.now_ms = static_cast<std::int64_t>(record.slot) * ctx.slot_ms;
    for (const auto& tx : record.transactions) {
        const std::int64_t ts_slot = (tx.timestamp_s * 1000) / ctx.slot_ms;
        if (ts_slot >= static_cast<std::int64_t>(record.slot)) return RecordError::InvalidTransactionIncluded;
        if (validate_transaction(scratch, tx, ctx)) return RecordError::InvalidTransactionIncluded;
        apply_transaction(scratch, tx, ctx.params, ctx.current_cycle);
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Record construction. Acknowledges the visible tip set below the slot;
// callers choose the transaction set (already filtered and ordered).

struct RecordInputs {
    std::uint64_t slot = 0;
    const KeyPair* keys = nullptr;
    Digest prior_cb_hash;
    Commitment rng_commitment;
    Bytes rng_reveal;
    std::int64_t created_at_ms = 0;
};

inline Record build_record(const RecordInputs& in, std::vector<Digest> acknowledged,
                           std::vector<Transaction> txs, bool safe) {
    if (!in.keys) throw std::invalid_argument("build_record: missing keys");
    Record r;
    r.slot = in.slot;
    r.creator = in.keys->pk;
    r.prior_cb_hash = in.prior_cb_hash;
    std::sort(acknowledged.begin(), acknowledged.end());
    r.acknowledged = std::move(acknowledged);
    r.safe = safe;
    r.transactions = safe ? std::vector<Transaction>{} : std::move(txs);
    r.tx_root = merkle_root(r.tx_hashes());
    r.rng_commitment = in.rng_commitment;
    r.rng_reveal = in.rng_reveal;
    r.created_at_ms = in.created_at_ms;
    r.signature = sign(in.keys->sk, view_of(r.signed_bytes()));
    return r;
}

inline Record create_record(const RecordDag& dag, const RecordInputs& in, std::vector<Transaction> txs) {
    if (in.prior_cb_hash.is_zero()) throw std::invalid_argument("create_record: no consensus block known");
    return build_record(in, dag.tips_below(in.slot), std::move(txs), /*safe=*/false);
}

inline Record create_safe_record(const RecordDag& dag, const RecordInputs& in) {
    if (in.prior_cb_hash.is_zero()) throw std::invalid_argument("create_safe_record: no consensus block known");
    return build_record(in, dag.tips_below(in.slot), {}, /*safe=*/true);
}

} // namespace dca

#endif // DCA_RECORD_HPP
