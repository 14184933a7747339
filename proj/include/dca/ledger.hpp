// Copyright (c) 2026 The dcasim developers
// Distributed under the MIT software license, see the accompanying
// file LICENSE or http://www.opensource.org/licenses/mit-license.php.
//
// Account state, transaction validation and application, the append-only
// Voice Ledger, and Consensus Block snapshots.
//
// Accounting model: `balance` is spendable funds only. A voice's deposit is
// held outside its balance while the voice is Active or Jailed, returns to
// the balance on exit, and moves to `total_destroyed` on slashing. The sum
//   spendable balances + deposit * |Active or Jailed entries| + total_destroyed
// is invariant across every applied transaction (nothing is minted here).

#ifndef DCA_LEDGER_HPP
#define DCA_LEDGER_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dca/crypto.hpp"
#include "dca/serial.hpp"

namespace dca {

using Amount = std::uint64_t;

enum class TxKind : std::uint8_t { Transfer = 0, VoiceJoin = 1, VoiceExit = 2 };

inline const char* to_string(TxKind k) {
    switch (k) {
    case TxKind::Transfer: return "transfer";
    case TxKind::VoiceJoin: return "voice_join";
    case TxKind::VoiceExit: return "voice_exit";
    }
    return "?";
}

struct Transaction {
    TxKind kind = TxKind::Transfer;
    PublicKey sender;
    PublicKey recipient;    // Transfer only
    Amount amount = 0;      // Transfer and VoiceJoin
    std::int64_t timestamp_s = 0;
    std::uint64_t sequence = 0;
    Digest recent_cb_hash;  // VoiceExit only
    Signature signature;

    /// Canonical serialization of everything the signature covers.
    Bytes body_bytes() const {
        Writer w;
        w.u8(static_cast<std::uint8_t>(kind));
        w.raw(ByteView(sender.bytes.data(), sender.bytes.size()));
        switch (kind) {
        case TxKind::Transfer:
            w.raw(ByteView(recipient.bytes.data(), recipient.bytes.size()));
            w.u64(amount);
            break;
        case TxKind::VoiceJoin:
            w.u64(amount);
            break;
        case TxKind::VoiceExit:
            w.digest(recent_cb_hash);
            break;
        }
        w.i64(timestamp_s);
        w.u64(sequence);
        w.u64(0); // fee, reserved
        return w.take();
    }

    Digest hash() const {
        Writer w;
        w.raw(view_of(body_bytes()));
        w.raw(ByteView(signature.bytes.data(), signature.bytes.size()));
        return dca::hash(w.out());
    }

    bool signature_valid() const { return verify(sender, view_of(body_bytes()), signature); }
};

inline Transaction make_signed_tx(Transaction tx, const SecretKey& sk) {
    tx.signature = sign(sk, view_of(tx.body_bytes()));
    return tx;
}

// ---------------------------------------------------------------------------

enum class VoiceStatus : std::uint8_t { Active = 0, Exited = 1, Destroyed = 2, Jailed = 3 };

inline const char* to_string(VoiceStatus s) {
    switch (s) {
    case VoiceStatus::Active: return "active";
    case VoiceStatus::Exited: return "exited";
    case VoiceStatus::Destroyed: return "destroyed";
    case VoiceStatus::Jailed: return "jailed";
    }
    return "?";
}

struct VoiceExitInfo {
    std::uint64_t exited_at_cycle = 0;
    Digest exit_tx_hash;
};

struct VoiceEntry {
    PublicKey voice_id;
    std::uint64_t joined_at_cycle = 0;
    VoiceStatus status = VoiceStatus::Active;
    std::optional<VoiceExitInfo> exit;
};

/// Append-only history of every voice join and exit. Entries are never
/// deleted or reordered; only the status of an existing entry may change.
struct VoiceLedger {
    std::vector<VoiceEntry> entries;
    Amount total_destroyed = 0;

    /// Latest entry for a key; a voice that exits and rejoins gets a fresh one.
    const VoiceEntry* find_latest(const PublicKey& id) const {
        for (auto it = entries.rbegin(); it != entries.rend(); ++it)
            if (it->voice_id == id) return &*it;
        return nullptr;
    }
    VoiceEntry* find_latest(const PublicKey& id) {
        return const_cast<VoiceEntry*>(static_cast<const VoiceLedger*>(this)->find_latest(id));
    }

    bool is_active(const PublicKey& id) const {
        const VoiceEntry* e = find_latest(id);
        return e && e->status == VoiceStatus::Active;
    }

    std::vector<PublicKey> active_voices() const {
        std::vector<PublicKey> out;
        for (const auto& e : entries)
            if (e.status == VoiceStatus::Active) out.push_back(e.voice_id);
        return out;
    }

    std::size_t locked_entry_count() const {
        std::size_t n = 0;
        for (const auto& e : entries)
            if (e.status == VoiceStatus::Active || e.status == VoiceStatus::Jailed) ++n;
        return n;
    }
};

struct Account {
    Amount balance = 0;
    std::uint64_t sequence = 0;
};

struct LedgerState {
    std::map<PublicKey, Account> accounts;
    VoiceLedger vl;

    Amount balance_of(const PublicKey& id) const {
        auto it = accounts.find(id);
        return it == accounts.end() ? 0 : it->second.balance;
    }
    std::uint64_t sequence_of(const PublicKey& id) const {
        auto it = accounts.find(id);
        return it == accounts.end() ? 0 : it->second.sequence;
    }
};

struct LedgerParams {
    Amount voice_deposit = 1000;
    std::uint32_t lock_cycles = 36;          // ~= one year of ten-day cycles
    std::uint32_t cb_recency_window = 3;     // exit must cite one of the last K CBs
    std::uint32_t timestamp_window_slots = 2;
};

enum class TxError : std::uint8_t {
    BadSignature,
    InsufficientFunds,
    BadSequence,
    AlreadyVoice,
    NotAVoice,
    LockNotElapsed,
    StaleCbReference,
    TimestampOutOfWindow,
    BadDeposit,
};

inline const char* to_string(TxError e) {
    switch (e) {
    case TxError::BadSignature: return "bad_signature";
    case TxError::InsufficientFunds: return "insufficient_funds";
    case TxError::BadSequence: return "bad_sequence";
    case TxError::AlreadyVoice: return "already_voice";
    case TxError::NotAVoice: return "not_a_voice";
    case TxError::LockNotElapsed: return "lock_not_elapsed";
    case TxError::StaleCbReference: return "stale_cb_reference";
    case TxError::TimestampOutOfWindow: return "timestamp_out_of_window";
    case TxError::BadDeposit: return "bad_deposit";
    }
    return "?";
}

struct TxValidationCtx {
    std::int64_t now_ms = 0;
    std::int64_t slot_ms = 10'000;
    std::uint64_t current_cycle = 0;
    std::vector<Digest> recent_cb_hashes; // newest last
    LedgerParams params;
};

/// Pure check; never mutates state. nullopt means the transaction is valid
/// here and now.
inline std::optional<TxError> validate_transaction(const LedgerState& state, const Transaction& tx,
                                                   const TxValidationCtx& ctx) {
    if (!tx.signature_valid()) return TxError::BadSignature;

    const std::int64_t ts_ms = tx.timestamp_s * 1000;
    const std::int64_t window = ctx.slot_ms * static_cast<std::int64_t>(ctx.params.timestamp_window_slots);
    if (ts_ms > ctx.now_ms + window || ts_ms < ctx.now_ms - window) return TxError::TimestampOutOfWindow;

    if (tx.sequence != state.sequence_of(tx.sender) + 1) return TxError::BadSequence;

    switch (tx.kind) {
    case TxKind::Transfer:
        if (tx.amount > state.balance_of(tx.sender)) return TxError::InsufficientFunds;
        break;
    case TxKind::VoiceJoin: {
        if (tx.amount != ctx.params.voice_deposit) return TxError::BadDeposit;
        const VoiceEntry* e = state.vl.find_latest(tx.sender);
        if (e && (e->status == VoiceStatus::Active || e->status == VoiceStatus::Jailed))
            return TxError::AlreadyVoice;
        if (tx.amount > state.balance_of(tx.sender)) return TxError::InsufficientFunds;
        break;
    }
    case TxKind::VoiceExit: {
        const VoiceEntry* e = state.vl.find_latest(tx.sender);
        if (!e || e->status != VoiceStatus::Active) return TxError::NotAVoice;
        if (ctx.current_cycle < e->joined_at_cycle + ctx.params.lock_cycles) return TxError::LockNotElapsed;
        bool found = false;
        std::size_t n = ctx.recent_cb_hashes.size();
        std::size_t k = ctx.params.cb_recency_window;
        for (std::size_t i = n > k ? n - k : 0; i < n; ++i)
            if (ctx.recent_cb_hashes[i] == tx.recent_cb_hash) { found = true; break; }
        if (!found) return TxError::StaleCbReference;
        break;
    }
    }
    return std::nullopt;
}

/// Precondition: validate_transaction returned ok against this state.
/// A violated precondition is an internal invariant error.
inline void apply_transaction(LedgerState& state, const Transaction& tx, const LedgerParams& params,
                              std::uint64_t current_cycle) {
    Account& sender = state.accounts[tx.sender];
    if (tx.sequence != sender.sequence + 1) throw std::logic_error("apply_transaction: sequence out of order");

    switch (tx.kind) {
    case TxKind::Transfer:
        if (tx.amount > sender.balance) throw std::logic_error("apply_transaction: overdraft");
        sender.balance -= tx.amount;
        state.accounts[tx.recipient].balance += tx.amount;
        break;
    case TxKind::VoiceJoin: {
        if (tx.amount != params.voice_deposit || tx.amount > sender.balance)
            throw std::logic_error("apply_transaction: bad voice join");
        sender.balance -= tx.amount;
        state.vl.entries.push_back(VoiceEntry{tx.sender, current_cycle, VoiceStatus::Active, std::nullopt});
        break;
    }
    case TxKind::VoiceExit: {
        VoiceEntry* e = state.vl.find_latest(tx.sender);
        if (!e || e->status != VoiceStatus::Active) throw std::logic_error("apply_transaction: exit without voice");
        e->status = VoiceStatus::Exited;
        e->exit = VoiceExitInfo{current_cycle, tx.hash()};
        sender.balance += params.voice_deposit;
        break;
    }
    }
    // Re-fetch: the transfer arm may have invalidated `sender` by inserting
    // the recipient account.
    state.accounts[tx.sender].sequence = tx.sequence;
}

/// Slash a voice: deposit is destroyed, never spendable again.
inline void destroy_voice_deposit(LedgerState& state, const PublicKey& voice_id, Amount deposit) {
    VoiceEntry* e = state.vl.find_latest(voice_id);
    if (!e) throw std::logic_error("destroy_voice_deposit: unknown voice");
    if (e->status != VoiceStatus::Active && e->status != VoiceStatus::Jailed)
        throw std::logic_error("destroy_voice_deposit: voice already terminal");
    e->status = VoiceStatus::Destroyed;
    state.vl.total_destroyed += deposit;
}

inline void jail_voice(LedgerState& state, const PublicKey& voice_id) {
    VoiceEntry* e = state.vl.find_latest(voice_id);
    if (!e || e->status != VoiceStatus::Active) throw std::logic_error("jail_voice: voice not active");
    e->status = VoiceStatus::Jailed;
}

inline void pardon_voice(LedgerState& state, const PublicKey& voice_id) {
    VoiceEntry* e = state.vl.find_latest(voice_id);
    if (!e || e->status != VoiceStatus::Jailed) throw std::logic_error("pardon_voice: voice not jailed");
    e->status = VoiceStatus::Active;
}

/// Everything money can be: spendable, locked behind an active/jailed voice,
/// or destroyed. Constant across any sequence of applied transactions.
inline Amount conservation_total(const LedgerState& state, Amount deposit) {
    Amount total = state.vl.total_destroyed;
    for (const auto& [id, acct] : state.accounts) total += acct.balance;
    total += deposit * static_cast<Amount>(state.vl.locked_entry_count());
    return total;
}

// ---------------------------------------------------------------------------
// Consensus Blocks: periodic deterministic snapshots, hash-linked.

inline Bytes serialize_state(const LedgerState& state) {
    Writer w;
    w.u32(static_cast<std::uint32_t>(state.accounts.size()));
    for (const auto& [id, acct] : state.accounts) {
        w.raw(ByteView(id.bytes.data(), id.bytes.size()));
        w.u64(acct.balance);
        w.u64(acct.sequence);
    }
    w.u32(static_cast<std::uint32_t>(state.vl.entries.size()));
    for (const auto& e : state.vl.entries) {
        w.raw(ByteView(e.voice_id.bytes.data(), e.voice_id.bytes.size()));
        w.u64(e.joined_at_cycle);
        w.u8(static_cast<std::uint8_t>(e.status));
        w.u8(e.exit ? 1 : 0);
        if (e.exit) {
            w.u64(e.exit->exited_at_cycle);
            w.digest(e.exit->exit_tx_hash);
        }
    }
    w.u64(state.vl.total_destroyed);
    return w.take();
}

inline Digest state_root(const LedgerState& state) { return hash(serialize_state(state)); }

struct ConsensusBlock {
    std::uint64_t cb_index = 0;
    Digest state_root;
    Digest cycle_seed;
    std::uint64_t created_at_slot = 0;
    Digest prior_cb_hash;

    Bytes serialize() const {
        Writer w;
        w.u64(cb_index);
        w.digest(state_root);
        w.digest(cycle_seed);
        w.u64(created_at_slot);
        w.digest(prior_cb_hash);
        return w.take();
    }

    static ConsensusBlock deserialize(ByteView data) {
        Reader r(data);
        ConsensusBlock cb;
        cb.cb_index = r.u64();
        cb.state_root = r.digest();
        cb.cycle_seed = r.digest();
        cb.created_at_slot = r.u64();
        cb.prior_cb_hash = r.digest();
        r.expect_done();
        return cb;
    }

    Digest hash() const { return dca::hash(serialize()); }
};

inline bool is_cb_boundary_slot(std::uint64_t slot, std::uint64_t slices, std::uint64_t lag_slots) {
    if (slot == 0) return true; // genesis snapshot
    return slot > lag_slots && (slot - lag_slots) % slices == 0;
}

/// Two nodes with identical state produce bit-identical snapshots.
inline ConsensusBlock take_snapshot(const LedgerState& state, std::uint64_t cb_index, std::uint64_t slot,
                                    const Digest& cycle_seed, const Digest& prior_cb_hash,
                                    std::uint64_t slices, std::uint64_t lag_slots) {
    if (!is_cb_boundary_slot(slot, slices, lag_slots))
        throw std::invalid_argument("take_snapshot: not a snapshot boundary slot");
    return ConsensusBlock{cb_index, state_root(state), cycle_seed, slot, prior_cb_hash};
}

} // namespace dca

#endif // DCA_LEDGER_HPP
