// Copyright (c) 2026 The dcasim developers
// Distributed under the MIT software license, see the accompanying
// file LICENSE or http://www.opensource.org/licenses/mit-license.php.
//
// The per-participant deterministic state machine: receipt and relay of
// records and transactions, the confirm/secure lifecycle, double-spend
// relay refusal, fork detection and choice, partition warning, jailing,
// and the Safe-Record decision rule.
//
// Late-record semantics: a record for an already-passed slot is woven into
// history if its transactions conflict with nothing; if it conflicts with
// confirmed transactions it is held as evidence (not relayed, not applied,
// not acknowledged) until it is itself confirmed by `confirm_depth`
// subsequent records, at which point the network has accepted its position
// and every node reorganizes. If it conflicts with a transaction whose
// record is already secured, the fork is unresolvable.

#ifndef DCA_NODE_HPP
#define DCA_NODE_HPP

#include "dca/cycle.hpp"
#include "dca/record.hpp"

namespace dca {

struct EngineParams {
    CycleParams cycle = CycleParams::desk_scale();
    LedgerParams ledger;
    std::uint32_t partition_window_slots = 30;
    std::uint32_t partition_threshold_permille = 200; // strictly-greater trigger
    std::uint32_t grace_slots = 1;                    // on time = seen by slot end + grace
    std::uint32_t inclusion_freshness_slots = 3;      // record slot - tx slot bound

    std::int64_t slot_ms() const { return cycle.slot_ms(); }
};

struct VoiceIdentity {
    KeyPair keys;
    Digest rng_base; // per-voice entropy for cycle secrets
};

struct GenesisInfo {
    LedgerState state;
    std::vector<PublicKey> voices;
    Digest entropy;
    ConsensusBlock cb;
    Amount total = 0; // conservation anchor
};

inline GenesisInfo make_genesis(const std::vector<PublicKey>& voices,
                                const std::vector<std::pair<PublicKey, Amount>>& balances,
                                Amount voice_deposit, const Digest& entropy, const CycleParams& cycle) {
    GenesisInfo g;
    g.voices = voices;
    for (const auto& v : voices)
        g.state.vl.entries.push_back(VoiceEntry{v, 0, VoiceStatus::Active, std::nullopt});
    for (const auto& [pk, amount] : balances) g.state.accounts[pk].balance += amount;
    g.entropy = entropy;
    g.cb = take_snapshot(g.state, 0, 0, genesis_cycle_seed(entropy, 0), Digest{}, cycle.slices,
                         cycle.cycle_lag_slots);
    g.total = conservation_total(g.state, voice_deposit);
    return g;
}

// ---------------------------------------------------------------------------

struct TxStatus {
    enum class Kind : std::uint8_t { Unknown, Pending, Confirmed, Secured, Rejected };
    Kind kind = Kind::Unknown;
    Digest record_hash;
    std::uint64_t slot = 0;
    std::string reject_reason;
};

inline const char* to_string(TxStatus::Kind k) {
    switch (k) {
    case TxStatus::Kind::Unknown: return "unknown";
    case TxStatus::Kind::Pending: return "pending";
    case TxStatus::Kind::Confirmed: return "confirmed";
    case TxStatus::Kind::Secured: return "secured";
    case TxStatus::Kind::Rejected: return "rejected";
    }
    return "?";
}

struct ForkEvidence {
    enum class Kind : std::uint8_t { Equivocation, UnconfirmingDoubleSpend, CompetingHistories };
    Kind kind = Kind::Equivocation;
    std::vector<Digest> record_hashes;
    std::vector<std::int64_t> observed_at_ms;
};

inline const char* to_string(ForkEvidence::Kind k) {
    switch (k) {
    case ForkEvidence::Kind::Equivocation: return "equivocation";
    case ForkEvidence::Kind::UnconfirmingDoubleSpend: return "unconfirming_double_spend";
    case ForkEvidence::Kind::CompetingHistories: return "competing_histories";
    }
    return "?";
}

struct SlashEvidence {
    enum class Kind : std::uint8_t { EquivocationPair, InvalidTxRecord, FullCycleSilence };
    Kind kind = Kind::EquivocationPair;
    PublicKey voice;
    std::vector<Digest> record_hashes; // the signed records constituting proof
    std::uint64_t cycle = 0;           // FullCycleSilence only
};

inline const char* to_string(SlashEvidence::Kind k) {
    switch (k) {
    case SlashEvidence::Kind::EquivocationPair: return "equivocation_pair";
    case SlashEvidence::Kind::InvalidTxRecord: return "invalid_tx_record";
    case SlashEvidence::Kind::FullCycleSilence: return "full_cycle_silence";
    }
    return "?";
}

enum class ForkState : std::uint8_t { None, ResolvableConflict, UnresolvableFork };

inline const char* to_string(ForkState s) {
    switch (s) {
    case ForkState::None: return "none";
    case ForkState::ResolvableConflict: return "resolvable_conflict";
    case ForkState::UnresolvableFork: return "unresolvable_fork";
    }
    return "?";
}

enum class ArbitrationPolicy : std::uint8_t { AutoMajorityOfVoices, AlwaysAsk, ScriptedAnswer };

// ---------------------------------------------------------------------------
// Engine transition results. The simulator turns these into deliveries and
// trace lines; the engine itself never touches the network.

struct ReceiveTxResult {
    enum class Action : std::uint8_t { AcceptRelay, Duplicate, ConflictHeld, Rejected };
    Action action = Action::Rejected;
    std::optional<TxError> error;
};

inline const char* to_string(ReceiveTxResult::Action a) {
    switch (a) {
    case ReceiveTxResult::Action::AcceptRelay: return "accept_relay";
    case ReceiveTxResult::Action::Duplicate: return "duplicate";
    case ReceiveTxResult::Action::ConflictHeld: return "conflict_held";
    case ReceiveTxResult::Action::Rejected: return "rejected";
    }
    return "?";
}

struct ReceiveRecordResult {
    enum class Action : std::uint8_t {
        AcceptRelay,
        AcceptNoRelay, // held as evidence per local seen-order
        Orphaned,      // parents or consensus block not known yet
        Duplicate,
        Reject,
        ForkAlarm,
    };
    Action action = Action::Duplicate;
    std::optional<RecordError> error;
    std::optional<ForkEvidence> fork;
    std::vector<SlashEvidence> slashes;
    bool relay = false;
    bool reorged = false;
    // records newly accepted into history by weaving; once the network has
    // confirmed them they are consensus data and relayed like any other
    std::vector<Digest> woven;
};

inline const char* to_string(ReceiveRecordResult::Action a) {
    switch (a) {
    case ReceiveRecordResult::Action::AcceptRelay: return "accept_relay";
    case ReceiveRecordResult::Action::AcceptNoRelay: return "accept_no_relay";
    case ReceiveRecordResult::Action::Orphaned: return "orphaned";
    case ReceiveRecordResult::Action::Duplicate: return "duplicate";
    case ReceiveRecordResult::Action::Reject: return "reject";
    case ReceiveRecordResult::Action::ForkAlarm: return "fork_alarm";
    }
    return "?";
}

struct ProduceResult {
    enum class Action : std::uint8_t { Produce, ProduceSafe, Abstain };
    Action action = Action::Abstain;
    std::optional<Record> record;
    std::string reason;
};

inline const char* to_string(ProduceResult::Action a) {
    switch (a) {
    case ProduceResult::Action::Produce: return "produce";
    case ProduceResult::Action::ProduceSafe: return "produce_safe";
    case ProduceResult::Action::Abstain: return "abstain";
    }
    return "?";
}

struct StatusEvent {
    Digest tx_hash;
    TxStatus::Kind status = TxStatus::Kind::Unknown;
    std::int64_t at_ms = 0;
    std::uint64_t slot = 0;
};

struct SlashEvent {
    SlashEvidence evidence;
    std::int64_t at_ms = 0;
};

struct JailEvent {
    PublicKey voice;
    bool pardoned = false;
    std::int64_t at_ms = 0;
};

// ---------------------------------------------------------------------------
// Batch evaluation of a candidate history: replay a record set from genesis,
// closing cycles at their boundaries exactly like a live node would, and
// report the resulting chain. Used by bootstrapping nodes, post-partition
// arbitration, and the history-rewrite defense.

struct HistoryEvaluation {
    bool valid = false;
    std::string why;
    std::vector<ConsensusBlock> cb_chain;
    LedgerState final_state;
    LedgerState state_at_last_cb;
    std::uint64_t last_cb_slot = 0;
    std::set<Digest> record_hashes;
    std::map<Digest, Record> records;
    std::map<std::uint64_t, Digest> seeds;
    std::map<std::uint64_t, Schedule> schedules;
    std::map<std::uint64_t, std::set<PublicKey>> producers;
    std::map<std::uint64_t, std::map<PublicKey, Digest>> commitments;
    // Voices whose signatures are bound to this history's own (post-genesis)
    // consensus blocks, via record prior_cb references or exit transactions.
    std::set<PublicKey> bound_signers;
    std::size_t active_voices = 0;
};

enum class ForkChoiceOutcome : std::uint8_t { ChooseA, ChooseB, NeedsExternalInput };

inline const char* to_string(ForkChoiceOutcome o) {
    switch (o) {
    case ForkChoiceOutcome::ChooseA: return "choose_a";
    case ForkChoiceOutcome::ChooseB: return "choose_b";
    case ForkChoiceOutcome::NeedsExternalInput: return "needs_external_input";
    }
    return "?";
}

namespace detail {

/// Application with conflict semantics shared by the live engine and batch
/// replay: same-hash duplicates are skipped, (sender, sequence) conflicts
/// lose to the earlier-applied transaction, anything else must validate.
struct Applier {
    LedgerState state;
    EngineParams params;
    std::map<Digest, std::pair<std::uint64_t, Digest>> applied_txs; // tx -> (slot, record)
    std::map<std::pair<PublicKey, std::uint64_t>, Digest> winners;  // (sender, seq) -> tx

    enum class TxOutcome { Applied, SkippedDuplicate, SkippedLoser, Invalid };

    TxOutcome apply_tx(const Transaction& tx, std::uint64_t slot, const Digest& record_hash) {
        Digest h = tx.hash();
        if (applied_txs.count(h)) return TxOutcome::SkippedDuplicate;
        auto key = std::make_pair(tx.sender, tx.sequence);
        auto w = winners.find(key);
        if (w != winners.end() && w->second != h) return TxOutcome::SkippedLoser;
        TxValidationCtx ctx;
        ctx.now_ms = static_cast<std::int64_t>(slot) * params.slot_ms();
        ctx.slot_ms = params.slot_ms();
        ctx.current_cycle = slot / params.cycle.slices;
        ctx.params = params.ledger;
        ctx.params.timestamp_window_slots = params.inclusion_freshness_slots;
        // CB recency was checked when the record entered the view; replay
        // trusts the reference.
        if (tx.kind == TxKind::VoiceExit) ctx.recent_cb_hashes = {tx.recent_cb_hash};
        if (validate_transaction(state, tx, ctx)) return TxOutcome::Invalid;
        apply_transaction(state, tx, params.ledger, ctx.current_cycle);
        applied_txs[h] = {slot, record_hash};
        winners[key] = h;
        return TxOutcome::Applied;
    }
};

} // namespace detail

inline HistoryEvaluation evaluate_history(const GenesisInfo& genesis, const std::vector<Record>& records,
                                          const EngineParams& params, std::uint64_t end_slot) {
    HistoryEvaluation ev;
    for (const auto& r : records) {
        Digest h = r.hash();
        if (ev.records.emplace(h, r).second) ev.record_hashes.insert(h);
    }

    std::vector<const Record*> ordered;
    ordered.reserve(ev.records.size());
    for (const auto& [h, r] : ev.records) ordered.push_back(&r);
    std::sort(ordered.begin(), ordered.end(), [](const Record* a, const Record* b) {
        if (a->slot != b->slot) return a->slot < b->slot;
        return a->hash() < b->hash();
    });

    detail::Applier ap{genesis.state, params, {}, {}};
    ev.cb_chain = {genesis.cb};
    std::set<Digest> known_cbs{genesis.cb.hash()};
    ev.seeds[0] = genesis_cycle_seed(genesis.entropy, 0);
    ev.seeds[1] = genesis_cycle_seed(genesis.entropy, 1);
    ev.schedules[0] = assign_slots(genesis.voices, ev.seeds[0], params.cycle);
    ev.schedules[0].cycle_index = 0;
    ev.schedules[1] = assign_slots(genesis.voices, ev.seeds[1], params.cycle);
    ev.schedules[1].cycle_index = 1;
    ev.state_at_last_cb = genesis.state;
    std::map<std::uint64_t, RevealSet> reveals;

    const std::uint64_t slices = params.cycle.slices;
    const std::uint64_t lag = params.cycle.cycle_lag_slots;

    std::size_t next = 0;
    for (std::uint64_t slot = 0; slot <= end_slot; ++slot) {
        if (slot > 0 && is_cb_boundary_slot(slot, slices, lag)) {
            const std::uint64_t c = slot / slices - 1; // cycle being closed
            // silent scheduled voices: a live node under a partition-scale
            // outage jails rather than destroys, and any history containing
            // whole silent cycles looks exactly like that
            std::set<PublicKey> scheduled;
            auto sit = ev.schedules.find(c);
            if (sit != ev.schedules.end())
                for (const auto& slice : sit->second.assignment)
                    for (const auto& v : slice) scheduled.insert(v);
            for (const auto& v : scheduled) {
                const VoiceEntry* e = ap.state.vl.find_latest(v);
                if (e && e->status == VoiceStatus::Active && !ev.producers[c].count(v))
                    jail_voice(ap.state, v);
            }
            const RevealSet& rs = reveals[c];
            Digest seed =
                rs.reveals.empty() ? genesis_cycle_seed(genesis.entropy, c + 2) : derive_seed(rs);
            ev.seeds[c + 2] = seed;
            ConsensusBlock cb = take_snapshot(ap.state, ev.cb_chain.size(), slot, seed,
                                              ev.cb_chain.back().hash(), slices, lag);
            ev.cb_chain.push_back(cb);
            known_cbs.insert(cb.hash());
            ev.state_at_last_cb = ap.state;
            ev.last_cb_slot = slot;
            auto active = ap.state.vl.active_voices();
            if (!active.empty()) {
                ev.schedules[c + 2] = assign_slots(active, seed, params.cycle);
                ev.schedules[c + 2].cycle_index = c + 2;
            }
        }
        while (next < ordered.size() && ordered[next]->slot == slot) {
            const Record& r = *ordered[next];
            ++next;
            if (!r.signature_valid()) {
                ev.why = "bad record signature";
                return ev;
            }
            if (!known_cbs.count(r.prior_cb_hash)) {
                ev.why = "record cites a consensus block outside this history";
                return ev;
            }
            const std::uint64_t c = slot / slices;
            ev.producers[c].insert(r.creator);
            ev.commitments[c].emplace(r.creator, r.rng_commitment.digest); // first by (slot, hash)
            if (c > 0 && !r.rng_reveal.empty() && !reveals[c].reveals.count(r.creator)) {
                auto cit = ev.commitments.find(c - 1);
                if (cit != ev.commitments.end()) {
                    auto vc = cit->second.find(r.creator);
                    if (vc != cit->second.end() &&
                        open(Commitment{vc->second, std::nullopt}, view_of(r.rng_reveal)))
                        reveals[c].reveals[r.creator] = r.rng_reveal;
                }
            }
            for (const auto& tx : r.transactions) ap.apply_tx(tx, slot, r.hash());
        }
    }

    // signatures bound to this history's own consensus blocks
    std::set<Digest> own_cbs;
    for (std::size_t i = 1; i < ev.cb_chain.size(); ++i) own_cbs.insert(ev.cb_chain[i].hash());
    for (const auto& [h, r] : ev.records)
        if (own_cbs.count(r.prior_cb_hash)) ev.bound_signers.insert(r.creator);
    for (const auto& e : ap.state.vl.entries)
        if (e.status == VoiceStatus::Exited && e.exit) ev.bound_signers.insert(e.voice_id);

    ev.final_state = std::move(ap.state);
    ev.active_voices = ev.final_state.vl.active_voices().size();
    ev.valid = true;
    return ev;
}

/// Fork decision procedure over two evaluated branches, in order:
/// (1) the branch holding signatures bound to its own chain that the other
/// branch cannot replicate wins with no external input; (2) with live
/// first-seen data, the branch whose divergence record arrived earliest and
/// on time wins; (3) otherwise external input is required. Never length.
inline ForkChoiceOutcome fork_choice(const HistoryEvaluation& a, const HistoryEvaluation& b,
                                     const std::map<Digest, std::int64_t>* first_seen_ms,
                                     const EngineParams& params) {
    std::set<PublicKey> only_a, only_b;
    for (const auto& v : a.bound_signers)
        if (!b.bound_signers.count(v)) only_a.insert(v);
    for (const auto& v : b.bound_signers)
        if (!a.bound_signers.count(v)) only_b.insert(v);
    if (!only_a.empty() && only_b.empty()) return ForkChoiceOutcome::ChooseA;
    if (!only_b.empty() && only_a.empty()) return ForkChoiceOutcome::ChooseB;

    if (first_seen_ms) {
        auto divergence = [&](const HistoryEvaluation& x, const HistoryEvaluation& y) -> const Record* {
            const Record* best = nullptr;
            for (const auto& [h, r] : x.records) {
                if (y.record_hashes.count(h)) continue;
                if (!best || r.slot < best->slot || (r.slot == best->slot && h < best->hash())) best = &r;
            }
            return best;
        };
        const Record* da = divergence(a, b);
        const Record* db = divergence(b, a);
        if (da && db) {
            auto ita = first_seen_ms->find(da->hash());
            auto itb = first_seen_ms->find(db->hash());
            if (ita != first_seen_ms->end() && itb != first_seen_ms->end()) {
                auto on_time = [&](const Record* r, std::int64_t seen) {
                    return seen <= static_cast<std::int64_t>(r->slot + 1 + params.grace_slots) *
                                       params.slot_ms();
                };
                bool a_ok = on_time(da, ita->second);
                bool b_ok = on_time(db, itb->second);
                if (a_ok && !b_ok) return ForkChoiceOutcome::ChooseA;
                if (b_ok && !a_ok) return ForkChoiceOutcome::ChooseB;
                if (a_ok && b_ok)
                    return ita->second <= itb->second ? ForkChoiceOutcome::ChooseA
                                                      : ForkChoiceOutcome::ChooseB;
            }
        }
    }
    return ForkChoiceOutcome::NeedsExternalInput;
}

// ---------------------------------------------------------------------------
// Lite clients: header chain plus inclusion proofs.

enum class LiteVerdict : std::uint8_t { Accepted, InsufficientDepth, Invalid };

inline const char* to_string(LiteVerdict v) {
    switch (v) {
    case LiteVerdict::Accepted: return "accepted";
    case LiteVerdict::InsufficientDepth: return "insufficient_depth";
    case LiteVerdict::Invalid: return "invalid";
    }
    return "?";
}

struct HeaderView {
    std::map<Digest, RecordHeader> headers;
    std::map<Digest, std::vector<Digest>> acked_by;

    void insert(const RecordHeader& h) {
        Digest id = h.hash();
        if (!headers.emplace(id, h).second) return;
        for (const auto& a : h.acknowledged) acked_by[a].push_back(id);
    }

    std::uint64_t depth(const Digest& h) const {
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
                auto hit = headers.find(up);
                if (hit == headers.end()) continue;
                slots.insert(hit->second.slot);
                frontier.push_back(up);
            }
        }
        return slots.size();
    }
};

inline LiteVerdict lite_verify_payment(const HeaderView& view, const InclusionProof& proof,
                                       std::uint64_t required_depth) {
    Digest h = proof.header.hash();
    auto it = view.headers.find(h);
    if (it == view.headers.end()) return LiteVerdict::Invalid;
    if (!verify_inclusion_proof(proof)) return LiteVerdict::Invalid;
    if (view.depth(h) < required_depth) return LiteVerdict::InsufficientDepth;
    return LiteVerdict::Accepted;
}

// ---------------------------------------------------------------------------

class Node {
public:
    Node(int id, EngineParams params, GenesisInfo genesis, std::optional<VoiceIdentity> identity)
        : id_(id), params_(std::move(params)), genesis_(std::move(genesis)),
          identity_(std::move(identity)) {
        applier_.state = genesis_.state;
        applier_.params = params_;
        cb_chain_ = {genesis_.cb};
        known_cbs_.insert(genesis_.cb.hash());
        seeds_[0] = genesis_cycle_seed(genesis_.entropy, 0);
        seeds_[1] = genesis_cycle_seed(genesis_.entropy, 1);
        schedules_[0] = assign_slots(genesis_.voices, seeds_[0], params_.cycle);
        schedules_[0].cycle_index = 0;
        schedules_[1] = assign_slots(genesis_.voices, seeds_[1], params_.cycle);
        schedules_[1].cycle_index = 1;
        checkpoint_state_ = applier_.state;
    }

    int id() const { return id_; }
    bool is_voice() const { return identity_.has_value(); }
    const std::optional<VoiceIdentity>& identity() const { return identity_; }
    const LedgerState& ledger() const { return applier_.state; }
    const RecordDag& dag() const { return dag_; }
    const std::vector<ConsensusBlock>& cb_chain() const { return cb_chain_; }
    ForkState fork_state() const { return fork_state_; }
    const std::optional<ForkEvidence>& fork_evidence() const { return fork_evidence_; }
    bool partition_warning() const { return partition_warning_; }
    void set_clock_confused(bool v) { clock_confused_ = v; }
    bool clock_confused() const { return clock_confused_; }

    const std::vector<StatusEvent>& status_events() const { return status_events_; }
    const std::vector<SlashEvent>& slash_events() const { return slash_events_; }
    const std::vector<JailEvent>& jail_events() const { return jail_events_; }
    const std::vector<std::string>& invariant_violations() const { return violations_; }
    const std::vector<std::pair<Digest, std::int64_t>>& displaced_secured() const {
        return displaced_secured_;
    }
    std::size_t foreign_count() const { return foreign_.size(); }
    const std::map<Digest, Record>& foreign_records() const { return foreign_; }
    const std::map<Digest, Record>& archived_records() const { return archive_; }
    const std::map<Digest, std::int64_t>& first_seen() const { return first_seen_ms_; }
    std::optional<ForkChoiceOutcome> last_fork_outcome() const { return last_fork_outcome_; }
    const std::map<std::uint64_t, Digest>& seeds() const { return seeds_; }
    const std::map<std::uint64_t, RevealSet>& reveal_sets() const { return reveal_sets_; }
    const std::vector<std::pair<std::int64_t, bool>>& partition_timeline() const {
        return partition_timeline_;
    }
    const std::map<std::uint64_t, std::vector<Digest>>& applied_slots() const { return applied_slots_; }
    const std::map<Digest, std::pair<std::uint64_t, Digest>>& applied_txs() const {
        return applier_.applied_txs;
    }
    const GenesisInfo& genesis() const { return genesis_; }
    const EngineParams& engine_params() const { return params_; }
    std::set<PublicKey> producers_in_cycle(std::uint64_t cycle) const {
        auto it = producers_.find(cycle);
        return it == producers_.end() ? std::set<PublicKey>{} : it->second;
    }

    /// Schedule overrides model "rigging the network": the whole network
    /// agrees on the rigged slots, so every node gets the same map.
    void override_schedule(std::uint64_t slot, std::vector<PublicKey> creators) {
        schedule_overrides_[slot] = std::move(creators);
    }

    std::vector<PublicKey> scheduled_creators(std::uint64_t slot) const {
        auto ov = schedule_overrides_.find(slot);
        if (ov != schedule_overrides_.end()) return ov->second;
        const std::uint64_t cycle = slot / params_.cycle.slices;
        auto it = schedules_.find(cycle);
        if (it == schedules_.end()) return {};
        return it->second.voices_for(slot % params_.cycle.slices);
    }

    // -- transactions ---------------------------------------------------------

    ReceiveTxResult on_receive_transaction(const Transaction& tx, std::int64_t now_ms) {
        Digest h = tx.hash();
        if (pool_.count(h) || applier_.applied_txs.count(h)) return {ReceiveTxResult::Action::Duplicate, {}};

        auto key = std::make_pair(tx.sender, tx.sequence);
        auto pooled = pool_by_key_.find(key);
        bool conflicts_pool = pooled != pool_by_key_.end() && pooled->second != h;
        auto won = applier_.winners.find(key);
        bool conflicts_applied = won != applier_.winners.end() && won->second != h;
        if (conflicts_pool || conflicts_applied) {
            conflicts_[key].push_back(h);
            conflict_seen_ms_[key] = now_ms;
            held_conflict_txs_[h] = tx; // retained as evidence, never relayed
            set_status(h, TxStatus::Kind::Rejected, now_ms, 0, {}, "double_spend_conflict");
            return {ReceiveTxResult::Action::ConflictHeld, {}};
        }

        if (!tx.signature_valid()) {
            set_status(h, TxStatus::Kind::Rejected, now_ms, 0, {}, "bad_signature");
            return {ReceiveTxResult::Action::Rejected, TxError::BadSignature};
        }
        const std::int64_t ts_ms = tx.timestamp_s * 1000;
        const std::int64_t window =
            params_.slot_ms() * static_cast<std::int64_t>(params_.ledger.timestamp_window_slots);
        if (ts_ms > now_ms + window || ts_ms < now_ms - window) {
            set_status(h, TxStatus::Kind::Rejected, now_ms, 0, {}, "timestamp_out_of_window");
            return {ReceiveTxResult::Action::Rejected, TxError::TimestampOutOfWindow};
        }

        pool_.emplace(h, tx);
        pool_by_key_[key] = h;
        seen_order_[h] = next_arrival_++;
        set_status(h, TxStatus::Kind::Pending, now_ms, 0, {}, {});
        return {ReceiveTxResult::Action::AcceptRelay, {}};
    }

    // -- records ----------------------------------------------------------------

    ReceiveRecordResult on_receive_record(const Record& r, std::int64_t now_ms) {
        ReceiveRecordResult res;
        Digest h = r.hash();
        if (dag_.contains(h) || foreign_.count(h)) {
            res.action = ReceiveRecordResult::Action::Duplicate;
            return res;
        }
        if (!r.signature_valid()) {
            res.action = ReceiveRecordResult::Action::Reject;
            res.error = RecordError::BadSignature;
            return res;
        }
        first_seen_ms_.emplace(h, now_ms);

        // Records citing a consensus block we do not know may belong to a
        // competing history; buffer them for fork evaluation.
        const std::uint64_t record_cycle = r.slot / params_.cycle.slices;
        if (!known_cbs_.count(r.prior_cb_hash)) {
            foreign_[h] = r;
            res.action = ReceiveRecordResult::Action::Orphaned;
            res.error = RecordError::UnknownCb;
            return res;
        }
        // The record set of a closed cycle is frozen at the end of its lag
        // window; later arrivals no longer apply, but stay fetchable for
        // competing-history reconstruction.
        if (record_cycle < closed_cycles_) {
            archive_.emplace(h, r);
            res.action = ReceiveRecordResult::Action::Reject;
            res.error = RecordError::BadAcknowledgment;
            return res;
        }

        // Equivocation: any second record for the same slot and creator.
        if (auto alarm = equivocation_alarm(r, h, now_ms)) return *alarm;

        auto creators = scheduled_creators(r.slot);
        if (creators.empty()) {
            orphans_.push_back(r); // schedule not derivable yet
            res.action = ReceiveRecordResult::Action::Orphaned;
            return res;
        }
        if (std::find(creators.begin(), creators.end(), r.creator) == creators.end()) {
            archive_.emplace(h, r); // may belong to a competing history
            res.action = ReceiveRecordResult::Action::Reject;
            res.error = RecordError::WrongCreator;
            return res;
        }
        const VoiceEntry* ce = applier_.state.vl.find_latest(r.creator);
        if (!ce || ce->status == VoiceStatus::Destroyed || ce->status == VoiceStatus::Jailed) {
            archive_.emplace(h, r); // may belong to a competing history
            res.action = ReceiveRecordResult::Action::Reject;
            res.error = RecordError::WrongCreator;
            return res;
        }

        std::set<Digest> ack_seen;
        for (const auto& a : r.acknowledged) {
            if (!ack_seen.insert(a).second) {
                res.action = ReceiveRecordResult::Action::Reject;
                res.error = RecordError::BadAcknowledgment;
                return res;
            }
            const Record* prior = dag_.get(a);
            if (!prior) {
                orphans_.push_back(r);
                res.action = ReceiveRecordResult::Action::Orphaned;
                return res;
            }
            if (prior->slot >= r.slot) {
                res.action = ReceiveRecordResult::Action::Reject;
                res.error = RecordError::BadAcknowledgment;
                return res;
            }
        }

        if (r.tx_root != merkle_root(r.tx_hashes())) {
            res.action = ReceiveRecordResult::Action::Reject;
            res.error = RecordError::BadTxRoot;
            return res;
        }
        if (r.safe && !r.transactions.empty()) {
            res.action = ReceiveRecordResult::Action::Reject;
            res.error = RecordError::InvalidTransactionIncluded;
            return res;
        }

        // Self-contained transaction violations are slashable on sight.
        for (const auto& tx : r.transactions) {
            const std::int64_t ts_slot = (tx.timestamp_s * 1000) / params_.slot_ms();
            bool stale = ts_slot >= static_cast<std::int64_t>(r.slot) ||
                         r.slot - static_cast<std::uint64_t>(ts_slot) > params_.inclusion_freshness_slots;
            if (tx.signature_valid() && !stale) continue;
            dag_.insert(r);
            held_.insert(h);
            producers_[record_cycle].insert(r.creator);
            res.action = ReceiveRecordResult::Action::Reject;
            res.error = RecordError::InvalidTransactionIncluded;
            slash(r.creator, SlashEvidence{SlashEvidence::Kind::InvalidTxRecord, r.creator, {h}, 0},
                  now_ms, res.slashes);
            return res;
        }

        // Records building on held evidence join the held branch.
        bool on_held_branch = false;
        for (const auto& a : r.acknowledged)
            if (held_.count(a) || branch_of_held_.count(a)) on_held_branch = true;
        if (on_held_branch) {
            dag_.insert(r);
            branch_of_held_.insert(h);
            producers_[record_cycle].insert(r.creator);
            note_commitment(record_cycle, r);
            res.action = ReceiveRecordResult::Action::AcceptNoRelay;
            res.woven = try_weave(now_ms);
            res.reorged = !res.woven.empty();
            return res;
        }

        // Late precedence grab: a record for an earlier slot whose
        // transactions conflict with already-applied ones. Held by local
        // seen-order; never relayed.
        if (r.slot <= max_applied_slot_) {
            std::vector<Digest> conflicting = conflicts_with_applied(r);
            if (!conflicting.empty()) {
                dag_.insert(r);
                held_.insert(h);
                producers_[record_cycle].insert(r.creator);
                note_commitment(record_cycle, r);
                for (const auto& victim_record : conflicting) {
                    if (clean_depth(victim_record) >= params_.cycle.confirm_depth) {
                        fork_state_ = ForkState::UnresolvableFork;
                        fork_evidence_ = ForkEvidence{ForkEvidence::Kind::UnconfirmingDoubleSpend,
                                                      {h, victim_record},
                                                      {now_ms, first_seen_ms_[victim_record]}};
                        res.action = ReceiveRecordResult::Action::ForkAlarm;
                        res.fork = fork_evidence_;
                        return res;
                    }
                }
                if (fork_state_ == ForkState::None) fork_state_ = ForkState::ResolvableConflict;
                res.action = ReceiveRecordResult::Action::AcceptNoRelay;
                res.woven = try_weave(now_ms);
                res.reorged = !res.woven.empty();
                return res;
            }
        }

        // Normal acceptance.
        dag_.insert(r);
        producers_[record_cycle].insert(r.creator);
        note_commitment(record_cycle, r);
        const std::uint64_t prev_max = max_applied_slot_;
        auto& at_slot = applied_slots_[r.slot];
        at_slot.push_back(h);
        std::sort(at_slot.begin(), at_slot.end());
        unsecured_applied_.insert(h);
        max_applied_slot_ = std::max(max_applied_slot_, r.slot);
        const bool out_of_order = r.slot < prev_max || at_slot.back() != h;
        if (out_of_order) {
            replay_open_region(now_ms);
            res.reorged = true;
        } else {
            apply_record_txs(*dag_.get(h), h, now_ms);
        }
        refresh_secured(now_ms);
        res.action = ReceiveRecordResult::Action::AcceptRelay;
        res.relay = true;
        retry_orphans(now_ms);
        res.woven = try_weave(now_ms);
        if (!res.woven.empty()) res.reorged = true;
        return res;
    }

    // -- production ---------------------------------------------------------------

    ProduceResult decide_record_action(std::uint64_t slot, std::int64_t now_ms) {
        ProduceResult out;
        if (!identity_) {
            out.reason = "observer";
            return out;
        }
        const VoiceEntry* e = applier_.state.vl.find_latest(identity_->keys.pk);
        if (!e || e->status != VoiceStatus::Active) {
            out.reason = e && e->status == VoiceStatus::Jailed ? "jailed" : "not_active";
            return out;
        }
        auto creators = scheduled_creators(slot);
        if (std::find(creators.begin(), creators.end(), identity_->keys.pk) == creators.end()) {
            out.reason = "unscheduled";
            return out;
        }
        if (fork_state_ == ForkState::UnresolvableFork) {
            out.reason = "halted_unresolvable_fork"; // safety over liveness
            return out;
        }

        const std::uint64_t cycle = slot / params_.cycle.slices;
        RecordInputs in;
        in.slot = slot;
        in.keys = &identity_->keys;
        in.prior_cb_hash = cb_chain_.back().hash();
        in.created_at_ms = now_ms;
        in.rng_commitment = commit(view_of(voice_secret(cycle + 1)));
        in.rng_reveal = cycle == 0 ? Bytes{} : voice_secret(cycle);

        bool missing_recent = false;
        const std::uint64_t from =
            slot > params_.cycle.confirm_depth ? slot - params_.cycle.confirm_depth : 0;
        for (std::uint64_t s = from; s < slot; ++s)
            if (!dag_.by_slot.count(s)) missing_recent = true;
        bool recent_conflict = false;
        for (const auto& [key, at] : conflict_seen_ms_)
            if (now_ms - at <= params_.slot_ms() * static_cast<std::int64_t>(params_.cycle.confirm_depth))
                recent_conflict = true;

        std::vector<Digest> acks = clean_tips(slot);
        if (clock_confused_ || (missing_recent && recent_conflict)) {
            out.action = ProduceResult::Action::ProduceSafe;
            out.record = build_record(in, std::move(acks), {}, /*safe=*/true);
            out.reason = clock_confused_ ? "clock_confused" : "missing_record_with_conflict";
        } else {
            out.action = ProduceResult::Action::Produce;
            out.record = build_record(in, std::move(acks), assigned_transactions(slot, creators),
                                      /*safe=*/false);
        }
        // our own record enters our state through the ordinary receive path
        on_receive_record(*out.record, now_ms);
        return out;
    }

    // -- slot bookkeeping -----------------------------------------------------------

    /// Runs at every slot start: partition scan, cycle close when due.
    std::vector<SlashEvent> on_slot_begin(std::uint64_t slot, std::int64_t now_ms) {
        current_slot_ = slot;
        std::vector<SlashEvent> out;
        bool warn = detect_partition(now_ms);
        if (warn != partition_warning_) {
            partition_warning_ = warn;
            partition_timeline_.emplace_back(now_ms, warn);
        }
        if (warn) warned_cycles_.insert(slot / params_.cycle.slices);

        if (slot > 0 && is_cb_boundary_slot(slot, params_.cycle.slices, params_.cycle.cycle_lag_slots))
            out = close_cycle(slot, now_ms);
        retry_orphans(now_ms);
        return out;
    }

    /// Missing-record fraction over the trailing window exceeds the
    /// threshold, strictly.
    bool detect_partition(std::int64_t now_ms) const {
        const std::int64_t grace = params_.slot_ms() * static_cast<std::int64_t>(params_.grace_slots);
        const std::int64_t completed_ms = now_ms - grace;
        if (completed_ms < params_.slot_ms()) return false;
        const std::uint64_t completed = static_cast<std::uint64_t>(completed_ms / params_.slot_ms());
        // no judgment until a full window of slots has elapsed
        const std::uint64_t window = params_.partition_window_slots;
        if (completed < window) return false;
        std::uint64_t missing = 0;
        for (std::uint64_t s = completed - window; s < completed; ++s)
            if (!dag_.by_slot.count(s)) ++missing;
        return missing * 1000 > static_cast<std::uint64_t>(params_.partition_threshold_permille) * window;
    }

    // -- status -------------------------------------------------------------------

    TxStatus transaction_status(const Digest& tx_hash) const {
        auto it = status_.find(tx_hash);
        return it == status_.end() ? TxStatus{} : it->second;
    }

    /// Depth of a record counting only records this node accepts into
    /// history (held evidence branches do not secure anything).
    std::uint64_t clean_depth(const Digest& h) const {
        std::set<Digest> visited{h};
        std::set<std::uint64_t> slots;
        std::vector<Digest> frontier{h};
        while (!frontier.empty()) {
            Digest cur = frontier.back();
            frontier.pop_back();
            auto it = dag_.acked_by.find(cur);
            if (it == dag_.acked_by.end()) continue;
            for (const auto& up : it->second) {
                if (held_.count(up) || branch_of_held_.count(up)) continue;
                if (!visited.insert(up).second) continue;
                slots.insert(dag_.records.at(up).slot);
                frontier.push_back(up);
            }
        }
        return slots.size();
    }

    /// Digest of the deterministic view: equal digests mean replayable
    /// equality of everything consensus-relevant.
    Digest state_digest() const {
        Hasher h;
        h.update("dca.node.state.v1");
        h.update(view_of(serialize_state(applier_.state)));
        Writer w;
        for (const auto& [slot, hashes] : applied_slots_) {
            w.u64(slot);
            for (const auto& d : hashes) w.digest(d);
        }
        for (const auto& cb : cb_chain_) w.digest(cb.hash());
        w.u8(static_cast<std::uint8_t>(fork_state_));
        std::vector<Digest> pool_hashes;
        pool_hashes.reserve(pool_.size());
        for (const auto& [d, tx] : pool_) pool_hashes.push_back(d);
        for (const auto& d : pool_hashes) w.digest(d);
        h.update(view_of(w.out()));
        return h.final();
    }

    HeaderView header_view() const {
        HeaderView v;
        for (const auto& [h, r] : dag_.records) v.insert(header_of(r));
        return v;
    }

    // -- fork resolution --------------------------------------------------------------

    /// Reconstruct a competing history from buffered foreign records; on
    /// success the fork is unresolvable and arbitration runs under the given
    /// policy. Jailing of losing-branch voices follows the decision.
    std::optional<ForkChoiceOutcome> try_resolve_fork(ArbitrationPolicy policy, int scripted_branch,
                                                      std::int64_t now_ms) {
        if (foreign_.size() < params_.cycle.confirm_depth) return std::nullopt;

        // the foreign branch is the acknowledgment closure of the foreign
        // records plus whatever shared prefix both sides hold
        std::map<Digest, Record> branch = foreign_;
        std::vector<Digest> stack;
        stack.reserve(branch.size());
        for (const auto& [h, r] : branch) stack.push_back(h);
        while (!stack.empty()) {
            Digest cur = stack.back();
            stack.pop_back();
            auto it = branch.find(cur);
            if (it == branch.end()) continue;
            for (const auto& a : it->second.acknowledged) {
                if (branch.count(a)) continue;
                const Record* prior = dag_.get(a);
                if (!prior) {
                    auto arch = archive_.find(a);
                    if (arch != archive_.end()) prior = &arch->second;
                }
                if (!prior) {
                    for (const auto& orphan : orphans_)
                        if (orphan.hash() == a) {
                            prior = &orphan;
                            break;
                        }
                }
                if (prior) {
                    branch.emplace(a, *prior);
                    stack.push_back(a);
                }
            }
        }
        std::vector<Record> theirs;
        theirs.reserve(branch.size());
        for (const auto& [h, r] : branch) theirs.push_back(r);
        std::vector<Record> ours;
        for (const auto& [slot, hashes] : applied_slots_)
            for (const auto& h : hashes) ours.push_back(*dag_.get(h));

        const std::uint64_t end_slot = std::max(max_applied_slot_, current_slot_);
        HistoryEvaluation mine = evaluate_history(genesis_, ours, params_, end_slot);
        HistoryEvaluation other = evaluate_history(genesis_, theirs, params_, end_slot);
        if (!mine.valid || !other.valid) return std::nullopt;

        fork_state_ = ForkState::UnresolvableFork;
        std::vector<Digest> heads;
        if (!ours.empty()) heads.push_back(ours.back().hash());
        if (!theirs.empty()) heads.push_back(theirs.back().hash());
        fork_evidence_ = ForkEvidence{ForkEvidence::Kind::CompetingHistories, heads, {now_ms, now_ms}};

        // a node that itself suspected a partition cannot trust its arrival
        // times to rank the branches
        const std::map<Digest, std::int64_t>* seen =
            warned_cycles_.empty() ? &first_seen_ms_ : nullptr;
        ForkChoiceOutcome outcome = fork_choice(mine, other, seen, params_);
        if (outcome == ForkChoiceOutcome::NeedsExternalInput) {
            switch (policy) {
            case ArbitrationPolicy::AutoMajorityOfVoices:
                outcome = other.active_voices > mine.active_voices ? ForkChoiceOutcome::ChooseB
                                                                   : ForkChoiceOutcome::ChooseA;
                break;
            case ArbitrationPolicy::ScriptedAnswer:
                outcome = scripted_branch == 1 ? ForkChoiceOutcome::ChooseB : ForkChoiceOutcome::ChooseA;
                break;
            case ArbitrationPolicy::AlwaysAsk:
                last_fork_outcome_ = ForkChoiceOutcome::NeedsExternalInput;
                return ForkChoiceOutcome::NeedsExternalInput; // halted
            }
        }
        last_fork_outcome_ = outcome;
        const bool take_theirs = outcome == ForkChoiceOutcome::ChooseB;
        adopt_history(take_theirs ? other : mine, take_theirs ? mine : other, now_ms);
        return outcome;
    }

    /// Pardon hook: the primary fork may restore a jailed voice. The vote
    /// that authorizes it is outside this artifact.
    void pardon(const PublicKey& voice, std::int64_t now_ms) {
        pardon_voice(applier_.state, voice);
        jail_events_.push_back({voice, true, now_ms});
    }

private:
    Bytes voice_secret(std::uint64_t cycle) const {
        Writer w;
        w.digest(identity_->rng_base);
        w.u64(cycle);
        Digest d = hash_tagged(tag::voice_secret, view_of(w.out()));
        return Bytes(d.bytes.begin(), d.bytes.end());
    }

    std::optional<ReceiveRecordResult> equivocation_alarm(const Record& r, const Digest& h,
                                                          std::int64_t now_ms) {
        auto slot_it = dag_.by_slot.find(r.slot);
        if (slot_it == dag_.by_slot.end()) return std::nullopt;
        for (const auto& other_hash : slot_it->second) {
            const Record& other = *dag_.get(other_hash);
            if (other.creator != r.creator) continue;
            auto proof = detect_equivocation(other, r);
            if (!proof) continue;
            dag_.insert(r);
            held_.insert(h);
            producers_[r.slot / params_.cycle.slices].insert(r.creator);
            ReceiveRecordResult res;
            res.action = ReceiveRecordResult::Action::ForkAlarm;
            res.fork = ForkEvidence{ForkEvidence::Kind::Equivocation,
                                    {other_hash, h},
                                    {first_seen_ms_[other_hash], now_ms}};
            res.relay = true; // evidence must propagate
            slash(r.creator,
                  SlashEvidence{SlashEvidence::Kind::EquivocationPair, r.creator, {other_hash, h}, 0},
                  now_ms, res.slashes);
            fork_evidence_ = res.fork;
            if (fork_state_ == ForkState::None) fork_state_ = ForkState::ResolvableConflict;
            return res;
        }
        return std::nullopt;
    }

    void slash(const PublicKey& voice, SlashEvidence evidence, std::int64_t now_ms,
               std::vector<SlashEvidence>& out) {
        const VoiceEntry* e = applier_.state.vl.find_latest(voice);
        if (!e || (e->status != VoiceStatus::Active && e->status != VoiceStatus::Jailed)) return;
        destroy_voice_deposit(applier_.state, voice, params_.ledger.voice_deposit);
        slash_events_.push_back({evidence, now_ms});
        out.push_back(std::move(evidence));
    }

    void note_commitment(std::uint64_t cycle, const Record& r) {
        auto& per_voice = commitments_[cycle];
        auto it = per_voice.find(r.creator);
        Digest rh = r.hash();
        if (it == per_voice.end()) {
            per_voice.emplace(r.creator, std::make_tuple(r.slot, rh, r.rng_commitment.digest));
            return;
        }
        // deterministic choice: smallest (slot, record hash)
        auto& [slot, h, digest] = it->second;
        if (r.slot < slot || (r.slot == slot && rh < h))
            it->second = std::make_tuple(r.slot, rh, r.rng_commitment.digest);
    }

    /// Applied records whose transactions a late arrival would displace.
    std::vector<Digest> conflicts_with_applied(const Record& r) const {
        std::vector<Digest> out;
        for (const auto& tx : r.transactions) {
            auto key = std::make_pair(tx.sender, tx.sequence);
            auto w = applier_.winners.find(key);
            if (w == applier_.winners.end() || w->second == tx.hash()) continue;
            auto at = applier_.applied_txs.find(w->second);
            if (at != applier_.applied_txs.end() && at->second.first > r.slot)
                out.push_back(at->second.second);
        }
        return out;
    }

    /// Tips of the view excluding held evidence branches, for honest
    /// acknowledgment lists.
    std::vector<Digest> clean_tips(std::uint64_t below_slot) const {
        std::set<Digest> referenced;
        std::vector<Digest> clean;
        for (const auto& [h, r] : dag_.records) {
            if (held_.count(h) || branch_of_held_.count(h)) continue;
            clean.push_back(h);
        }
        for (const auto& h : clean)
            for (const auto& a : dag_.get(h)->acknowledged) referenced.insert(a);
        std::vector<Digest> tips;
        for (const auto& h : clean)
            if (!referenced.count(h) && dag_.get(h)->slot < below_slot) tips.push_back(h);
        std::sort(tips.begin(), tips.end());
        return tips;
    }

    std::vector<Transaction> assigned_transactions(std::uint64_t slot,
                                                   const std::vector<PublicKey>& co_assigned) {
        std::vector<Transaction> eligible;
        for (const auto& [h, tx] : pool_) {
            if (applier_.applied_txs.count(h)) continue;
            const std::int64_t ts_slot = (tx.timestamp_s * 1000) / params_.slot_ms();
            if (ts_slot >= static_cast<std::int64_t>(slot)) continue;
            if (slot - static_cast<std::uint64_t>(ts_slot) > params_.inclusion_freshness_slots) continue;
            eligible.push_back(tx);
        }
        auto parts = partition_transactions(eligible, co_assigned);
        std::vector<Transaction> mine = parts[identity_->keys.pk];
        std::sort(mine.begin(), mine.end(), [](const Transaction& a, const Transaction& b) {
            if (a.sender != b.sender) return a.sender < b.sender;
            if (a.sequence != b.sequence) return a.sequence < b.sequence;
            return a.hash() < b.hash();
        });
        // keep the prefix that validates in order
        LedgerState scratch = applier_.state;
        TxValidationCtx ctx;
        ctx.now_ms = static_cast<std::int64_t>(slot) * params_.slot_ms();
        ctx.slot_ms = params_.slot_ms();
        ctx.current_cycle = slot / params_.cycle.slices;
        ctx.params = params_.ledger;
        ctx.params.timestamp_window_slots = params_.inclusion_freshness_slots;
        for (const auto& cb : cb_chain_) ctx.recent_cb_hashes.push_back(cb.hash());
        std::vector<Transaction> out;
        for (const auto& tx : mine) {
            if (validate_transaction(scratch, tx, ctx)) continue;
            apply_transaction(scratch, tx, ctx.params, ctx.current_cycle);
            out.push_back(tx);
        }
        return out;
    }

    void set_status(const Digest& tx, TxStatus::Kind kind, std::int64_t now_ms, std::uint64_t slot,
                    const Digest& record_hash, std::string reason) {
        TxStatus& st = status_[tx];
        if (st.kind == kind && st.record_hash == record_hash) return;
        st.kind = kind;
        st.slot = slot;
        st.record_hash = record_hash;
        st.reject_reason = std::move(reason);
        status_events_.push_back({tx, kind, now_ms, slot});
    }

    void apply_record_txs(const Record& r, const Digest& h, std::int64_t now_ms) {
        for (const auto& tx : r.transactions) {
            Digest th = tx.hash();
            switch (applier_.apply_tx(tx, r.slot, h)) {
            case detail::Applier::TxOutcome::Applied:
                set_status(th, TxStatus::Kind::Confirmed, now_ms, r.slot, h, {});
                pool_erase(tx);
                break;
            case detail::Applier::TxOutcome::SkippedLoser:
                set_status(th, TxStatus::Kind::Rejected, now_ms, r.slot, h, "double_spend_loser");
                break;
            case detail::Applier::TxOutcome::Invalid:
                set_status(th, TxStatus::Kind::Rejected, now_ms, r.slot, h, "invalid_at_application");
                break;
            case detail::Applier::TxOutcome::SkippedDuplicate:
                break;
            }
        }
    }

    void pool_erase(const Transaction& tx) {
        Digest h = tx.hash();
        pool_.erase(h);
        auto key = std::make_pair(tx.sender, tx.sequence);
        auto it = pool_by_key_.find(key);
        if (it != pool_by_key_.end() && it->second == h) pool_by_key_.erase(it);
    }

    /// Rebuild the open region (everything after the last closed cycle) from
    /// the checkpoint. Secured transactions must survive any reorganization
    /// unless the fork is already unresolvable.
    void replay_open_region(std::int64_t now_ms) {
        std::set<Digest> secured_before = secured_;

        applier_.state = checkpoint_state_;
        std::vector<Digest> forget;
        for (const auto& [tx, where] : applier_.applied_txs)
            if (where.first >= checkpoint_slot_) forget.push_back(tx);
        for (const auto& tx : forget) applier_.applied_txs.erase(tx);
        std::vector<std::pair<PublicKey, std::uint64_t>> win_forget;
        for (const auto& [key, tx] : applier_.winners)
            if (!applier_.applied_txs.count(tx)) win_forget.push_back(key);
        for (const auto& key : win_forget) applier_.winners.erase(key);
        // slashes since the checkpoint are re-imposed; earlier ones are
        // already folded into the checkpoint state
        for (const auto& ev : slash_events_) {
            if (ev.at_ms < checkpoint_at_ms_) continue;
            const VoiceEntry* e = applier_.state.vl.find_latest(ev.evidence.voice);
            if (e && (e->status == VoiceStatus::Active || e->status == VoiceStatus::Jailed))
                destroy_voice_deposit(applier_.state, ev.evidence.voice, params_.ledger.voice_deposit);
        }

        for (const auto& [slot, hashes] : applied_slots_) {
            if (slot < checkpoint_slot_) continue;
            for (const auto& h : hashes) apply_record_txs(*dag_.get(h), h, now_ms);
        }
        resecure_after_replay(now_ms);
        note_displaced(secured_before, now_ms);
    }

    /// Reversing a secured transaction is, by definition, an unresolvable
    /// network fork; a node observing it flips state before the drop lands.
    void note_displaced(const std::set<Digest>& secured_before, std::int64_t now_ms) {
        for (const auto& tx : secured_before) {
            if (applier_.applied_txs.count(tx)) continue;
            if (fork_state_ != ForkState::UnresolvableFork) {
                fork_state_ = ForkState::UnresolvableFork;
                if (!fork_evidence_)
                    fork_evidence_ =
                        ForkEvidence{ForkEvidence::Kind::CompetingHistories, {tx}, {now_ms}};
            }
            displaced_secured_.emplace_back(tx, now_ms);
            set_status(tx, TxStatus::Kind::Rejected, now_ms, 0, {}, "displaced_by_fork");
        }
    }

    void refresh_secured(std::int64_t now_ms) {
        std::vector<Digest> ripe;
        for (const auto& h : unsecured_applied_)
            if (clean_depth(h) >= params_.cycle.confirm_depth) ripe.push_back(h);
        for (const auto& h : ripe) {
            unsecured_applied_.erase(h);
            secured_records_.insert(h);
            mark_record_secured(h, now_ms);
        }
    }

    void mark_record_secured(const Digest& h, std::int64_t now_ms) {
        const Record* r = dag_.get(h);
        for (const auto& tx : r->transactions) {
            Digest th = tx.hash();
            auto it = applier_.applied_txs.find(th);
            if (it == applier_.applied_txs.end() || it->second.second != h) continue;
            secured_.insert(th);
            set_status(th, TxStatus::Kind::Secured, now_ms, r->slot, h, {});
        }
    }

    void resecure_after_replay(std::int64_t now_ms) {
        unsecured_applied_.clear();
        for (const auto& [slot, hashes] : applied_slots_) {
            for (const auto& h : hashes) {
                if (secured_records_.count(h) || clean_depth(h) >= params_.cycle.confirm_depth) {
                    secured_records_.insert(h);
                    mark_record_secured(h, now_ms);
                } else {
                    unsecured_applied_.insert(h);
                }
            }
        }
    }

    /// Acknowledgments only express network acceptance while their creator
    /// still has standing; a destroyed voice's records prove nothing.
    std::uint64_t weave_depth(const Digest& h) const {
        std::set<Digest> visited{h};
        std::set<std::uint64_t> slots;
        std::vector<Digest> frontier{h};
        while (!frontier.empty()) {
            Digest cur = frontier.back();
            frontier.pop_back();
            auto it = dag_.acked_by.find(cur);
            if (it == dag_.acked_by.end()) continue;
            for (const auto& up : it->second) {
                if (!visited.insert(up).second) continue;
                const Record& rec = dag_.records.at(up);
                const VoiceEntry* e = applier_.state.vl.find_latest(rec.creator);
                if (e && e->status == VoiceStatus::Destroyed) continue;
                slots.insert(rec.slot);
                frontier.push_back(up);
            }
        }
        return slots.size();
    }

    /// Held records reaching confirm depth have been accepted by the network
    /// regardless of our refusal; weave them and their branch into history.
    /// Returns everything newly accepted.
    std::vector<Digest> try_weave(std::int64_t now_ms) {
        std::vector<Digest> ripe;
        for (const auto& h : held_)
            if (weave_depth(h) >= params_.cycle.confirm_depth) ripe.push_back(h);
        if (ripe.empty()) return {};
        std::vector<Digest> accepted;
        for (const auto& h : ripe) {
            held_.erase(h);
            woven_.insert(h);
            displace_sibling(h);
            insert_applied(h);
            accepted.push_back(h);
        }
        bool moved = true;
        while (moved) {
            moved = false;
            std::vector<Digest> promote;
            for (const auto& h : branch_of_held_) {
                const Record* r = dag_.get(h);
                bool blocked = false;
                for (const auto& a : r->acknowledged)
                    if (held_.count(a) || branch_of_held_.count(a)) blocked = true;
                if (!blocked) promote.push_back(h);
            }
            for (const auto& h : promote) {
                branch_of_held_.erase(h);
                insert_applied(h);
                accepted.push_back(h);
                moved = true;
            }
        }
        replay_open_region(now_ms);
        if (fork_state_ == ForkState::ResolvableConflict && held_.empty())
            fork_state_ = ForkState::None;
        return accepted;
    }

    void insert_applied(const Digest& h) {
        const Record* r = dag_.get(h);
        auto& at_slot = applied_slots_[r->slot];
        at_slot.push_back(h);
        std::sort(at_slot.begin(), at_slot.end());
        unsecured_applied_.insert(h);
        max_applied_slot_ = std::max(max_applied_slot_, r->slot);
    }

    /// A woven record displaces any same-creator record it equivocates with;
    /// one voice gets one record per window in history.
    void displace_sibling(const Digest& h) {
        const Record* r = dag_.get(h);
        auto it = applied_slots_.find(r->slot);
        if (it == applied_slots_.end()) return;
        auto& at_slot = it->second;
        for (auto sib = at_slot.begin(); sib != at_slot.end();) {
            const Record* other = dag_.get(*sib);
            if (other->creator == r->creator && *sib != h) {
                unsecured_applied_.erase(*sib);
                secured_records_.erase(*sib);
                sib = at_slot.erase(sib);
            } else {
                ++sib;
            }
        }
    }

    void retry_orphans(std::int64_t now_ms) {
        bool progressed = true;
        while (progressed) {
            progressed = false;
            std::vector<Record> pending;
            pending.swap(orphans_);
            for (const auto& r : pending) {
                Digest h = r.hash();
                std::int64_t seen = first_seen_ms_.count(h) ? first_seen_ms_[h] : now_ms;
                auto res = on_receive_record(r, seen);
                if (res.action != ReceiveRecordResult::Action::Orphaned &&
                    res.action != ReceiveRecordResult::Action::Duplicate)
                    progressed = true;
            }
        }
    }

    std::vector<SlashEvent> close_cycle(std::uint64_t boundary_slot, std::int64_t now_ms) {
        std::vector<SlashEvent> out;
        const std::uint64_t c = boundary_slot / params_.cycle.slices - 1;

        // reveal set: first valid reveal per voice by (slot, record hash)
        RevealSet rs;
        rs.cycle_index = c;
        if (c > 0) {
            auto cit = commitments_.find(c - 1);
            for (std::uint64_t s = c * params_.cycle.slices; s < (c + 1) * params_.cycle.slices; ++s) {
                auto bit = dag_.by_slot.find(s);
                if (bit == dag_.by_slot.end()) continue;
                std::vector<Digest> hashes = bit->second;
                std::sort(hashes.begin(), hashes.end());
                for (const auto& rh : hashes) {
                    const Record& r = *dag_.get(rh);
                    if (r.rng_reveal.empty() || rs.reveals.count(r.creator)) continue;
                    if (cit == commitments_.end()) continue;
                    auto vc = cit->second.find(r.creator);
                    if (vc == cit->second.end()) continue;
                    if (open(Commitment{std::get<2>(vc->second), std::nullopt}, view_of(r.rng_reveal)))
                        rs.reveals[r.creator] = r.rng_reveal;
                }
            }
        }

        // scheduled voices with zero records over the whole cycle
        std::set<PublicKey> scheduled;
        auto sit = schedules_.find(c);
        if (sit != schedules_.end())
            for (const auto& slice : sit->second.assignment)
                for (const auto& v : slice) scheduled.insert(v);
        std::vector<PublicKey> liable;
        for (const auto& v : scheduled) {
            const VoiceEntry* e = applier_.state.vl.find_latest(v);
            if (e && e->status == VoiceStatus::Active) liable.push_back(v);
        }
        std::set<PublicKey> silent = penalize_silent_voices(producers_[c], liable);
        rs.missing = silent;

        const bool warned = warned_cycles_.count(c) != 0;
        for (const auto& v : silent) {
            if (warned) {
                // missing records at partition scale point at a fork, not at
                // malice: jail, pending pardon
                jail_voice(applier_.state, v);
                jail_events_.push_back({v, false, now_ms});
            } else {
                destroy_voice_deposit(applier_.state, v, params_.ledger.voice_deposit);
                SlashEvidence ev{SlashEvidence::Kind::FullCycleSilence, v, {}, c};
                slash_events_.push_back({ev, now_ms});
                out.push_back({ev, now_ms});
            }
        }

        Digest seed = rs.reveals.empty() ? genesis_cycle_seed(genesis_.entropy, c + 2) : derive_seed(rs);
        seeds_[c + 2] = seed;
        reveal_sets_[c] = rs;

        // conservation audit at every snapshot boundary
        const Amount total = conservation_total(applier_.state, params_.ledger.voice_deposit);
        if (total != genesis_.total)
            throw std::logic_error("conservation violated at cycle close: " + std::to_string(total) +
                                   " != " + std::to_string(genesis_.total));

        ConsensusBlock cb = take_snapshot(applier_.state, cb_chain_.size(), boundary_slot, seed,
                                          cb_chain_.back().hash(), params_.cycle.slices,
                                          params_.cycle.cycle_lag_slots);
        cb_chain_.push_back(cb);
        known_cbs_.insert(cb.hash());

        auto active = applier_.state.vl.active_voices();
        if (!active.empty()) {
            schedules_[c + 2] = assign_slots(active, seed, params_.cycle);
            schedules_[c + 2].cycle_index = c + 2;
        }

        closed_cycles_ = c + 1;
        checkpoint_state_ = applier_.state;
        checkpoint_slot_ = boundary_slot;
        checkpoint_at_ms_ = now_ms;
        return out;
    }

    void adopt_history(const HistoryEvaluation& winner, const HistoryEvaluation& loser,
                       std::int64_t now_ms) {
        std::set<PublicKey> losers;
        for (const auto& v : loser.bound_signers)
            if (!winner.bound_signers.count(v)) losers.insert(v);

        std::set<Digest> secured_before = secured_;

        dag_ = RecordDag{};
        held_.clear();
        branch_of_held_.clear();
        woven_.clear();
        foreign_.clear();
        applied_slots_.clear();
        max_applied_slot_ = 0;
        applier_ = detail::Applier{winner.state_at_last_cb, params_, {}, {}};
        for (const auto& [h, r] : winner.records) {
            dag_.insert(r);
            insert_applied(h);
        }
        cb_chain_ = winner.cb_chain;
        known_cbs_.clear();
        for (const auto& cb : cb_chain_) known_cbs_.insert(cb.hash());
        seeds_ = winner.seeds;
        schedules_ = winner.schedules;
        producers_.clear();
        for (const auto& [c, set] : winner.producers) producers_[c] = set;
        commitments_.clear();
        for (const auto& [c, per_voice] : winner.commitments)
            for (const auto& [v, digest] : per_voice)
                commitments_[c].emplace(v, std::make_tuple(std::uint64_t{0}, Digest{}, digest));
        closed_cycles_ = cb_chain_.back().cb_index;
        checkpoint_state_ = winner.state_at_last_cb;
        checkpoint_slot_ = winner.last_cb_slot;
        checkpoint_at_ms_ = now_ms;
        secured_records_.clear();
        unsecured_applied_.clear();
        // replay the open region on top of the winner's last snapshot
        for (const auto& [slot, hashes] : applied_slots_) {
            if (slot < checkpoint_slot_) {
                // closed region: bookkeeping only, state already snapshotted
                for (const auto& h : hashes) {
                    const Record* r = dag_.get(h);
                    for (const auto& tx : r->transactions) {
                        Digest th = tx.hash();
                        auto key = std::make_pair(tx.sender, tx.sequence);
                        if (!applier_.winners.count(key)) {
                            applier_.winners[key] = th;
                            applier_.applied_txs[th] = {slot, h};
                            set_status(th, TxStatus::Kind::Confirmed, now_ms, slot, h, {});
                        }
                    }
                }
            } else {
                for (const auto& h : hashes) apply_record_txs(*dag_.get(h), h, now_ms);
            }
        }
        resecure_after_replay(now_ms);
        for (const auto& v : losers) {
            const VoiceEntry* e = applier_.state.vl.find_latest(v);
            if (e && e->status == VoiceStatus::Active) {
                jail_voice(applier_.state, v);
                jail_events_.push_back({v, false, now_ms});
            }
        }
        // adoption runs only after the fork was declared unresolvable
        if (fork_state_ != ForkState::UnresolvableFork)
            violations_.push_back("history adopted without an unresolvable fork");
        note_displaced(secured_before, now_ms);
    }

    int id_;
    EngineParams params_;
    GenesisInfo genesis_;
    std::optional<VoiceIdentity> identity_;

    RecordDag dag_;
    detail::Applier applier_; // .state is the live ledger

    std::map<std::uint64_t, std::vector<Digest>> applied_slots_;
    std::uint64_t max_applied_slot_ = 0;
    std::uint64_t current_slot_ = 0;
    std::set<Digest> held_;            // refused late records (evidence)
    std::set<Digest> branch_of_held_;  // their descendants
    std::set<Digest> woven_;           // held records accepted by depth
    std::map<Digest, Record> foreign_; // records citing unknown consensus blocks
    std::map<Digest, Record> archive_; // beyond-lag arrivals, reconstruction only
    std::vector<Record> orphans_;

    std::vector<ConsensusBlock> cb_chain_;
    std::set<Digest> known_cbs_;
    std::map<std::uint64_t, Digest> seeds_;
    std::map<std::uint64_t, Schedule> schedules_;
    std::map<std::uint64_t, std::vector<PublicKey>> schedule_overrides_;
    std::map<std::uint64_t, std::set<PublicKey>> producers_;
    std::map<std::uint64_t, std::map<PublicKey, std::tuple<std::uint64_t, Digest, Digest>>> commitments_;
    std::map<std::uint64_t, RevealSet> reveal_sets_;
    std::uint64_t closed_cycles_ = 0;

    LedgerState checkpoint_state_;
    std::uint64_t checkpoint_slot_ = 0;
    std::int64_t checkpoint_at_ms_ = 0;

    std::map<Digest, Transaction> pool_;
    std::map<std::pair<PublicKey, std::uint64_t>, Digest> pool_by_key_;
    std::map<std::pair<PublicKey, std::uint64_t>, std::vector<Digest>> conflicts_;
    std::map<std::pair<PublicKey, std::uint64_t>, std::int64_t> conflict_seen_ms_;
    std::map<Digest, Transaction> held_conflict_txs_;
    std::map<Digest, std::uint64_t> seen_order_;
    std::uint64_t next_arrival_ = 0;

    std::map<Digest, TxStatus> status_;
    std::set<Digest> secured_;
    std::set<Digest> secured_records_;
    std::set<Digest> unsecured_applied_;
    std::map<Digest, std::int64_t> first_seen_ms_;

    ForkState fork_state_ = ForkState::None;
    std::optional<ForkEvidence> fork_evidence_;
    std::optional<ForkChoiceOutcome> last_fork_outcome_;
    bool partition_warning_ = false;
    bool clock_confused_ = false;
    std::vector<std::pair<std::int64_t, bool>> partition_timeline_;
    std::set<std::uint64_t> warned_cycles_;

    std::vector<StatusEvent> status_events_;
    std::vector<SlashEvent> slash_events_;
    std::vector<JailEvent> jail_events_;
    std::vector<std::string> violations_;
    std::vector<std::pair<Digest, std::int64_t>> displaced_secured_;
};

} // namespace dca

#endif // DCA_NODE_HPP
