// Copyright (c) 2026 The dcasim developers
// Distributed under the MIT software license, see the accompanying
// file LICENSE or http://www.opensource.org/licenses/mit-license.php.

#include <catch2/catch_amalgamated.hpp>

#include "dca/node.hpp"
#include "test_util.hpp"

using namespace dca;

namespace {

/// Hand-driven network: a handful of nodes, zero-latency instant broadcast,
/// slots stepped manually in deterministic order.
struct Bench {
    EngineParams params;
    std::vector<KeyPair> voice_keys;
    std::vector<KeyPair> client_keys;
    GenesisInfo genesis;
    std::vector<Node> nodes; // voices first, then one observer

    explicit Bench(std::size_t n_voices, Amount deposit = 100) {
        params.cycle = CycleParams::desk_scale();
        params.ledger.voice_deposit = deposit;
        params.ledger.lock_cycles = 1;
        for (std::size_t i = 0; i < n_voices; ++i)
            voice_keys.push_back(test::keys_of_byte(static_cast<std::uint8_t>(i + 1)));
        for (std::size_t i = 0; i < 3; ++i)
            client_keys.push_back(test::keys_of_byte(static_cast<std::uint8_t>(100 + i)));
        std::vector<PublicKey> voices;
        for (const auto& kp : voice_keys) voices.push_back(kp.pk);
        std::vector<std::pair<PublicKey, Amount>> balances;
        for (const auto& kp : client_keys) balances.emplace_back(kp.pk, 1'000);
        genesis = make_genesis(voices, balances, deposit, test::digest_of_byte(0xee), params.cycle);
        for (std::size_t i = 0; i < n_voices; ++i)
            nodes.emplace_back(static_cast<int>(i), params, genesis,
                               VoiceIdentity{voice_keys[i],
                                             test::digest_of_byte(static_cast<std::uint8_t>(0x40 + i))});
        nodes.emplace_back(static_cast<int>(n_voices), params, genesis, std::nullopt);
    }

    Node& observer() { return nodes.back(); }

    std::int64_t slot_start(std::uint64_t slot) const { return static_cast<std::int64_t>(slot) * 10'000; }
    std::int64_t mid_slot(std::uint64_t slot) const { return slot_start(slot) + 5'000; }

    void broadcast_tx(const Transaction& tx, std::int64_t at) {
        for (auto& n : nodes) n.on_receive_transaction(tx, at);
    }

    void broadcast_record(const Record& r, std::int64_t at, const Node* except = nullptr) {
        for (auto& n : nodes)
            if (&n != except) n.on_receive_record(r, at);
    }

    /// One healthy slot: ticks, then the scheduled voice produces mid-slot
    /// and everyone receives the record immediately.
    std::optional<Record> step(std::uint64_t slot, const std::set<std::size_t>& suppress = {}) {
        for (auto& n : nodes) n.on_slot_begin(slot, slot_start(slot));
        auto creators = nodes[0].scheduled_creators(slot);
        std::optional<Record> produced;
        for (std::size_t i = 0; i < voice_keys.size(); ++i) {
            if (std::find(creators.begin(), creators.end(), voice_keys[i].pk) == creators.end()) continue;
            if (suppress.count(i)) continue;
            auto pr = nodes[i].decide_record_action(slot, mid_slot(slot));
            if (pr.record) {
                broadcast_record(*pr.record, mid_slot(slot), &nodes[i]);
                produced = pr.record;
            }
        }
        return produced;
    }

    std::size_t voice_index(const PublicKey& pk) const {
        for (std::size_t i = 0; i < voice_keys.size(); ++i)
            if (voice_keys[i].pk == pk) return i;
        throw std::logic_error("unknown voice");
    }
};

} // namespace

TEST_CASE("healthy chain: confirm then secure") {
    Bench bench(4);
    // client submits a transfer during slot 2
    auto tx = test::signed_transfer(bench.client_keys[0], bench.client_keys[1].pk, 50, 1, 25);
    Digest txh = tx.hash();
    bench.broadcast_tx(tx, 25'000);

    for (std::uint64_t slot = 0; slot <= 14; ++slot) {
        bench.step(slot);
        TxStatus st = bench.observer().transaction_status(txh);
        if (slot < 3) {
            CHECK(st.kind == TxStatus::Kind::Pending);
        } else if (slot < 13) {
            // confirmed by the slot-3 record; ten more records secure it
            CHECK(st.kind == TxStatus::Kind::Confirmed);
            CHECK(st.slot == 3);
        } else {
            CHECK(st.kind == TxStatus::Kind::Secured);
        }
    }
    CHECK(bench.observer().ledger().balance_of(bench.client_keys[1].pk) == 1'050);
    CHECK(bench.observer().invariant_violations().empty());

    SECTION("all nodes agree bit for bit") {
        Digest d = bench.nodes[0].state_digest();
        for (auto& n : bench.nodes) CHECK(n.state_digest() == d);
    }
    SECTION("unknown hash stays unknown") {
        CHECK(bench.observer().transaction_status(test::digest_of_byte(9)).kind ==
              TxStatus::Kind::Unknown);
    }
}

TEST_CASE("production decisions") {
    Bench bench(4);
    bench.step(0);
    SECTION("observers abstain") {
        auto pr = bench.observer().decide_record_action(1, bench.mid_slot(1));
        CHECK(pr.action == ProduceResult::Action::Abstain);
        CHECK(pr.reason == "observer");
    }
    SECTION("unscheduled voices abstain") {
        auto creators = bench.nodes[0].scheduled_creators(1);
        for (std::size_t i = 0; i < bench.voice_keys.size(); ++i) {
            if (bench.voice_keys[i].pk == creators[0]) continue;
            auto pr = bench.nodes[i].decide_record_action(1, bench.mid_slot(1));
            CHECK(pr.action == ProduceResult::Action::Abstain);
            CHECK(pr.reason == "unscheduled");
        }
    }
    SECTION("clock confusion forces a safe record") {
        auto creators = bench.nodes[0].scheduled_creators(1);
        std::size_t idx = bench.voice_index(creators[0]);
        bench.nodes[idx].set_clock_confused(true);
        auto pr = bench.nodes[idx].decide_record_action(1, bench.mid_slot(1));
        REQUIRE(pr.action == ProduceResult::Action::ProduceSafe);
        CHECK(pr.record->safe);
        CHECK(pr.record->transactions.empty());
    }
}

TEST_CASE("missing record plus pooled conflict forces a safe record") {
    Bench bench(4);
    std::uint64_t slot = 0;
    for (; slot <= 3; ++slot) bench.step(slot);
    // slot 4 record goes missing
    bench.step(4, {bench.voice_index(bench.nodes[0].scheduled_creators(4)[0])});
    // ...and a double-spend pair shows up in every pool
    auto tx1 = test::signed_transfer(bench.client_keys[0], bench.client_keys[1].pk, 10, 1, 48);
    auto tx2 = test::signed_transfer(bench.client_keys[0], bench.client_keys[2].pk, 10, 1, 48);
    bench.broadcast_tx(tx1, 48'500);
    bench.broadcast_tx(tx2, 48'600);

    for (auto& n : bench.nodes) n.on_slot_begin(5, bench.slot_start(5));
    auto creators = bench.nodes[0].scheduled_creators(5);
    std::size_t idx = bench.voice_index(creators[0]);
    auto pr = bench.nodes[idx].decide_record_action(5, bench.mid_slot(5));
    REQUIRE(pr.action == ProduceResult::Action::ProduceSafe);
    CHECK(pr.reason == "missing_record_with_conflict");
    CHECK(pr.record->safe);

    SECTION("safe records still advance confirmation depth") {
        bench.broadcast_record(*pr.record, bench.mid_slot(5), &bench.nodes[idx]);
        const auto& applied = bench.observer().applied_slots();
        REQUIRE(applied.count(3));
        Digest r3 = applied.at(3)[0];
        CHECK(bench.observer().clean_depth(r3) >= 1);
    }
}

TEST_CASE("conflicting transaction is held, not relayed") {
    Bench bench(3);
    bench.step(0);
    auto tx1 = test::signed_transfer(bench.client_keys[0], bench.client_keys[1].pk, 10, 1, 8);
    auto tx2 = test::signed_transfer(bench.client_keys[0], bench.client_keys[2].pk, 10, 1, 8);
    auto r1 = bench.observer().on_receive_transaction(tx1, 8'500);
    CHECK(r1.action == ReceiveTxResult::Action::AcceptRelay);
    auto dup = bench.observer().on_receive_transaction(tx1, 8'600);
    CHECK(dup.action == ReceiveTxResult::Action::Duplicate);
    auto r2 = bench.observer().on_receive_transaction(tx2, 8'700);
    CHECK(r2.action == ReceiveTxResult::Action::ConflictHeld);
    CHECK(bench.observer().transaction_status(tx2.hash()).kind == TxStatus::Kind::Rejected);
}

TEST_CASE("equivocation destroys the deposit and propagates") {
    Bench bench(4);
    for (std::uint64_t slot = 0; slot <= 2; ++slot) bench.step(slot);

    auto creators = bench.nodes[0].scheduled_creators(3);
    std::size_t idx = bench.voice_index(creators[0]);
    auto pr = bench.nodes[idx].decide_record_action(3, bench.mid_slot(3));
    REQUIRE(pr.record.has_value());
    // the equivocator signs a second, different record for the same slot
    RecordInputs in;
    in.slot = 3;
    in.keys = &bench.voice_keys[idx];
    in.prior_cb_hash = pr.record->prior_cb_hash;
    in.rng_commitment = pr.record->rng_commitment;
    in.rng_reveal = pr.record->rng_reveal;
    in.created_at_ms = pr.record->created_at_ms + 1;
    Record second = build_record(in, pr.record->acknowledged, {}, false);
    REQUIRE(second.hash() != pr.record->hash());

    bench.broadcast_record(*pr.record, bench.mid_slot(3), &bench.nodes[idx]);
    auto res = bench.observer().on_receive_record(second, bench.mid_slot(3) + 100);
    CHECK(res.action == ReceiveRecordResult::Action::ForkAlarm);
    REQUIRE(res.fork.has_value());
    CHECK(res.fork->kind == ForkEvidence::Kind::Equivocation);
    CHECK(res.relay); // evidence travels
    REQUIRE(res.slashes.size() == 1);
    CHECK(res.slashes[0].kind == SlashEvidence::Kind::EquivocationPair);
    CHECK(res.slashes[0].record_hashes.size() == 2);

    const VoiceEntry* e = bench.observer().ledger().vl.find_latest(bench.voice_keys[idx].pk);
    REQUIRE(e);
    CHECK(e->status == VoiceStatus::Destroyed);
    CHECK(bench.observer().ledger().vl.total_destroyed == 100);

    SECTION("the second slash attempt is a no-op") {
        RecordInputs in2 = in;
        in2.created_at_ms += 5;
        Record third = build_record(in2, pr.record->acknowledged, {}, false);
        auto res2 = bench.observer().on_receive_record(third, bench.mid_slot(3) + 200);
        CHECK(res2.action == ReceiveRecordResult::Action::ForkAlarm);
        CHECK(res2.slashes.empty());
        CHECK(bench.observer().ledger().vl.total_destroyed == 100);
    }
    SECTION("destroyed voices abstain from further production") {
        for (std::uint64_t s = 4; s < 40; ++s) {
            auto cs = bench.observer().scheduled_creators(s);
            if (std::find(cs.begin(), cs.end(), bench.voice_keys[idx].pk) == cs.end()) continue;
            bench.broadcast_record(second, bench.mid_slot(3) + 100, &bench.observer());
            auto pr2 = bench.nodes[idx].decide_record_action(s, bench.mid_slot(s));
            CHECK(pr2.action == ProduceResult::Action::Abstain);
            break;
        }
    }
}

TEST_CASE("late double-spend record is refused by seen order") {
    Bench bench(6);
    // rig slots 5..17 so the test controls the creators: voice 0 is the
    // attacker at slot 5; voices 1..5 hold the following slots round-robin
    for (auto& n : bench.nodes) {
        n.override_schedule(5, {bench.voice_keys[0].pk});
        for (std::uint64_t s = 6; s <= 17; ++s)
            n.override_schedule(s, {bench.voice_keys[1 + (s % 5)].pk});
    }
    for (std::uint64_t slot = 0; slot <= 4; ++slot) bench.step(slot);

    // the buyer pays the merchant, timestamped slot 4; the attacker voice
    // withholds its own slot-5 record
    KeyPair buyer = bench.client_keys[0];
    auto pay = test::signed_transfer(buyer, bench.client_keys[1].pk, 900, 1, 47);
    bench.broadcast_tx(pay, 47'500);
    bench.step(5, {0}); // attacker quiet

    auto r6 = bench.step(6); // honest record confirms the payment
    REQUIRE(r6.has_value());
    REQUIRE_FALSE(r6->transactions.empty());
    CHECK(bench.observer().transaction_status(pay.hash()).kind == TxStatus::Kind::Confirmed);

    // now the attacker emits its slot-5 record sending the money elsewhere
    auto steal = test::signed_transfer(buyer, bench.client_keys[2].pk, 900, 1, 47);
    RecordInputs in;
    in.slot = 5;
    in.keys = &bench.voice_keys[0];
    in.prior_cb_hash = bench.genesis.cb.hash();
    in.rng_commitment = commit(view_of(to_bytes("attacker-cycle-secret")));
    in.created_at_ms = 66'000;
    Record late = build_record(in, bench.nodes[0].dag().tips_below(5), {steal}, false);

    auto res = bench.observer().on_receive_record(late, 66'100);
    CHECK(res.action == ReceiveRecordResult::Action::AcceptNoRelay);
    CHECK_FALSE(res.relay);
    CHECK(bench.observer().fork_state() == ForkState::ResolvableConflict);
    CHECK(bench.observer().transaction_status(pay.hash()).kind == TxStatus::Kind::Confirmed);

    SECTION("honest voices do not acknowledge the refused record") {
        for (auto& n : bench.nodes) n.on_receive_record(late, 66'100);
        auto r7 = bench.step(7);
        REQUIRE(r7.has_value());
        for (const auto& a : r7->acknowledged) CHECK(a != late.hash());
    }

    SECTION("ten subsequent acknowledgers weave it in and reorganize") {
        for (auto& n : bench.nodes) n.on_receive_record(late, 66'100);
        // adversary-aligned creators acknowledge the refused record's branch
        Digest prev = late.hash();
        for (std::uint64_t s = 7; s <= 16; ++s) {
            auto cs = bench.observer().scheduled_creators(s);
            std::size_t ci = bench.voice_index(cs[0]);
            RecordInputs ain;
            ain.slot = s;
            ain.keys = &bench.voice_keys[ci];
            ain.prior_cb_hash = bench.genesis.cb.hash();
            ain.rng_commitment = commit(view_of(to_bytes("adversary-ally-secret")));
            ain.created_at_ms = bench.mid_slot(s);
            Record ally = build_record(ain, {prev}, {}, false);
            auto rres = bench.observer().on_receive_record(ally, bench.mid_slot(s));
            prev = ally.hash();
            if (s < 16) {
                CHECK(rres.action == ReceiveRecordResult::Action::AcceptNoRelay);
            } else {
                CHECK(rres.reorged); // the tenth acknowledger crosses the depth bar
            }
        }
        CHECK(bench.observer().transaction_status(pay.hash()).kind == TxStatus::Kind::Rejected);
        // ten acknowledgers mean the woven record is itself secured already
        CHECK(bench.observer().transaction_status(steal.hash()).kind == TxStatus::Kind::Secured);
        // the payment was never secured, so no invariant was violated
        CHECK(bench.observer().invariant_violations().empty());
    }

    SECTION("attacking a secured transaction is an unresolvable fork") {
        // let the honest chain secure the payment first
        for (std::uint64_t slot = 7; slot <= 17; ++slot) bench.step(slot);
        REQUIRE(bench.observer().transaction_status(pay.hash()).kind == TxStatus::Kind::Secured);
        Node fresh(99, bench.params, bench.genesis, std::nullopt);
        for (std::uint64_t s = 5; s <= 17; ++s)
            fresh.override_schedule(s, bench.observer().scheduled_creators(s));
        for (const auto& [slot, hashes] : bench.observer().applied_slots())
            for (const auto& h : hashes)
                fresh.on_receive_record(*bench.observer().dag().get(h),
                                        bench.observer().first_seen().at(h));
        auto res2 = fresh.on_receive_record(late, 200'000);
        CHECK(res2.action == ReceiveRecordResult::Action::ForkAlarm);
        REQUIRE(res2.fork.has_value());
        CHECK(res2.fork->kind == ForkEvidence::Kind::UnconfirmingDoubleSpend);
        CHECK(fresh.fork_state() == ForkState::UnresolvableFork);
    }
}

TEST_CASE("deterministic replay yields identical digests") {
    auto run = [] {
        Bench bench(4);
        auto tx = test::signed_transfer(bench.client_keys[0], bench.client_keys[1].pk, 5, 1, 15);
        bench.broadcast_tx(tx, 15'500);
        for (std::uint64_t slot = 0; slot <= 20; ++slot) bench.step(slot);
        return bench.observer().state_digest();
    };
    CHECK(run() == run());
}

TEST_CASE("partition warning thresholds") {
    Bench bench(4);
    for (std::uint64_t slot = 0; slot < 30; ++slot) bench.step(slot);
    CHECK_FALSE(bench.observer().detect_partition(bench.slot_start(30)));

    SECTION("half the window missing trips the warning") {
        for (std::uint64_t slot = 30; slot < 45; ++slot)
            for (auto& n : bench.nodes) n.on_slot_begin(slot, bench.slot_start(slot));
        // 15 of the trailing 30 completed slots are empty
        CHECK(bench.observer().detect_partition(bench.slot_start(45) + 10'000));
    }
    SECTION("exactly the threshold does not") {
        // theta = 0.2 over 30 slots = 6 missing; produce all but 6
        std::uint64_t slot = 30;
        for (; slot < 36; ++slot)
            for (auto& n : bench.nodes) n.on_slot_begin(slot, bench.slot_start(slot));
        for (; slot < 60; ++slot) bench.step(slot);
        CHECK_FALSE(bench.observer().detect_partition(bench.slot_start(60) + 10'000));
    }
}

TEST_CASE("cycle close: snapshots, reveals, and the silence penalty") {
    // six voices: one silent voice leaves ~17% of slots empty, below the
    // partition threshold, so the close destroys rather than jails
    Bench bench(6);
    const std::uint64_t slices = bench.params.cycle.slices; // 360
    const std::uint64_t lag = bench.params.cycle.cycle_lag_slots;

    // voice 2 never produces in cycle 0
    std::vector<SlashEvent> slashes;
    for (std::uint64_t slot = 0; slot <= slices + lag; ++slot) {
        for (auto& n : bench.nodes) {
            auto out = n.on_slot_begin(slot, bench.slot_start(slot));
            if (&n == &bench.observer()) slashes.insert(slashes.end(), out.begin(), out.end());
        }
        auto creators = bench.nodes[0].scheduled_creators(slot);
        for (std::size_t i = 0; i < bench.voice_keys.size(); ++i) {
            if (std::find(creators.begin(), creators.end(), bench.voice_keys[i].pk) == creators.end())
                continue;
            if (i == 2) continue; // silent
            auto pr = bench.nodes[i].decide_record_action(slot, bench.mid_slot(slot));
            if (pr.record) bench.broadcast_record(*pr.record, bench.mid_slot(slot), &bench.nodes[i]);
        }
    }

    REQUIRE(bench.observer().cb_chain().size() == 2);
    const VoiceEntry* e = bench.observer().ledger().vl.find_latest(bench.voice_keys[2].pk);
    REQUIRE(e);
    CHECK(e->status == VoiceStatus::Destroyed);
    REQUIRE(slashes.size() == 1);
    CHECK(slashes[0].evidence.kind == SlashEvidence::Kind::FullCycleSilence);
    CHECK(slashes[0].evidence.voice == bench.voice_keys[2].pk);
    CHECK(slashes[0].evidence.cycle == 0);

    SECTION("all nodes take bit-identical snapshots") {
        for (auto& n : bench.nodes) {
            REQUIRE(n.cb_chain().size() == 2);
            CHECK(n.cb_chain()[1].hash() == bench.observer().cb_chain()[1].hash());
        }
    }
    SECTION("cycle 0 has no reveals; the fallback seed is used") {
        REQUIRE(bench.observer().seeds().count(2));
        CHECK(bench.observer().seeds().at(2) == genesis_cycle_seed(bench.genesis.entropy, 2));
    }
}

TEST_CASE("reveals recovered over a full commit-reveal round") {
    Bench bench(3);
    // shrink the cycle so the test spans three closes quickly
    EngineParams p = bench.params;
    p.cycle.slices = 40;
    p.cycle.cycle_length_s = 400;
    p.cycle.cycle_lag_slots = 12;
    p.cycle.prep_period_slots = 6;
    p.cycle.validate();
    Bench small(3);
    small.params = p;
    std::vector<PublicKey> voices;
    for (const auto& kp : small.voice_keys) voices.push_back(kp.pk);
    std::vector<std::pair<PublicKey, Amount>> balances;
    for (const auto& kp : small.client_keys) balances.emplace_back(kp.pk, 1'000);
    small.genesis = make_genesis(voices, balances, 100, test::digest_of_byte(0xef), p.cycle);
    small.nodes.clear();
    for (std::size_t i = 0; i < small.voice_keys.size(); ++i)
        small.nodes.emplace_back(static_cast<int>(i), p, small.genesis,
                                 VoiceIdentity{small.voice_keys[i],
                                               test::digest_of_byte(static_cast<std::uint8_t>(0x40 + i))});
    small.nodes.emplace_back(3, p, small.genesis, std::nullopt);

    // run through the close of cycle 1 (boundary at 2*40+12 = 92)
    for (std::uint64_t slot = 0; slot <= 92; ++slot) small.step(slot);

    // cycle 1 reveals open cycle 0 commitments: all three voices revealed
    const auto& rs = small.observer().reveal_sets().at(1);
    CHECK(rs.reveals.size() == 3);
    CHECK(rs.missing.empty());
    // seed for cycle 3 derives from them, identically on every node
    Digest expected = derive_seed(rs);
    for (auto& n : small.nodes) {
        REQUIRE(n.seeds().count(3));
        CHECK(n.seeds().at(3) == expected);
    }
}

TEST_CASE("fork choice rules") {
    Bench bench(4);
    EngineParams params = bench.params;

    HistoryEvaluation a, b;
    a.valid = b.valid = true;
    a.bound_signers = {bench.voice_keys[0].pk, bench.voice_keys[1].pk, bench.voice_keys[2].pk};
    b.bound_signers = {bench.voice_keys[0].pk};

    SECTION("rule 1: non-replicable signatures win with no input") {
        CHECK(fork_choice(a, b, nullptr, params) == ForkChoiceOutcome::ChooseA);
        CHECK(fork_choice(b, a, nullptr, params) == ForkChoiceOutcome::ChooseB);
    }
    SECTION("rule 3: symmetric signers and no observation needs input") {
        b.bound_signers = a.bound_signers;
        CHECK(fork_choice(a, b, nullptr, params) == ForkChoiceOutcome::NeedsExternalInput);
    }
    SECTION("rule 2: live observation prefers the earliest on-time divergence") {
        b.bound_signers = a.bound_signers;
        RecordInputs in;
        in.slot = 4;
        in.keys = &bench.voice_keys[0];
        in.prior_cb_hash = test::digest_of_byte(0xcb);
        in.rng_commitment = commit(view_of(to_bytes("fork-choice-secret-1")));
        in.created_at_ms = 45'000;
        Record ra = build_record(in, {}, {}, false);
        in.created_at_ms = 45'001;
        Record rb = build_record(in, {}, {}, false);
        a.records[ra.hash()] = ra;
        a.record_hashes.insert(ra.hash());
        b.records[rb.hash()] = rb;
        b.record_hashes.insert(rb.hash());

        std::map<Digest, std::int64_t> first_seen;
        first_seen[ra.hash()] = 45'500; // within slot 4 + grace
        first_seen[rb.hash()] = 95'000; // 40 s late
        CHECK(fork_choice(a, b, &first_seen, params) == ForkChoiceOutcome::ChooseA);

        first_seen[rb.hash()] = 45'200; // both on time, b seen first
        CHECK(fork_choice(a, b, &first_seen, params) == ForkChoiceOutcome::ChooseB);

        first_seen.erase(rb.hash()); // offline across the divergence
        CHECK(fork_choice(a, b, &first_seen, params) == ForkChoiceOutcome::NeedsExternalInput);
    }
}

TEST_CASE("lite client payment verification") {
    Bench bench(4);
    auto tx = test::signed_transfer(bench.client_keys[0], bench.client_keys[1].pk, 50, 1, 25);
    bench.broadcast_tx(tx, 25'500);
    for (std::uint64_t slot = 0; slot <= 14; ++slot) bench.step(slot);

    const auto& [slot_confirmed, record_hash] = bench.observer().applied_txs().at(tx.hash());
    const Record& rec = *bench.observer().dag().get(record_hash);
    std::size_t idx = 0;
    for (; idx < rec.transactions.size(); ++idx)
        if (rec.transactions[idx].hash() == tx.hash()) break;
    auto proof = build_inclusion_proof(rec, idx);

    HeaderView view = bench.observer().header_view();
    CHECK(lite_verify_payment(view, proof, 10) == LiteVerdict::Accepted);

    SECTION("insufficient depth is reported as such") {
        HeaderView shallow;
        for (const auto& [s, hashes] : bench.observer().applied_slots())
            for (const auto& h : hashes)
                if (s <= slot_confirmed + 3) shallow.insert(header_of(*bench.observer().dag().get(h)));
        CHECK(lite_verify_payment(shallow, proof, 10) == LiteVerdict::InsufficientDepth);
    }
    SECTION("unknown header is invalid") {
        HeaderView empty;
        CHECK(lite_verify_payment(empty, proof, 10) == LiteVerdict::Invalid);
    }
    SECTION("tampered proof is invalid") {
        auto bad = proof;
        bad.tx_hash.bytes[0] ^= 1;
        CHECK(lite_verify_payment(view, bad, 10) == LiteVerdict::Invalid);
    }
}

TEST_CASE("invalid transaction in a record is slashable evidence") {
    Bench bench(4);
    for (std::uint64_t slot = 0; slot <= 1; ++slot) bench.step(slot);
    auto creators = bench.nodes[0].scheduled_creators(2);
    std::size_t idx = bench.voice_index(creators[0]);

    // a record carrying a transaction with a broken signature
    auto tx = test::signed_transfer(bench.client_keys[0], bench.client_keys[1].pk, 10, 1, 15);
    tx.amount = 11; // invalidates the signature
    RecordInputs in;
    in.slot = 2;
    in.keys = &bench.voice_keys[idx];
    in.prior_cb_hash = bench.genesis.cb.hash();
    in.rng_commitment = commit(view_of(to_bytes("bad-record-cycle-key!")));
    in.created_at_ms = bench.mid_slot(2);
    Record bad = build_record(in, bench.observer().dag().tips_below(2), {tx}, false);

    auto res = bench.observer().on_receive_record(bad, bench.mid_slot(2));
    CHECK(res.action == ReceiveRecordResult::Action::Reject);
    CHECK(res.error == RecordError::InvalidTransactionIncluded);
    REQUIRE(res.slashes.size() == 1);
    CHECK(res.slashes[0].kind == SlashEvidence::Kind::InvalidTxRecord);
    CHECK(res.slashes[0].record_hashes == std::vector<Digest>{bad.hash()});
    const VoiceEntry* e = bench.observer().ledger().vl.find_latest(bench.voice_keys[idx].pk);
    CHECK(e->status == VoiceStatus::Destroyed);
}

TEST_CASE("jail and pardon round-trip through the engine") {
    Bench bench(4);
    bench.step(0);
    Node& node = bench.nodes[1];
    jail_voice(const_cast<LedgerState&>(node.ledger()), bench.voice_keys[1].pk);
    for (std::uint64_t s = 1; s < 40; ++s) {
        auto cs = node.scheduled_creators(s);
        if (std::find(cs.begin(), cs.end(), bench.voice_keys[1].pk) == cs.end()) continue;
        auto pr = node.decide_record_action(s, bench.mid_slot(s));
        CHECK(pr.action == ProduceResult::Action::Abstain);
        CHECK(pr.reason == "jailed");
        break;
    }
    node.pardon(bench.voice_keys[1].pk, 20'000);
    const VoiceEntry* e = node.ledger().vl.find_latest(bench.voice_keys[1].pk);
    CHECK(e->status == VoiceStatus::Active);
    REQUIRE(node.jail_events().size() == 1);
    CHECK(node.jail_events()[0].pardoned);
}
