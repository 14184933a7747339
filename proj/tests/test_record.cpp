// Copyright (c) 2026 The dcasim developers
// Distributed under the MIT software license, see the accompanying
// file LICENSE or http://www.opensource.org/licenses/mit-license.php.

#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "dca/record.hpp"
#include "test_util.hpp"

using namespace dca;

namespace {

struct RecordFixture {
    KeyPair voice = test::keys_of_byte(20);
    KeyPair alice = test::keys_of_byte(21);
    KeyPair bob = test::keys_of_byte(22);
    Digest cb = test::digest_of_byte(0xcb);

    RecordInputs inputs(std::uint64_t slot) const {
        RecordInputs in;
        in.slot = slot;
        in.keys = &voice;
        in.prior_cb_hash = cb;
        in.rng_commitment = commit(view_of(to_bytes("voice-cycle-secret!")));
        in.created_at_ms = static_cast<std::int64_t>(slot) * 10'000 + 5'000;
        return in;
    }

    Transaction tx(Amount amount, std::uint64_t seq, std::int64_t ts_s = 0) const {
        return test::signed_transfer(alice, bob.pk, amount, seq, ts_s);
    }
};

Record chain_record(const RecordFixture& f, RecordDag& dag, std::uint64_t slot,
                    std::vector<Transaction> txs = {}) {
    Record r = create_record(dag, f.inputs(slot), std::move(txs));
    REQUIRE(dag.insert(r));
    return r;
}

} // namespace

TEST_CASE("merkle proofs") {
    RecordFixture f;

    SECTION("single transaction: empty path, leaf is the root") {
        RecordDag dag;
        Record r = create_record(dag, f.inputs(1), {f.tx(5, 1)});
        auto proof = build_inclusion_proof(r, 0);
        CHECK(proof.path.empty());
        CHECK(proof.tx_hash == r.tx_root);
        CHECK(verify_inclusion_proof(proof));
    }

    SECTION("four transactions, index 2: path length 2, matches oracle") {
        RecordDag dag;
        std::vector<Transaction> txs;
        for (std::uint64_t i = 1; i <= 4; ++i) txs.push_back(f.tx(i, i));
        Record r = create_record(dag, f.inputs(1), txs);

        CHECK(r.tx_root == test::oracle_merkle_root(r.tx_hashes()));

        auto proof = build_inclusion_proof(r, 2);
        CHECK(proof.path.size() == 2);
        CHECK(verify_inclusion_proof(proof));
    }

    SECTION("tampered sibling fails") {
        RecordDag dag;
        std::vector<Transaction> txs{f.tx(1, 1), f.tx(2, 2), f.tx(3, 3)};
        Record r = create_record(dag, f.inputs(1), txs);
        auto proof = build_inclusion_proof(r, 1);
        REQUIRE(verify_inclusion_proof(proof));
        proof.path[0].sibling.bytes[4] ^= 0x10;
        CHECK_FALSE(verify_inclusion_proof(proof));
    }

    SECTION("out-of-bounds index throws") {
        RecordDag dag;
        Record r = create_record(dag, f.inputs(1), {f.tx(1, 1)});
        CHECK_THROWS_AS(build_inclusion_proof(r, 1), std::out_of_range);
    }

    SECTION("safe record carries the empty-tree root") {
        RecordDag dag;
        Record r = create_safe_record(dag, f.inputs(1));
        CHECK(r.tx_root == merkle_empty_root());
        CHECK(r.transactions.empty());
    }
}

TEST_CASE("merkle soundness under random records and mutations") {
    RecordFixture f;
    std::mt19937_64 rng(7);
    int mutations = 0;
    for (int trial = 0; trial < 40; ++trial) {
        std::size_t n = 1 + rng() % 64;
        std::vector<Transaction> txs;
        for (std::size_t i = 0; i < n; ++i)
            txs.push_back(f.tx(1 + (rng() % 1'000), i + 1));
        RecordDag dag;
        Record r = create_record(dag, f.inputs(1), txs);
        REQUIRE(r.tx_root == test::oracle_merkle_root(r.tx_hashes()));

        std::size_t idx = rng() % n;
        auto proof = build_inclusion_proof(r, idx);
        REQUIRE(verify_inclusion_proof(proof));

        while (mutations < 1'000 && mutations < (trial + 1) * 25) {
            auto mutated = proof;
            switch (rng() % 3) {
            case 0:
                mutated.tx_hash.bytes[rng() % 32] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
                break;
            case 1:
                if (mutated.path.empty()) continue;
                mutated.path[rng() % mutated.path.size()].sibling.bytes[rng() % 32] ^=
                    static_cast<std::uint8_t>(1u << (rng() % 8));
                break;
            default:
                mutated.header.tx_root.bytes[rng() % 32] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
                break;
            }
            REQUIRE_FALSE(verify_inclusion_proof(mutated));
            ++mutations;
        }
    }
    CHECK(mutations == 1'000);
}

TEST_CASE("record header binds the full record") {
    RecordFixture f;
    RecordDag dag;
    Record r = create_record(dag, f.inputs(3), {f.tx(5, 1, 20)});
    RecordHeader h = header_of(r);
    CHECK(h.hash() == r.hash());
    CHECK(h.signature_valid());
}

TEST_CASE("equivocation detection") {
    RecordFixture f;
    RecordDag dag;
    Record r1 = create_record(dag, f.inputs(5), {f.tx(1, 1)});
    Record r2 = create_record(dag, f.inputs(5), {f.tx(2, 1)});
    Record r3 = create_record(dag, f.inputs(6), {});

    SECTION("same record twice yields nothing") { CHECK_FALSE(detect_equivocation(r1, r1).has_value()); }
    SECTION("same slot, differing transactions is a proof") {
        auto proof = detect_equivocation(r1, r2);
        REQUIRE(proof.has_value());
        CHECK(proof->valid()); // self-verifying for any third party
    }
    SECTION("adjacent slots are different windows") {
        CHECK_FALSE(detect_equivocation(r1, r3).has_value());
    }
    SECTION("a forged pair does not validate") {
        auto proof = detect_equivocation(r1, r2);
        REQUIRE(proof.has_value());
        auto forged = *proof;
        forged.second.signature.bytes[0] ^= 1;
        CHECK_FALSE(forged.valid());
    }
}

TEST_CASE("acknowledgment tips follow the visible view") {
    RecordFixture f;

    SECTION("empty view: nothing to acknowledge") {
        RecordDag dag;
        Record r = create_record(dag, f.inputs(0), {f.tx(1, 1, -20)});
        CHECK(r.acknowledged.empty());
    }

    SECTION("a fully chained view needs only the latest tip") {
        RecordDag dag;
        Record last;
        for (std::uint64_t s = 1; s <= 11; ++s) last = chain_record(f, dag, s);
        Record r = create_record(dag, f.inputs(12), {});
        REQUIRE(r.acknowledged.size() == 1);
        CHECK(r.acknowledged[0] == last.hash());
    }

    SECTION("missing predecessors leave multiple tips") {
        RecordDag dag;
        Record upto8;
        for (std::uint64_t s = 1; s <= 8; ++s) upto8 = chain_record(f, dag, s);
        // slots 9 and 10 never arrive; slot 11 was created elsewhere with
        // only slot 8 visible and reaches us late
        RecordDag remote = dag;
        Record r11 = chain_record(f, remote, 11);
        REQUIRE(dag.insert(r11));

        Record r12 = create_record(dag, f.inputs(12), {});
        // oracle: recompute the tip set by exhaustive edge walk
        std::set<Digest> acked_somewhere;
        for (const auto& [h, rec] : dag.records)
            for (const auto& a : rec.acknowledged) acked_somewhere.insert(a);
        std::vector<Digest> expected;
        for (const auto& [h, rec] : dag.records)
            if (!acked_somewhere.count(h)) expected.push_back(h);
        std::sort(expected.begin(), expected.end());

        CHECK(r12.acknowledged == expected);
        CHECK(r12.acknowledged.size() == 1); // r11 transitively covers 1..8
        CHECK(r12.acknowledged[0] == r11.hash());
    }
}

TEST_CASE("confirmation depth") {
    RecordFixture f;
    RecordDag dag;

    SECTION("fresh tip has depth zero") {
        Record r = chain_record(f, dag, 1);
        CHECK(dag.confirmation_depth(r.hash()) == 0);
    }

    SECTION("a linear chain of ten successors secures the base") {
        Record base = chain_record(f, dag, 1);
        for (std::uint64_t s = 2; s <= 11; ++s) chain_record(f, dag, s);
        CHECK(dag.confirmation_depth(base.hash()) == 10);
        CHECK(dag.confirmation_depth(base.hash()) == test::oracle_confirmation_depth(dag, base.hash()));
    }

    SECTION("diamond: two acknowledgers and their join give depth three") {
        Record base = chain_record(f, dag, 1);
        // two records acknowledge the base directly, one acknowledges both
        KeyPair other = test::keys_of_byte(30);
        RecordInputs in2 = f.inputs(2);
        Record left = build_record(in2, {base.hash()}, {}, false);
        RecordInputs in3 = f.inputs(3);
        in3.keys = &other;
        Record right = build_record(in3, {base.hash()}, {}, false);
        REQUIRE(dag.insert(left));
        REQUIRE(dag.insert(right));
        RecordInputs in4 = f.inputs(4);
        Record top = build_record(in4, {left.hash(), right.hash()}, {}, false);
        REQUIRE(dag.insert(top));

        CHECK(test::oracle_confirmation_depth(dag, base.hash()) == 3);
        CHECK(dag.confirmation_depth(base.hash()) == 3);
    }

    SECTION("unknown record throws") {
        CHECK_THROWS_AS(dag.confirmation_depth(test::digest_of_byte(1)), std::out_of_range);
    }
}

TEST_CASE("depth matches the brute-force oracle on random dags") {
    RecordFixture f;
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 60; ++trial) {
        RecordDag dag;
        std::vector<Digest> all;
        std::size_t n = 2 + rng() % 40;
        for (std::uint64_t s = 0; s < n; ++s) {
            // acknowledge a random subset of earlier records
            std::vector<Digest> acks;
            for (const auto& h : all)
                if (rng() % 3 == 0) acks.push_back(h);
            if (acks.empty() && !all.empty()) acks.push_back(all[rng() % all.size()]);
            Record r = build_record(f.inputs(s), acks, {}, false);
            REQUIRE(dag.insert(r));
            all.push_back(r.hash());
        }
        for (const auto& h : all)
            REQUIRE(dag.confirmation_depth(h) == test::oracle_confirmation_depth(dag, h));
    }
}

TEST_CASE("appending records never decreases depth") {
    RecordFixture f;
    std::mt19937_64 rng(32);
    RecordDag dag;
    std::vector<Digest> all;
    std::map<Digest, std::uint64_t> last_depth;
    for (std::uint64_t s = 0; s < 30; ++s) {
        std::vector<Digest> acks;
        for (const auto& h : all)
            if (rng() % 4 == 0) acks.push_back(h);
        if (acks.empty() && !all.empty()) acks.push_back(all.back());
        Record r = build_record(f.inputs(s), acks, {}, false);
        REQUIRE(dag.insert(r));
        all.push_back(r.hash());
        for (const auto& h : all) {
            std::uint64_t d = dag.confirmation_depth(h);
            REQUIRE(d >= last_depth[h]);
            last_depth[h] = d;
        }
    }
}

TEST_CASE("record validation") {
    RecordFixture f;
    RecordDag dag;
    LedgerState state;
    state.accounts[f.alice.pk] = Account{100, 0};
    TxValidationCtx ctx;
    ctx.params.voice_deposit = 100;
    std::set<Digest> known_cbs{f.cb};
    std::vector<PublicKey> scheduled{f.voice.pk};

    SECTION("valid record passes") {
        Record r = create_record(dag, f.inputs(2), {f.tx(40, 1, 5)});
        CHECK_FALSE(validate_record(dag, r, scheduled, known_cbs, state, ctx).has_value());
    }
    SECTION("overdraft transaction is slashable") {
        Record r = create_record(dag, f.inputs(2), {f.tx(101, 1, 5)});
        CHECK(validate_record(dag, r, scheduled, known_cbs, state, ctx) ==
              RecordError::InvalidTransactionIncluded);
    }
    SECTION("future-window transaction is slashable") {
        Record r = create_record(dag, f.inputs(2), {f.tx(1, 1, 25)});
        CHECK(validate_record(dag, r, scheduled, known_cbs, state, ctx) ==
              RecordError::InvalidTransactionIncluded);
    }
    SECTION("non-scheduled creator is rejected") {
        Record r = create_record(dag, f.inputs(2), {});
        std::vector<PublicKey> other{test::keys_of_byte(9).pk};
        CHECK(validate_record(dag, r, other, known_cbs, state, ctx) == RecordError::WrongCreator);
    }
    SECTION("unknown consensus block is rejected") {
        Record r = create_record(dag, f.inputs(2), {});
        CHECK(validate_record(dag, r, scheduled, {}, state, ctx) == RecordError::UnknownCb);
    }
    SECTION("equal-slot acknowledgment is rejected") {
        Record sibling = chain_record(f, dag, 2);
        Record r = build_record(f.inputs(2), {sibling.hash()}, {}, false);
        CHECK(validate_record(dag, r, scheduled, known_cbs, state, ctx) == RecordError::BadAcknowledgment);
    }
    SECTION("unknown acknowledgment is rejected") {
        Record r = build_record(f.inputs(2), {test::digest_of_byte(0x77)}, {}, false);
        CHECK(validate_record(dag, r, scheduled, known_cbs, state, ctx) == RecordError::BadAcknowledgment);
    }
    SECTION("tampered transaction set breaks the root") {
        Record r = create_record(dag, f.inputs(2), {f.tx(40, 1, 5)});
        r.transactions.push_back(f.tx(1, 2, 5));
        CHECK(validate_record(dag, r, scheduled, known_cbs, state, ctx) == RecordError::BadTxRoot);
    }
    SECTION("tampered header breaks the signature") {
        Record r = create_record(dag, f.inputs(2), {});
        r.created_at_ms += 1;
        CHECK(validate_record(dag, r, scheduled, known_cbs, state, ctx) == RecordError::BadSignature);
    }
    SECTION("safe record confirming transactions is invalid") {
        Record r = create_safe_record(dag, f.inputs(2));
        // graft a transaction set onto a safe record, fixing the root
        r.transactions = {f.tx(1, 1, 5)};
        r.tx_root = merkle_root(r.tx_hashes());
        r.signature = sign(f.voice.sk, view_of(r.signed_bytes()));
        CHECK(validate_record(dag, r, scheduled, known_cbs, state, ctx) ==
              RecordError::InvalidTransactionIncluded);
    }
}

TEST_CASE("new tips transitively cover all lower slots") {
    RecordFixture f;
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 20; ++trial) {
        RecordDag dag;
        std::size_t n = 2 + rng() % 99;
        for (std::uint64_t s = 0; s < n; ++s) {
            Record r = create_record(dag, f.inputs(s), {});
            REQUIRE(dag.insert(r));
        }
        // every record except the tips must be reachable from the tip set
        std::set<Digest> reachable;
        std::vector<Digest> stack(dag.tips.begin(), dag.tips.end());
        while (!stack.empty()) {
            Digest cur = stack.back();
            stack.pop_back();
            if (!reachable.insert(cur).second) continue;
            for (const auto& a : dag.get(cur)->acknowledged) stack.push_back(a);
        }
        REQUIRE(reachable.size() == dag.records.size());
    }
}
