// Copyright (c) 2026 The dcasim developers
// Distributed under the MIT software license, see the accompanying
// file LICENSE or http://www.opensource.org/licenses/mit-license.php.

#ifndef DCA_TEST_UTIL_HPP
#define DCA_TEST_UTIL_HPP

#include <random>

#include "dca/cycle.hpp"
#include "dca/record.hpp"

namespace dca::test {

inline Digest digest_of_byte(std::uint8_t b) {
    Digest d;
    d.bytes.fill(b);
    return d;
}

inline KeyPair keys_of_byte(std::uint8_t b) { return keypair_from_seed(digest_of_byte(b)); }

inline Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
    Bytes out(n);
    for (auto& b : out) b = static_cast<std::uint8_t>(rng() & 0xff);
    return out;
}

inline Transaction signed_transfer(const KeyPair& from, const PublicKey& to, Amount amount,
                                   std::uint64_t sequence, std::int64_t timestamp_s = 0) {
    Transaction tx;
    tx.kind = TxKind::Transfer;
    tx.sender = from.pk;
    tx.recipient = to;
    tx.amount = amount;
    tx.timestamp_s = timestamp_s;
    tx.sequence = sequence;
    return make_signed_tx(tx, from.sk);
}

/// Independent Merkle recomputation: a second implementation of the same
/// tree shape, kept free of the production code paths.
inline Digest oracle_merkle_root(const std::vector<Digest>& leaves) {
    if (leaves.empty()) return hash_tagged(tag::merkle_empty, ByteView{});
    std::vector<Digest> level = leaves;
    while (level.size() > 1) {
        std::vector<Digest> next;
        for (std::size_t i = 0; i < level.size(); i += 2) {
            const Digest& l = level[i];
            const Digest& r = (i + 1 < level.size()) ? level[i + 1] : level[i];
            Bytes cat(l.bytes.begin(), l.bytes.end());
            cat.insert(cat.end(), r.bytes.begin(), r.bytes.end());
            next.push_back(hash(cat));
        }
        level = next;
    }
    return level[0];
}

/// Brute-force transitive reachability on the acknowledgment DAG: the number
/// of distinct slots among records from which `target` is reachable along
/// acknowledgment edges.
inline std::uint64_t oracle_confirmation_depth(const RecordDag& dag, const Digest& target) {
    std::set<std::uint64_t> slots;
    for (const auto& [h, r] : dag.records) {
        if (h == target) continue;
        // walk down from r along acknowledgment edges
        std::set<Digest> seen;
        std::vector<Digest> stack{h};
        bool reaches = false;
        while (!stack.empty() && !reaches) {
            Digest cur = stack.back();
            stack.pop_back();
            if (!seen.insert(cur).second) continue;
            if (cur == target) {
                reaches = true;
                break;
            }
            const Record* rec = dag.get(cur);
            if (!rec) continue;
            for (const auto& a : rec->acknowledged) stack.push_back(a);
        }
        if (reaches) slots.insert(r.slot);
    }
    return slots.size();
}

} // namespace dca::test

#endif // DCA_TEST_UTIL_HPP
