// Copyright (c) 2026 The dcasim developers
// Distributed under the MIT software license, see the accompanying
// file LICENSE or http://www.opensource.org/licenses/mit-license.php.
//
// Cryptographic primitives: SHA-256 hashing and Ed25519 signatures via
// libsodium, plus the hash commitment used by the per-cycle randomness
// scheme. Key generation is seedable so whole simulations replay
// byte-for-byte. Everything here is a pure function of its inputs.

#ifndef DCA_CRYPTO_HPP
#define DCA_CRYPTO_HPP

#include <sodium.h>

#include <optional>
#include <stdexcept>

#include "dca/bytes.hpp"
#include "dca/serial.hpp"

namespace dca {

namespace tag {
// Domain separation. Changing any of these is a consensus break.
inline constexpr std::string_view commit = "dca.commit.v1";
inline constexpr std::string_view seed = "dca.seed.v1";
inline constexpr std::string_view merkle_empty = "dca.merkle.empty.v1";
inline constexpr std::string_view rng = "dca.rng.v1";
inline constexpr std::string_view genesis_seed = "dca.genesis.seed.v1";
inline constexpr std::string_view voice_secret = "dca.voice.secret.v1";
} // namespace tag

inline void ensure_sodium() {
    static const bool ok = [] { return sodium_init() >= 0; }();
    if (!ok) throw std::runtime_error("sodium_init failed");
}

inline Digest hash(ByteView data) {
    ensure_sodium();
    Digest d;
    crypto_hash_sha256(d.bytes.data(), data.data(), data.size());
    return d;
}

inline Digest hash(const Bytes& data) { return hash(view_of(data)); }

/// Incremental SHA-256, for state roots over large serializations.
class Hasher {
public:
    Hasher() {
        ensure_sodium();
        crypto_hash_sha256_init(&st_);
    }
    Hasher& update(ByteView data) {
        crypto_hash_sha256_update(&st_, data.data(), data.size());
        return *this;
    }
    Hasher& update(std::string_view s) {
        return update(ByteView(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
    }
    Digest final() {
        Digest d;
        crypto_hash_sha256_final(&st_, d.bytes.data());
        return d;
    }

private:
    crypto_hash_sha256_state st_;
};

inline Digest hash_tagged(std::string_view domain, ByteView data) {
    return Hasher().update(domain).update(data).final();
}

// ---------------------------------------------------------------------------
// Signatures (Ed25519). Signing is deterministic: same key and message
// always produce the same signature bytes.

struct PublicKey {
    std::array<std::uint8_t, crypto_sign_PUBLICKEYBYTES> bytes{};
    auto operator<=>(const PublicKey&) const = default;
    std::string hex() const { return hex_encode(ByteView(bytes.data(), bytes.size())); }
    std::string short_hex(std::size_t n = 8) const { return hex().substr(0, n); }
};

struct SecretKey {
    // Never serialized into network data.
    std::array<std::uint8_t, crypto_sign_SECRETKEYBYTES> bytes{};
};

struct Signature {
    std::array<std::uint8_t, crypto_sign_BYTES> bytes{};
    auto operator<=>(const Signature&) const = default;
};

struct KeyPair {
    PublicKey pk;
    SecretKey sk;
};

inline KeyPair keypair_from_seed(const Digest& seed) {
    ensure_sodium();
    KeyPair kp;
    if (crypto_sign_seed_keypair(kp.pk.bytes.data(), kp.sk.bytes.data(), seed.bytes.data()) != 0)
        throw std::runtime_error("keypair_from_seed failed");
    return kp;
}

inline Signature sign(const SecretKey& sk, ByteView msg) {
    ensure_sodium();
    Signature sig;
    if (crypto_sign_detached(sig.bytes.data(), nullptr, msg.data(), msg.size(), sk.bytes.data()) != 0)
        throw std::runtime_error("sign failed: malformed secret key");
    return sig;
}

inline bool verify(const PublicKey& pk, ByteView msg, const Signature& sig) {
    ensure_sodium();
    return crypto_sign_verify_detached(sig.bytes.data(), msg.data(), msg.size(), pk.bytes.data()) == 0;
}

// ---------------------------------------------------------------------------
// Commitments: bind a secret now, reveal it later by publishing the
// preimage. digest = H(tag || secret).

inline constexpr std::size_t kCommitSecretMin = 16;
inline constexpr std::size_t kCommitSecretMax = 64;

struct Commitment {
    Digest digest;
    std::optional<Bytes> opened; // local bookkeeping only, never serialized

    auto operator<=>(const Commitment& o) const { return digest <=> o.digest; }
    bool operator==(const Commitment& o) const { return digest == o.digest; }
};

inline Commitment commit(ByteView secret) {
    if (secret.size() < kCommitSecretMin || secret.size() > kCommitSecretMax)
        throw std::invalid_argument("commit: secret length outside [16, 64]");
    return Commitment{hash_tagged(tag::commit, secret), std::nullopt};
}

inline bool open(const Commitment& c, ByteView secret) {
    if (secret.size() < kCommitSecretMin || secret.size() > kCommitSecretMax) return false;
    return hash_tagged(tag::commit, secret) == c.digest;
}

// ---------------------------------------------------------------------------
// Deterministic generator expanded from a digest by counter-mode hashing.
// Platform-independent by construction; used wherever consensus-critical
// pseudo-randomness is drawn from a seed.

class DigestRng {
public:
    explicit DigestRng(const Digest& seed) : seed_(seed) {}

    std::uint64_t next_u64() {
        if (pos_ == 4) refill();
        return block_[pos_++];
    }

    /// Uniform in [0, n) by rejection sampling; n must be > 0.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("DigestRng::below(0)");
        const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
        for (;;) {
            std::uint64_t v = next_u64();
            if (v < limit) return v % n;
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    void refill() {
        Writer w;
        w.raw(std::span(reinterpret_cast<const std::uint8_t*>(tag::rng.data()), tag::rng.size()));
        w.digest(seed_);
        w.u64(counter_++);
        Digest d = hash(w.out());
        for (int i = 0; i < 4; ++i) {
            std::uint64_t v = 0;
            for (int b = 0; b < 8; ++b) v = (v << 8) | d.bytes[static_cast<std::size_t>(8 * i + b)];
            block_[static_cast<std::size_t>(i)] = v;
        }
        pos_ = 0;
    }

    Digest seed_;
    std::uint64_t counter_ = 0;
    std::array<std::uint64_t, 4> block_{};
    std::size_t pos_ = 4;
};

} // namespace dca

#endif // DCA_CRYPTO_HPP
