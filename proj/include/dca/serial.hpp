// Copyright (c) 2026 The dcasim developers
// Distributed under the MIT software license, see the accompanying
// file LICENSE or http://www.opensource.org/licenses/mit-license.php.
//
// Canonical serialization: fixed field order, big-endian integers,
// u32-length-prefixed octet strings. Two nodes encoding the same value
// must produce identical bytes; snapshots and signatures depend on it.

#ifndef DCA_SERIAL_HPP
#define DCA_SERIAL_HPP

#include <cstdint>
#include <stdexcept>

#include "dca/bytes.hpp"

namespace dca {

struct SerialError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }

    void u32(std::uint32_t v) {
        for (int i = 3; i >= 0; --i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    void u64(std::uint64_t v) {
        for (int i = 7; i >= 0; --i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }

    void raw(ByteView data) { buf_.insert(buf_.end(), data.begin(), data.end()); }

    void bytes(ByteView data) {
        u32(static_cast<std::uint32_t>(data.size()));
        raw(data);
    }

    void digest(const Digest& d) { raw(ByteView(d.bytes.data(), d.bytes.size())); }

    const Bytes& out() const { return buf_; }
    Bytes take() { return std::move(buf_); }

private:
    Bytes buf_;
};

class Reader {
public:
    explicit Reader(ByteView data) : data_(data) {}

    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_++];
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v = (v << 8) | data_[pos_++];
        return v;
    }

    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }

    Bytes bytes() {
        std::uint32_t n = u32();
        need(n);
        Bytes out(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return out;
    }

    Digest digest() {
        need(32);
        Digest d;
        std::memcpy(d.bytes.data(), data_.data() + pos_, 32);
        pos_ += 32;
        return d;
    }

    bool done() const { return pos_ == data_.size(); }
    void expect_done() const {
        if (!done()) throw SerialError("trailing bytes");
    }

private:
    void need(std::size_t n) const {
        if (pos_ + n > data_.size()) throw SerialError("short read");
    }

    ByteView data_;
    std::size_t pos_ = 0;
};

} // namespace dca

#endif // DCA_SERIAL_HPP
