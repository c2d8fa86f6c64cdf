#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <gmpxx.h>

namespace lptd {

// Canonical byte layout shared by MAC payloads, hash-chain inputs and key
// files: fixed-width integers big-endian, variable-length fields prefixed
// with a u32 length, big integers as length-prefixed big-endian magnitude.
class ByteWriter {
public:
    void u8(uint8_t v) { buf_.push_back(v); }
    void u32(uint32_t v);
    void u64(uint64_t v);
    void raw(const uint8_t* data, size_t len) { buf_.insert(buf_.end(), data, data + len); }
    void bytes_lp(const std::vector<uint8_t>& b);
    void str_lp(const std::string& s);
    void mpz_lp(const mpz_class& v);

    const std::vector<uint8_t>& data() const { return buf_; }
    size_t size() const { return buf_.size(); }

private:
    std::vector<uint8_t> buf_;
};

class ByteReader {
public:
    explicit ByteReader(const std::vector<uint8_t>& buf) : buf_(buf) {}

    uint8_t u8();
    uint32_t u32();
    uint64_t u64();
    std::vector<uint8_t> bytes_lp();
    std::string str_lp();
    mpz_class mpz_lp();
    bool at_end() const { return pos_ == buf_.size(); }

private:
    void need(size_t n);

    const std::vector<uint8_t>& buf_;
    size_t pos_ = 0;
};

std::vector<uint8_t> mpz_to_bytes(const mpz_class& v);
mpz_class mpz_from_bytes(const uint8_t* data, size_t len);

std::string hex_encode(const std::vector<uint8_t>& b);

}  // namespace lptd
