#include "lptd/bytes.hpp"

#include "lptd/errors.hpp"

namespace lptd {

void ByteWriter::u32(uint32_t v) {
    for (int i = 3; i >= 0; --i) buf_.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

void ByteWriter::u64(uint64_t v) {
    for (int i = 7; i >= 0; --i) buf_.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

void ByteWriter::bytes_lp(const std::vector<uint8_t>& b) {
    u32(static_cast<uint32_t>(b.size()));
    buf_.insert(buf_.end(), b.begin(), b.end());
}

void ByteWriter::str_lp(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
}

void ByteWriter::mpz_lp(const mpz_class& v) { bytes_lp(mpz_to_bytes(v)); }

void ByteReader::need(size_t n) {
    if (pos_ + n > buf_.size()) raise(Errc::io_error, "truncated byte stream");
}

uint8_t ByteReader::u8() {
    need(1);
    return buf_[pos_++];
}

uint32_t ByteReader::u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | buf_[pos_++];
    return v;
}

uint64_t ByteReader::u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | buf_[pos_++];
    return v;
}

std::vector<uint8_t> ByteReader::bytes_lp() {
    uint32_t len = u32();
    need(len);
    std::vector<uint8_t> out(buf_.begin() + pos_, buf_.begin() + pos_ + len);
    pos_ += len;
    return out;
}

std::string ByteReader::str_lp() {
    auto b = bytes_lp();
    return std::string(b.begin(), b.end());
}

mpz_class ByteReader::mpz_lp() {
    auto b = bytes_lp();
    return mpz_from_bytes(b.data(), b.size());
}

std::vector<uint8_t> mpz_to_bytes(const mpz_class& v) {
    if (sgn(v) < 0) raise(Errc::range_error, "negative value in canonical serialization");
    if (v == 0) return {};
    size_t count = 0;
    std::vector<uint8_t> out((mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8);
    mpz_export(out.data(), &count, 1 /* most significant word first */, 1, 1, 0, v.get_mpz_t());
    out.resize(count);
    return out;
}

mpz_class mpz_from_bytes(const uint8_t* data, size_t len) {
    mpz_class v;
    if (len > 0) mpz_import(v.get_mpz_t(), len, 1, 1, 1, 0, data);
    return v;
}

std::string hex_encode(const std::vector<uint8_t>& b) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    s.reserve(b.size() * 2);
    for (uint8_t c : b) {
        s.push_back(digits[c >> 4]);
        s.push_back(digits[c & 0xf]);
    }
    return s;
}

}  // namespace lptd
