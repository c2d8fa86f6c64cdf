#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace lptd {

using HashVal = std::array<uint8_t, 32>;

HashVal sha256(const uint8_t* data, size_t len);
HashVal sha256(const std::vector<uint8_t>& data);

std::string hash_hex(const HashVal& h);

}  // namespace lptd
