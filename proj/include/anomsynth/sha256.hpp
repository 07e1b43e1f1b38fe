#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

namespace anomsynth {

using Digest256 = std::array<std::uint8_t, 32>;

// Plain FIPS 180-4 SHA-256; content hashing only (codebook identity).
Digest256 sha256(std::span<const std::uint8_t> data);

std::string hex_digest(const Digest256& d);

}  // namespace anomsynth
