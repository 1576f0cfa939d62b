#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lamassu/crypto.hpp"

namespace testutil {

inline std::vector<std::uint8_t> from_hex(const std::string& hex) {
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2)
    out.push_back(
        static_cast<std::uint8_t>(std::stoi(hex.substr(i, 2), nullptr, 16)));
  return out;
}

inline std::string to_hex(std::span<const std::uint8_t> bytes) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (auto b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xf]);
  }
  return out;
}

/// Deterministic pseudo-random block; test data only.
inline std::vector<std::uint8_t> random_block(std::mt19937_64& rng,
                                              std::size_t size) {
  std::vector<std::uint8_t> blk(size);
  for (std::size_t i = 0; i + 8 <= size; i += 8) {
    std::uint64_t word = rng();
    std::memcpy(blk.data() + i, &word, 8);
  }
  return blk;
}

inline lamassu::SecretKeyPair test_keys(std::uint64_t zone = 1) {
  lamassu::SecretKeyPair keys;
  keys.zone_id = zone;
  std::mt19937_64 rng(zone * 7919 + 13);
  for (auto& b : keys.inner_key) b = static_cast<std::uint8_t>(rng());
  for (auto& b : keys.outer_key) b = static_cast<std::uint8_t>(rng());
  return keys;
}

}  // namespace testutil
