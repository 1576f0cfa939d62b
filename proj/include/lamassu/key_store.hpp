#pragma once

// Local durable store for per-zone key pairs, standing in for a KMIP server.
// The zone map is wrapped with AES-256-GCM under a PBKDF2-HMAC-SHA256
// passphrase key.
//
// File format (integers big-endian):
//   [ 0, 4)  magic "LMSK"
//   [ 4, 8)  format version, u32 = 1
//   [ 8,12)  PBKDF2 iteration count, u32
//   [12,28)  PBKDF2 salt, 16 bytes
//   [28,40)  GCM nonce, 12 bytes
//   [40,56)  GCM tag, 16 bytes
//   [56,..)  ciphertext of the zone map:
//              u32 entry count, then per entry
//              { zone_id u64, inner key 32, outer key 32 }
// The clear header bytes [0,28) are authenticated as GCM AAD.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "lamassu/crypto.hpp"
#include "lamassu/errors.hpp"
#include "lamassu/metadata.hpp"

namespace lamassu {

class KeyStore {
 public:
  static constexpr std::uint32_t kDefaultIterations = 100000;

  static KeyStore create(const std::filesystem::path& path,
                         const std::string& passphrase,
                         std::uint32_t iterations = kDefaultIterations) {
    if (std::filesystem::exists(path))
      throw AlreadyExistsError("keystore already exists: " + path.string());
    KeyStore ks(path, passphrase, iterations);
    ks.save();
    return ks;
  }

  static KeyStore open(const std::filesystem::path& path,
                       const std::string& passphrase) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw NotFoundError("no such keystore: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    if (bytes.size() < 56 || std::memcmp(bytes.data(), "LMSK", 4) != 0)
      throw FormatError("not a keystore file: " + path.string());
    if (wire::get_u32be(bytes.data() + 4) != 1)
      throw FormatError("unsupported keystore version");
    std::uint32_t iterations = wire::get_u32be(bytes.data() + 8);
    KeyStore ks(path, passphrase, iterations);
    std::array<std::uint8_t, 16> salt;
    std::memcpy(salt.data(), bytes.data() + 12, 16);
    auto wrap_key = ks.derive_wrap_key(salt);
    std::array<std::uint8_t, kIvBytes> iv{};
    std::memcpy(iv.data(), bytes.data() + 28, kGcmNonceBytes);
    std::array<std::uint8_t, kGcmTagBytes> tag;
    std::memcpy(tag.data(), bytes.data() + 40, kGcmTagBytes);
    std::vector<std::uint8_t> plain(bytes.size() - 56);
    try {
      decrypt_metadata(std::span(bytes).subspan(56), wrap_key,
                       std::span<const std::uint8_t, kIvBytes>(iv),
                       std::span<const std::uint8_t, kGcmTagBytes>(tag),
                       std::span(bytes.data(), 28), plain);
    } catch (const MetadataIntegrityError&) {
      throw AuthenticationError(
          "keystore authentication failed (wrong passphrase or tampered "
          "file)");
    }
    ks.parse_zone_map(plain);
    return ks;
  }

  SecretKeyPair create_zone(std::uint64_t zone_id) {
    if (zones_.contains(zone_id))
      throw AlreadyExistsError("zone already exists: " +
                               std::to_string(zone_id));
    SecretKeyPair pair;
    pair.zone_id = zone_id;
    random_bytes(pair.inner_key);
    random_bytes(pair.outer_key);
    zones_[zone_id] = pair;
    save();
    return pair;
  }

  SecretKeyPair fetch_zone(std::uint64_t zone_id) const {
    auto it = zones_.find(zone_id);
    if (it == zones_.end())
      throw NotFoundError("no such zone: " + std::to_string(zone_id));
    return it->second;
  }

  bool has_zone(std::uint64_t zone_id) const {
    return zones_.contains(zone_id);
  }
  std::size_t zone_count() const { return zones_.size(); }

  void save() {
    std::vector<std::uint8_t> plain(4 + zones_.size() * (8 + 64));
    wire::put_u32be(plain.data(), static_cast<std::uint32_t>(zones_.size()));
    std::size_t off = 4;
    for (const auto& [id, pair] : zones_) {
      wire::put_u64be(plain.data() + off, id);
      std::memcpy(plain.data() + off + 8, pair.inner_key.data(), kKeyBytes);
      std::memcpy(plain.data() + off + 40, pair.outer_key.data(), kKeyBytes);
      off += 72;
    }
    std::vector<std::uint8_t> out(56 + plain.size());
    std::memcpy(out.data(), "LMSK", 4);
    wire::put_u32be(out.data() + 4, 1);
    wire::put_u32be(out.data() + 8, iterations_);
    std::array<std::uint8_t, 16> salt;
    random_bytes(salt);
    std::memcpy(out.data() + 12, salt.data(), 16);
    std::array<std::uint8_t, kIvBytes> iv{};
    random_bytes(std::span(iv.data(), kGcmNonceBytes));
    std::memcpy(out.data() + 28, iv.data(), kGcmNonceBytes);
    auto wrap_key = derive_wrap_key(salt);
    std::array<std::uint8_t, kGcmTagBytes> tag;
    encrypt_metadata(plain, wrap_key,
                     std::span<const std::uint8_t, kIvBytes>(iv),
                     std::span(out.data(), 28),
                     std::span(out).subspan(56), tag);
    std::memcpy(out.data() + 40, tag.data(), kGcmTagBytes);
    std::ofstream f(path_, std::ios::binary | std::ios::trunc);
    f.write(reinterpret_cast<const char*>(out.data()),
            static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("cannot write keystore: " + path_.string());
  }

 private:
  KeyStore(std::filesystem::path path, std::string passphrase,
           std::uint32_t iterations)
      : path_(std::move(path)),
        passphrase_(std::move(passphrase)),
        iterations_(iterations) {}

  std::array<std::uint8_t, kKeyBytes> derive_wrap_key(
      std::span<const std::uint8_t, 16> salt) const {
    std::array<std::uint8_t, kKeyBytes> key;
    if (PKCS5_PBKDF2_HMAC(passphrase_.data(),
                          static_cast<int>(passphrase_.size()), salt.data(),
                          static_cast<int>(salt.size()),
                          static_cast<int>(iterations_), EVP_sha256(),
                          static_cast<int>(key.size()), key.data()) != 1)
      throw Error("PBKDF2 failed");
    return key;
  }

  void parse_zone_map(std::span<const std::uint8_t> plain) {
    if (plain.size() < 4) throw FormatError("keystore payload truncated");
    std::uint32_t count = wire::get_u32be(plain.data());
    if (plain.size() < 4 + static_cast<std::size_t>(count) * 72)
      throw FormatError("keystore payload truncated");
    std::size_t off = 4;
    for (std::uint32_t i = 0; i < count; ++i) {
      SecretKeyPair pair;
      pair.zone_id = wire::get_u64be(plain.data() + off);
      std::memcpy(pair.inner_key.data(), plain.data() + off + 8, kKeyBytes);
      std::memcpy(pair.outer_key.data(), plain.data() + off + 40, kKeyBytes);
      zones_[pair.zone_id] = pair;
      off += 72;
    }
  }

  std::filesystem::path path_;
  std::string passphrase_;
  std::uint32_t iterations_;
  std::map<std::uint64_t, SecretKeyPair> zones_;
};

}  // namespace lamassu
