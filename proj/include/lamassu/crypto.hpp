#pragma once

// Two-tier encryption primitives: convergent AES-256-CBC for data blocks,
// AES-256-GCM for metadata blocks. All functions are deterministic except
// random byte generation, and hold no shared state.

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

#include <openssl/evp.h>
#include <openssl/rand.h>
#include <openssl/sha.h>

#include "lamassu/errors.hpp"

namespace lamassu {

inline constexpr std::size_t kKeyBytes = 32;
inline constexpr std::size_t kHashBytes = 32;
inline constexpr std::size_t kIvBytes = 16;
inline constexpr std::size_t kGcmNonceBytes = 12;
inline constexpr std::size_t kGcmTagBytes = 16;

/// 32-byte SHA-256 digest of one data block.
struct BlockHash {
  std::array<std::uint8_t, kHashBytes> bytes{};
  bool operator==(const BlockHash&) const = default;
};

/// Per-block convergent encryption key (CEKey).
struct ConvergentKey {
  std::array<std::uint8_t, kKeyBytes> bytes{};
  bool operator==(const ConvergentKey&) const = default;

  bool is_zero() const {
    for (auto b : bytes)
      if (b != 0) return false;
    return true;
  }
};

/// The two zone secrets: inner key for convergent-key derivation, outer key
/// for metadata encryption. Every holder of the same zone_id holds byte-equal
/// keys; the key store enforces that.
struct SecretKeyPair {
  std::array<std::uint8_t, kKeyBytes> inner_key{};
  std::array<std::uint8_t, kKeyBytes> outer_key{};
  std::uint64_t zone_id = 0;
  bool operator==(const SecretKeyPair&) const = default;
};

namespace detail {

struct CipherCtx {
  EVP_CIPHER_CTX* ctx;
  CipherCtx() : ctx(EVP_CIPHER_CTX_new()) {
    if (!ctx) throw Error("EVP_CIPHER_CTX_new failed");
  }
  ~CipherCtx() { EVP_CIPHER_CTX_free(ctx); }
  CipherCtx(const CipherCtx&) = delete;
  CipherCtx& operator=(const CipherCtx&) = delete;
};

// AES-256-CBC with no padding; caller guarantees len % 16 == 0.
inline void aes256_cbc(bool enc, std::span<const std::uint8_t, kKeyBytes> key,
                       std::span<const std::uint8_t, kIvBytes> iv,
                       std::span<const std::uint8_t> in,
                       std::span<std::uint8_t> out) {
  CipherCtx c;
  if (EVP_CipherInit_ex(c.ctx, EVP_aes_256_cbc(), nullptr, key.data(),
                        iv.data(), enc ? 1 : 0) != 1)
    throw Error("AES-256-CBC init failed");
  EVP_CIPHER_CTX_set_padding(c.ctx, 0);
  int outl = 0;
  if (EVP_CipherUpdate(c.ctx, out.data(), &outl, in.data(),
                       static_cast<int>(in.size())) != 1)
    throw Error("AES-256-CBC update failed");
  int fin = 0;
  if (EVP_CipherFinal_ex(c.ctx, out.data() + outl, &fin) != 1)
    throw Error("AES-256-CBC final failed");
}

}  // namespace detail

/// Fill a buffer from the OS CSPRNG.
inline void random_bytes(std::span<std::uint8_t> out) {
  if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1)
    throw Error("RAND_bytes failed");
}

/// SHA-256 over one full data block.
inline BlockHash hash_block(std::span<const std::uint8_t> block,
                            std::size_t block_size) {
  if (block.size() != block_size)
    throw InvalidArgument("hash_block: block length " +
                          std::to_string(block.size()) + " != block size " +
                          std::to_string(block_size));
  BlockHash h;
  SHA256(block.data(), block.size(), h.bytes.data());
  return h;
}

/// KDF: CEKey = AES-256-CBC(inner_key, zero IV) over the 32-byte hash.
/// CBC chaining makes the second output half depend on the whole hash.
inline ConvergentKey derive_cekey(
    const BlockHash& h, std::span<const std::uint8_t, kKeyBytes> inner_key) {
  static constexpr std::array<std::uint8_t, kIvBytes> zero_iv{};
  ConvergentKey k;
  detail::aes256_cbc(true, inner_key, zero_iv, h.bytes, k.bytes);
  return k;
}

/// Convergent tier: AES-256-CBC under the block's CEKey with the fixed
/// all-zero IV so equal plaintext blocks map to equal ciphertext blocks.
inline void encrypt_data_block(std::span<const std::uint8_t> block,
                               const ConvergentKey& key,
                               std::span<std::uint8_t> out,
                               std::size_t block_size) {
  if (block.size() != block_size || out.size() != block_size)
    throw InvalidArgument("encrypt_data_block: wrong block length");
  if (block_size % 16 != 0)
    throw InvalidArgument("encrypt_data_block: block size not AES-aligned");
  static constexpr std::array<std::uint8_t, kIvBytes> zero_iv{};
  detail::aes256_cbc(true, key.bytes, zero_iv, block, out);
}

inline std::vector<std::uint8_t> encrypt_data_block(
    std::span<const std::uint8_t> block, const ConvergentKey& key,
    std::size_t block_size) {
  std::vector<std::uint8_t> out(block_size);
  encrypt_data_block(block, key, out, block_size);
  return out;
}

inline void decrypt_data_block(std::span<const std::uint8_t> cipher,
                               const ConvergentKey& key,
                               std::span<std::uint8_t> out,
                               std::size_t block_size) {
  if (cipher.size() != block_size || out.size() != block_size)
    throw InvalidArgument("decrypt_data_block: wrong block length");
  if (block_size % 16 != 0)
    throw InvalidArgument("decrypt_data_block: block size not AES-aligned");
  static constexpr std::array<std::uint8_t, kIvBytes> zero_iv{};
  detail::aes256_cbc(false, key.bytes, zero_iv, cipher, out);
}

inline std::vector<std::uint8_t> decrypt_data_block(
    std::span<const std::uint8_t> cipher, const ConvergentKey& key,
    std::size_t block_size) {
  std::vector<std::uint8_t> out(block_size);
  decrypt_data_block(cipher, key, out, block_size);
  return out;
}

/// Metadata tier: AES-256-GCM. The nonce is the first 12 bytes of the
/// 16-byte stored IV field; the trailing 4 bytes are zero pad.
inline void encrypt_metadata(std::span<const std::uint8_t> plain,
                             std::span<const std::uint8_t, kKeyBytes> outer_key,
                             std::span<const std::uint8_t, kIvBytes> iv,
                             std::span<const std::uint8_t> aad,
                             std::span<std::uint8_t> cipher_out,
                             std::span<std::uint8_t, kGcmTagBytes> tag_out) {
  if (cipher_out.size() != plain.size())
    throw InvalidArgument("encrypt_metadata: output size mismatch");
  detail::CipherCtx c;
  if (EVP_EncryptInit_ex(c.ctx, EVP_aes_256_gcm(), nullptr, nullptr,
                         nullptr) != 1 ||
      EVP_CIPHER_CTX_ctrl(c.ctx, EVP_CTRL_GCM_SET_IVLEN, kGcmNonceBytes,
                          nullptr) != 1 ||
      EVP_EncryptInit_ex(c.ctx, nullptr, nullptr, outer_key.data(),
                         iv.data()) != 1)
    throw Error("AES-256-GCM encrypt init failed");
  int outl = 0;
  if (!aad.empty() &&
      EVP_EncryptUpdate(c.ctx, nullptr, &outl, aad.data(),
                        static_cast<int>(aad.size())) != 1)
    throw Error("AES-256-GCM AAD failed");
  if (EVP_EncryptUpdate(c.ctx, cipher_out.data(), &outl, plain.data(),
                        static_cast<int>(plain.size())) != 1)
    throw Error("AES-256-GCM encrypt failed");
  int fin = 0;
  if (EVP_EncryptFinal_ex(c.ctx, cipher_out.data() + outl, &fin) != 1)
    throw Error("AES-256-GCM final failed");
  if (EVP_CIPHER_CTX_ctrl(c.ctx, EVP_CTRL_GCM_GET_TAG, kGcmTagBytes,
                          tag_out.data()) != 1)
    throw Error("AES-256-GCM tag failed");
}

/// Returns plaintext iff the tag authenticates; throws otherwise.
inline void decrypt_metadata(std::span<const std::uint8_t> cipher,
                             std::span<const std::uint8_t, kKeyBytes> outer_key,
                             std::span<const std::uint8_t, kIvBytes> iv,
                             std::span<const std::uint8_t, kGcmTagBytes> tag,
                             std::span<const std::uint8_t> aad,
                             std::span<std::uint8_t> plain_out) {
  if (plain_out.size() != cipher.size())
    throw InvalidArgument("decrypt_metadata: output size mismatch");
  detail::CipherCtx c;
  if (EVP_DecryptInit_ex(c.ctx, EVP_aes_256_gcm(), nullptr, nullptr,
                         nullptr) != 1 ||
      EVP_CIPHER_CTX_ctrl(c.ctx, EVP_CTRL_GCM_SET_IVLEN, kGcmNonceBytes,
                          nullptr) != 1 ||
      EVP_DecryptInit_ex(c.ctx, nullptr, nullptr, outer_key.data(),
                         iv.data()) != 1)
    throw Error("AES-256-GCM decrypt init failed");
  int outl = 0;
  if (!aad.empty() &&
      EVP_DecryptUpdate(c.ctx, nullptr, &outl, aad.data(),
                        static_cast<int>(aad.size())) != 1)
    throw Error("AES-256-GCM AAD failed");
  if (EVP_DecryptUpdate(c.ctx, plain_out.data(), &outl, cipher.data(),
                        static_cast<int>(cipher.size())) != 1)
    throw Error("AES-256-GCM decrypt failed");
  std::array<std::uint8_t, kGcmTagBytes> tag_copy;
  std::memcpy(tag_copy.data(), tag.data(), kGcmTagBytes);
  if (EVP_CIPHER_CTX_ctrl(c.ctx, EVP_CTRL_GCM_SET_TAG, kGcmTagBytes,
                          tag_copy.data()) != 1)
    throw Error("AES-256-GCM set tag failed");
  int fin = 0;
  if (EVP_DecryptFinal_ex(c.ctx, plain_out.data() + outl, &fin) != 1)
    throw MetadataIntegrityError(
        "metadata authentication failed (corruption or wrong outer key)");
}

}  // namespace lamassu
