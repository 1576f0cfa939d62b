#pragma once

// Bit-exact serialization and GCM sealing of per-segment metadata blocks.
//
// Plaintext layout of one metadata block (all integers big-endian):
//   [ 0,16)                 IV (stored in clear; first 12 bytes are the GCM
//                           nonce, last 4 are zero pad)
//   [16,32)                 GCM auth tag (stored in clear)
//   [32,40)                 logical file size, u64
//   [40]                    update flag: 0 = clean, 1 = midupdate
//   [41]                    in-flight entry count, <= R
//   [42,48)                 zero pad, reserved
//   [48, 48+2R)             in-flight indices, u16 each (segment-relative
//                           data-block offsets)
//   [.., +32*data_slots)    key table, one 32-byte key per data slot
//   [.., +32*R)             reserved key slots (old keys during an update)
//   [.., block_size)        zero fill
//
// seal() GCM-encrypts bytes [32, block_size) under the outer key with a
// fresh random nonce and AAD = 8-byte big-endian segment index, then places
// nonce and tag in the clear header fields.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

#include "lamassu/crypto.hpp"
#include "lamassu/layout.hpp"

namespace lamassu {

enum class UpdateFlag : std::uint8_t { clean = 0, midupdate = 1 };

struct MetadataBlock {
  std::array<std::uint8_t, kIvBytes> iv{};
  std::array<std::uint8_t, kGcmTagBytes> auth_tag{};
  std::uint64_t logical_size = 0;
  UpdateFlag update_flag = UpdateFlag::clean;
  std::vector<std::uint16_t> inflight_indices;  // size == inflight_count
  std::vector<ConvergentKey> key_table;         // size == data_slots
  std::vector<ConvergentKey> reserved_keys;     // size == R

  static MetadataBlock empty(const LayoutParams& p) {
    MetadataBlock mb;
    mb.key_table.resize(p.data_slots());
    mb.reserved_keys.resize(p.reserved_slots);
    return mb;
  }

  void check(const LayoutParams& p) const {
    if (key_table.size() != p.data_slots())
      throw InvalidArgument("metadata: key table size mismatch");
    if (reserved_keys.size() != p.reserved_slots)
      throw InvalidArgument("metadata: reserved key count mismatch");
    if (inflight_indices.size() > p.reserved_slots)
      throw InvalidArgument("metadata: too many in-flight entries");
    if (update_flag == UpdateFlag::clean && !inflight_indices.empty())
      throw InvalidArgument("metadata: clean block with in-flight entries");
    for (std::size_t i = 0; i < inflight_indices.size(); ++i) {
      if (inflight_indices[i] >= p.data_slots())
        throw InvalidArgument("metadata: in-flight index out of range");
      for (std::size_t j = i + 1; j < inflight_indices.size(); ++j)
        if (inflight_indices[i] == inflight_indices[j])
          throw InvalidArgument("metadata: duplicate in-flight index");
    }
  }
};

namespace wire {

inline void put_u64be(std::uint8_t* p, std::uint64_t v) {
  for (int i = 7; i >= 0; --i) { p[i] = static_cast<std::uint8_t>(v); v >>= 8; }
}
inline std::uint64_t get_u64be(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | p[i];
  return v;
}
inline void put_u16be(std::uint8_t* p, std::uint16_t v) {
  p[0] = static_cast<std::uint8_t>(v >> 8);
  p[1] = static_cast<std::uint8_t>(v);
}
inline std::uint16_t get_u16be(const std::uint8_t* p) {
  return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}
inline void put_u32be(std::uint8_t* p, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) { p[i] = static_cast<std::uint8_t>(v); v >>= 8; }
}
inline std::uint32_t get_u32be(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | p[i];
  return v;
}

}  // namespace wire

inline std::size_t key_table_offset(const LayoutParams& p) {
  return kMetadataHeaderBytes + kInflightIndexEntryBytes * p.reserved_slots;
}

inline std::size_t reserved_keys_offset(const LayoutParams& p) {
  return key_table_offset(p) + kKeyBytes * p.data_slots();
}

/// Plaintext form; tag field is a placeholder until seal().
inline std::vector<std::uint8_t> serialize_metadata(const MetadataBlock& mb,
                                                    const LayoutParams& p) {
  mb.check(p);
  std::vector<std::uint8_t> out(p.block_size, 0);
  std::memcpy(out.data(), mb.iv.data(), kIvBytes);
  std::memcpy(out.data() + 16, mb.auth_tag.data(), kGcmTagBytes);
  wire::put_u64be(out.data() + 32, mb.logical_size);
  out[40] = static_cast<std::uint8_t>(mb.update_flag);
  out[41] = static_cast<std::uint8_t>(mb.inflight_indices.size());
  for (std::size_t i = 0; i < mb.inflight_indices.size(); ++i)
    wire::put_u16be(out.data() + 48 + 2 * i, mb.inflight_indices[i]);
  std::uint8_t* kt = out.data() + key_table_offset(p);
  for (std::size_t i = 0; i < mb.key_table.size(); ++i)
    std::memcpy(kt + kKeyBytes * i, mb.key_table[i].bytes.data(), kKeyBytes);
  std::uint8_t* rk = out.data() + reserved_keys_offset(p);
  for (std::size_t i = 0; i < mb.reserved_keys.size(); ++i)
    std::memcpy(rk + kKeyBytes * i, mb.reserved_keys[i].bytes.data(),
                kKeyBytes);
  return out;
}

inline MetadataBlock deserialize_metadata(std::span<const std::uint8_t> bytes,
                                          const LayoutParams& p) {
  if (bytes.size() != p.block_size)
    throw InvalidArgument("metadata: wrong serialized length");
  MetadataBlock mb = MetadataBlock::empty(p);
  std::memcpy(mb.iv.data(), bytes.data(), kIvBytes);
  std::memcpy(mb.auth_tag.data(), bytes.data() + 16, kGcmTagBytes);
  mb.logical_size = wire::get_u64be(bytes.data() + 32);
  std::uint8_t flag = bytes[40];
  if (flag > 1) throw FormatError("metadata: bad update flag");
  mb.update_flag = static_cast<UpdateFlag>(flag);
  std::uint8_t count = bytes[41];
  if (count > p.reserved_slots)
    throw FormatError("metadata: in-flight count exceeds R");
  mb.inflight_indices.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    mb.inflight_indices[i] = wire::get_u16be(bytes.data() + 48 + 2 * i);
  const std::uint8_t* kt = bytes.data() + key_table_offset(p);
  for (std::size_t i = 0; i < mb.key_table.size(); ++i)
    std::memcpy(mb.key_table[i].bytes.data(), kt + kKeyBytes * i, kKeyBytes);
  const std::uint8_t* rk = bytes.data() + reserved_keys_offset(p);
  for (std::size_t i = 0; i < mb.reserved_keys.size(); ++i)
    std::memcpy(mb.reserved_keys[i].bytes.data(), rk + kKeyBytes * i,
                kKeyBytes);
  try {
    mb.check(p);
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what());
  }
  return mb;
}

inline std::array<std::uint8_t, 8> segment_aad(std::uint64_t segment_index) {
  std::array<std::uint8_t, 8> aad;
  wire::put_u64be(aad.data(), segment_index);
  return aad;
}

/// Produce the on-disk form: fresh nonce, GCM over bytes [32, block_size).
inline std::vector<std::uint8_t> seal_metadata(const MetadataBlock& mb,
                                               const SecretKeyPair& keys,
                                               std::uint64_t segment_index,
                                               const LayoutParams& p) {
  MetadataBlock m = mb;
  m.iv.fill(0);
  random_bytes(std::span(m.iv.data(), kGcmNonceBytes));
  std::vector<std::uint8_t> plain = serialize_metadata(m, p);
  std::vector<std::uint8_t> disk = plain;
  auto aad = segment_aad(segment_index);
  std::array<std::uint8_t, kGcmTagBytes> tag;
  encrypt_metadata(std::span(plain).subspan(32), keys.outer_key,
                   std::span<const std::uint8_t, kIvBytes>(m.iv),
                   aad, std::span(disk).subspan(32), tag);
  std::memcpy(disk.data() + 16, tag.data(), kGcmTagBytes);
  return disk;
}

/// Authenticate and decrypt one on-disk metadata block.
inline MetadataBlock open_metadata(std::span<const std::uint8_t> disk,
                                   const SecretKeyPair& keys,
                                   std::uint64_t segment_index,
                                   const LayoutParams& p) {
  if (disk.size() != p.block_size)
    throw InvalidArgument("metadata: wrong on-disk length");
  std::array<std::uint8_t, kIvBytes> iv;
  std::array<std::uint8_t, kGcmTagBytes> tag;
  // the 4 pad bytes after the 12-byte nonce are outside GCM's coverage;
  // writers zero them and readers reject anything else
  for (std::size_t i = kGcmNonceBytes; i < kIvBytes; ++i)
    if (disk[i] != 0)
      throw MetadataIntegrityError("metadata IV pad bytes are nonzero");
  std::memcpy(iv.data(), disk.data(), kIvBytes);
  std::memcpy(tag.data(), disk.data() + 16, kGcmTagBytes);
  std::vector<std::uint8_t> plain(p.block_size);
  std::memcpy(plain.data(), disk.data(), 32);
  auto aad = segment_aad(segment_index);
  decrypt_metadata(disk.subspan(32), keys.outer_key,
                   std::span<const std::uint8_t, kIvBytes>(iv),
                   std::span<const std::uint8_t, kGcmTagBytes>(tag), aad,
                   std::span(plain).subspan(32));
  return deserialize_metadata(plain, p);
}

}  // namespace lamassu
