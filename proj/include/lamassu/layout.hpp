#pragma once

// Pure arithmetic of the on-disk layout: segment geometry, logical/physical
// address mapping, and the size-overhead formulas.

#include <cstdint>
#include <string>

#include "lamassu/errors.hpp"

namespace lamassu {

inline constexpr std::size_t kMetadataHeaderBytes = 48;
inline constexpr std::size_t kInflightIndexEntryBytes = 2;
inline constexpr std::size_t kKeySlotBytes = 32;  // one AES-256 key per slot

struct LayoutParams {
  std::size_t block_size = 4096;
  std::size_t reserved_slots = 1;  // R

  /// Key slots per metadata block, including the R reserved ones.
  std::size_t total_slots() const {
    return (block_size - kMetadataHeaderBytes -
            kInflightIndexEntryBytes * reserved_slots) /
           kKeySlotBytes;
  }

  /// Data blocks per segment (keys available for data).
  std::size_t data_slots() const { return total_slots() - reserved_slots; }

  /// Blocks per segment: one metadata block plus its data blocks.
  std::size_t segment_blocks() const { return data_slots() + 1; }

  void validate() const {
    if (block_size < 1024 || block_size % 16 != 0)
      throw InvalidArgument("block_size must be >= 1024 and a multiple of 16");
    if ((block_size & (block_size - 1)) != 0)
      throw InvalidArgument("block_size must be a power of two");
    if (reserved_slots < 1)
      throw InvalidArgument("reserved_slots must be >= 1");
    std::size_t fixed = kMetadataHeaderBytes +
                        kInflightIndexEntryBytes * reserved_slots;
    if (fixed >= block_size || total_slots() <= reserved_slots)
      throw InvalidArgument("reserved_slots too large for block_size " +
                            std::to_string(block_size));
  }
};

enum class BlockKind { metadata, data };

struct BlockAddress {
  std::uint64_t physical_index = 0;
  BlockKind kind = BlockKind::data;
  std::uint64_t segment_index = 0;
  std::uint64_t offset_in_segment = 0;  // data blocks only, 0-based

  bool operator==(const BlockAddress&) const = default;
};

/// N_DB = ceil(n / block_size).
inline std::uint64_t num_data_blocks(std::uint64_t logical_size,
                                     const LayoutParams& p) {
  return (logical_size + p.block_size - 1) / p.block_size;
}

/// N_MB = ceil(N_DB / data_slots).
inline std::uint64_t num_metadata_blocks(std::uint64_t n_db,
                                         const LayoutParams& p) {
  return (n_db + p.data_slots() - 1) / p.data_slots();
}

/// n' = (N_DB + N_MB) * block_size.
inline std::uint64_t encrypted_size(std::uint64_t logical_size,
                                    const LayoutParams& p) {
  std::uint64_t n_db = num_data_blocks(logical_size, p);
  return (n_db + num_metadata_blocks(n_db, p)) * p.block_size;
}

inline std::uint64_t overhead_bytes(std::uint64_t logical_size,
                                    const LayoutParams& p) {
  return encrypted_size(logical_size, p) - logical_size;
}

/// Best-case overhead fraction, reached when every key table is full.
inline double min_overhead_ratio(const LayoutParams& p) {
  return 1.0 / static_cast<double>(p.data_slots());
}

inline BlockAddress logical_to_physical(std::uint64_t logical_block,
                                        const LayoutParams& p) {
  std::uint64_t slots = p.data_slots();
  std::uint64_t segment = logical_block / slots;
  std::uint64_t offset = logical_block % slots;
  return BlockAddress{segment * p.segment_blocks() + 1 + offset,
                      BlockKind::data, segment, offset};
}

inline BlockAddress physical_to_address(std::uint64_t physical_index,
                                        const LayoutParams& p) {
  std::uint64_t per_seg = p.segment_blocks();
  std::uint64_t segment = physical_index / per_seg;
  std::uint64_t rem = physical_index % per_seg;
  if (rem == 0)
    return BlockAddress{physical_index, BlockKind::metadata, segment, 0};
  return BlockAddress{physical_index, BlockKind::data, segment, rem - 1};
}

inline std::uint64_t physical_to_logical(std::uint64_t physical_index,
                                         const LayoutParams& p) {
  BlockAddress a = physical_to_address(physical_index, p);
  if (a.kind != BlockKind::data)
    throw InvalidArgument("physical index addresses a metadata block");
  return a.segment_index * p.data_slots() + a.offset_in_segment;
}

/// Each metadata block sits at the head of its segment.
inline std::uint64_t metadata_physical_index(std::uint64_t segment,
                                             const LayoutParams& p) {
  return segment * p.segment_blocks();
}

}  // namespace lamassu
