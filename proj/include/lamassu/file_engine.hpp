#pragma once

// Read/write/commit/recover state machine over one encrypted object.
//
// Writes are staged per segment, at most R blocks at a time, and land via a
// multiphase commit:
//   phase 1: seal and write the segment metadata block marked midupdate,
//            new keys in the key table, old keys in the reserved slots
//   phase 2: write the encrypted data blocks
//   phase 3: seal and write the metadata block marked clean
// A crash between any two single-block writes leaves every in-flight block
// decryptable under exactly one of the two stored keys; recover() resolves
// each one by the rehash check and reseals the segment clean.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lamassu/block_store.hpp"
#include "lamassu/crypto.hpp"
#include "lamassu/errors.hpp"
#include "lamassu/layout.hpp"
#include "lamassu/metadata.hpp"

namespace lamassu {

enum class IntegrityMode { full, meta_only };

struct RecoveryReport {
  std::uint64_t segments_scanned = 0;
  std::uint64_t segments_midupdate = 0;
  std::uint64_t blocks_resolved_to_new = 0;
  std::uint64_t blocks_resolved_to_old = 0;
  std::uint64_t blocks_unrecoverable = 0;
  std::vector<std::uint64_t> unrecoverable_physical;
};

struct VerifyFailure {
  std::uint64_t physical_index = 0;
  BlockKind kind = BlockKind::data;
  std::uint64_t segment_index = 0;
  std::string what;
};

struct VerifyReport {
  std::vector<VerifyFailure> failures;
  bool clean() const { return failures.empty(); }
};

/// Accumulated path time by category. GetCEKey covers block hashing plus key
/// derivation; IO covers backend block reads and writes.
struct LatencyBreakdown {
  std::chrono::nanoseconds encrypt{0};
  std::chrono::nanoseconds decrypt{0};
  std::chrono::nanoseconds get_cekey{0};
  std::chrono::nanoseconds io{0};
  std::chrono::nanoseconds total_path{0};

  std::chrono::nanoseconds misc() const {
    auto accounted = encrypt + decrypt + get_cekey + io;
    return total_path > accounted ? total_path - accounted
                                  : std::chrono::nanoseconds{0};
  }
};

namespace detail {

class ScopedTimer {
 public:
  explicit ScopedTimer(std::chrono::nanoseconds& sink)
      : sink_(sink), start_(std::chrono::steady_clock::now()) {}
  ~ScopedTimer() { sink_ += std::chrono::steady_clock::now() - start_; }
  ScopedTimer(const ScopedTimer&) = delete;
  ScopedTimer& operator=(const ScopedTimer&) = delete;

 private:
  std::chrono::nanoseconds& sink_;
  std::chrono::steady_clock::time_point start_;
};

inline bool all_zero(std::span<const std::uint8_t> bytes) {
  for (auto b : bytes)
    if (b != 0) return false;
  return true;
}

}  // namespace detail

class LamassuFile {
 public:
  /// Create a fresh encrypted object.
  static LamassuFile create(BlockStore& store, const std::string& object_id,
                            const SecretKeyPair& keys,
                            const LayoutParams& layout,
                            IntegrityMode mode = IntegrityMode::full) {
    layout.validate();
    ObjectAttrs attrs;
    attrs.block_size = static_cast<std::uint32_t>(layout.block_size);
    attrs.reserved_slots = static_cast<std::uint32_t>(layout.reserved_slots);
    attrs.zone_id = keys.zone_id;
    store.create_object(object_id, attrs);
    return LamassuFile(store, object_id, keys, layout, mode, 0);
  }

  /// Open an existing object; layout comes from the stored attributes and the
  /// logical size from the final metadata block.
  static LamassuFile open(BlockStore& store, const std::string& object_id,
                          const SecretKeyPair& keys,
                          IntegrityMode mode = IntegrityMode::full) {
    ObjectAttrs attrs = store.get_attrs(object_id);
    LayoutParams layout{attrs.block_size, attrs.reserved_slots};
    layout.validate();
    std::uint64_t size = read_logical_size(store, object_id, keys, layout);
    return LamassuFile(store, object_id, keys, layout, mode, size);
  }

  ~LamassuFile() {
    try {
      flush();
    } catch (...) {
      // destructor must not throw; pending data stays recoverable
    }
  }

  LamassuFile(LamassuFile&&) = default;
  LamassuFile(const LamassuFile&) = delete;
  LamassuFile& operator=(const LamassuFile&) = delete;

  const LayoutParams& layout() const { return layout_; }
  const std::string& object_id() const { return object_id_; }
  IntegrityMode integrity_mode() const { return mode_; }
  void set_integrity_mode(IntegrityMode m) { mode_ = m; }
  std::uint64_t logical_size() const { return logical_size_; }
  const LatencyBreakdown& stats() const { return stats_; }
  void reset_stats() { stats_ = LatencyBreakdown{}; }

  /// The authoritative size as recorded in the last metadata block on disk.
  static std::uint64_t read_logical_size(BlockStore& store,
                                         const std::string& object_id,
                                         const SecretKeyPair& keys,
                                         const LayoutParams& layout) {
    std::uint64_t nb = store.num_blocks(object_id);
    if (nb == 0) return 0;
    std::uint64_t last_seg = (nb - 1) / layout.segment_blocks();
    for (std::uint64_t seg = last_seg + 1; seg-- > 0;) {
      std::uint64_t idx = metadata_physical_index(seg, layout);
      if (idx >= nb) continue;
      auto raw = store.read_block(object_id, idx);
      if (detail::all_zero(raw)) continue;  // lazily allocated, never written
      return open_metadata(raw, keys, seg, layout).logical_size;
    }
    return 0;
  }

  std::size_t write(std::uint64_t offset, std::span<const std::uint8_t> data) {
    detail::ScopedTimer path(stats_.total_path);
    if (data.empty()) return 0;
    std::uint64_t bs = layout_.block_size;
    logical_size_ = std::max(logical_size_, offset + data.size());
    std::uint64_t first = offset / bs;
    std::uint64_t last = (offset + data.size() - 1) / bs;
    for (std::uint64_t lb = first; lb <= last; ++lb) {
      std::uint64_t blk_start = lb * bs;
      std::uint64_t s = std::max<std::uint64_t>(offset, blk_start);
      std::uint64_t e = std::min<std::uint64_t>(offset + data.size(),
                                                blk_start + bs);
      std::vector<std::uint8_t> plain;
      if (e - s == bs) {
        plain.assign(data.begin() + (s - offset), data.begin() + (e - offset));
      } else {
        // partial head/tail: read-modify-write, zero fill past existing data
        plain = fetch_plaintext(lb, /*check_integrity=*/mode_ ==
                                        IntegrityMode::full);
        std::copy(data.begin() + (s - offset), data.begin() + (e - offset),
                  plain.begin() + (s - blk_start));
      }
      stage_block(lb, std::move(plain));
    }
    return data.size();
  }

  std::vector<std::uint8_t> read(std::uint64_t offset, std::size_t length) {
    detail::ScopedTimer path(stats_.total_path);
    if (offset >= logical_size_) return {};
    std::uint64_t end =
        std::min<std::uint64_t>(offset + length, logical_size_);
    std::vector<std::uint8_t> out(end - offset);
    std::uint64_t bs = layout_.block_size;
    for (std::uint64_t lb = offset / bs; lb * bs < end; ++lb) {
      std::vector<std::uint8_t> plain =
          fetch_plaintext(lb, mode_ == IntegrityMode::full);
      std::uint64_t blk_start = lb * bs;
      std::uint64_t s = std::max<std::uint64_t>(offset, blk_start);
      std::uint64_t e = std::min<std::uint64_t>(end, blk_start + bs);
      std::copy(plain.begin() + (s - blk_start), plain.begin() + (e - blk_start),
                out.begin() + (s - offset));
    }
    return out;
  }

  /// Commit any staged blocks.
  void flush() { commit_current_segment(); }

  /// Shrink the file: rewrites the final metadata block's logical size.
  /// Orphaned physical blocks past the new end stay in place.
  void truncate(std::uint64_t new_size) {
    if (new_size > logical_size_)
      throw InvalidArgument("truncate: growing is not supported");
    flush();
    logical_size_ = new_size;
    std::uint64_t nb = store_.num_blocks(object_id_);
    if (nb == 0) return;
    std::uint64_t last_seg = (nb - 1) / layout_.segment_blocks();
    for (std::uint64_t seg = last_seg + 1; seg-- > 0;) {
      std::uint64_t idx = metadata_physical_index(seg, layout_);
      if (idx >= nb) continue;
      auto raw = store_.read_block(object_id_, idx);
      if (detail::all_zero(raw)) continue;
      MetadataBlock mb = open_metadata(raw, keys_, seg, layout_);
      mb.logical_size = new_size;
      store_.write_block(object_id_, idx,
                         seal_metadata(mb, keys_, seg, layout_));
      meta_cache_.erase(seg);
      return;
    }
  }

  /// Scan every segment; resolve midupdate segments block by block using the
  /// rehash check, restoring old keys where the new data never landed.
  RecoveryReport recover() {
    buffer_.clear();
    meta_cache_.clear();
    RecoveryReport report;
    std::uint64_t nb = store_.num_blocks(object_id_);
    if (nb == 0) return report;
    std::uint64_t last_seg = (nb - 1) / layout_.segment_blocks();
    for (std::uint64_t seg = 0; seg <= last_seg; ++seg) {
      std::uint64_t meta_idx = metadata_physical_index(seg, layout_);
      if (meta_idx >= nb) continue;
      auto raw = store_.read_block(object_id_, meta_idx);
      if (detail::all_zero(raw)) continue;
      MetadataBlock mb = open_metadata(raw, keys_, seg, layout_);
      ++report.segments_scanned;
      if (mb.update_flag != UpdateFlag::midupdate) continue;
      ++report.segments_midupdate;
      for (std::size_t i = 0; i < mb.inflight_indices.size(); ++i) {
        std::uint16_t off = mb.inflight_indices[i];
        std::uint64_t data_idx = meta_idx + 1 + off;
        const ConvergentKey& new_key = mb.key_table[off];
        const ConvergentKey& old_key = mb.reserved_keys[i];
        if (data_idx < nb && !new_key.is_zero() &&
            block_matches_key(store_.read_block(object_id_, data_idx),
                              new_key)) {
          ++report.blocks_resolved_to_new;
          continue;
        }
        if (old_key.is_zero()) {
          // block was unallocated before the interrupted commit
          mb.key_table[off] = ConvergentKey{};
          ++report.blocks_resolved_to_old;
          continue;
        }
        if (data_idx < nb &&
            block_matches_key(store_.read_block(object_id_, data_idx),
                              old_key)) {
          mb.key_table[off] = old_key;
          ++report.blocks_resolved_to_old;
          continue;
        }
        // neither key fits: record it, keep the new key as evidence
        ++report.blocks_unrecoverable;
        report.unrecoverable_physical.push_back(data_idx);
      }
      mb.update_flag = UpdateFlag::clean;
      mb.inflight_indices.clear();
      for (auto& rk : mb.reserved_keys) rk = ConvergentKey{};
      store_.write_block(object_id_, meta_idx,
                         seal_metadata(mb, keys_, seg, layout_));
    }
    logical_size_ = read_logical_size(store_, object_id_, keys_, layout_);
    return report;
  }

  /// Full scan: authenticate every metadata block, rehash-check every
  /// allocated data block. Failures are report entries, never throws.
  VerifyReport verify() {
    VerifyReport report;
    std::uint64_t nb = store_.num_blocks(object_id_);
    if (nb == 0) return report;
    std::uint64_t last_seg = (nb - 1) / layout_.segment_blocks();
    for (std::uint64_t seg = 0; seg <= last_seg; ++seg) {
      std::uint64_t meta_idx = metadata_physical_index(seg, layout_);
      if (meta_idx >= nb) continue;
      auto raw = store_.read_block(object_id_, meta_idx);
      if (detail::all_zero(raw)) continue;
      MetadataBlock mb;
      try {
        mb = open_metadata(raw, keys_, seg, layout_);
      } catch (const Error& e) {
        report.failures.push_back(
            {meta_idx, BlockKind::metadata, seg, e.what()});
        continue;
      }
      for (std::size_t off = 0; off < mb.key_table.size(); ++off) {
        if (mb.key_table[off].is_zero()) continue;
        std::uint64_t data_idx = meta_idx + 1 + off;
        if (data_idx >= nb) {
          report.failures.push_back(
              {data_idx, BlockKind::data, seg, "allocated block missing"});
          continue;
        }
        if (!block_matches_key(store_.read_block(object_id_, data_idx),
                               mb.key_table[off]))
          report.failures.push_back(
              {data_idx, BlockKind::data, seg, "block/key hash mismatch"});
      }
    }
    return report;
  }

 private:
  LamassuFile(BlockStore& store, std::string object_id, SecretKeyPair keys,
              LayoutParams layout, IntegrityMode mode,
              std::uint64_t logical_size)
      : store_(store),
        object_id_(std::move(object_id)),
        keys_(keys),
        layout_(layout),
        mode_(mode),
        logical_size_(logical_size) {}

  // --- block pipeline -------------------------------------------------

  ConvergentKey key_for(std::span<const std::uint8_t> plain) {
    detail::ScopedTimer t(stats_.get_cekey);
    return derive_cekey(hash_block(plain, layout_.block_size),
                        keys_.inner_key);
  }

  bool block_matches_key(std::span<const std::uint8_t> cipher,
                         const ConvergentKey& key) {
    std::vector<std::uint8_t> plain;
    {
      detail::ScopedTimer t(stats_.decrypt);
      plain = decrypt_data_block(cipher, key, layout_.block_size);
    }
    return key_for(plain) == key;
  }

  // --- staging and commit ----------------------------------------------

  void stage_block(std::uint64_t logical_block,
                   std::vector<std::uint8_t> plain) {
    BlockAddress addr = logical_to_physical(logical_block, layout_);
    if (!buffer_.empty() && buffer_segment_ != addr.segment_index)
      commit_current_segment();
    buffer_segment_ = addr.segment_index;
    buffer_[addr.offset_in_segment] = std::move(plain);
    if (buffer_.size() >=
        std::min(layout_.reserved_slots, layout_.data_slots()))
      commit_current_segment();
  }

  void commit_current_segment() {
    if (buffer_.empty()) return;
    std::uint64_t seg = buffer_segment_;
    try {
      MetadataBlock mb;
      if (auto* cached = metadata_for(seg))
        mb = *cached;
      else
        mb = MetadataBlock::empty(layout_);

      mb.update_flag = UpdateFlag::midupdate;
      mb.inflight_indices.clear();
      for (auto& rk : mb.reserved_keys) rk = ConvergentKey{};
      std::vector<std::vector<std::uint8_t>> ciphertexts;
      std::size_t i = 0;
      for (const auto& [off, plain] : buffer_) {
        mb.inflight_indices.push_back(static_cast<std::uint16_t>(off));
        mb.reserved_keys[i] = mb.key_table[off];  // old key, zero if fresh
        ConvergentKey key = key_for(plain);
        {
          detail::ScopedTimer t(stats_.encrypt);
          ciphertexts.push_back(
              encrypt_data_block(plain, key, layout_.block_size));
        }
        mb.key_table[off] = key;
        ++i;
      }
      mb.logical_size = logical_size_;

      std::uint64_t meta_idx = metadata_physical_index(seg, layout_);
      // phase 1: mark midupdate, both key versions on disk
      write_sealed(meta_idx, mb, seg);
      // phase 2: data blocks
      i = 0;
      for (const auto& [off, plain] : buffer_) {
        detail::ScopedTimer t(stats_.io);
        store_.write_block(object_id_, meta_idx + 1 + off, ciphertexts[i]);
        ++i;
      }
      // phase 3: clear the update flag
      mb.update_flag = UpdateFlag::clean;
      mb.inflight_indices.clear();
      for (auto& rk : mb.reserved_keys) rk = ConvergentKey{};
      write_sealed(meta_idx, mb, seg);
      meta_cache_[seg] = std::move(mb);
      buffer_.clear();
    } catch (...) {
      // leave the segment to recover(); staged state is no longer trusted
      buffer_.clear();
      meta_cache_.erase(seg);
      throw;
    }
  }

  void write_sealed(std::uint64_t meta_idx, const MetadataBlock& mb,
                    std::uint64_t seg) {
    std::vector<std::uint8_t> sealed;
    {
      detail::ScopedTimer t(stats_.encrypt);
      sealed = seal_metadata(mb, keys_, seg, layout_);
    }
    detail::ScopedTimer t(stats_.io);
    store_.write_block(object_id_, meta_idx, sealed);
  }

  // --- fetch -------------------------------------------------------------

  /// nullptr when the segment's metadata block was never written.
  const MetadataBlock* metadata_for(std::uint64_t seg) {
    auto it = meta_cache_.find(seg);
    if (it != meta_cache_.end()) return &it->second;
    std::uint64_t idx = metadata_physical_index(seg, layout_);
    std::vector<std::uint8_t> raw;
    {
      detail::ScopedTimer t(stats_.io);
      if (idx >= store_.num_blocks(object_id_)) return nullptr;
      raw = store_.read_block(object_id_, idx);
    }
    if (detail::all_zero(raw)) return nullptr;
    MetadataBlock mb;
    {
      detail::ScopedTimer t(stats_.decrypt);
      mb = open_metadata(raw, keys_, seg, layout_);
    }
    return &(meta_cache_[seg] = std::move(mb));
  }

  /// Plaintext of one logical block: from the write buffer, from the store,
  /// or zeros when unallocated.
  std::vector<std::uint8_t> fetch_plaintext(std::uint64_t logical_block,
                                            bool check_integrity) {
    BlockAddress addr = logical_to_physical(logical_block, layout_);
    if (!buffer_.empty() && buffer_segment_ == addr.segment_index) {
      auto it = buffer_.find(addr.offset_in_segment);
      if (it != buffer_.end()) return it->second;
    }
    const MetadataBlock* mb = metadata_for(addr.segment_index);
    if (!mb) return std::vector<std::uint8_t>(layout_.block_size, 0);
    const ConvergentKey& key = mb->key_table[addr.offset_in_segment];
    if (key.is_zero()) return std::vector<std::uint8_t>(layout_.block_size, 0);
    std::vector<std::uint8_t> cipher;
    {
      detail::ScopedTimer t(stats_.io);
      if (addr.physical_index >= store_.num_blocks(object_id_))
        throw NotFoundError("allocated block missing from store");
      cipher = store_.read_block(object_id_, addr.physical_index);
    }
    std::vector<std::uint8_t> plain;
    {
      detail::ScopedTimer t(stats_.decrypt);
      plain = decrypt_data_block(cipher, key, layout_.block_size);
    }
    if (check_integrity && key_for(plain) != key)
      throw DataIntegrityError("block/key hash mismatch at logical block " +
                                   std::to_string(logical_block),
                               logical_block);
    return plain;
  }

  BlockStore& store_;
  std::string object_id_;
  SecretKeyPair keys_;
  LayoutParams layout_;
  IntegrityMode mode_;
  std::uint64_t logical_size_ = 0;

  std::uint64_t buffer_segment_ = 0;
  std::map<std::uint64_t, std::vector<std::uint8_t>> buffer_;
  std::map<std::uint64_t, MetadataBlock> meta_cache_;
  LatencyBreakdown stats_;
};

}  // namespace lamassu
