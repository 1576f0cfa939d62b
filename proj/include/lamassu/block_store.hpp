#pragma once

// Fixed-block persistence under the engine. Single-block writes are atomic:
// a write either lands whole or (when the fault hook trips) not at all.
// Every implementation carries a write counter and the fault-injection hook;
// both are part of the test surface.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "lamassu/crypto.hpp"
#include "lamassu/errors.hpp"
#include "lamassu/metadata.hpp"

namespace lamassu {

struct ObjectAttrs {
  std::uint32_t block_size = 4096;
  std::uint32_t reserved_slots = 1;
  std::uint64_t zone_id = 0;
  std::uint32_t format_version = 1;
};

class BlockStore {
 public:
  virtual ~BlockStore() = default;

  void write_block(const std::string& object_id, std::uint64_t physical_index,
                   std::span<const std::uint8_t> block) {
    {
      std::lock_guard lock(fault_mutex_);
      if (fault_armed_) {
        if (fault_remaining_ == 0)
          throw CrashInjectedError("simulated crash at write #" +
                                   std::to_string(write_count_));
        --fault_remaining_;
      }
      ++write_count_;
    }
    do_write_block(object_id, physical_index, block);
  }

  std::vector<std::uint8_t> read_block(const std::string& object_id,
                                       std::uint64_t physical_index) {
    return do_read_block(object_id, physical_index);
  }

  virtual std::uint64_t num_blocks(const std::string& object_id) = 0;
  virtual bool object_exists(const std::string& object_id) = 0;
  virtual void create_object(const std::string& object_id,
                             const ObjectAttrs& attrs) = 0;
  virtual ObjectAttrs get_attrs(const std::string& object_id) = 0;
  virtual std::vector<std::string> list_objects() = 0;

  std::uint64_t write_count() const {
    std::lock_guard lock(fault_mutex_);
    return write_count_;
  }
  void reset_write_count() {
    std::lock_guard lock(fault_mutex_);
    write_count_ = 0;
  }

  /// Arm the crash hook: the (n+1)-th subsequent write raises a simulated
  /// crash, and all writes after that are rejected until clear_fault().
  void inject_fault(std::uint64_t after_n_writes) {
    std::lock_guard lock(fault_mutex_);
    fault_armed_ = true;
    fault_remaining_ = after_n_writes;
  }
  void clear_fault() {
    std::lock_guard lock(fault_mutex_);
    fault_armed_ = false;
  }

 protected:
  virtual void do_write_block(const std::string& object_id,
                              std::uint64_t physical_index,
                              std::span<const std::uint8_t> block) = 0;
  virtual std::vector<std::uint8_t> do_read_block(
      const std::string& object_id, std::uint64_t physical_index) = 0;

 private:
  mutable std::mutex fault_mutex_;
  std::uint64_t write_count_ = 0;
  bool fault_armed_ = false;
  std::uint64_t fault_remaining_ = 0;
};

class MemoryBlockStore : public BlockStore {
 public:
  std::uint64_t num_blocks(const std::string& id) override {
    std::lock_guard lock(mutex_);
    return find(id).num_blocks;
  }
  bool object_exists(const std::string& id) override {
    std::lock_guard lock(mutex_);
    return objects_.contains(id);
  }
  void create_object(const std::string& id, const ObjectAttrs& attrs) override {
    std::lock_guard lock(mutex_);
    if (objects_.contains(id))
      throw AlreadyExistsError("object already exists: " + id);
    objects_[id] = Object{attrs, {}, 0};
  }
  ObjectAttrs get_attrs(const std::string& id) override {
    std::lock_guard lock(mutex_);
    return find(id).attrs;
  }
  std::vector<std::string> list_objects() override {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, obj] : objects_) out.push_back(id);
    return out;
  }

 protected:
  void do_write_block(const std::string& id, std::uint64_t index,
                      std::span<const std::uint8_t> block) override {
    std::lock_guard lock(mutex_);
    Object& obj = find(id);
    if (block.size() != obj.attrs.block_size)
      throw InvalidArgument("write_block: wrong block length");
    obj.blocks[index].assign(block.begin(), block.end());
    obj.num_blocks = std::max(obj.num_blocks, index + 1);
  }
  std::vector<std::uint8_t> do_read_block(const std::string& id,
                                          std::uint64_t index) override {
    std::lock_guard lock(mutex_);
    Object& obj = find(id);
    if (index >= obj.num_blocks)
      throw NotFoundError("block " + std::to_string(index) +
                          " past end of object " + id);
    auto it = obj.blocks.find(index);
    if (it == obj.blocks.end())
      return std::vector<std::uint8_t>(obj.attrs.block_size, 0);  // hole
    return it->second;
  }

 private:
  struct Object {
    ObjectAttrs attrs;
    std::map<std::uint64_t, std::vector<std::uint8_t>> blocks;
    std::uint64_t num_blocks = 0;
  };
  Object& find(const std::string& id) {
    auto it = objects_.find(id);
    if (it == objects_.end()) throw NotFoundError("no such object: " + id);
    return it->second;
  }
  std::mutex mutex_;
  std::map<std::string, Object> objects_;
};

// Directory backend. Each object is a raw block-stream file `<object>` plus
// a 64-byte header file `<object>.lmh`:
//   [ 0, 4)  magic "LMS1"
//   [ 4, 8)  block_size, u32 big-endian
//   [ 8,12)  reserved_slots (R), u32 big-endian
//   [12,20)  zone_id, u64 big-endian
//   [20,24)  format_version, u32 big-endian
//   [24,64)  zero pad
class DirectoryBlockStore : public BlockStore {
 public:
  explicit DirectoryBlockStore(std::filesystem::path root)
      : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
  }

  std::uint64_t num_blocks(const std::string& id) override {
    ObjectAttrs attrs = get_attrs(id);
    std::error_code ec;
    auto size = std::filesystem::file_size(data_path(id), ec);
    if (ec) return 0;
    return size / attrs.block_size;
  }
  bool object_exists(const std::string& id) override {
    return std::filesystem::exists(header_path(id));
  }
  void create_object(const std::string& id, const ObjectAttrs& attrs) override {
    if (object_exists(id))
      throw AlreadyExistsError("object already exists: " + id);
    std::array<std::uint8_t, 64> hdr{};
    std::memcpy(hdr.data(), "LMS1", 4);
    wire::put_u32be(hdr.data() + 4, attrs.block_size);
    wire::put_u32be(hdr.data() + 8, attrs.reserved_slots);
    wire::put_u64be(hdr.data() + 12, attrs.zone_id);
    wire::put_u32be(hdr.data() + 20, attrs.format_version);
    std::ofstream h(header_path(id), std::ios::binary | std::ios::trunc);
    h.write(reinterpret_cast<const char*>(hdr.data()), hdr.size());
    if (!h) throw IoError("cannot write header for object " + id);
    std::ofstream d(data_path(id), std::ios::binary | std::ios::trunc);
    if (!d) throw IoError("cannot create data file for object " + id);
  }
  ObjectAttrs get_attrs(const std::string& id) override {
    std::ifstream h(header_path(id), std::ios::binary);
    if (!h) throw NotFoundError("no such object: " + id);
    std::array<std::uint8_t, 64> hdr{};
    h.read(reinterpret_cast<char*>(hdr.data()), hdr.size());
    if (!h || std::memcmp(hdr.data(), "LMS1", 4) != 0)
      throw FormatError("bad object header for " + id);
    ObjectAttrs attrs;
    attrs.block_size = wire::get_u32be(hdr.data() + 4);
    attrs.reserved_slots = wire::get_u32be(hdr.data() + 8);
    attrs.zone_id = wire::get_u64be(hdr.data() + 12);
    attrs.format_version = wire::get_u32be(hdr.data() + 20);
    return attrs;
  }
  std::vector<std::string> list_objects() override {
    std::vector<std::string> out;
    for (const auto& e : std::filesystem::directory_iterator(root_)) {
      auto name = e.path().filename().string();
      if (name.size() > 4 && name.ends_with(".lmh"))
        out.push_back(name.substr(0, name.size() - 4));
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 protected:
  void do_write_block(const std::string& id, std::uint64_t index,
                      std::span<const std::uint8_t> block) override {
    ObjectAttrs attrs = get_attrs(id);
    if (block.size() != attrs.block_size)
      throw InvalidArgument("write_block: wrong block length");
    std::fstream f(data_path(id),
                   std::ios::binary | std::ios::in | std::ios::out);
    if (!f) throw IoError("cannot open data file for object " + id);
    f.seekp(static_cast<std::streamoff>(index * attrs.block_size));
    f.write(reinterpret_cast<const char*>(block.data()), block.size());
    f.flush();
    if (!f) throw IoError("write failed for object " + id);
  }
  std::vector<std::uint8_t> do_read_block(const std::string& id,
                                          std::uint64_t index) override {
    ObjectAttrs attrs = get_attrs(id);
    if (index >= num_blocks(id))
      throw NotFoundError("block " + std::to_string(index) +
                          " past end of object " + id);
    std::ifstream f(data_path(id), std::ios::binary);
    if (!f) throw IoError("cannot open data file for object " + id);
    f.seekg(static_cast<std::streamoff>(index * attrs.block_size));
    std::vector<std::uint8_t> out(attrs.block_size, 0);
    f.read(reinterpret_cast<char*>(out.data()), out.size());
    if (f.gcount() <= 0) throw IoError("read failed for object " + id);
    return out;  // short reads inside the stream come back zero-filled
  }

 private:
  std::filesystem::path data_path(const std::string& id) const {
    return root_ / id;
  }
  std::filesystem::path header_path(const std::string& id) const {
    return root_ / (id + ".lmh");
  }
  std::filesystem::path root_;
};

// Downstream-controller model: fixed-block, offset-aligned, whole-block
// content equality, fingerprinted by SHA-256.
struct DedupStats {
  std::uint64_t total_blocks = 0;
  std::uint64_t unique_blocks = 0;
  std::uint64_t logical_bytes = 0;
  std::uint64_t deduplicated_bytes = 0;

  double relative_usage() const {
    return logical_bytes == 0
               ? 1.0
               : static_cast<double>(deduplicated_bytes) /
                     static_cast<double>(logical_bytes);
  }
};

class DedupCounter {
 public:
  void add(std::span<const std::uint8_t> block) {
    BlockHash fp;
    SHA256(block.data(), block.size(), fp.bytes.data());
    fingerprints_.insert(fp.bytes);
    ++total_blocks_;
    total_bytes_ += block.size();
    block_size_ = block.size();
  }
  DedupStats stats() const {
    DedupStats s;
    s.total_blocks = total_blocks_;
    s.unique_blocks = fingerprints_.size();
    s.logical_bytes = total_bytes_;
    s.deduplicated_bytes = fingerprints_.size() * block_size_;
    return s;
  }
  bool contains(std::span<const std::uint8_t> block) const {
    BlockHash fp;
    SHA256(block.data(), block.size(), fp.bytes.data());
    return fingerprints_.contains(fp.bytes);
  }

 private:
  std::set<std::array<std::uint8_t, kHashBytes>> fingerprints_;
  std::uint64_t total_blocks_ = 0;
  std::uint64_t total_bytes_ = 0;
  std::uint64_t block_size_ = 0;
};

/// Count distinct block contents across everything in the store.
inline DedupStats dedup_report(BlockStore& store) {
  DedupCounter counter;
  for (const auto& id : store.list_objects()) {
    std::uint64_t n = store.num_blocks(id);
    for (std::uint64_t i = 0; i < n; ++i) counter.add(store.read_block(id, i));
  }
  return counter.stats();
}

}  // namespace lamassu
