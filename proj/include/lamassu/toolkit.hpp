#pragma once

// Experiment harness: synthetic-redundancy data generation, FIO-style
// workloads with latency breakdown, dedup reporting, and the exhaustive
// crash-injection matrix.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lamassu/block_store.hpp"
#include "lamassu/file_engine.hpp"

namespace lamassu {

inline constexpr std::size_t kGenBlockBytes = 4096;

/// Synthetic file of 4 KB blocks where exactly floor(alpha * N) blocks are
/// byte-copies of uniformly chosen earlier blocks and the rest are random.
/// Deterministic per seed.
inline std::vector<std::uint8_t> gen_redundant_file(std::uint64_t size,
                                                    double alpha,
                                                    std::uint64_t seed) {
  if (alpha < 0.0 || alpha >= 1.0)
    throw InvalidArgument("alpha must be in [0, 1)");
  std::uint64_t n = (size + kGenBlockBytes - 1) / kGenBlockBytes;
  std::uint64_t dup_count =
      static_cast<std::uint64_t>(alpha * static_cast<double>(n));
  std::mt19937_64 rng(seed);

  // choose which block indices are duplicates (block 0 is always original)
  std::vector<std::uint64_t> candidates;
  candidates.reserve(n > 0 ? n - 1 : 0);
  for (std::uint64_t i = 1; i < n; ++i) candidates.push_back(i);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  std::vector<bool> is_dup(n, false);
  for (std::uint64_t i = 0; i < dup_count && i < candidates.size(); ++i)
    is_dup[candidates[i]] = true;

  std::vector<std::uint8_t> out(n * kGenBlockBytes);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::uint8_t* blk = out.data() + i * kGenBlockBytes;
    if (is_dup[i]) {
      std::uint64_t src = std::uniform_int_distribution<std::uint64_t>(
          0, i - 1)(rng);
      std::memcpy(blk, out.data() + src * kGenBlockBytes, kGenBlockBytes);
    } else {
      for (std::size_t b = 0; b < kGenBlockBytes; b += 8) {
        std::uint64_t word = rng();
        std::memcpy(blk + b, &word, 8);
      }
    }
  }
  out.resize(size);
  return out;
}

// --- workloads -------------------------------------------------------------

enum class WorkloadKind { seq_read, seq_write, rand_read, rand_write, rand_rw };

inline const char* to_string(WorkloadKind k) {
  switch (k) {
    case WorkloadKind::seq_read: return "seq-read";
    case WorkloadKind::seq_write: return "seq-write";
    case WorkloadKind::rand_read: return "rand-read";
    case WorkloadKind::rand_write: return "rand-write";
    case WorkloadKind::rand_rw: return "rand-rw";
  }
  return "?";
}

struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::seq_write;
  std::uint64_t file_size = 4 << 20;
  std::uint64_t io_size = 4096;
  double rw_ratio = 0.7;  // reads fraction for rand-rw
  std::uint64_t runs = 1;
  std::uint64_t seed = 1;
};

struct BenchResult {
  std::string workload;
  std::size_t reserved_slots = 0;
  double throughput_mbps = 0.0;  // informational only, hardware-bound
  std::uint64_t backend_writes = 0;
  std::uint64_t bytes_moved = 0;
  LatencyBreakdown breakdown;
};

/// Run one workload against a fresh in-memory store. Backend write counts
/// and the breakdown are deterministic per (spec, layout); MB/s is not.
inline BenchResult run_workload(const WorkloadSpec& spec,
                                const LayoutParams& layout,
                                const SecretKeyPair& keys,
                                IntegrityMode mode = IntegrityMode::full) {
  MemoryBlockStore store;
  const std::string obj = "bench";
  std::uint64_t io = spec.io_size;
  std::uint64_t ops = spec.file_size / io;
  std::mt19937_64 rng(spec.seed);

  auto fill = [&](std::vector<std::uint8_t>& buf) {
    for (std::size_t b = 0; b + 8 <= buf.size(); b += 8) {
      std::uint64_t word = rng();
      std::memcpy(buf.data() + b, &word, 8);
    }
  };

  bool needs_populate = spec.kind != WorkloadKind::seq_write &&
                        spec.kind != WorkloadKind::rand_write;
  {
    LamassuFile file = LamassuFile::create(store, obj, keys, layout, mode);
    if (needs_populate || spec.kind == WorkloadKind::rand_write) {
      std::vector<std::uint8_t> buf(io);
      for (std::uint64_t i = 0; i < ops; ++i) {
        fill(buf);
        file.write(i * io, buf);
      }
      file.flush();
    }
  }

  LamassuFile file = LamassuFile::open(store, obj, keys, mode);
  store.reset_write_count();
  std::vector<std::uint8_t> buf(io);
  std::uint64_t moved = 0;
  auto t0 = std::chrono::steady_clock::now();
  for (std::uint64_t r = 0; r < spec.runs; ++r) {
    for (std::uint64_t i = 0; i < ops; ++i) {
      std::uint64_t off;
      bool is_read;
      switch (spec.kind) {
        case WorkloadKind::seq_read:
          off = i * io; is_read = true; break;
        case WorkloadKind::seq_write:
          off = i * io; is_read = false; break;
        case WorkloadKind::rand_read:
          off = std::uniform_int_distribution<std::uint64_t>(0, ops - 1)(rng) *
                io;
          is_read = true; break;
        case WorkloadKind::rand_write:
          off = std::uniform_int_distribution<std::uint64_t>(0, ops - 1)(rng) *
                io;
          is_read = false; break;
        case WorkloadKind::rand_rw:
        default:
          off = std::uniform_int_distribution<std::uint64_t>(0, ops - 1)(rng) *
                io;
          is_read = std::uniform_real_distribution<double>(0.0, 1.0)(rng) <
                    spec.rw_ratio;
          break;
      }
      if (is_read) {
        moved += file.read(off, io).size();
      } else {
        fill(buf);
        moved += file.write(off, buf);
      }
    }
    file.flush();
  }
  auto elapsed = std::chrono::steady_clock::now() - t0;

  BenchResult res;
  res.workload = to_string(spec.kind);
  res.reserved_slots = layout.reserved_slots;
  res.bytes_moved = moved;
  double secs =
      std::chrono::duration_cast<std::chrono::duration<double>>(elapsed)
          .count();
  res.throughput_mbps =
      secs > 0 ? static_cast<double>(moved) / (1024.0 * 1024.0) / secs : 0.0;
  res.backend_writes = store.write_count();
  res.breakdown = file.stats();
  return res;
}

// --- dedup experiment --------------------------------------------------

struct DedupExperimentRow {
  double alpha = 0.0;
  std::uint64_t plaintext_unique_blocks = 0;
  std::uint64_t cipher_unique_blocks = 0;
  double plaintext_relative_usage = 0.0;
  /// Extra deduplicated blocks (the metadata) relative to the deduplicated
  /// plaintext baseline.
  double relative_overhead = 0.0;
};

inline DedupExperimentRow dedup_experiment(std::uint64_t file_size,
                                           double alpha,
                                           const LayoutParams& layout,
                                           const SecretKeyPair& keys,
                                           std::uint64_t seed = 42) {
  auto plain = gen_redundant_file(file_size, alpha, seed);

  DedupCounter plain_counter;
  for (std::uint64_t off = 0; off + kGenBlockBytes <= plain.size();
       off += kGenBlockBytes)
    plain_counter.add(std::span(plain).subspan(off, kGenBlockBytes));

  MemoryBlockStore store;
  {
    LamassuFile file = LamassuFile::create(store, "exp", keys, layout);
    file.write(0, plain);
    file.flush();
  }
  DedupStats cipher_stats = dedup_report(store);
  DedupStats plain_stats = plain_counter.stats();

  DedupExperimentRow row;
  row.alpha = alpha;
  row.plaintext_unique_blocks = plain_stats.unique_blocks;
  row.cipher_unique_blocks = cipher_stats.unique_blocks;
  row.plaintext_relative_usage = plain_stats.relative_usage();
  row.relative_overhead =
      static_cast<double>(cipher_stats.unique_blocks -
                          plain_stats.unique_blocks) /
      static_cast<double>(plain_stats.unique_blocks);
  return row;
}

// --- crash matrix ------------------------------------------------------

struct CrashMatrixResult {
  std::uint64_t injection_points = 0;
  std::uint64_t unrecoverable_blocks = 0;
  std::uint64_t content_mismatches = 0;
  std::uint64_t failures() const {
    return unrecoverable_blocks + content_mismatches;
  }
};

/// Replay an overwrite workload over a populated file, injecting a fault at
/// every backend write index in turn; after each crash, recover and check
/// that every block reads back as its pre- or post-commit content.
inline CrashMatrixResult run_crash_matrix(std::uint64_t data_blocks,
                                          const LayoutParams& layout,
                                          const SecretKeyPair& keys,
                                          std::uint64_t seed = 7) {
  std::uint64_t bs = layout.block_size;
  std::mt19937_64 rng(seed);
  auto random_block = [&] {
    std::vector<std::uint8_t> blk(bs);
    for (std::size_t b = 0; b + 8 <= bs; b += 8) {
      std::uint64_t word = rng();
      std::memcpy(blk.data() + b, &word, 8);
    }
    return blk;
  };
  std::vector<std::vector<std::uint8_t>> old_content, new_content;
  for (std::uint64_t i = 0; i < data_blocks; ++i) {
    old_content.push_back(random_block());
    new_content.push_back(random_block());
  }

  // dry run to learn the total backend write count of the overwrite phase
  auto replay = [&](std::optional<std::uint64_t> fault_at,
                    CrashMatrixResult& res) -> std::uint64_t {
    MemoryBlockStore store;
    {
      LamassuFile file = LamassuFile::create(store, "f", keys, layout);
      for (std::uint64_t i = 0; i < data_blocks; ++i)
        file.write(i * bs, old_content[i]);
      file.flush();
    }
    store.reset_write_count();
    if (fault_at) store.inject_fault(*fault_at);
    bool crashed = false;
    try {
      LamassuFile file = LamassuFile::open(store, "f", keys);
      for (std::uint64_t i = 0; i < data_blocks; ++i)
        file.write(i * bs, new_content[i]);
      file.flush();
    } catch (const CrashInjectedError&) {
      crashed = true;
    }
    std::uint64_t writes = store.write_count();
    store.clear_fault();
    (void)crashed;

    LamassuFile file = LamassuFile::open(store, "f", keys);
    RecoveryReport rec = file.recover();
    res.unrecoverable_blocks += rec.blocks_unrecoverable;
    if (!file.verify().clean()) ++res.content_mismatches;
    for (std::uint64_t i = 0; i < data_blocks; ++i) {
      auto got = file.read(i * bs, bs);
      if (got != old_content[i] && got != new_content[i])
        ++res.content_mismatches;
    }
    return writes;
  };

  CrashMatrixResult res;
  CrashMatrixResult dry;
  std::uint64_t total_writes = replay(std::nullopt, dry);
  res.injection_points = total_writes;
  for (std::uint64_t f = 0; f < total_writes; ++f) replay(f, res);
  return res;
}

}  // namespace lamassu
