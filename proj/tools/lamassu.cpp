// Command-line front end: put/get/size/verify/recover over encrypted objects,
// plus the keygen, bench, dedup-exp and crash-matrix harnesses.
//
// Exit codes: 0 ok, 1 usage, 2 not found, 3 metadata integrity,
// 4 data integrity, 5 crash detected.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lamassu/lamassu.hpp"

namespace fs = std::filesystem;
using namespace lamassu;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNotFound = 2;
constexpr int kExitMetaIntegrity = 3;
constexpr int kExitDataIntegrity = 4;
constexpr int kExitCrash = 5;

struct GlobalOpts {
  std::string keystore;
  std::uint64_t zone = 0;
  std::string store = "mem";
  std::size_t block_size = 4096;
  std::size_t reserved = 8;
  std::string integrity = "full";
  bool csv = false;
};

std::unique_ptr<BlockStore> open_store(const GlobalOpts& g) {
  if (g.store == "mem") return std::make_unique<MemoryBlockStore>();
  if (g.store.rfind("dir:", 0) == 0)
    return std::make_unique<DirectoryBlockStore>(g.store.substr(4));
  throw CLI::ValidationError("--store must be 'mem' or 'dir:PATH'");
}

std::string passphrase_from_env() {
  const char* pw = std::getenv("LAMASSU_PASSPHRASE");
  if (!pw)
    throw AuthenticationError(
        "set LAMASSU_PASSPHRASE in the environment to unlock the keystore");
  return pw;
}

SecretKeyPair load_keys(const GlobalOpts& g) {
  if (g.keystore.empty())
    throw CLI::ValidationError("--keystore is required for this command");
  return KeyStore::open(g.keystore, passphrase_from_env()).fetch_zone(g.zone);
}

IntegrityMode integrity_mode(const GlobalOpts& g) {
  if (g.integrity == "full") return IntegrityMode::full;
  if (g.integrity == "meta-only") return IntegrityMode::meta_only;
  throw CLI::ValidationError("--integrity must be 'full' or 'meta-only'");
}

std::vector<std::uint8_t> slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw NotFoundError("cannot open local file: " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void spit(const std::string& path, std::span<const std::uint8_t> data) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(data.data()),
          static_cast<std::streamsize>(data.size()));
  if (!f) throw IoError("cannot write local file: " + path);
}

double pct(std::chrono::nanoseconds part, std::chrono::nanoseconds whole) {
  return whole.count() ? 100.0 * static_cast<double>(part.count()) /
                             static_cast<double>(whole.count())
                       : 0.0;
}

void print_breakdown(const LatencyBreakdown& b, bool csv) {
  auto total = b.encrypt + b.decrypt + b.get_cekey + b.io + b.misc();
  if (csv) {
    std::printf("encrypt_pct,decrypt_pct,getcekey_pct,io_pct,misc_pct\n");
    std::printf("%.2f,%.2f,%.2f,%.2f,%.2f\n", pct(b.encrypt, total),
                pct(b.decrypt, total), pct(b.get_cekey, total),
                pct(b.io, total), pct(b.misc(), total));
  } else {
    std::printf("  breakdown: Encrypt %.1f%%  Decrypt %.1f%%  GetCEKey %.1f%%"
                "  IO %.1f%%  Misc %.1f%%\n",
                pct(b.encrypt, total), pct(b.decrypt, total),
                pct(b.get_cekey, total), pct(b.io, total),
                pct(b.misc(), total));
  }
}

int run(int argc, char** argv) {
  CLI::App app{"Lamassu encrypted-object tool"};
  app.require_subcommand(1);
  GlobalOpts g;
  app.add_option("--keystore", g.keystore, "keystore file path");
  app.add_option("--zone", g.zone, "isolation zone id");
  app.add_option("--store", g.store, "block store: mem or dir:PATH");
  app.add_option("--block-size", g.block_size, "block size in bytes");
  app.add_option("--reserved", g.reserved, "reserved key slots (R)");
  app.add_option("--integrity", g.integrity, "read mode: full or meta-only");
  app.add_flag("--csv", g.csv, "machine-readable CSV output");

  // keygen
  auto* keygen = app.add_subcommand("keygen", "create a keystore zone");
  keygen->callback([&] {
    std::string pw = passphrase_from_env();
    if (g.keystore.empty()) throw CLI::ValidationError("--keystore required");
    std::optional<KeyStore> ks;
    if (fs::exists(g.keystore))
      ks = KeyStore::open(g.keystore, pw);
    else
      ks = KeyStore::create(g.keystore, pw);
    ks->create_zone(g.zone);
    std::printf("created zone %llu in %s\n", (unsigned long long)g.zone,
                g.keystore.c_str());
  });

  // put
  std::string local, object;
  auto* put = app.add_subcommand("put", "encrypt a local file into the store");
  put->add_option("local", local, "local input file")->required();
  put->add_option("object", object, "object name")->required();
  put->callback([&] {
    auto keys = load_keys(g);
    auto store = open_store(g);
    auto data = slurp(local);
    LayoutParams p{g.block_size, g.reserved};
    auto file = LamassuFile::create(*store, object, keys, p,
                                    integrity_mode(g));
    file.write(0, data);
    file.flush();
    std::printf("wrote %zu bytes to %s (%llu physical blocks)\n", data.size(),
                object.c_str(), (unsigned long long)store->num_blocks(object));
  });

  // get
  auto* get = app.add_subcommand("get", "decrypt an object to a local file");
  get->add_option("object", object, "object name")->required();
  get->add_option("local", local, "local output file")->required();
  get->callback([&] {
    auto keys = load_keys(g);
    auto store = open_store(g);
    auto file = LamassuFile::open(*store, object, keys, integrity_mode(g));
    auto data = file.read(0, file.logical_size());
    spit(local, data);
    std::printf("read %zu bytes from %s\n", data.size(), object.c_str());
  });

  // size
  auto* size = app.add_subcommand("size", "report an object's logical size");
  size->add_option("object", object, "object name")->required();
  size->callback([&] {
    auto keys = load_keys(g);
    auto store = open_store(g);
    auto file = LamassuFile::open(*store, object, keys);
    std::printf("%llu\n", (unsigned long long)file.logical_size());
  });

  // verify
  auto* verify = app.add_subcommand("verify", "full integrity scan");
  verify->add_option("object", object, "object name")->required();
  verify->callback([&] {
    auto keys = load_keys(g);
    auto store = open_store(g);
    auto file = LamassuFile::open(*store, object, keys);
    auto report = file.verify();
    if (report.clean()) {
      std::printf("ok: all blocks verified\n");
      return;
    }
    for (const auto& f : report.failures)
      std::printf("bad %s block: physical %llu segment %llu (%s)\n",
                  f.kind == BlockKind::metadata ? "metadata" : "data",
                  (unsigned long long)f.physical_index,
                  (unsigned long long)f.segment_index, f.what.c_str());
    throw DataIntegrityError("verify found damaged blocks",
                             report.failures.front().physical_index);
  });

  // recover
  auto* recover = app.add_subcommand("recover", "resolve midupdate segments");
  recover->add_option("object", object, "object name")->required();
  recover->callback([&] {
    auto keys = load_keys(g);
    auto store = open_store(g);
    auto file = LamassuFile::open(*store, object, keys);
    auto rec = file.recover();
    if (g.csv) {
      std::printf(
          "segments_scanned,segments_midupdate,resolved_new,resolved_old,"
          "unrecoverable\n%llu,%llu,%llu,%llu,%llu\n",
          (unsigned long long)rec.segments_scanned,
          (unsigned long long)rec.segments_midupdate,
          (unsigned long long)rec.blocks_resolved_to_new,
          (unsigned long long)rec.blocks_resolved_to_old,
          (unsigned long long)rec.blocks_unrecoverable);
    } else {
      std::printf("segments scanned %llu, midupdate %llu\n",
                  (unsigned long long)rec.segments_scanned,
                  (unsigned long long)rec.segments_midupdate);
      std::printf("blocks resolved to new %llu, to old %llu, unrecoverable "
                  "%llu\n",
                  (unsigned long long)rec.blocks_resolved_to_new,
                  (unsigned long long)rec.blocks_resolved_to_old,
                  (unsigned long long)rec.blocks_unrecoverable);
    }
  });

  // bench
  std::string workload = "seq-write";
  std::uint64_t bench_size = 16ULL << 20;
  std::uint64_t io_size = 4096;
  std::uint64_t runs = 1;
  std::uint64_t seed = 1;
  std::vector<std::size_t> r_values{1, 2, 8, 32, 60};
  auto* bench = app.add_subcommand("bench", "run FIO-style workloads");
  bench->add_option("--workload", workload,
                    "seq-read|seq-write|rand-read|rand-write|rand-rw");
  bench->add_option("--size", bench_size, "file size in bytes");
  bench->add_option("--io-size", io_size, "I/O size in bytes");
  bench->add_option("--runs", runs, "number of runs");
  bench->add_option("--seed", seed, "workload RNG seed");
  bench->add_option("--r-values", r_values, "reserved-slot counts to sweep");
  bench->callback([&] {
    auto keys = load_keys(g);
    WorkloadSpec spec;
    if (workload == "seq-read") spec.kind = WorkloadKind::seq_read;
    else if (workload == "seq-write") spec.kind = WorkloadKind::seq_write;
    else if (workload == "rand-read") spec.kind = WorkloadKind::rand_read;
    else if (workload == "rand-write") spec.kind = WorkloadKind::rand_write;
    else if (workload == "rand-rw") spec.kind = WorkloadKind::rand_rw;
    else throw CLI::ValidationError("unknown workload kind: " + workload);
    spec.file_size = bench_size;
    spec.io_size = io_size;
    spec.runs = runs;
    spec.seed = seed;
    if (g.csv)
      std::printf("workload,r,mbps,backend_writes,bytes_moved\n");
    for (std::size_t r : r_values) {
      LayoutParams p{g.block_size, r};
      auto res = run_workload(spec, p, keys, integrity_mode(g));
      if (g.csv) {
        std::printf("%s,%zu,%.2f,%llu,%llu\n", res.workload.c_str(), r,
                    res.throughput_mbps,
                    (unsigned long long)res.backend_writes,
                    (unsigned long long)res.bytes_moved);
      } else {
        std::printf("%-10s R=%-3zu %8.1f MB/s  %8llu backend writes\n",
                    res.workload.c_str(), r, res.throughput_mbps,
                    (unsigned long long)res.backend_writes);
        print_breakdown(res.breakdown, false);
      }
    }
  });

  // dedup-exp
  std::vector<double> alphas{0.1, 0.2, 0.3, 0.4, 0.5};
  std::uint64_t exp_size = 64ULL << 20;
  auto* dedup = app.add_subcommand("dedup-exp",
                                   "storage efficiency vs redundancy");
  dedup->add_option("--alphas", alphas, "redundancy fractions");
  dedup->add_option("--size", exp_size, "synthetic file size in bytes");
  dedup->add_option("--seed", seed, "generator seed");
  dedup->callback([&] {
    auto keys = load_keys(g);
    LayoutParams p{g.block_size, g.reserved};
    if (g.csv)
      std::printf("alpha,plain_unique,cipher_unique,plain_usage,"
                  "relative_overhead_pct\n");
    else
      std::printf("%-6s %12s %12s %10s %10s\n", "alpha", "plain uniq",
                  "cipher uniq", "usage", "overhead");
    for (double a : alphas) {
      auto row = dedup_experiment(exp_size, a, p, keys, seed);
      if (g.csv)
        std::printf("%.2f,%llu,%llu,%.4f,%.4f\n", a,
                    (unsigned long long)row.plaintext_unique_blocks,
                    (unsigned long long)row.cipher_unique_blocks,
                    row.plaintext_relative_usage,
                    row.relative_overhead * 100.0);
      else
        std::printf("%-6.2f %12llu %12llu %9.2f%% %9.2f%%\n", a,
                    (unsigned long long)row.plaintext_unique_blocks,
                    (unsigned long long)row.cipher_unique_blocks,
                    row.plaintext_relative_usage * 100.0,
                    row.relative_overhead * 100.0);
    }
  });

  // crash-matrix
  std::uint64_t cm_blocks = 0;
  auto* crash = app.add_subcommand("crash-matrix",
                                   "exhaustive fault-injection sweep");
  crash->add_option("--blocks", cm_blocks,
                    "data blocks in the workload (default 2 segments)");
  crash->add_option("--seed", seed, "content RNG seed");
  crash->callback([&] {
    auto keys = load_keys(g);
    LayoutParams p{g.block_size, g.reserved};
    std::uint64_t blocks = cm_blocks ? cm_blocks : 2 * p.data_slots();
    auto res = run_crash_matrix(blocks, p, keys, seed);
    std::printf("%llu injection points: %llu unrecoverable blocks, %llu "
                "content mismatches\n",
                (unsigned long long)res.injection_points,
                (unsigned long long)res.unrecoverable_blocks,
                (unsigned long long)res.content_mismatches);
    if (res.failures()) throw Error("crash matrix found failures");
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CrashInjectedError& e) {
    std::fprintf(stderr, "crash detected: %s\n", e.what());
    return kExitCrash;
  } catch (const DataIntegrityError& e) {
    std::fprintf(stderr, "data integrity error: %s\n", e.what());
    return kExitDataIntegrity;
  } catch (const MetadataIntegrityError& e) {
    std::fprintf(stderr, "metadata integrity error: %s\n", e.what());
    return kExitMetaIntegrity;
  } catch (const AuthenticationError& e) {
    std::fprintf(stderr, "authentication error: %s\n", e.what());
    return kExitMetaIntegrity;
  } catch (const NotFoundError& e) {
    std::fprintf(stderr, "not found: %s\n", e.what());
    return kExitNotFound;
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
}
