#include "doctest.h"

#include <random>

#include "lamassu/metadata.hpp"
#include "test_helpers.hpp"

using namespace lamassu;

namespace {

MetadataBlock random_block(std::mt19937_64& rng, const LayoutParams& p,
                           bool midupdate) {
  MetadataBlock mb = MetadataBlock::empty(p);
  mb.logical_size = rng();
  for (auto& k : mb.key_table)
    for (auto& b : k.bytes) b = static_cast<std::uint8_t>(rng());
  if (midupdate) {
    mb.update_flag = UpdateFlag::midupdate;
    std::size_t count = 1 + rng() % p.reserved_slots;
    std::vector<std::uint16_t> offsets(p.data_slots());
    for (std::size_t i = 0; i < offsets.size(); ++i)
      offsets[i] = static_cast<std::uint16_t>(i);
    std::shuffle(offsets.begin(), offsets.end(), rng);
    mb.inflight_indices.assign(offsets.begin(), offsets.begin() + count);
    for (std::size_t i = 0; i < count; ++i)
      for (auto& b : mb.reserved_keys[i].bytes)
        b = static_cast<std::uint8_t>(rng());
  }
  return mb;
}

bool equal_payload(const MetadataBlock& a, const MetadataBlock& b) {
  return a.logical_size == b.logical_size && a.update_flag == b.update_flag &&
         a.inflight_indices == b.inflight_indices &&
         a.key_table == b.key_table && a.reserved_keys == b.reserved_keys;
}

}  // namespace

TEST_CASE("serialize/deserialize is the identity on valid blocks") {
  std::mt19937_64 rng(11);
  for (LayoutParams p : {LayoutParams{1024, 1}, LayoutParams{1024, 2},
                         LayoutParams{1024, 8}, LayoutParams{4096, 1},
                         LayoutParams{4096, 2}, LayoutParams{4096, 8},
                         LayoutParams{4096, 32}, LayoutParams{4096, 60}}) {
    for (bool mid : {false, true}) {
      MetadataBlock mb = random_block(rng, p, mid);
      auto bytes = serialize_metadata(mb, p);
      REQUIRE(bytes.size() == p.block_size);
      CHECK(equal_payload(deserialize_metadata(bytes, p), mb));
    }
  }
}

TEST_CASE("plaintext layout offsets are bit-exact") {
  LayoutParams p{4096, 8};
  MetadataBlock mb = MetadataBlock::empty(p);
  mb.logical_size = 0x0102030405060708ULL;
  mb.update_flag = UpdateFlag::midupdate;
  mb.inflight_indices = {3, 117};
  mb.key_table[0].bytes.fill(0xAA);
  mb.key_table[117].bytes.fill(0xBB);
  mb.reserved_keys[1].bytes.fill(0xCC);
  auto bytes = serialize_metadata(mb, p);

  // logical size, big-endian at offset 32
  CHECK(bytes[32] == 0x01);
  CHECK(bytes[39] == 0x08);
  CHECK(bytes[40] == 1);  // midupdate
  CHECK(bytes[41] == 2);  // in-flight count
  for (int i = 42; i < 48; ++i) CHECK(bytes[i] == 0);  // reserved pad
  // in-flight indices at 48, big-endian u16
  CHECK(bytes[48] == 0);
  CHECK(bytes[49] == 3);
  CHECK(bytes[50] == 0);
  CHECK(bytes[51] == 117);
  // key table starts at 48 + 2R = 64
  CHECK(key_table_offset(p) == 64);
  CHECK(bytes[64] == 0xAA);
  CHECK(bytes[64 + 31] == 0xAA);
  CHECK(bytes[64 + 117 * 32] == 0xBB);
  // reserved keys follow the key table
  std::size_t rk = reserved_keys_offset(p);
  CHECK(rk == 64 + 118 * 32);
  CHECK(bytes[rk + 32] == 0xCC);
  // zero fill to the end
  for (std::size_t i = rk + 8 * 32; i < p.block_size; ++i)
    CHECK(bytes[i] == 0);
}

TEST_CASE("first 48 bytes hold no key material") {
  LayoutParams p{4096, 1};
  MetadataBlock mb = MetadataBlock::empty(p);
  for (auto& k : mb.key_table) k.bytes.fill(0xEE);
  mb.reserved_keys[0].bytes.fill(0xEE);
  auto bytes = serialize_metadata(mb, p);
  for (std::size_t i = 32; i < 48; ++i) CHECK(bytes[i] != 0xEE);
  CHECK(key_table_offset(p) == 50);
}

TEST_CASE("serialize rejects invariant violations") {
  LayoutParams p{4096, 2};
  MetadataBlock mb = MetadataBlock::empty(p);
  SUBCASE("clean block with in-flight entries") {
    mb.inflight_indices = {0};
    CHECK_THROWS_AS(serialize_metadata(mb, p), InvalidArgument);
  }
  SUBCASE("too many in-flight entries") {
    mb.update_flag = UpdateFlag::midupdate;
    mb.inflight_indices = {0, 1, 2};
    CHECK_THROWS_AS(serialize_metadata(mb, p), InvalidArgument);
  }
  SUBCASE("duplicate in-flight indices") {
    mb.update_flag = UpdateFlag::midupdate;
    mb.inflight_indices = {5, 5};
    CHECK_THROWS_AS(serialize_metadata(mb, p), InvalidArgument);
  }
  SUBCASE("index out of range") {
    mb.update_flag = UpdateFlag::midupdate;
    mb.inflight_indices = {static_cast<std::uint16_t>(p.data_slots())};
    CHECK_THROWS_AS(serialize_metadata(mb, p), InvalidArgument);
  }
}

TEST_CASE("seal/open round-trips and refreshes the IV") {
  LayoutParams p{4096, 8};
  std::mt19937_64 rng(12);
  auto keys = testutil::test_keys();
  MetadataBlock mb = random_block(rng, p, true);
  auto d1 = seal_metadata(mb, keys, 5, p);
  auto d2 = seal_metadata(mb, keys, 5, p);
  REQUIRE(d1.size() == p.block_size);
  CHECK(d1 != d2);  // fresh random IV per seal
  CHECK(equal_payload(open_metadata(d1, keys, 5, p), mb));
  CHECK(equal_payload(open_metadata(d2, keys, 5, p), mb));
}

TEST_CASE("open with wrong segment index fails authentication") {
  LayoutParams p{4096, 1};
  auto keys = testutil::test_keys();
  MetadataBlock mb = MetadataBlock::empty(p);
  auto disk = seal_metadata(mb, keys, 3, p);
  CHECK_THROWS_AS(open_metadata(disk, keys, 4, p), MetadataIntegrityError);
}

TEST_CASE("every single-bit flip over the sealed payload fails authentication") {
  LayoutParams p{1024, 2};
  std::mt19937_64 rng(13);
  auto keys = testutil::test_keys();
  MetadataBlock mb = random_block(rng, p, false);
  auto disk = seal_metadata(mb, keys, 0, p);
  int failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    auto bad = disk;
    // any bit in bytes [12, block_size): IV pad, tag or ciphertext
    std::size_t byte = 12 + rng() % (p.block_size - 12);
    bad[byte] ^= static_cast<std::uint8_t>(1 << (rng() % 8));
    try {
      open_metadata(bad, keys, 0, p);
    } catch (const MetadataIntegrityError&) {
      ++failures;
    }
  }
  CHECK(failures == 1000);
}
