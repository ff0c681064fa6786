#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "proxyseg/errors.hpp"
#include "proxyseg/segpack.hpp"
#include "samples.hpp"

using namespace proxyseg;
using testing::random_pack;

namespace {

FormatError::Kind decode_kind(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_segpack(bytes);
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("decode succeeded");
  return FormatError::Kind::io;
}

}  // namespace

TEST_CASE("encode/decode round trip over random packs") {
  RngStream rng(2718);
  for (int i = 0; i < 200; ++i) {
    const auto p = random_pack(rng);
    const auto bytes = encode_segpack(p);
    CHECK(bytes.size() == SegPack::kHeaderBytes + p.size() * (p.plane() + 4 * p.channels * p.plane()));
    CHECK(bytes.size() == p.encoded_bytes());
    CHECK(decode_segpack(bytes) == p);
  }
}

TEST_CASE("header layout") {
  SegPack p;
  p.channels = 3;
  p.height = 2;
  p.width = 4;
  p.num_classes = 6;
  p.labels.assign(8, 1);
  p.images.assign(24, 0.5f);
  const auto b = encode_segpack(p);
  CHECK(std::string(b.begin(), b.begin() + 4) == "SEGP");
  CHECK(b[4] == 1);
  CHECK(b[5] == 0);
  CHECK(b[6] == 1);
  CHECK(b[10] == 3);
  CHECK(b[12] == 2);
  CHECK(b[14] == 4);
  CHECK(b[16] == 6);
}

TEST_CASE("corrupted input error taxonomy") {
  RngStream rng(5);
  SegPack p = random_pack(rng);
  while (p.size() == 0) p = random_pack(rng);
  const auto good = encode_segpack(p);

  auto bad_magic = good;
  std::copy_n("XXXX", 4, bad_magic.begin());
  CHECK(decode_kind(bad_magic) == FormatError::Kind::bad_magic);

  auto bad_version = good;
  bad_version[4] = 2;
  CHECK(decode_kind(bad_version) == FormatError::Kind::version_mismatch);

  auto cut = good;
  cut.resize(good.size() - 3);
  CHECK(decode_kind(cut) == FormatError::Kind::truncated);
  try {
    decode_segpack(cut);
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(std::to_string(good.size())) != std::string::npos);
    CHECK(msg.find(std::to_string(cut.size())) != std::string::npos);
  }
  CHECK(decode_kind(std::vector<std::uint8_t>(good.begin(), good.begin() + 7)) == FormatError::Kind::truncated);

  auto extra = good;
  extra.push_back(0);
  CHECK(decode_kind(extra) == FormatError::Kind::truncated);

  auto bad_label = good;
  bad_label[SegPack::kHeaderBytes] = static_cast<std::uint8_t>(p.num_classes);
  CHECK(decode_kind(bad_label) == FormatError::Kind::bad_label);
}

TEST_CASE("file round trip and io errors") {
  const auto dir = std::filesystem::temp_directory_path() / "proxyseg_test_segpack";
  std::filesystem::create_directories(dir);
  const auto pack = generate_pack(SceneSpec{}, DomainParams::source_default(), 3, 9);
  write_segpack(pack, dir / "a.segpack");
  CHECK(read_segpack(dir / "a.segpack") == pack);
  CHECK(std::filesystem::file_size(dir / "a.segpack") == pack.encoded_bytes());
  try {
    read_segpack(dir / "missing.segpack");
    FAIL("read succeeded");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::io);
  }
  std::filesystem::remove_all(dir);
}
