#include <filesystem>

#include "doctest.h"
#include "proxyseg/checkpoint.hpp"
#include "proxyseg/errors.hpp"
#include "samples.hpp"

using namespace proxyseg;
using testing::random_checkpoint;
using testing::same_model;

namespace {

FormatError::Kind decode_kind(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_checkpoint(bytes);
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("decode succeeded");
  return FormatError::Kind::io;
}

}  // namespace

TEST_CASE("round trip over random models and states") {
  RngStream rng(1618);
  for (int i = 0; i < 120; ++i) {
    const auto inst = random_checkpoint(rng);
    const auto bytes = encode_checkpoint(inst.model, inst.state);
    const auto back = decode_checkpoint(bytes);
    CHECK(same_model(back.model, inst.model));
    CHECK(back.state == inst.state);
    CHECK(encode_checkpoint(back.model, back.state) == bytes);
  }
}

TEST_CASE("corrupted input error taxonomy") {
  RngStream rng(3);
  const auto inst = random_checkpoint(rng);
  const auto good = encode_checkpoint(inst.model, inst.state);
  REQUIRE(std::string(good.begin(), good.begin() + 4) == "SGCK");

  auto magic = good;
  magic[0] = 'X';
  CHECK(decode_kind(magic) == FormatError::Kind::bad_magic);

  auto version = good;
  version[4] = static_cast<std::uint8_t>(kCheckpointVersion + 1);
  CHECK(decode_kind(version) == FormatError::Kind::version_mismatch);

  for (std::size_t cut : {std::size_t{5}, std::size_t{20}, good.size() / 2, good.size() - 1}) {
    CHECK(decode_kind(std::vector<std::uint8_t>(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(cut))) ==
          FormatError::Kind::truncated);
  }
  auto extra = good;
  extra.push_back(7);
  CHECK(decode_kind(extra) == FormatError::Kind::truncated);

  auto width = good;
  width[8] = static_cast<std::uint8_t>(width[8] + 4);
  CHECK(decode_kind(width) == FormatError::Kind::shape_mismatch);

  auto bad_config = good;
  bad_config[8] = 3;
  bad_config[9] = 0;
  CHECK(decode_kind(bad_config) == FormatError::Kind::shape_mismatch);
}

TEST_CASE("file round trip and naming") {
  CHECK(checkpoint_file_name(7) == "epoch_07.sgck");
  CHECK(checkpoint_file_name(20) == "epoch_20.sgck");
  const auto dir = std::filesystem::temp_directory_path() / "proxyseg_test_checkpoint";
  std::filesystem::create_directories(dir);
  RngStream rng(8);
  const auto inst = random_checkpoint(rng);
  save_checkpoint(inst.model, inst.state, dir / "c.sgck");
  const auto back = load_checkpoint(dir / "c.sgck");
  CHECK(same_model(back.model, inst.model));
  CHECK(back.state == inst.state);
  try {
    load_checkpoint(dir / "missing.sgck");
    FAIL("load succeeded");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::io);
  }
  std::filesystem::remove_all(dir);
}
