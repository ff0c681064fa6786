#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "proxyseg/errors.hpp"
#include "proxyseg/run_config.hpp"

using namespace proxyseg;
using nlohmann::json;

TEST_CASE("defaults round trip through json") {
  const RunConfig defaults;
  const auto j = to_json(defaults);
  CHECK(to_json(parse_run_config(j)) == j);
  CHECK(to_json(parse_run_config(json::object())) == j);
  CHECK(j["curriculum"]["similarity_mode"] == "dot");
  CHECK(j["data"]["source"] == 500);
  CHECK(j["data"]["validation"] == 100);
}

TEST_CASE("partial configs override only the given fields") {
  const auto c = parse_run_config(json::parse(R"({
    "mode": "easy_mining",
    "iterations_per_epoch": 7,
    "curriculum": {"beta": 0.0, "similarity_mode": "cosine", "doubled_classes": [3]},
    "scene": {"small_blob_radius": [2, 5]},
    "target_domain": {"gain": 0.5}
  })"));
  CHECK(c.train.mode == TrainMode::easy_mining);
  CHECK(c.train.iterations_per_epoch == 7);
  CHECK(c.train.curriculum.beta == 0.0);
  CHECK(c.train.curriculum.similarity_mode == SimilarityMode::cosine);
  CHECK(c.train.curriculum.doubled_classes == std::set<std::size_t>{3});
  CHECK(c.scene.small_blob_radius == IntRange{2, 5});
  CHECK(c.target_domain.gain == 0.5);
  CHECK(c.target_domain.palette == DomainParams::target_default().palette);
  CHECK(c.train.batch_size == 8);
}

TEST_CASE("invalid configs") {
  CHECK_THROWS_AS(parse_run_config(json::parse(R"({"bogus": 1})")), ConfigError);
  CHECK_THROWS_AS(parse_run_config(json::parse(R"({"curriculum": {"gama_start": 0.5}})")), ConfigError);
  CHECK_THROWS_AS(parse_run_config(json::parse(R"({"mode": "fancy"})")), ConfigError);
  CHECK_THROWS_AS(parse_run_config(json::parse(R"({"batch_size": "eight"})")), ConfigError);
  CHECK_THROWS_AS(parse_run_config(json::parse(R"({"curriculum": {"similarity_mode": "l2"}})")), ConfigError);
  CHECK_THROWS_AS(parse_run_config(json::parse(R"({"scene": {"road_height": [3]}})")), ConfigError);
  CHECK_THROWS_AS(parse_run_config(json::parse(R"({"curriculum": {"gamma_end": 2.0}})")), ConfigError);
  CHECK_THROWS_AS(parse_run_config(json::parse(R"({"model": {"num_classes": 5}})")), ConfigError);
  CHECK_THROWS_AS(parse_run_config(json::parse(R"({"data": {"validation": 0}})")), ConfigError);
  CHECK_THROWS_AS(parse_run_config(json::parse("[1, 2]")), ConfigError);
}

TEST_CASE("loading from disk") {
  const auto dir = std::filesystem::temp_directory_path() / "proxyseg_test_run_config";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "ok.json") << R"({"seed": 11})";
    std::ofstream(dir / "broken.json") << "{ not json";
  }
  CHECK(load_run_config(dir / "ok.json").train.seed == 11);
  CHECK_THROWS_AS(load_run_config(dir / "broken.json"), ConfigError);
  CHECK_THROWS_AS(load_run_config(dir / "missing.json"), FormatError);
  std::filesystem::remove_all(dir);
}
