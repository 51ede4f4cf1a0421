#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fslab/error.hpp"
#include "fslab/experiment.hpp"
#include "fslab/numeric.hpp"
#include "fslab/serialize.hpp"

using namespace fslab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fslab_exp_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string config_error(const json& j) {
  try {
    parse_config(j);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConfigError);
    return e.what();
  }
  FAIL("config accepted");
  return {};
}

json small_config(const fs::path& out) {
  json j = json::parse(R"({
    "sequence": {"generator": "liouville", "N": 10000},
    "statistic": [{"name": "averaged_chowla", "H": 10}]
  })");
  j["output"] = {{"dir", out.string()}};
  return j;
}

}  // namespace

TEST_CASE("config errors name the field") {
  const json seq = {{"generator", "liouville"}, {"N", 1000}};
  CHECK(config_error({{"sequence", seq}, {"statistic", {{{"name", "chowla9"}}}}}).find("statistic[0].name") !=
        std::string::npos);
  CHECK(config_error({{"sequence", {{"generator", "mobius"}, {"N", 10}}}}).find("sequence.generator") !=
        std::string::npos);
  CHECK(config_error({{"sequence", {{"generator", "liouville"}}}}).find("sequence.N") != std::string::npos);
  CHECK(config_error({{"sequence", seq}, {"statistic", {{{"name", "u1_norm"}, {"H", 600}}}}})
            .find("statistic[0].H") != std::string::npos);
  CHECK(config_error({{"sequence", seq}, {"statistic", {{{"name", "u1_norm"}, {"Q", 2}}}}})
            .find("statistic[0].Q") != std::string::npos);
  CHECK(config_error({{"sequence", seq}, {"colour", 1}}).find("colour") != std::string::npos);
  CHECK(config_error({{"sequence", seq}, {"system", {{{"kind", "circle"}, {"observable", "vertical"}}}}})
            .find("system[0]") != std::string::npos);
  CHECK(config_error({{"sequence", seq}, {"averaging", "logarithmic"}, {"joining", {{"lambda", "product"}}}})
            .find("joining") != std::string::npos);
  CHECK(config_error({{"sequence", seq}, {"joining", {{"lambda", "antidiagonal"}}}}).find("joining.lambda") !=
        std::string::npos);
  CHECK(config_error({{"sequence", seq}, {"statistic", {{{"name", "cylinders"}, {"quantize", "bits"}}}}})
            .find("statistic[0].quantize") != std::string::npos);
  CHECK(config_error({{"sequence", {{"generator", "skew"}, {"alpha", 1.5}, {"L", 3}}}}).find("sequence.alpha") !=
        std::string::npos);
}

TEST_CASE("config hash ignores key order") {
  const json a = json::parse(R"({"sequence": {"generator": "liouville", "N": 100}, "cache": false})");
  const json b = json::parse(R"({"cache": false, "sequence": {"N": 100, "generator": "liouville"}})");
  CHECK(parse_config(a).hash() == parse_config(b).hash());
  const json c = json::parse(R"({"sequence": {"generator": "liouville", "N": 101}, "cache": false})");
  CHECK(parse_config(a).hash() != parse_config(c).hash());
}

TEST_CASE("toml config round trip") {
  const fs::path dir = scratch("toml");
  {
    std::ofstream f(dir / "c.toml");
    f << "averaging = \"cesaro\"\n[sequence]\ngenerator = \"alternating\"\nN = 2000\n"
         "[[statistic]]\nname = \"spectral\"\nH = 100\nq = [2, 3]\n"
         "[output]\ndir = \""
      << (dir / "out").string() << "\"\n";
  }
  const ExperimentConfig cfg = load_config(dir / "c.toml");
  REQUIRE(cfg.statistics.size() == 1);
  CHECK(cfg.statistics[0].q == std::vector<std::uint64_t>{2, 3});
  const ResultRecord rec = run_experiment(cfg);
  REQUIRE(rec.reports.size() == 1);
  CHECK(rec.reports[0].diagnostics.at("rational_2") == doctest::Approx(1.0).epsilon(1e-12));

  {
    std::ofstream f(dir / "bad.toml");
    f << "[sequence\ngenerator = 1\n";
  }
  CHECK_THROWS_AS(load_config(dir / "bad.toml"), Error);
}

TEST_CASE("cache hit on rerun with identical values") {
  const fs::path dir = scratch("cache");
  const ExperimentConfig cfg = parse_config(small_config(dir / "out"));
  RunOptions opts;
  opts.cache_dir = dir / "cache";
  const ResultRecord first = run_experiment(cfg, opts);
  const std::string lines = slurp(dir / "out" / "results.jsonl");
  const ResultRecord second = run_experiment(cfg, opts);
  CHECK(first.cache_hits == 0);
  CHECK(first.cache_misses > 0);
  CHECK(second.cache_hits == first.cache_misses);
  CHECK(second.cache_misses == 0);
  REQUIRE(first.reports.size() == 1);
  CHECK(first.reports[0].value == second.reports[0].value);
  CHECK(slurp(dir / "out" / "results.jsonl") == lines);

  // a different prefix must miss
  json other = small_config(dir / "out2");
  other["sequence"]["N"] = 10001;
  const ResultRecord third = run_experiment(parse_config(other), opts);
  CHECK(third.cache_hits == 0);
}

TEST_CASE("corrupt cache entries are recomputed with a warning") {
  const fs::path dir = scratch("corrupt");
  const ExperimentConfig cfg = parse_config(small_config(dir / "out"));
  RunOptions opts;
  opts.cache_dir = dir / "cache";
  const ResultRecord first = run_experiment(cfg, opts);
  for (const auto& e : fs::directory_iterator(dir / "cache")) {
    if (e.path().extension() == ".bin") std::ofstream(e.path(), std::ios::trunc) << "junk";
  }
  const ResultRecord second = run_experiment(cfg, opts);
  CHECK(!second.warnings.empty());
  CHECK(second.reports[0].value == first.reports[0].value);
}

TEST_CASE("results are identical across thread counts") {
  const fs::path dir = scratch("threads");
  const json base = json::parse(R"({
    "sequence": {"generator": "iid_signs", "seed": 3, "N": 60000},
    "cache": false,
    "statistic": [{"name": "short_interval", "H": 50}, {"name": "spectral", "H": 200, "q": [2]},
                  {"name": "progression", "H": 20, "Q": 5}],
    "system": [{"kind": "heisenberg", "g": [0.41421356, 0.7320508, 0.1], "Ns": [1000, 60000]}],
    "joining": {"lambda": "product", "Ns": [10000, 60000], "projection_M": 10}
  })");
  std::string reference;
  for (unsigned t : {1u, 3u, 8u}) {
    json j = base;
    j["threads"] = t;
    j["output"] = {{"dir", (dir / std::to_string(t)).string()}};
    run_experiment(parse_config(j));
    const std::string lines = slurp(dir / std::to_string(t) / "results.jsonl");
    if (reference.empty()) {
      reference = lines;
    } else {
      // config hashes differ by the thread field; compare the numbers
      auto strip = [](const std::string& text) {
        std::istringstream in(text);
        std::string line, out;
        while (std::getline(in, line)) {
          json r = json::parse(line);
          r.erase("config_hash");
          out += r.dump() + "\n";
        }
        return out;
      };
      CHECK(strip(lines) == strip(reference));
    }
  }
  parallel::set_threads(0);
}

TEST_CASE("make_permutation forms") {
  CHECK(make_permutation("reversal", 5)(1) == 5);
  CHECK(make_permutation("cyclic:2", 5)(4) == 1);
  CHECK(make_permutation("block_swap:2", 5)(1) == 3);
  CHECK_THROWS_AS(make_permutation("shuffle", 5), Error);
  CHECK_THROWS_AS(make_permutation("cyclic:x", 5), Error);
}

TEST_CASE("input file sequences") {
  const fs::path dir = scratch("input");
  const ArithmeticSequence u = make_sequence({"root_of_unity", {{"p", 1}, {"q", 3}, {"N", 500}}, {}, {}, false});
  io::write_sequence_binary(u, dir / "u.bin");
  json j = {{"sequence", {{"input", (dir / "u.bin").string()}, {"N", 300}}},
            {"statistic", {{{"name", "spectral"}, {"H", 100}, {"q", {3}}}}},
            {"output", {{"dir", (dir / "out").string()}}},
            {"cache", false}};
  const ResultRecord rec = run_experiment(parse_config(j));
  CHECK(rec.reports[0].params.at("N") == 300.0);
  CHECK(rec.reports[0].diagnostics.at("rational_3") == doctest::Approx(1.0).epsilon(1e-9));

  j["statistic"][0]["H"] = 200;
  CHECK_THROWS_AS(run_experiment(parse_config(j)), Error);
}
