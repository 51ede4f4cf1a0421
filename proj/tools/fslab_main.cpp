#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fslab/error.hpp"
#include "fslab/experiment.hpp"
#include "fslab/serialize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string generator;
  std::vector<std::string> params;
  std::string input;
  std::uint64_t input_N = 0;
  bool blockify = false;
  std::string out = "out";
  unsigned threads = 0;
  bool no_cache = false;
  bool log_averaging = false;
  bool quiet = false;
};

void add_sequence_options(CLI::App* app, Common& c) {
  app->add_option("-g,--generator", c.generator, "sequence generator");
  app->add_option("-p,--param", c.params, "generator parameter k=v (repeatable)");
  app->add_option("-i,--input", c.input, "sequence file (.csv or .bin)");
  app->add_option("--input-N", c.input_N, "use the first N entries of --input");
  app->add_flag("--blockify", c.blockify, "replace the sequence by its block-smoothed version");
}

void add_run_options(CLI::App* app, Common& c) {
  app->add_option("-o,--out", c.out, "output directory");
  app->add_option("--threads", c.threads, "worker threads");
  app->add_flag("--no-cache", c.no_cache, "disable the autocorrelation cache");
  app->add_flag("--log-averaging", c.log_averaging, "logarithmic instead of Cesaro averages");
  app->add_flag("-q,--quiet", c.quiet, "no progress on stderr");
}

json sequence_json(const Common& c) {
  json s = json::object();
  if (!c.input.empty()) {
    s["input"] = c.input;
    if (c.input_N) s["N"] = c.input_N;
  } else {
    if (c.generator.empty()) fslab::fail(fslab::ErrorKind::ConfigError, "sequence.generator: give --generator or --input");
    s["generator"] = c.generator;
  }
  for (const auto& kv : c.params) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      fslab::fail(fslab::ErrorKind::ConfigError, "--param: expected k=v, got '" + kv + "'");
    }
    const std::string key = kv.substr(0, eq);
    const std::string text = kv.substr(eq + 1);
    try {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      s[key] = v;
    } catch (const std::logic_error&) {
      fslab::fail(fslab::ErrorKind::ConfigError, "sequence." + key + ": not a number: '" + text + "'");
    }
  }
  if (c.blockify) s["blockify"] = true;
  return s;
}

json base_config(const Common& c) {
  json j = {{"sequence", sequence_json(c)}, {"output", {{"dir", c.out}}}};
  if (c.no_cache) j["cache"] = false;
  if (c.log_averaging) j["averaging"] = "logarithmic";
  if (c.threads) j["threads"] = c.threads;
  return j;
}

int execute(const fslab::ExperimentConfig& config, const Common& c) {
  fslab::RunOptions opts;
  if (!c.quiet) opts.log = [](const std::string& m) { std::cerr << "fslab: " << m << '\n'; };
  const fslab::ResultRecord rec = fslab::run_experiment(config, opts);
  for (const auto& r : rec.reports) {
    json line = fslab::to_json(r);
    line["config_hash"] = rec.config_hash;
    std::cout << line.dump() << '\n';
  }
  if (!c.quiet) {
    std::cerr << "fslab: wrote " << rec.artifacts.size() << " files under " << config.out_dir.string();
    if (rec.cache_enabled) std::cerr << " (cache hits " << rec.cache_hits << ", misses " << rec.cache_misses << ")";
    std::cerr << '\n';
  }
  return 0;
}

int exit_code(fslab::ErrorKind k) {
  switch (k) {
    case fslab::ErrorKind::ConfigError:
    case fslab::ErrorKind::InvalidArgument:
      return 2;
    case fslab::ErrorKind::IoError:
      return 3;
    default:
      return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fslab: numerical experiments on bounded arithmetic sequences"};
  app.require_subcommand(1);
  Common c;

  auto* gen = app.add_subcommand("gen", "write a generated sequence to a file");
  std::string gen_out;
  add_sequence_options(gen, c);
  gen->add_option("-o,--out", gen_out, "output file (.csv or .bin)")->required();

  auto* autocorr = app.add_subcommand("autocorr", "autocorrelation table gamma(0..H)");
  std::uint64_t H = 100;
  add_sequence_options(autocorr, c);
  add_run_options(autocorr, c);
  autocorr->add_option("-H", H, "largest lag");

  auto* stat = app.add_subcommand("stat", "one correlation statistic");
  std::string stat_name;
  std::uint64_t Q = 1, L = 1, M = 100, stat_N = 0;
  unsigned k = 1;
  std::string permutation = "identity", quantize = "signs";
  add_sequence_options(stat, c);
  add_run_options(stat, c);
  stat->add_option("name", stat_name, "statistic name")->required();
  stat->add_option("-H", H, "window / lag bound");
  stat->add_option("-Q", Q, "number of progression steps");
  stat->add_option("-L", L, "relative window length");
  stat->add_option("-k", k, "block length");
  stat->add_option("-M", M, "shift range for product_projection");
  stat->add_option("-N", stat_N, "prefix length (default: whole sequence)");
  stat->add_option("--permutation", permutation, "identity, reversal, cyclic:m, block_swap:D, file:PATH");
  stat->add_option("--quantize", quantize, "signs, value_set, phase_bins:M");

  auto* spectral = app.add_subcommand("spectral", "atom masses of the spectral measure");
  std::vector<std::uint64_t> qs;
  std::uint64_t grid = 0;
  add_sequence_options(spectral, c);
  add_run_options(spectral, c);
  spectral->add_option("-H", H, "largest lag (>= 10)");
  spectral->add_option("--rational", qs, "denominators for rational atom masses");
  spectral->add_option("--grid", grid, "also tabulate masses on G grid points");

  std::string kind = "circle", observable;
  double alpha = 0.0, beta = 0.0;
  std::vector<double> g, x0;
  std::vector<std::uint64_t> Ns;
  std::uint64_t K = 100, seed = 1;
  auto add_system = [&](CLI::App* sub) {
    add_sequence_options(sub, c);
    add_run_options(sub, c);
    sub->add_option("--system", kind, "circle, torus, skew, heisenberg");
    sub->add_option("--alpha", alpha, "rotation number");
    sub->add_option("--beta", beta, "second rotation number (torus)");
    sub->add_option("--element", g, "Heisenberg element a b c")->expected(3);
    sub->add_option("--observable", observable, "char:r,s, vertical, heisenberg");
    sub->add_option("--x0", x0, "starting point");
  };
  auto* orth = app.add_subcommand("orth", "correlation with an orbit of a model system");
  add_system(orth);
  orth->add_option("--Ns", Ns, "prefix lengths");
  auto* momo = app.add_subcommand("momo", "block-restarted orthogonality, cuts at k^2");
  add_system(momo);
  momo->add_option("-K", K, "number of cuts");
  momo->add_option("--seed", seed, "seed for the restart points");

  auto* join = app.add_subcommand("join", "empirical self-joining pipeline");
  std::string lambda = "product";
  bool aperiodize = false, save_perms = false;
  unsigned eval_k = 2, proj_k = 1;
  std::uint64_t proj_M = 0;
  add_sequence_options(join, c);
  add_run_options(join, c);
  join->add_option("--lambda", lambda, "product, diagonal, shifted_diagonal:m, mixture:w*kind+...");
  join->add_option("--Ns", Ns, "stage lengths, increasing");
  join->add_option("--quantize", quantize, "signs, value_set, phase_bins:M");
  join->add_flag("--aperiodize", aperiodize, "refine symbols by a rotation itinerary");
  join->add_option("--eval-k", eval_k, "block length of the evaluation");
  join->add_option("--projection-M", proj_M, "also run the product projection check with this M");
  join->add_option("--projection-k", proj_k, "block length of the projection check");
  join->add_flag("--save-permutations", save_perms, "write permutations/stage_l.bin");

  auto* run = app.add_subcommand("run", "run a full experiment config");
  std::string config_path;
  run->add_option("-c,--config", config_path, "TOML (or .json) config")->required();
  run->add_option("-o,--out", c.out, "output directory (overrides the config)");
  run->add_option("--threads", c.threads, "worker threads");
  run->add_flag("--no-cache", c.no_cache, "disable the autocorrelation cache");
  run->add_flag("--log-averaging", c.log_averaging, "logarithmic instead of Cesaro averages");
  run->add_flag("-q,--quiet", c.quiet, "no progress on stderr");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      json j = {{"sequence", sequence_json(c)}};
      const fslab::ExperimentConfig config = fslab::parse_config(j);
      const fslab::ArithmeticSequence u = fslab::make_sequence(config.sequence);
      const fs::path out = gen_out;
      if (out.extension() == ".bin") {
        fslab::io::write_sequence_binary(u, out);
      } else {
        fslab::io::write_sequence_csv(u, out);
      }
      std::cerr << "fslab: wrote " << u.size() << " values to " << out.string() << '\n';
      return 0;
    }
    if (run->parsed()) {
      json j = fslab::load_config_file(config_path);
      if (!j.is_object()) fslab::fail(fslab::ErrorKind::ConfigError, "config must be a table");
      if (run->count("--out")) j["output"]["dir"] = c.out;
      if (c.no_cache) j["cache"] = false;
      if (c.log_averaging) j["averaging"] = "logarithmic";
      if (c.threads) j["threads"] = c.threads;
      return execute(fslab::parse_config(j), c);
    }

    json j = base_config(c);
    if (autocorr->parsed()) {
      j["statistic"] = json::array({{{"name", "autocorr"}, {"H", H}}});
    } else if (stat->parsed()) {
      json s = {{"name", stat_name}};
      auto put = [&](const char* opt, const char* key, const json& v) {
        if (stat->count(opt)) s[key] = v;
      };
      put("-H", "H", H);
      put("-Q", "Q", Q);
      put("-L", "L", L);
      put("-k", "k", k);
      put("-M", "M", M);
      put("-N", "N", stat_N);
      put("--permutation", "permutation", permutation);
      put("--quantize", "quantize", quantize);
      j["statistic"] = json::array({s});
    } else if (spectral->parsed()) {
      json s = {{"name", "spectral"}, {"H", H}};
      if (!qs.empty()) s["q"] = qs;
      if (grid) s["grid"] = grid;
      j["statistic"] = json::array({s});
    } else if (orth->parsed() || momo->parsed()) {
      json s = {{"kind", kind}, {"alpha", alpha}, {"beta", beta}};
      s["test"] = orth->parsed() ? "orthogonality" : "momo";
      if (!g.empty()) s["g"] = g;
      if (!observable.empty()) s["observable"] = observable;
      if (!x0.empty()) s["x0"] = x0;
      if (orth->parsed() && !Ns.empty()) s["Ns"] = Ns;
      if (momo->parsed()) {
        s["K"] = K;
        s["seed"] = seed;
      }
      j["system"] = json::array({s});
    } else if (join->parsed()) {
      json s = {{"lambda", lambda}, {"quantize", quantize}, {"aperiodize", aperiodize},
                {"eval_k", eval_k}, {"save_permutations", save_perms}};
      if (!Ns.empty()) s["Ns"] = Ns;
      if (proj_M) {
        s["projection_M"] = proj_M;
        s["projection_k"] = proj_k;
      }
      j["joining"] = s;
    }
    return execute(fslab::parse_config(j), c);
  } catch (const fslab::Error& e) {
    std::cerr << "fslab: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "fslab: internal: " << e.what() << '\n';
    return 1;
  }
}
