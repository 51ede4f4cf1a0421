#include "fslab/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "fslab/empirics.hpp"
#include "fslab/error.hpp"
#include "fslab/joinplan.hpp"
#include "fslab/seqgen.hpp"
#include "fslab/serialize.hpp"
#include "fslab/spectral.hpp"

namespace fslab {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void config_fail(const std::string& path, const std::string& what) {
  fail(ErrorKind::ConfigError, path + ": " + what);
}

std::uint64_t as_u64(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    if (v.get<std::int64_t>() < 0) config_fail(path, "must be nonnegative");
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d >= 0.0 && d <= 1.8e19 && std::floor(d) == d) return static_cast<std::uint64_t>(d);
  }
  config_fail(path, "expected a nonnegative integer");
}

double as_double(const json& v, const std::string& path) {
  if (!v.is_number()) config_fail(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) config_fail(path, "must be finite");
  return d;
}

/// Typed access to one config table; unknown keys are rejected by done().
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) config_fail(path_, "expected a table");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::uint64_t u64(const std::string& key, std::uint64_t def) {
    return has(key) ? as_u64(j_.at(key), at(key)) : def;
  }
  double real(const std::string& key, double def) { return has(key) ? as_double(j_.at(key), at(key)) : def; }
  bool boolean(const std::string& key, bool def) {
    if (!has(key)) return def;
    if (!j_.at(key).is_boolean()) config_fail(at(key), "expected true or false");
    return j_.at(key).get<bool>();
  }
  std::string str(const std::string& key, const std::string& def) {
    if (!has(key)) return def;
    if (!j_.at(key).is_string()) config_fail(at(key), "expected a string");
    return j_.at(key).get<std::string>();
  }
  std::vector<std::uint64_t> u64_list(const std::string& key) {
    std::vector<std::uint64_t> out;
    if (!has(key)) return out;
    const json& v = j_.at(key);
    if (!v.is_array()) config_fail(at(key), "expected an array of integers");
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_u64(v[i], at(key) + "[" + std::to_string(i) + "]"));
    return out;
  }
  std::vector<double> real_list(const std::string& key) {
    std::vector<double> out;
    if (!has(key)) return out;
    const json& v = j_.at(key);
    if (!v.is_array()) config_fail(at(key), "expected an array of numbers");
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_double(v[i], at(key) + "[" + std::to_string(i) + "]"));
    return out;
  }
  void done() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) config_fail(at(k), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

struct GeneratorInfo {
  std::string name;
  std::vector<std::string> required;
  std::vector<std::string> optional;
};

const std::vector<GeneratorInfo>& generators() {
  static const std::vector<GeneratorInfo> g = {
      {"liouville", {"N"}, {}},
      {"skew", {"alpha", "L"}, {"N"}},
      {"archimedean", {"t", "N"}, {}},
      {"power_decay", {"r", "N"}, {}},
      {"constant", {"N"}, {"re", "im"}},
      {"alternating", {"N"}, {}},
      {"root_of_unity", {"p", "q", "N"}, {}},
      {"iid_signs", {"seed", "N"}, {}},
  };
  return g;
}

struct StatisticInfo {
  std::string name;
  std::vector<std::string> keys;
};

const std::vector<StatisticInfo>& statistics() {
  static const std::vector<StatisticInfo> s = {
      {"short_interval", {"H", "N"}},
      {"u1_norm", {"H", "N"}},
      {"averaged_chowla", {"H", "N"}},
      {"progression", {"H", "Q", "N"}},
      {"relative_vn", {"L", "N", "permutation"}},
      {"spectral", {"H", "N", "q", "grid"}},
      {"autocorr", {"H", "N"}},
      {"besicovitch_mean", {"N"}},
      {"mean_variation", {"N"}},
      {"cylinders", {"k", "N", "quantize"}},
      {"product_projection", {"M", "k", "N", "permutation", "quantize"}},
  };
  return s;
}

const GeneratorInfo* find_generator(const std::string& name) {
  for (const auto& g : generators()) {
    if (g.name == name) return &g;
  }
  return nullptr;
}

const StatisticInfo* find_statistic(const std::string& name) {
  for (const auto& s : statistics()) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : ", ") + n;
  return out;
}

QuantizeOptions parse_quantize(const std::string& text, const std::string& path) {
  if (text == "signs") return {QuantizeMode::Signs, 2};
  if (text == "value_set") return {QuantizeMode::ValueSet, 0};
  if (text.rfind("phase_bins:", 0) == 0) {
    try {
      const unsigned long m = std::stoul(text.substr(11));
      if (m >= 1 && m <= 65535) return {QuantizeMode::PhaseBins, static_cast<unsigned>(m)};
    } catch (const std::logic_error&) {
    }
  }
  config_fail(path, "expected signs, value_set or phase_bins:M, got '" + text + "'");
}

std::uint64_t sequence_length_hint(const SequenceSpec& s) {
  if (s.input) return s.N.value_or(0);
  const auto& p = s.params;
  if (s.generator == "skew") {
    const std::uint64_t full = seqgen::skew_sequence_length(static_cast<std::uint64_t>(p.at("L")));
    return p.count("N") ? std::min<std::uint64_t>(full, static_cast<std::uint64_t>(p.at("N"))) : full;
  }
  return static_cast<std::uint64_t>(p.at("N"));
}

SequenceSpec parse_sequence(const json& j) {
  Fields f(j, "sequence");
  SequenceSpec s;
  s.blockify = f.boolean("blockify", false);
  if (f.has("input")) {
    s.input = f.str("input", "");
    if (f.has("generator")) config_fail("sequence.generator", "give either generator or input, not both");
    if (f.has("N")) {
      s.N = f.u64("N", 0);
      if (*s.N == 0) config_fail("sequence.N", "must be >= 1");
    }
    f.done();
    return s;
  }
  if (!f.has("generator")) config_fail("sequence.generator", "missing (or give sequence.input)");
  s.generator = f.str("generator", "");
  const GeneratorInfo* g = find_generator(s.generator);
  if (!g) {
    config_fail("sequence.generator", "unknown generator '" + s.generator + "' (known: " +
                                          join_names(generator_names()) + ")");
  }
  for (const auto& key : g->required) {
    if (!f.has(key)) config_fail(f.at(key), "required by generator " + s.generator);
    s.params[key] = f.real(key, 0.0);
  }
  for (const auto& key : g->optional) {
    if (f.has(key)) s.params[key] = f.real(key, 0.0);
  }
  f.done();

  auto positive_int = [&](const std::string& key, double hi) {
    if (!s.params.count(key)) return;
    const double v = s.params[key];
    if (!(v >= 1.0 && v <= hi && std::floor(v) == v)) {
      config_fail("sequence." + key, "must be an integer in 1.." + std::to_string(static_cast<std::uint64_t>(hi)));
    }
  };
  positive_int("N", 4e9);
  positive_int("L", 1e5);
  positive_int("q", 1e12);
  if (s.params.count("p") && !(s.params["p"] >= 0.0 && std::floor(s.params["p"]) == s.params["p"])) {
    config_fail("sequence.p", "must be a nonnegative integer");
  }
  if (s.params.count("seed") && !(s.params["seed"] >= 0.0 && std::floor(s.params["seed"]) == s.params["seed"])) {
    config_fail("sequence.seed", "must be a nonnegative integer");
  }
  if (s.generator == "skew" && !(s.params["alpha"] > 0.0 && s.params["alpha"] < 1.0)) {
    config_fail("sequence.alpha", "must be in (0, 1)");
  }
  if (s.generator == "power_decay" && !(s.params["r"] > 0.0)) config_fail("sequence.r", "must be > 0");
  if (s.generator == "constant") {
    const double re = s.params.count("re") ? s.params["re"] : 1.0;
    const double im = s.params.count("im") ? s.params["im"] : 0.0;
    if (std::hypot(re, im) > 1.0 + ArithmeticSequence::kModulusSlack) {
      config_fail("sequence.re", "|re + i im| must be <= 1");
    }
  }
  return s;
}

void check_statistic_ranges(const StatisticSpec& st, std::uint64_t seq_N, const std::string& path) {
  const std::uint64_t N = st.N ? st.N : seq_N;
  if (st.N && seq_N && st.N > seq_N) {
    config_fail(path + ".N", "exceeds the sequence length " + std::to_string(seq_N));
  }
  if (!seq_N) return;
  const std::string& n = st.name;
  if (n == "short_interval" || n == "u1_norm" || n == "averaged_chowla" || n == "autocorr" || n == "spectral") {
    if (st.H < 1) config_fail(path + ".H", "must be >= 1");
    if (n != "short_interval" && 2 * st.H >= N) config_fail(path + ".H", "needs 2H < N = " + std::to_string(N));
    if (n == "short_interval" && st.H >= N) config_fail(path + ".H", "needs H < N = " + std::to_string(N));
  }
  if (n == "spectral") {
    if (st.H < 10) config_fail(path + ".H", "spectral summaries need H >= 10");
    for (std::size_t i = 0; i < st.q.size(); ++i) {
      if (st.q[i] < 1 || st.q[i] > st.H / 10) {
        config_fail(path + ".q[" + std::to_string(i) + "]", "must be in 1..H/10 = " + std::to_string(st.H / 10));
      }
    }
  }
  if (n == "progression") {
    if (st.H < 1 || st.Q < 1) config_fail(path + ".H", "H and Q must be >= 1");
    if (st.H * st.Q >= N) config_fail(path + ".Q", "needs H Q < N = " + std::to_string(N));
  }
  if (n == "relative_vn" && (st.L < 1 || st.L >= N)) config_fail(path + ".L", "must be in 1..N-1");
  if ((n == "cylinders" || n == "product_projection") && (st.k < 1 || st.k > kMaxBlockLength)) {
    config_fail(path + ".k", "must be in 1.." + std::to_string(kMaxBlockLength));
  }
  if (n == "product_projection" && st.M < 1) config_fail(path + ".M", "must be >= 1");
}

StatisticSpec parse_statistic(const json& j, const std::string& path) {
  Fields f(j, path);
  StatisticSpec s;
  if (!f.has("name")) config_fail(path + ".name", "missing");
  s.name = f.str("name", "");
  const StatisticInfo* info = find_statistic(s.name);
  if (!info) {
    config_fail(path + ".name", "unknown statistic '" + s.name + "' (known: " + join_names(statistic_names()) + ")");
  }
  for (const auto& [key, v] : j.items()) {
    if (key == "name") continue;
    if (std::find(info->keys.begin(), info->keys.end(), key) == info->keys.end()) {
      config_fail(path + "." + key, "not a parameter of " + s.name);
    }
  }
  s.H = f.u64("H", s.H);
  s.N = f.u64("N", 0);
  s.Q = f.u64("Q", s.Q);
  s.L = f.u64("L", s.L);
  s.k = static_cast<unsigned>(std::min<std::uint64_t>(f.u64("k", 1), 1000));
  s.M = f.u64("M", s.M);
  s.grid = f.u64("grid", 0);
  s.q = f.u64_list("q");
  s.permutation = f.str("permutation", s.permutation);
  s.quantize = f.str("quantize", s.quantize);
  parse_quantize(s.quantize, path + ".quantize");
  f.done();
  return s;
}

SystemSpec parse_system(const json& j, const std::string& path) {
  Fields f(j, path);
  SystemSpec s;
  s.kind = f.str("kind", "");
  if (s.kind != "circle" && s.kind != "torus" && s.kind != "skew" && s.kind != "heisenberg") {
    config_fail(path + ".kind", "unknown system '" + s.kind + "' (known: circle, torus, skew, heisenberg)");
  }
  s.alpha = f.real("alpha", 0.0);
  s.beta = f.real("beta", 0.0);
  const auto g = f.real_list("g");
  if (!g.empty()) {
    if (g.size() != 3) config_fail(path + ".g", "expected three Mal'cev coordinates");
    s.g = {g[0], g[1], g[2]};
  }
  s.observable = f.str("observable", "");
  s.x0 = f.real_list("x0");
  s.test = f.str("test", s.test);
  if (s.test != "orthogonality" && s.test != "momo") config_fail(path + ".test", "expected orthogonality or momo");
  s.Ns = f.u64_list("Ns");
  s.K = f.u64("K", s.K);
  s.seed = f.u64("seed", s.seed);
  f.done();
  try {
    const OrbitSystem sys = s.system();
    sys.validate();
    if (!s.x0.empty() && s.x0.size() != sys.dimension()) {
      config_fail(path + ".x0", "expected " + std::to_string(sys.dimension()) + " coordinates");
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigError) throw;
    config_fail(path + (s.observable.empty() ? ".kind" : ".observable"), e.detail());
  }
  if (s.test == "momo" && s.K < 2) config_fail(path + ".K", "must be >= 2");
  return s;
}

JoiningSpec parse_joining(const json& j) {
  Fields f(j, "joining");
  JoiningSpec s;
  s.lambda = f.str("lambda", s.lambda);
  try {
    JoiningTarget::parse(s.lambda);
  } catch (const Error& e) {
    config_fail("joining.lambda", e.detail());
  }
  s.Ns = f.u64_list("Ns");
  for (std::size_t i = 1; i < s.Ns.size(); ++i) {
    if (s.Ns[i] <= s.Ns[i - 1]) config_fail("joining.Ns", "must be increasing");
  }
  s.quantize = f.str("quantize", s.quantize);
  parse_quantize(s.quantize, "joining.quantize");
  s.aperiodize = f.boolean("aperiodize", false);
  s.eval_k = static_cast<unsigned>(std::min<std::uint64_t>(f.u64("eval_k", 2), 1000));
  if (s.eval_k < 1 || s.eval_k > kMaxBlockLength) config_fail("joining.eval_k", "must be in 1..12");
  s.projection_M = f.u64("projection_M", 0);
  s.projection_k = static_cast<unsigned>(std::min<std::uint64_t>(f.u64("projection_k", 1), 1000));
  if (s.projection_k < 1 || s.projection_k > kMaxBlockLength) config_fail("joining.projection_k", "must be in 1..12");
  s.save_permutations = f.boolean("save_permutations", false);
  f.done();
  return s;
}

json toml_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    json out = json::object();
    for (const auto& [k, v] : *t) out[std::string(k.str())] = toml_to_json(v);
    return out;
  }
  if (const auto* a = node.as_array()) {
    json out = json::array();
    for (const auto& v : *a) out.push_back(toml_to_json(v));
    return out;
  }
  if (const auto* v = node.as_string()) return v->get();
  if (const auto* v = node.as_integer()) return v->get();
  if (const auto* v = node.as_floating_point()) return v->get();
  if (const auto* v = node.as_boolean()) return v->get();
  std::ostringstream text;
  if (const auto* v = node.as_date()) text << v->get();
  if (const auto* v = node.as_time()) text << v->get();
  if (const auto* v = node.as_date_time()) text << v->get();
  return text.str();
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t span_hash(std::span<const cplx> values) {
  return io::fnv1a({reinterpret_cast<const unsigned char*>(values.data()), values.size_bytes()});
}

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) fail(ErrorKind::IoError, "write failed for " + path.string());
}

std::string slug(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return out;
}

}  // namespace

OrbitSystem SystemSpec::system() const {
  if (kind == "circle") {
    return OrbitSystem::circle_rotation(alpha, observable.empty() ? Observable{} : Observable::parse(observable));
  }
  if (kind == "torus") {
    return OrbitSystem::torus_rotation(alpha, beta,
                                       observable.empty() ? Observable{Observable::Kind::Character, 1, 1}
                                                          : Observable::parse(observable));
  }
  if (kind == "skew") {
    return OrbitSystem::skew_product(alpha, observable.empty() ? Observable{Observable::Kind::Vertical}
                                                               : Observable::parse(observable));
  }
  return OrbitSystem::heisenberg(g[0], g[1], g[2], observable.empty() ? Observable{Observable::Kind::Heisenberg}
                                                                      : Observable::parse(observable));
}

std::string ExperimentConfig::hash() const {
  const std::string text = canonical.dump();
  return hex64(io::fnv1a({reinterpret_cast<const unsigned char*>(text.data()), text.size()}));
}

const std::vector<std::string>& generator_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& g : generators()) v.push_back(g.name);
    return v;
  }();
  return names;
}

const std::vector<std::string>& statistic_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& s : statistics()) v.push_back(s.name);
    return v;
  }();
  return names;
}

ExperimentConfig parse_config(const json& j) {
  Fields f(j, "");
  ExperimentConfig c;
  c.canonical = j;
  if (!f.has("sequence")) config_fail("sequence", "missing section");
  c.sequence = parse_sequence(f.raw("sequence"));
  const std::uint64_t seq_N = sequence_length_hint(c.sequence);

  const std::string avg = f.str("averaging", "cesaro");
  try {
    c.averaging = parse_averaging(avg);
  } catch (const Error& e) {
    config_fail("averaging", e.detail());
  }
  const std::string method = f.str("method", "auto");
  try {
    c.method = parse_method(method);
  } catch (const Error& e) {
    config_fail("method", e.detail());
  }
  c.cache = f.boolean("cache", true);
  c.threads = static_cast<unsigned>(std::min<std::uint64_t>(f.u64("threads", 0), 1024));

  if (f.has("statistic")) {
    const json& list = f.raw("statistic");
    if (!list.is_array()) config_fail("statistic", "expected an array of tables ([[statistic]])");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string path = "statistic[" + std::to_string(i) + "]";
      c.statistics.push_back(parse_statistic(list[i], path));
      check_statistic_ranges(c.statistics.back(), seq_N, path);
    }
  }
  if (f.has("system")) {
    const json& list = f.raw("system");
    if (!list.is_array()) config_fail("system", "expected an array of tables ([[system]])");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string path = "system[" + std::to_string(i) + "]";
      c.systems.push_back(parse_system(list[i], path));
      const auto& s = c.systems.back();
      for (std::size_t k = 0; k < s.Ns.size(); ++k) {
        if (s.Ns[k] < 1 || (seq_N && s.Ns[k] > seq_N)) {
          config_fail(path + ".Ns[" + std::to_string(k) + "]", "must be in 1..sequence length");
        }
      }
      if (s.test == "momo" && seq_N && s.K * s.K > seq_N) {
        config_fail(path + ".K", "needs K^2 <= sequence length");
      }
    }
  }
  if (f.has("joining")) {
    c.joining = parse_joining(f.raw("joining"));
    if (c.averaging == Averaging::Logarithmic) {
      config_fail("joining", "the self-joining construction has no logarithmic version");
    }
    for (std::size_t k = 0; k < c.joining->Ns.size(); ++k) {
      if (seq_N && c.joining->Ns[k] > seq_N) {
        config_fail("joining.Ns[" + std::to_string(k) + "]", "exceeds the sequence length");
      }
    }
  }
  if (f.has("output")) {
    Fields o(f.raw("output"), "output");
    c.out_dir = o.str("dir", "out");
    c.plots = o.boolean("plots", true);
    o.done();
  }
  f.done();
  return c;
}

json load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot read config " + path.string());
  if (path.extension() == ".json") {
    try {
      return json::parse(in);
    } catch (const json::exception& e) {
      fail(ErrorKind::ConfigError, path.string() + ": " + e.what());
    }
  }
  try {
    const toml::table t = toml::parse(in, path.string());
    return toml_to_json(t);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << path.string() << ":" << e.source().begin.line << ": " << e.description();
    fail(ErrorKind::ConfigError, msg.str());
  }
}

ExperimentConfig load_config(const fs::path& path) { return parse_config(load_config_file(path)); }

ArithmeticSequence make_sequence(const SequenceSpec& spec) {
  ArithmeticSequence u;
  if (spec.input) {
    u = io::read_sequence(*spec.input);
    if (spec.N) {
      require(*spec.N <= u.size(), ErrorKind::ConfigError,
              "sequence.N: exceeds the input length " + std::to_string(u.size()));
      u = u.prefix(*spec.N);
    }
  } else {
    const auto& p = spec.params;
    auto P = [&](const char* k) { return p.at(k); };
    auto U = [&](const char* k) { return static_cast<std::uint64_t>(p.at(k)); };
    const std::string& g = spec.generator;
    if (g == "liouville") {
      u = seqgen::gen_liouville(U("N"));
    } else if (g == "skew") {
      u = seqgen::gen_skew_sequence(P("alpha"), U("L"));
      if (p.count("N") && U("N") < u.size()) u = u.prefix(U("N"));
    } else if (g == "archimedean") {
      u = seqgen::gen_archimedean(P("t"), U("N"));
    } else if (g == "power_decay") {
      u = seqgen::gen_power_decay(P("r"), U("N"));
    } else if (g == "constant") {
      u = seqgen::gen_constant({p.count("re") ? P("re") : 1.0, p.count("im") ? P("im") : 0.0}, U("N"));
    } else if (g == "alternating") {
      u = seqgen::gen_alternating(U("N"));
    } else if (g == "root_of_unity") {
      u = seqgen::gen_root_of_unity(U("p"), U("q"), U("N"));
    } else if (g == "iid_signs") {
      u = seqgen::gen_iid_signs(U("seed"), U("N"));
    } else {
      fail(ErrorKind::ConfigError, "sequence.generator: unknown generator '" + g + "'");
    }
  }
  if (spec.blockify) u = seqgen::msv_blockify(u).smoothed;
  return u;
}

PermutationPlan make_permutation(const std::string& text, std::uint64_t N) {
  auto arg = [&](std::size_t skip) {
    try {
      return static_cast<std::uint64_t>(std::stoull(text.substr(skip)));
    } catch (const std::logic_error&) {
      fail(ErrorKind::InvalidArgument, "bad permutation parameter in '" + text + "'");
    }
  };
  if (text == "identity") return PermutationPlan::identity(N);
  if (text == "reversal") return PermutationPlan::reversal(N);
  if (text.rfind("cyclic:", 0) == 0) return PermutationPlan::cyclic_shift(N, arg(7));
  if (text.rfind("block_swap:", 0) == 0) return PermutationPlan::block_swap(N, arg(11));
  if (text.rfind("file:", 0) == 0) {
    PermutationPlan phi = io::read_permutation(text.substr(5));
    require(phi.size() == N, ErrorKind::InvalidArgument,
            "permutation file has N = " + std::to_string(phi.size()) + ", expected " + std::to_string(N));
    return phi;
  }
  fail(ErrorKind::InvalidArgument,
       "unknown permutation '" + text + "' (identity, reversal, cyclic:m, block_swap:D, file:PATH)");
}

json ResultRecord::to_json() const {
  json reps = json::array();
  for (const auto& r : reports) reps.push_back(fslab::to_json(r));
  return {{"config_hash", config_hash},
          {"started", started},
          {"finished", finished},
          {"reports", reps},
          {"artifacts", artifacts},
          {"warnings", warnings},
          {"cache", {{"enabled", cache_enabled}, {"dir", cache_dir}, {"hits", cache_hits}, {"misses", cache_misses}}}};
}

ResultRecord run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  auto log = [&](const std::string& msg) {
    if (options.log) options.log(msg);
  };
  if (config.threads) parallel::set_threads(config.threads);

  ResultRecord rec;
  rec.started = utc_now();
  rec.config_hash = config.hash();
  const fs::path out = config.out_dir;
  std::error_code ec;
  fs::create_directories(out / "tables", ec);
  if (config.plots) fs::create_directories(out / "plots", ec);
  if (!fs::is_directory(out / "tables")) fail(ErrorKind::IoError, "cannot create " + (out / "tables").string());

  std::optional<AutocorrCache> cache;
  if (config.cache) {
    fs::path dir;
    if (options.cache_dir) {
      dir = *options.cache_dir;
    } else if (const char* env = std::getenv("FSLAB_CACHE_DIR"); env && *env) {
      dir = env;
    } else {
      dir = out / "cache";
    }
    cache.emplace(dir);
    rec.cache_enabled = true;
    rec.cache_dir = dir.string();
  }

  log("sequence: " + (config.sequence.input ? config.sequence.input->string() : config.sequence.generator));
  const ArithmeticSequence u = make_sequence(config.sequence);
  const std::uint64_t seq_N = u.size();

  // Ranges that depend on an input file's length are checked before computing.
  for (std::size_t i = 0; i < config.statistics.size(); ++i) {
    check_statistic_ranges(config.statistics[i], seq_N, "statistic[" + std::to_string(i) + "]");
  }

  auto provider_for = [&](std::uint64_t N) -> AutocorrProvider {
    const auto values = u.values().first(N);
    const std::uint64_t hash = span_hash(values);
    return [&, values, hash](std::uint64_t H) {
      CacheOutcome outcome;
      AutocorrTable t = cached_autocorrelation(values, hash, H, config.averaging, config.method,
                                               cache ? &*cache : nullptr, &outcome);
      if (cache) (outcome.hit ? rec.cache_hits : rec.cache_misses)++;
      for (auto& w : outcome.warnings) {
        log("warning: " + w);
        rec.warnings.push_back(std::move(w));
      }
      return t;
    };
  };

  auto artifact = [&](const fs::path& rel) { rec.artifacts.push_back(rel.generic_string()); };

  for (std::size_t i = 0; i < config.statistics.size(); ++i) {
    const StatisticSpec& st = config.statistics[i];
    const std::uint64_t N = st.N ? st.N : seq_N;
    const std::string tag = std::to_string(i) + "_" + st.name;
    log("statistic " + st.name);
    StatOptions opt;
    opt.averaging = config.averaging;
    opt.method = config.method;
    opt.provider = provider_for(N);
    StatReport r;
    if (st.name == "short_interval") {
      r = short_interval_stat(u, st.H, N, opt);
    } else if (st.name == "u1_norm") {
      r = u1_norm_estimate(u, st.H, N, opt);
    } else if (st.name == "averaged_chowla") {
      r = averaged_chowla_stat(u, st.H, N, opt);
    } else if (st.name == "progression") {
      r = progression_stat(u, st.H, st.Q, N, opt);
    } else if (st.name == "relative_vn") {
      r = relative_vn_stat(u, make_permutation(st.permutation, N), st.L, N, opt);
    } else if (st.name == "spectral" || st.name == "autocorr") {
      const AutocorrTable acf = opt.provider(st.H);
      if (st.name == "autocorr") {
        r.name = "autocorr";
        r.params = {{"H", double(st.H)}, {"N", double(N)}};
        for (std::uint64_t h = 1; h <= st.H; ++h) r.value = std::max(r.value, std::abs(acf.gamma[h]));
        r.diagnostics["gamma0"] = acf.gamma[0].real();
        const fs::path rel = fs::path("tables") / (tag + ".csv");
        write_autocorr_csv(acf, out / rel);
        artifact(rel);
      } else {
        const SpectralSummary s = wiener_atom_mass(acf);
        r.name = "spectral";
        r.value = s.nontrivial_atom_mass;
        r.params = {{"H", double(st.H)}, {"N", double(N)}};
        r.diagnostics = {{"mean_sq", s.mean_sq}, {"mean_abs_sq", s.mean_abs_sq}, {"equality_gap", s.equality_gap}};
        for (const auto& [q, m] : s.rational_profile) r.trend.emplace_back(double(q), m);
        for (std::uint64_t q : st.q) r.diagnostics["rational_" + std::to_string(q)] = rational_atom_mass(acf, q);
        if (st.grid) {
          const fs::path rel = fs::path("tables") / (tag + "_grid.csv");
          write_grid_csv(atom_mass_grid(acf, st.grid), out / rel);
          artifact(rel);
        }
      }
      r.params["averaging"] = config.averaging == Averaging::Logarithmic ? 1.0 : 0.0;
    } else if (st.name == "besicovitch_mean" || st.name == "mean_variation") {
      const ArithmeticSequence p = u.prefix(N);
      r.name = st.name;
      r.value = st.name == "besicovitch_mean" ? seqgen::besicovitch_mean(p) : seqgen::mean_variation(p);
      r.params = {{"N", double(N)}};
    } else if (st.name == "cylinders") {
      const SymbolicSequence s = quantize(u.prefix(N), parse_quantize(st.quantize, "statistic.quantize"));
      const CylinderTable t = cylinder_frequencies(s, st.k);
      r.name = "cylinders";
      r.params = {{"k", double(st.k)}, {"N", double(N)}, {"alphabet_size", double(s.alphabet_size)}};
      r.value = double(t.counts[st.k - 1].size());
      if (s.lossy) r.notes.push_back("quantization is lossy");
      const fs::path rel = fs::path("tables") / (tag + ".json");
      write_text(out / rel, to_json(t, s.lossy).dump() + "\n");
      artifact(rel);
    } else if (st.name == "product_projection") {
      const SymbolicSequence s = quantize(u.prefix(N), parse_quantize(st.quantize, "statistic.quantize"));
      r = product_projection_check(s, make_permutation(st.permutation, N), st.M, st.k);
    }
    rec.reports.push_back(std::move(r));
  }

  for (std::size_t i = 0; i < config.systems.size(); ++i) {
    const SystemSpec& sp = config.systems[i];
    const OrbitSystem sys = sp.system();
    log("system " + sys.name() + " (" + sp.test + ")");
    std::vector<double> x0 = sp.x0.empty() ? std::vector<double>(sys.dimension(), 0.0) : sp.x0;
    if (sp.test == "orthogonality") {
      const std::vector<std::uint64_t> Ns = sp.Ns.empty() ? std::vector<std::uint64_t>{seq_N} : sp.Ns;
      rec.reports.push_back(orthogonality_test(u, sys, x0, Ns, config.averaging));
    } else {
      rec.reports.push_back(strong_momo_test(u, sys, BlockSchedule::squares(sp.K, sys.dimension(), sp.seed)));
    }
  }

  if (config.joining) {
    const JoiningSpec& js = *config.joining;
    log("joining " + js.lambda);
    const std::vector<std::uint64_t> Ns = js.Ns.empty() ? std::vector<std::uint64_t>{seq_N} : js.Ns;
    const SymbolicSequence s = quantize(u.prefix(Ns.back()), parse_quantize(js.quantize, "joining.quantize"));
    PipelineOptions po;
    po.aperiodize = js.aperiodize;
    po.eval_block_length = js.eval_k;
    po.averaging = config.averaging;
    const auto stages = self_joining_pipeline(s, Ns, JoiningTarget::parse(js.lambda), po);
    std::ostringstream table;
    table << "stage,N,epsilon,h,eval_error,defect_fraction,defect_bound,ti_violations,q_cell_error,tower_outside\n";
    for (const auto& st : stages) {
      const StageReport& r = st.report;
      table << r.stage << ',' << r.N << ',' << number(r.epsilon) << ',' << r.h << ',' << number(r.eval_error) << ','
            << number(r.defect_fraction) << ',' << number(r.dynamic.defect_bound) << ',' << r.dynamic.ti_violations
            << ',' << number(r.dynamic.q_cell_error) << ',' << number(r.tower_outside) << '\n';
      rec.reports.push_back(as_stat_report(r));
      if (js.save_permutations) {
        fs::create_directories(out / "permutations", ec);
        const fs::path rel = fs::path("permutations") / ("stage_" + std::to_string(r.stage) + ".bin");
        io::write_permutation(st.phi, out / rel);
        artifact(rel);
      }
    }
    const fs::path rel = fs::path("tables") / "self_joining.csv";
    write_text(out / rel, table.str());
    artifact(rel);
    if (js.projection_M) {
      rec.reports.push_back(product_projection_check(s, stages.back().phi, js.projection_M, js.projection_k));
    }
  }

  // summary table, plot data, results
  std::ostringstream summary, lines;
  summary << "index,stat,value\n";
  for (std::size_t i = 0; i < rec.reports.size(); ++i) {
    const StatReport& r = rec.reports[i];
    summary << i << ',' << r.name << ',' << number(r.value) << '\n';
    json line = to_json(r);
    line["config_hash"] = rec.config_hash;
    line["index"] = i;
    lines << line.dump() << '\n';
    if (config.plots && !r.trend.empty()) {
      std::ostringstream plot;
      plot << "x,y\n";
      for (const auto& [x, y] : r.trend) plot << number(x) << ',' << number(y) << '\n';
      const fs::path prel = fs::path("plots") / (std::to_string(i) + "_" + slug(r.name) + ".csv");
      write_text(out / prel, plot.str());
      artifact(prel);
    }
  }
  write_text(out / "tables" / "summary.csv", summary.str());
  artifact(fs::path("tables") / "summary.csv");
  write_text(out / "results.jsonl", lines.str());
  artifact("results.jsonl");
  rec.finished = utc_now();
  json record = rec.to_json();
  record["config"] = config.canonical;
  write_text(out / "record.json", record.dump(2) + "\n");
  return rec;
}

}  // namespace fslab
