#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fslab/correlate.hpp"
#include "fslab/dynsys.hpp"
#include "fslab/empirics.hpp"
#include "fslab/error.hpp"
#include "fslab/experiment.hpp"
#include "fslab/joinplan.hpp"
#include "fslab/seqgen.hpp"
#include "fslab/serialize.hpp"
#include "fslab/spectral.hpp"

namespace py = pybind11;
using namespace fslab;

namespace {

using CArray = py::array_t<cplx, py::array::c_style | py::array::forcecast>;

py::object json_module() { return py::module_::import("json"); }

py::object to_py(const nlohmann::json& j) { return json_module().attr("loads")(j.dump()); }

nlohmann::json from_py(const py::object& o) {
  return nlohmann::json::parse(json_module().attr("dumps")(o).cast<std::string>());
}

CArray as_array(const ArithmeticSequence& u) {
  CArray out(static_cast<py::ssize_t>(u.size()));
  std::copy(u.values().begin(), u.values().end(), out.mutable_data());
  return out;
}

ArithmeticSequence as_sequence(const CArray& a) {
  return ArithmeticSequence(std::vector<cplx>(a.data(), a.data() + a.size()), "array");
}

py::array_t<std::uint64_t> as_array(const PermutationPlan& phi) {
  py::array_t<std::uint64_t> out(static_cast<py::ssize_t>(phi.size()));
  std::copy(phi.images().begin(), phi.images().end(), out.mutable_data());
  return out;
}

PermutationPlan as_permutation(const py::array_t<std::uint64_t, py::array::c_style | py::array::forcecast>& a) {
  return PermutationPlan(std::vector<std::uint64_t>(a.data(), a.data() + a.size()));
}

py::object report(const StatReport& r) { return to_py(to_json(r)); }

StatOptions stat_options(bool log) {
  StatOptions o;
  o.averaging = log ? Averaging::Logarithmic : Averaging::Cesaro;
  return o;
}

SymbolicSequence symbols_of(const CArray& u, const std::string& quantize_mode) {
  QuantizeOptions q{QuantizeMode::Signs, 2};
  if (quantize_mode == "value_set") {
    q = {QuantizeMode::ValueSet, 0};
  } else if (quantize_mode.rfind("phase_bins:", 0) == 0) {
    q = {QuantizeMode::PhaseBins, static_cast<unsigned>(std::stoul(quantize_mode.substr(11)))};
  } else if (quantize_mode != "signs") {
    fail(ErrorKind::InvalidArgument, "quantize must be signs, value_set or phase_bins:M");
  }
  return quantize(as_sequence(u), q);
}

}  // namespace

PYBIND11_MODULE(_fslab, m) {
  m.doc() = "Correlation, spectral and self-joining experiments on bounded sequences";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result([&]() { return py::exception<Error>(m, "FslabError"); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const py::object& type = error_type.get_stored();
      py::object value = type(e.what());
      value.attr("kind") = std::string(to_string(e.kind()));
      value.attr("detail") = e.detail();
      py::set_error(type, value);
    }
  });

  m.def("set_threads", &parallel::set_threads, py::arg("count"));
  m.def("threads", &parallel::threads);

  // generators
  m.def("liouville", [](std::uint64_t N) { return as_array(seqgen::gen_liouville(N)); }, py::arg("N"));
  m.def("skew_sequence", [](double alpha, std::uint64_t L) { return as_array(seqgen::gen_skew_sequence(alpha, L)); },
        py::arg("alpha"), py::arg("L"));
  m.def("skew_sequence_length", &seqgen::skew_sequence_length, py::arg("L"));
  m.def("skew_character_average", &seqgen::skew_character_average, py::arg("alpha"), py::arg("L"), py::arg("r"),
        py::arg("s"));
  m.def("archimedean", [](double t, std::uint64_t N) { return as_array(seqgen::gen_archimedean(t, N)); },
        py::arg("t"), py::arg("N"));
  m.def("power_decay", [](double r, std::uint64_t N) { return as_array(seqgen::gen_power_decay(r, N)); },
        py::arg("r"), py::arg("N"));
  m.def("alternating", [](std::uint64_t N) { return as_array(seqgen::gen_alternating(N)); }, py::arg("N"));
  m.def("root_of_unity",
        [](std::uint64_t p, std::uint64_t q, std::uint64_t N) { return as_array(seqgen::gen_root_of_unity(p, q, N)); },
        py::arg("p"), py::arg("q"), py::arg("N"));
  m.def("iid_signs", [](std::uint64_t seed, std::uint64_t N) { return as_array(seqgen::gen_iid_signs(seed, N)); },
        py::arg("seed"), py::arg("N"));
  m.def(
      "blockify",
      [](const CArray& v) {
        auto r = seqgen::msv_blockify(as_sequence(v));
        return py::make_tuple(as_array(r.smoothed), to_py(to_json(r.report)));
      },
      py::arg("v"));

  // correlations
  m.def(
      "autocorrelation",
      [](const CArray& u, std::uint64_t H, bool log, const std::string& method) {
        const auto t = autocorrelation(as_sequence(u), H, log ? Averaging::Logarithmic : Averaging::Cesaro,
                                       parse_method(method));
        CArray out(static_cast<py::ssize_t>(t.gamma.size()));
        std::copy(t.gamma.begin(), t.gamma.end(), out.mutable_data());
        return out;
      },
      py::arg("u"), py::arg("H"), py::arg("log") = false, py::arg("method") = "auto");
  m.def(
      "short_interval", [](const CArray& u, std::uint64_t H, std::uint64_t N, bool log) {
        return report(short_interval_stat(as_sequence(u), H, N ? N : u.size(), stat_options(log)));
      },
      py::arg("u"), py::arg("H"), py::arg("N") = 0, py::arg("log") = false);
  m.def(
      "u1_norm", [](const CArray& u, std::uint64_t H, std::uint64_t N, bool log) {
        return report(u1_norm_estimate(as_sequence(u), H, N ? N : u.size(), stat_options(log)));
      },
      py::arg("u"), py::arg("H"), py::arg("N") = 0, py::arg("log") = false);
  m.def(
      "averaged_chowla", [](const CArray& u, std::uint64_t H, std::uint64_t N, bool log) {
        return report(averaged_chowla_stat(as_sequence(u), H, N ? N : u.size(), stat_options(log)));
      },
      py::arg("u"), py::arg("H"), py::arg("N") = 0, py::arg("log") = false);
  m.def(
      "progression", [](const CArray& u, std::uint64_t H, std::uint64_t Q, std::uint64_t N, bool log) {
        return report(progression_stat(as_sequence(u), H, Q, N ? N : u.size(), stat_options(log)));
      },
      py::arg("u"), py::arg("H"), py::arg("Q"), py::arg("N") = 0, py::arg("log") = false);

  // spectral
  m.def(
      "spectral_summary",
      [](const CArray& u, std::uint64_t H, std::vector<std::uint64_t> q) {
        const auto acf = autocorrelation(as_sequence(u), H);
        py::dict d = to_py(to_json(wiener_atom_mass(acf)));
        py::dict rational;
        for (auto qq : q) rational[py::int_(qq)] = rational_atom_mass(acf, qq);
        d["rational"] = rational;
        return d;
      },
      py::arg("u"), py::arg("H"), py::arg("q") = std::vector<std::uint64_t>{});

  // systems
  m.def(
      "orbit",
      [](const std::string& kind, std::vector<double> params, const std::string& observable,
         std::vector<double> x0, std::uint64_t N) {
        SystemSpec s;
        s.kind = kind;
        s.observable = observable;
        if (kind == "heisenberg") {
          if (params.size() != 3) fail(ErrorKind::InvalidArgument, "heisenberg needs params (a, b, c)");
          s.g = {params[0], params[1], params[2]};
        } else {
          if (!params.empty()) s.alpha = params[0];
          if (params.size() > 1) s.beta = params[1];
        }
        const OrbitSystem sys = s.system();
        sys.validate();
        if (x0.empty()) x0.assign(sys.dimension(), 0.0);
        return as_array(orbit_evaluate(sys, x0, N));
      },
      py::arg("kind"), py::arg("params"), py::arg("observable") = "", py::arg("x0") = std::vector<double>{},
      py::arg("N"));

  // joinings
  m.def(
      "coupling_allocate",
      [](std::vector<double> kappa, std::vector<double> lambda, double eps, std::vector<std::uint64_t> counts,
         std::uint64_t N) {
        CouplingSpec spec{std::move(kappa), std::move(lambda), eps};
        const auto a = coupling_allocate(spec, counts, N);
        return a.cells;
      },
      py::arg("kappa"), py::arg("lam"), py::arg("eps"), py::arg("counts"), py::arg("N"));
  m.def(
      "self_joining",
      [](const CArray& u, std::vector<std::uint64_t> Ns, const std::string& target, const std::string& quantize_mode,
         bool aperiodize) {
        PipelineOptions o;
        o.aperiodize = aperiodize;
        const auto stages = self_joining_pipeline(symbols_of(u, quantize_mode), Ns, JoiningTarget::parse(target), o);
        py::list out;
        for (const auto& st : stages) out.append(py::make_tuple(as_array(st.phi), to_py(to_json(st.report))));
        return out;
      },
      py::arg("u"), py::arg("Ns"), py::arg("target") = "product", py::arg("quantize") = "signs",
      py::arg("aperiodize") = false);
  m.def(
      "product_projection",
      [](const CArray& u, const py::array_t<std::uint64_t, py::array::c_style | py::array::forcecast>& phi,
         std::uint64_t M, unsigned k, const std::string& quantize_mode) {
        return report(product_projection_check(symbols_of(u, quantize_mode), as_permutation(phi), M, k));
      },
      py::arg("u"), py::arg("phi"), py::arg("M"), py::arg("k") = 1, py::arg("quantize") = "signs");

  // experiments
  m.def(
      "run_experiment",
      [](const py::object& config, std::optional<std::filesystem::path> cache_dir) {
        RunOptions o;
        o.cache_dir = std::move(cache_dir);
        const ResultRecord r = run_experiment(parse_config(from_py(config)), o);
        return to_py(r.to_json());
      },
      py::arg("config"), py::arg("cache_dir") = py::none());
  m.def("load_config", [](const std::filesystem::path& p) { return to_py(load_config_file(p)); }, py::arg("path"));
}
