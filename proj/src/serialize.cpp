#include "fslab/serialize.hpp"

namespace fslab {

using nlohmann::json;

json to_json(const StatReport& r) {
  json trend = json::array();
  for (const auto& [x, y] : r.trend) trend.push_back({x, y});
  return {{"stat", r.name},       {"value", r.value},           {"params", r.params},
          {"trend", trend},       {"diagnostics", r.diagnostics}, {"notes", r.notes}};
}

StatReport stat_report_from_json(const json& j) {
  StatReport r;
  r.name = j.at("stat").get<std::string>();
  r.value = j.at("value").get<double>();
  r.params = j.value("params", std::map<std::string, double>{});
  for (const auto& p : j.value("trend", json::array())) r.trend.emplace_back(p.at(0), p.at(1));
  r.diagnostics = j.value("diagnostics", std::map<std::string, double>{});
  r.notes = j.value("notes", std::vector<std::string>{});
  return r;
}

json to_json(const SpectralSummary& s) {
  json profile = json::object();
  for (const auto& [q, m] : s.rational_profile) profile[std::to_string(q)] = m;
  return {{"H", s.H},
          {"mean_sq", s.mean_sq},
          {"mean_abs_sq", s.mean_abs_sq},
          {"nontrivial_atom_mass", s.nontrivial_atom_mass},
          {"equality_gap", s.equality_gap},
          {"rational_profile", profile}};
}

json to_json(const CylinderTable& t, bool quantized) {
  json freq = json::object();
  for (unsigned len = 1; len <= t.k_max; ++len) {
    json level = json::object();
    for (const auto& [code, count] : t.counts[len - 1]) {
      level[block_string(code, len, t.alphabet_size)] = t.freq(len, code);
    }
    freq[std::to_string(len)] = level;
  }
  return {{"k", t.k_max}, {"N", t.N}, {"alphabet_size", t.alphabet_size}, {"quantized", quantized},
          {"freq", freq}};
}

json to_json(const CouplingTable& t) {
  json freq = json::object();
  for (unsigned len = 1; len <= t.k_max; ++len) {
    json level = json::object();
    for (const auto& [bc, count] : t.counts[len - 1]) {
      level[block_string(bc.first, len, t.alphabet_size) + "|" +
            block_string(bc.second, len, t.alphabet_size)] = t.freq(len, bc.first, bc.second);
    }
    freq[std::to_string(len)] = level;
  }
  return {{"k", t.k_max}, {"N", t.N}, {"edge_loss", t.edge_loss}, {"freq", freq}};
}

json to_json(const TowerAssignment& t) {
  return {{"h", t.h},
          {"N", t.size()},
          {"outside_fraction", t.outside_fraction},
          {"declared_epsilon", t.declared_epsilon},
          {"window", {t.window_begin, t.window_end}},
          {"long_return_fraction", t.long_return_fraction},
          {"flagged", t.flagged},
          {"notes", t.notes}};
}

json to_json(const DynamicPermutationReport& r) {
  return {{"window", {r.window_begin, r.window_end}},
          {"h", r.h},
          {"epsilon", r.epsilon},
          {"name_depth", r.name_depth},
          {"column_classes", r.column_classes},
          {"atoms", r.atoms},
          {"assigned", r.assigned},
          {"window_defects", r.window_defects},
          {"defect_fraction", r.defect_fraction},
          {"defect_bound", r.defect_bound},
          {"ti_violations", r.ti_violations},
          {"q_cell_error", r.q_cell_error},
          {"q_cell_bound", r.q_cell_bound},
          {"refines_q", r.refines_q},
          {"outside_fraction", r.outside_fraction}};
}

json to_json(const StageReport& r) {
  return {{"stage", r.stage},
          {"N", r.N},
          {"epsilon", r.epsilon},
          {"h", r.h},
          {"base_block", r.base_block},
          {"tower_outside", r.tower_outside},
          {"defect_fraction", r.defect_fraction},
          {"eval_error", r.eval_error},
          {"dynamic", to_json(r.dynamic)}};
}

json to_json(const seqgen::BlockifyReport& r) {
  return {{"besicovitch_distance", r.besicovitch_distance},
          {"mean_variation", r.mean_variation},
          {"jump_density", r.jump_density},
          {"max_block_deviation", r.max_block_deviation},
          {"scale_starts", r.scale_starts},
          {"flattened", r.flattened},
          {"flagged", r.flagged}};
}

json to_json(const AllocationMatrix& a) {
  const std::size_t m = a.atoms();
  json rows = json::array();
  for (std::size_t i = 0; i < m; ++i) {
    rows.push_back(std::vector<std::uint64_t>(a.cells.begin() + i * m, a.cells.begin() + (i + 1) * m));
  }
  return {{"N", a.N}, {"counts", a.counts}, {"cells", rows}};
}

StatReport as_stat_report(const StageReport& r) {
  StatReport s;
  s.name = "self_joining";
  s.value = r.eval_error;
  s.params = {{"stage", double(r.stage)}, {"N", double(r.N)}, {"epsilon", r.epsilon}, {"h", double(r.h)}};
  s.diagnostics = {{"defect_fraction", r.defect_fraction},
                   {"window_defect_fraction", r.dynamic.defect_fraction},
                   {"defect_bound", r.dynamic.defect_bound},
                   {"ti_violations", double(r.dynamic.ti_violations)},
                   {"q_cell_error", r.dynamic.q_cell_error},
                   {"q_cell_bound", r.dynamic.q_cell_bound},
                   {"tower_outside", r.tower_outside},
                   {"name_depth", double(r.dynamic.name_depth)}};
  s.notes.push_back("tower base " + r.base_block);
  return s;
}

}  // namespace fslab
