#pragma once

#include <json.hpp>

#include "fslab/correlate.hpp"
#include "fslab/empirics.hpp"
#include "fslab/joinplan.hpp"
#include "fslab/seqgen.hpp"
#include "fslab/spectral.hpp"

namespace fslab {

/// {"stat", "value", "params", "trend", "diagnostics", "notes"}
nlohmann::json to_json(const StatReport& r);
StatReport stat_report_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SpectralSummary& s);
/// {"k", "N", "quantized", "freq": {"len": {"block": f}}}
nlohmann::json to_json(const CylinderTable& t, bool quantized);
/// {"k", "N", "edge_loss", "freq": {"len": {"B|C": f}}}
nlohmann::json to_json(const CouplingTable& t);
nlohmann::json to_json(const TowerAssignment& t);
nlohmann::json to_json(const DynamicPermutationReport& r);
nlohmann::json to_json(const StageReport& r);
nlohmann::json to_json(const seqgen::BlockifyReport& r);
nlohmann::json to_json(const AllocationMatrix& a);

/// Stage report as a StatReport named "self_joining" with value = eval error.
StatReport as_stat_report(const StageReport& r);

}  // namespace fslab
