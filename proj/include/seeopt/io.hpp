#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "seeopt/adjoint.hpp"
#include "seeopt/config.hpp"
#include "seeopt/forward.hpp"
#include "seeopt/optimizer.hpp"
#include "seeopt/problem.hpp"
#include "seeopt/variational.hpp"

namespace seeopt {

/// Ordered JSON so serialized reports are byte-stable across runs.
using Json = nlohmann::ordered_json;

/// Shortest round-trip decimal form of a double ("%.17g" trimmed); CSV and
/// JSON both use it, so files are bit-reproducible.
std::string format_double(double v);

/// FNV-1a 64-bit over the raw bytes; identifies file contents in manifests.
std::uint64_t content_hash(const std::string& bytes);

/// States long-format CSV: path, step, t, x0..x{n-1}; one row per
/// (path, grid point).
std::string states_csv(const StateEnsemble& ensemble, const TimeGrid& grid);

/// Control CSV: step, t, nu0..nu{m-1} (deterministic controls), or
/// path, step, t, ... for per-path controls.
std::string control_csv(const ControlProcess& control, const TimeGrid& grid);

/// Adjoint long-format CSV: path, step, t, y0.., z00.. (z flattened
/// column-major, n_state x n_noise).
std::string adjoint_csv(const AdjointPair& pair, const TimeGrid& grid, int n_state, int n_noise);

/// Optimizer trace CSV: iter, cost, cost_se, grad_norm, gamma, backtracks,
/// accepted, polish.
std::string trace_csv(const std::vector<IterationRecord>& trace);

Json to_json(const RatePoint& point);
Json to_json(const RateReport& report);
Json to_json(const DualityReport& report);
Json to_json(const InequalityReport& report);
Json to_json(const DerivativeReport& report);
Json to_json(const OptimalityCertificate& cert);
Json to_json(const GateauxReport& report);
Json to_json(const AdjointDiagnostics& diagnostics);

/// Writes bytes to dir/name (creating dir), returns the (name, hash) pair
/// recorded in the manifest.
struct WrittenFile {
  std::string name;
  std::uint64_t hash = 0;
};
WrittenFile write_file(const std::string& dir, const std::string& name,
                       const std::string& bytes);

/// Manifest JSON: the full config echo, the effective seed, and the
/// name -> content hash table of every file the command wrote. Sufficient
/// to reproduce the run exactly.
Json make_manifest(const ScenarioConfig& config, const std::vector<WrittenFile>& files);

}  // namespace seeopt
