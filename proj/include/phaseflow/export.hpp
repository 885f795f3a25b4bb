#pragma once

// Text artifacts. Every real is written with 17 significant digits.

#include <optional>
#include <string>

#include "json.hpp"
#include "phaseflow/phasekernel.hpp"

namespace phaseflow {

/// "%.17g".
std::string format_real(double v);

std::string csv_trajectories(const std::vector<Trajectory>& trajectories);
std::string csv_jacobians(const std::vector<JacobianFlow>& flows);
std::string csv_signal(const Signal& f);
std::string csv_phase_field(const PhaseField& v);
std::string csv_kernel_slice(const KernelSlice& slice);
std::string csv_propagator(const PropagatorTrace& trace);
std::string csv_transport(const TransportSolution& sol);
/// symbol,alpha,beta,order,value for every c^a and c^b entry.
std::string csv_symbol_constants(const SymbolClassReport& report);

/// Two-space indented JSON with sorted keys, reals as "%.17g", non-finite
/// reals as null, trailing newline.
std::string dump_json(const nlohmann::json& j);

nlohmann::json to_json(const DecayFit& fit);
nlohmann::json to_json(const SymbolClassReport& report);
nlohmann::json to_json(const BilipschitzReport& report);
nlohmann::json to_json(const EOperatorResult& result);
nlohmann::json to_json(const FtcResult& result);

struct SvgOptions {
  bool log_scale = false;  // log10 |v| with a floor 12 decades below the peak
  std::size_t max_cells = 64;   // per axis; larger fields are block-maxed
  std::optional<PhasePoint> marker;
  std::string title;
};

/// Grayscale heatmap of |v| on the (x, xi) window (x to the right, xi up).
std::string svg_heatmap(const PhaseField& v, const SvgOptions& options = {});

}  // namespace phaseflow
