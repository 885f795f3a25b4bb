#include "phaseflow/export.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace phaseflow {

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string header_coords(std::size_t n) {
  if (n == 1) return "x,xi";
  std::string s;
  for (std::size_t i = 1; i <= n; ++i) s += (i > 1 ? ",x" : "x") + std::to_string(i);
  for (std::size_t i = 1; i <= n; ++i) s += ",xi" + std::to_string(i);
  return s;
}

void put_point(std::string& out, const PhasePoint& p) {
  for (double v : p.x) out += "," + format_real(v);
  for (double v : p.xi) out += "," + format_real(v);
}

std::string index_text(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

std::string csv_trajectories(const std::vector<Trajectory>& trajectories) {
  const std::size_t n = trajectories.empty() ? 1 : trajectories.front().seed.dim();
  std::string out = "seed,t," + header_coords(n) + "\n";
  for (std::size_t s = 0; s < trajectories.size(); ++s) {
    const auto& tr = trajectories[s];
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
      out += std::to_string(s) + "," + format_real(tr.times[k]);
      put_point(out, tr.points[k]);
      out += "\n";
    }
  }
  return out;
}

std::string csv_jacobians(const std::vector<JacobianFlow>& flows) {
  const Eigen::Index m = flows.empty() || flows.front().jac.empty() ? 2 : flows.front().jac.front().rows();
  std::string out = "seed,t";
  for (Eigen::Index r = 0; r < m; ++r)
    for (Eigen::Index c = 0; c < m; ++c) out += ",J" + std::to_string(r + 1) + std::to_string(c + 1);
  out += ",a_norm_integral\n";
  for (std::size_t s = 0; s < flows.size(); ++s) {
    const auto& f = flows[s];
    for (std::size_t k = 0; k < f.times.size(); ++k) {
      out += std::to_string(s) + "," + format_real(f.times[k]);
      for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index c = 0; c < m; ++c) out += "," + format_real(f.jac[k](r, c));
      out += "," + format_real(f.a_norm_integral[k]) + "\n";
    }
  }
  return out;
}

std::string csv_signal(const Signal& f) {
  std::string out = "x,re,im\n";
  for (std::size_t j = 0; j < f.values.size(); ++j)
    out += format_real(f.grid.x(j)) + "," + format_real(f.values[j].real()) + "," +
           format_real(f.values[j].imag()) + "\n";
  return out;
}

std::string csv_phase_field(const PhaseField& v) {
  std::string out = "x,xi,re,im\n";
  for (std::size_t m = 0; m < v.grid.Nxi; ++m)
    for (std::size_t j = 0; j < v.grid.Nx; ++j) {
      const Complex z = v.at(j, m);
      out += format_real(v.grid.x(j)) + "," + format_real(v.grid.xi(m)) + "," + format_real(z.real()) +
             "," + format_real(z.imag()) + "\n";
    }
  return out;
}

std::string csv_kernel_slice(const KernelSlice& slice) {
  const auto& g = slice.grid;
  const double x0 = slice.flow_image.x[0], xi0 = slice.flow_image.xi[0];
  std::string out = "x,xi,re,im,dist_to_flow_image\n";
  for (std::size_t m = 0; m < g.Nxi; ++m)
    for (std::size_t j = 0; j < g.Nx; ++j) {
      const Complex z = slice.values.at(j, m);
      const double d = std::abs(g.x(j) - x0) + std::abs(g.xi(m) - xi0);
      out += format_real(g.x(j)) + "," + format_real(g.xi(m)) + "," + format_real(z.real()) + "," +
             format_real(z.imag()) + "," + format_real(d) + "\n";
    }
  return out;
}

std::string csv_propagator(const PropagatorTrace& trace) {
  std::string out = "t,norm\n";
  for (std::size_t k = 0; k < trace.times.size(); ++k)
    out += format_real(trace.times[k]) + "," + format_real(trace.norms[k]) + "\n";
  return out;
}

std::string csv_transport(const TransportSolution& sol) {
  std::string out = "seed,t,re,im,abs,growth_factor,forcing_integral\n";
  for (std::size_t s = 0; s < sol.seeds.size(); ++s)
    for (std::size_t k = 0; k < sol.times.size(); ++k) {
      const Complex v = sol.values[s][k];
      out += std::to_string(s) + "," + format_real(sol.times[k]) + "," + format_real(v.real()) + "," +
             format_real(v.imag()) + "," + format_real(std::abs(v)) + "," +
             format_real(sol.growth_factors[s][k]) + "," + format_real(sol.forcing_integral[s][k]) + "\n";
    }
  return out;
}

std::string csv_symbol_constants(const SymbolClassReport& report) {
  std::string out = "symbol,alpha,beta,order,value\n";
  auto rows = [&](const char* name, const std::map<MultiIndex, double>& table) {
    for (const auto& [idx, v] : table)
      out += std::string(name) + "," + index_text(idx.alpha) + "," + index_text(idx.beta) + "," +
             std::to_string(idx.order()) + "," + format_real(v) + "\n";
  };
  rows("a", report.c_a);
  rows("b", report.c_b);
  return out;
}

namespace {

void dump_value(std::string& out, const nlohmann::json& j, int depth) {
  const std::string pad(2 * static_cast<std::size_t>(depth + 1), ' ');
  const std::string close(2 * static_cast<std::size_t>(depth), ' ');
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad + nlohmann::json(it.key()).dump() + ": ";
        dump_value(out, it.value(), depth + 1);
      }
      out += "\n" + close + "}";
      return;
    }
    case nlohmann::json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        dump_value(out, j[i], depth + 1);
      }
      out += "\n" + close + "]";
      return;
    }
    case nlohmann::json::value_t::number_float: {
      const double v = j.get<double>();
      out += std::isfinite(v) ? format_real(v) : "null";
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace

std::string dump_json(const nlohmann::json& j) {
  std::string out;
  dump_value(out, j, 0);
  return out + "\n";
}

nlohmann::json to_json(const DecayFit& fit) {
  return {{"C", fit.fitted_constant},
          {"N_hat", fit.fitted_exponent},
          {"residual", fit.residual},
          {"rms_misfit_log10", fit.rms_misfit},
          {"decades", fit.decades},
          {"usable_samples", fit.usable_samples},
          {"shell_distances", fit.sample_distances},
          {"shell_maxima", fit.shell_maxima}};
}

nlohmann::json to_json(const SymbolClassReport& r) {
  nlohmann::json j;
  j["order_cap"] = r.order_cap;
  auto table = [](const std::map<MultiIndex, double>& t) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [idx, v] : t) arr.push_back({{"alpha", idx.alpha}, {"beta", idx.beta}, {"value", v}});
    return arr;
  };
  j["c_a"] = table(r.c_a);
  j["c_b"] = table(r.c_b);
  if (r.kappa0) j["kappa0"] = *r.kappa0;
  nlohmann::json kn = nlohmann::json::object();
  for (const auto& [n, v] : r.kappaN) kn[std::to_string(n)] = v;
  j["kappaN"] = kn;
  if (r.M) j["M"] = *r.M;
  if (!r.omega.empty()) {
    nlohmann::json om = nlohmann::json::array();
    for (const auto& [h, w] : r.omega) om.push_back({{"h", h}, {"omega", w}});
    j["omega"] = om;
  }
  if (r.mizohata) j["mizohata"] = *r.mizohata;
  if (r.smallness_margin) j["smallness_margin"] = *r.smallness_margin;
  return j;
}

nlohmann::json to_json(const BilipschitzReport& r) {
  return {{"lip_forward", r.lip_forward},
          {"lip_inverse", r.lip_inverse},
          {"gronwall_margin", r.gronwall_margin},
          {"max_det_defect", r.max_det_defect}};
}

nlohmann::json to_json(const EOperatorResult& r) {
  return {{"lhs_estimate", r.lhs_estimate},   {"rhs_bound", r.rhs_bound},
          {"ratio", r.ratio},                 {"lhs_per_seed", r.lhs_per_seed},
          {"rhs_per_seed", r.rhs_per_seed},   {"weighted_integral", r.weighted_integral}};
}

nlohmann::json to_json(const FtcResult& r) {
  return {{"lhs", r.lhs}, {"rhs", r.rhs}, {"ratio", r.ratio}};
}

std::string svg_heatmap(const PhaseField& v, const SvgOptions& options) {
  const GridSpec& g = v.grid;
  const std::size_t cx = std::min<std::size_t>(std::max<std::size_t>(options.max_cells, 1), g.Nx);
  const std::size_t cm = std::min<std::size_t>(std::max<std::size_t>(options.max_cells, 1), g.Nxi);
  std::vector<double> cell(cx * cm, 0.0);
  for (std::size_t m = 0; m < g.Nxi; ++m)
    for (std::size_t j = 0; j < g.Nx; ++j) {
      const std::size_t bx = j * cx / g.Nx, bm = m * cm / g.Nxi;
      cell[bm * cx + bx] = std::max(cell[bm * cx + bx], std::abs(v.at(j, m)));
    }
  const double peak = *std::max_element(cell.begin(), cell.end());
  auto level = [&](double a) {
    if (peak == 0.0) return 0.0;
    if (!options.log_scale) return a / peak;
    const double floor = peak * 1e-12;
    return (std::log10(std::max(a, floor)) - std::log10(floor)) / 12.0;
  };

  const double px = 6.0;  // pixels per cell
  const double w = px * static_cast<double>(cx), h = px * static_cast<double>(cm);
  const double margin = 40.0;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << format_real(w + 2 * margin)
      << "\" height=\"" << format_real(h + 2 * margin) << "\">\n";
  if (!options.title.empty())
    out << "<text x=\"" << margin << "\" y=\"24\" font-family=\"monospace\" font-size=\"14\">"
        << options.title << "</text>\n";
  out << "<g transform=\"translate(" << margin << "," << margin << ")\" shape-rendering=\"crispEdges\">\n";
  for (std::size_t bm = 0; bm < cm; ++bm)
    for (std::size_t bx = 0; bx < cx; ++bx) {
      const int gray = static_cast<int>(std::lround(255.0 * (1.0 - level(cell[bm * cx + bx]))));
      // xi increases upward.
      out << "<rect x=\"" << format_real(px * static_cast<double>(bx)) << "\" y=\""
          << format_real(h - px * static_cast<double>(bm + 1)) << "\" width=\"" << px << "\" height=\"" << px
          << "\" fill=\"rgb(" << gray << "," << gray << "," << gray << ")\"/>\n";
    }
  if (options.marker) {
    const double mx = (options.marker->x[0] + g.L) / (2 * g.L) * w;
    const double my = h - (options.marker->xi[0] + g.Xi) / (2 * g.Xi) * h;
    out << "<circle id=\"marker\" cx=\"" << format_real(mx) << "\" cy=\"" << format_real(my)
        << "\" r=\"6\" fill=\"none\" stroke=\"red\" stroke-width=\"2\" data-x=\""
        << format_real(options.marker->x[0]) << "\" data-xi=\"" << format_real(options.marker->xi[0])
        << "\"/>\n";
  }
  out << "<rect x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h
      << "\" fill=\"none\" stroke=\"black\"/>\n</g>\n";
  out << "<text x=\"" << margin << "\" y=\"" << format_real(h + margin + 20)
      << "\" font-family=\"monospace\" font-size=\"12\">x in [" << format_real(-g.L) << ", "
      << format_real(g.L) << "), xi in [" << format_real(-g.Xi) << ", " << format_real(g.Xi) << ")"
      << (options.log_scale ? ", log10 |v|" : ", |v|") << "</text>\n</svg>\n";
  return out.str();
}

}  // namespace phaseflow
