#include <fftw3.h>
#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "phaseflow/cli.hpp"
#include "phaseflow/error.hpp"
#include "phaseflow/export.hpp"
#include "phaseflow/parallel.hpp"
#include "phaseflow/quantize.hpp"

namespace phaseflow::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

json point_json(const PhasePoint& p) {
  return {{"x", p.x}, {"xi", p.xi}};
}

// Artifacts in creation order; filtered by extension at commit time.
struct Bundle {
  std::vector<std::pair<std::string, std::string>> files;
  json summary = json::object();
  Warnings warnings;

  void add(const std::string& name, std::string content) { files.emplace_back(name, std::move(content)); }
};

Signal signal_from(const RunConfig& c) {
  Signal f(c.grid);
  for (const auto& term : c.signal) {
    const Signal g = coherent_state(term.y, term.eta, c.grid);
    const Complex amp(term.re, term.im);
    for (std::size_t j = 0; j < f.values.size(); ++j) f.values[j] += amp * g.values[j];
  }
  return f;
}

void stage_parse_check(const RunConfig& c, const Symbols& sym, Bundle& out) {
  json closure = json::object();
  auto table = [&](const char* name, const SymbolExpr& q) {
    json entries = json::array();
    int max_order = 0;
    for (const auto& [idx, d] : derivative_table(q, 0, c.order_cap)) {
      entries.push_back({{"index", idx.str()}, {"order", idx.order()}, {"expr", d.str()}});
      max_order = std::max(max_order, idx.order());
    }
    closure[name] = {{"expr", q.str()}, {"count", entries.size()}, {"max_order", max_order}};
    return entries;
  };
  json derivs;
  derivs["a"] = table("a", sym.a);
  if (sym.b) derivs["b"] = table("b", *sym.b);
  if (c.mizohata) {
    json b1 = json::array();
    for (const auto& text : c.mizohata->b1) b1.push_back(parse_symbol(text, c.dim).str());
    closure["mizohata_b1"] = b1;
  }
  closure["order_cap"] = c.order_cap;
  out.summary["parse-check"] = closure;
  out.add("derivatives.json", dump_json(derivs));
}

void stage_flow(const RunConfig& c, const Symbols& sym, Bundle& out) {
  const auto trajectories = integrate_ensemble(sym.a, c.seeds, c.s, c.t_end, c.step);
  std::vector<JacobianFlow> jacobians(c.seeds.size());
  parallel_for(c.seeds.size(), [&](std::size_t i) {
    jacobians[i] = variational_flow(sym.a, c.seeds[i], c.s, c.t_end, c.step);
  });
  const BilipschitzReport bl = bilipschitz_report(sym.a, c.seeds, c.s, c.t_end, c.step);

  json endpoints = json::array();
  for (const auto& tr : trajectories)
    endpoints.push_back({{"seed", point_json(tr.seed)}, {"end", point_json(tr.end())}});
  json report = {{"bilipschitz", to_json(bl)},
                 {"endpoints", endpoints},
                 {"label", "grid lower bound over the configured seeds"}};
  out.summary["flow"] = {{"seeds", c.seeds.size()}, {"bilipschitz", to_json(bl)}};
  out.add("trajectories.csv", csv_trajectories(trajectories));
  out.add("jacobians.csv", csv_jacobians(jacobians));
  out.add("flow.json", dump_json(report));
}

void stage_kappa(const RunConfig& c, const Symbols& sym, Bundle& out) {
  const QuadControl quad{c.step.h, c.s, c.t_end};
  SymbolClassReport r = kappa_constants(sym.a, sym.b, c.order_cap, c.seeds, quad);
  r.M = sym.b ? growth_constant_M(*sym.b, sym.a, c.seeds, quad) : 0.0;
  if (!c.h_list.empty()) r.omega = equiintegrability_modulus(sym.a, c.h_list, c.seeds, quad);
  if (c.mizohata) {
    std::vector<SymbolExpr> b1;
    for (const auto& text : c.mizohata->b1) b1.push_back(parse_symbol(text, c.dim));
    r.mizohata = mizohata_constant(b1, c.mizohata->rays, c.mizohata->dr);
  }
  json report = to_json(r);
  if (c.smallness_check) {
    const SmallnessResult sm = smallness_check(r, c.N, c.threshold);
    report["smallness_margin"] = sm.margin;
    report["smallness"] = {{"N", c.N}, {"margin", sm.margin}, {"threshold", c.threshold}, {"satisfied", sm.satisfied}};
  }
  report["label"] = "grid lower bound over the configured seeds";
  out.summary["kappa"] = {{"kappa0", *r.kappa0}, {"M", *r.M}};
  if (report.contains("smallness")) out.summary["kappa"]["smallness"] = report["smallness"];
  out.add("symbol_constants.csv", csv_symbol_constants(r));
  out.add("kappa.json", dump_json(report));
}

void stage_transform(const RunConfig& c, const Symbols&, Bundle& out) {
  const Signal f = signal_from(c);
  const PhaseField v = bargmann_forward(f, &out.warnings);
  const Signal back = bargmann_inverse(v, &out.warnings);
  const CrResidual cr = cr_residual(v);
  Signal diff(c.grid);
  for (std::size_t j = 0; j < f.values.size(); ++j) diff.values[j] = back.values[j] - f.values[j];
  const double nf = f.norm();
  json report = {{"signal_norm", nf},
                 {"transform_norm", v.norm()},
                 {"isometry_defect", std::abs(v.norm() / nf - 1.0)},
                 {"inversion_error", diff.norm() / nf},
                 {"cr_residual_rel", cr.rel_norm},
                 {"cr_residual_sup", cr.sup_norm},
                 {"boundary_mass", boundary_mass(v)}};
  out.summary["transform"] = report;
  SvgOptions svg;
  svg.title = "|Tf|";
  out.add("signal.csv", csv_signal(f));
  out.add("transform.csv", csv_phase_field(v));
  out.add("transform.json", dump_json(report));
  out.add("transform.svg", svg_heatmap(v, svg));
}

void stage_propagate(const RunConfig& c, const Symbols& sym, Bundle& out) {
  const Signal u0 = signal_from(c);
  const PropagatorTrace trace = propagate(sym.a, sym.b, u0, c.s, c.t_end, c.propagate_steps);
  double drift = 0.0;
  for (double n : trace.norms) drift = std::max(drift, std::abs(n - trace.norms.front()));
  json report = {{"nsteps", c.propagate_steps},
                 {"initial_norm", trace.norms.front()},
                 {"final_norm", trace.norms.back()},
                 {"max_norm_drift", drift},
                 {"sign_convention", kSignConvention}};
  out.summary["propagate"] = report;
  out.add("propagator.csv", csv_propagator(trace));
  out.add("final_state.csv", csv_signal(trace.states.back()));
  out.add("propagate.json", dump_json(report));
}

void stage_kernel(const RunConfig& c, const Symbols& sym, Bundle& out) {
  json summary = json::array();
  for (std::size_t i = 0; i < c.sources.size(); ++i) {
    const KernelSlice slice =
        phase_kernel_slice(sym.a, sym.b, c.sources[i], c.s, c.t_end, c.grid, c.kernel_steps, c.step);
    const DecayFit fit = decay_fit(slice, c.fit);
    const PhasePoint peak = slice_peak(slice);
    const double cells = std::max(std::abs(peak.x[0] - slice.flow_image.x[0]) / c.grid.dx(),
                                  std::abs(peak.xi[0] - slice.flow_image.xi[0]) / c.grid.dxi());
    json report = {{"source", point_json(slice.source)},
                   {"s", slice.s},
                   {"t", slice.t},
                   {"flow_image", point_json(slice.flow_image)},
                   {"peak", point_json(peak)},
                   {"peak_offset_cells", cells},
                   {"decay_fit", to_json(fit)}};
    summary.push_back({{"source", point_json(slice.source)},
                       {"flow_image", point_json(slice.flow_image)},
                       {"peak_offset_cells", cells},
                       {"N_hat", fit.fitted_exponent},
                       {"C", fit.fitted_constant},
                       {"residual", fit.residual}});
    SvgOptions svg;
    svg.log_scale = true;
    svg.marker = slice.flow_image;
    svg.title = "log10 |K|, source " + format_real(slice.source.x[0]) + ", " + format_real(slice.source.xi[0]);
    const std::string tag = "kernel_" + std::to_string(i);
    out.add(tag + ".csv", csv_kernel_slice(slice));
    out.add("decay_" + std::to_string(i) + ".json", dump_json(report));
    out.add(tag + ".svg", svg_heatmap(slice.values, svg));
  }
  out.summary["kernel"] = summary;
}

using Stage = void (*)(const RunConfig&, const Symbols&, Bundle&);

struct StageEntry {
  const char* name;
  Stage fn;
  bool one_dimensional;
};

const StageEntry kStages[] = {
    {"parse-check", stage_parse_check, false}, {"flow", stage_flow, false},
    {"kappa", stage_kappa, false},             {"transform", stage_transform, true},
    {"propagate", stage_propagate, true},      {"kernel", stage_kernel, true},
};

json versions() {
  return {{"phaseflow", kVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"fftw", std::string(fftw_version)},
          {"openssl", std::string(OpenSSL_version(OPENSSL_VERSION))},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"compiler", std::string(__VERSION__)}};
}

bool wanted(const RunConfig& c, const std::string& name) {
  const auto dot = name.rfind('.');
  return c.formats.count(name.substr(dot + 1)) > 0;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.close();
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

// Writes every file into a sibling temporary directory, then swaps it into
// place; a previous bundle at `target` is replaced only after the new one is
// complete.
void commit(const fs::path& target, const std::vector<std::pair<std::string, std::string>>& files) {
  const fs::path parent = target.has_parent_path() ? target.parent_path() : fs::path(".");
  fs::create_directories(parent);
  const std::string stem = target.filename().string();
  const std::string suffix = std::to_string(::getpid());
  const fs::path tmp = parent / ("." + stem + ".tmp-" + suffix);
  const fs::path old = parent / ("." + stem + ".old-" + suffix);
  fs::remove_all(tmp);
  fs::create_directory(tmp);
  try {
    for (const auto& [name, content] : files) write_file(tmp / name, content);
    if (fs::exists(target)) fs::rename(target, old);
    fs::rename(tmp, target);
    fs::remove_all(old);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    if (fs::exists(old, ec) && !fs::exists(target, ec)) fs::rename(old, target, ec);
    throw;
  }
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("PHASEFLOW_THREADS"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1 || v > 1024)
      throw ConfigError(std::string("PHASEFLOW_THREADS: expected a positive integer, found '") + env + "'");
    return static_cast<int>(v);
  }
  return 0;
}

}  // namespace

int run(const Options& options) {
  RunConfig config;
  Symbols sym{SymbolExpr::constant(0.0, 1), std::nullopt};
  try {
    if (std::find(kCommands.begin(), kCommands.end(), options.command) == kCommands.end())
      throw ConfigError("unknown command '" + options.command + "'");
    set_thread_count(resolve_threads(options.threads));
    config = load_config(options.config_path);
    sym = validate(config, options.command);
  } catch (const ConfigError& e) {
    std::cerr << "phaseflow: validation failed: " << e.what() << "\n";
    return kExitValidation;
  }
  const fs::path target = options.out ? fs::path(*options.out) : fs::path(config.directory);

  json manifest;
  manifest["tool"] = "phaseflow";
  manifest["command"] = options.command;
  manifest["config"] = config_echo(config);
  manifest["versions"] = versions();
  manifest["conventions"] = {
      {"sign", kSignConvention},
      {"equation", "(D_t + a^w + i b^w) u = 0, du/dt = -i a^w u + b^w u"},
      {"bargmann", "(Tf)(x,xi) = 2^{-1/2} pi^{-3/4} int exp(-(x-y)^2/2 + i xi (x-y)) f(y) dy"},
      {"kernel_slice", "K = T S(t,s) T* delta_(y,eta) = 2^{-1/2} pi^{-1/2} T S(t,s) coherent_state(y,eta)"},
      {"decay_distance", "l1: |x - x^t| + |xi - xi^t|"},
      {"float_format", "%.17g"}};

  Bundle bundle;
  json stages = json::array();
  json skipped = json::array();
  json timings = json::object();
  int code = kExitOk;
  try {
    for (const auto& st : kStages) {
      if (options.command != "all" && options.command != st.name) continue;
      if (options.command == "all" && st.one_dimensional && config.dim != 1) {
        skipped.push_back(st.name);
        continue;
      }
      const auto t0 = std::chrono::steady_clock::now();
      try {
        st.fn(config, sym, bundle);
      } catch (const Error& e) {
        manifest["error"] = {{"stage", st.name}, {"kind", error_kind_name(e.kind())}, {"message", e.what()}};
        throw;
      } catch (const std::exception& e) {
        manifest["error"] = {{"stage", st.name}, {"kind", "Internal"}, {"message", e.what()}};
        throw;
      }
      stages.push_back(st.name);
      timings[st.name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  } catch (const std::exception& e) {
    std::cerr << "phaseflow: " << manifest["error"]["stage"].get<std::string>()
              << " failed: " << e.what() << "\n";
    code = kExitNumerical;
    bundle.files.clear();  // partial artifacts are not kept
  }

  std::vector<std::pair<std::string, std::string>> files;
  json artifacts = json::array();
  for (auto& [name, content] : bundle.files) {
    if (!wanted(config, name)) continue;
    artifacts.push_back({{"path", name}, {"bytes", content.size()}, {"sha256", sha256_hex(content)}});
    files.emplace_back(name, std::move(content));
  }
  manifest["status"] = code == kExitOk ? "ok" : "numerical failure";
  manifest["stages"] = stages;
  if (!skipped.empty()) manifest["skipped_stages"] = skipped;
  manifest["artifacts"] = artifacts;
  manifest["results"] = code == kExitOk ? bundle.summary : json::object();
  manifest["warnings"] = bundle.warnings;
  if (options.timings) manifest["timings_seconds"] = timings;
  files.emplace_back("manifest.json", dump_json(manifest));

  try {
    commit(target, files);
  } catch (const std::exception& e) {
    std::cerr << "phaseflow: cannot write bundle " << target << ": " << e.what() << "\n";
    return kExitValidation;
  }
  return code;
}

int main_entry(int argc, char** argv) {
  CLI::App app{"Phase-space analysis of Schrodinger-type evolutions"};
  app.name("phaseflow");
  Options opts;
  app.add_option("command", opts.command, "parse-check | flow | kappa | transform | propagate | kernel | all")
      ->required()
      ->check(CLI::IsMember(kCommands));
  app.add_option("config", opts.config_path, "JSON run configuration")->required();
  std::string out;
  app.add_option("-o,--out", out, "bundle directory (overrides output.directory)");
  app.add_option("-t,--threads", opts.threads, "cap on OpenMP threads (also PHASEFLOW_THREADS)")
      ->check(CLI::PositiveNumber);
  app.add_flag("--timings", opts.timings, "record stage wall times in the manifest");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }
  if (!out.empty()) opts.out = out;
  return run(opts);
}

}  // namespace phaseflow::cli
