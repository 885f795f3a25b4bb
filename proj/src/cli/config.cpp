#include <cmath>
#include <fstream>
#include <sstream>

#include "phaseflow/cli.hpp"
#include "phaseflow/error.hpp"

namespace phaseflow::cli {

namespace {

using nlohmann::json;

const char* type_name(const json& j) {
  switch (j.type()) {
    case json::value_t::null: return "null";
    case json::value_t::boolean: return "boolean";
    case json::value_t::string: return "string";
    case json::value_t::array: return "array";
    case json::value_t::object: return "object";
    default: return "number";
  }
}

// A JSON object whose keys are consumed one by one; leftovers are errors.
class Section {
 public:
  Section(const json& j, std::string path, const std::string& origin)
      : j_(j), path_(std::move(path)), origin_(origin) {
    if (!j_.is_object()) fail(path_, std::string("expected an object, found ") + type_name(j_));
  }

  [[noreturn]] void fail(const std::string& where, const std::string& what) const {
    throw ConfigError(origin_ + ": " + (where.empty() ? "/" : where) + ": " + what);
  }

  std::string at(const std::string& key) const { return path_ + "/" + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  double number(const std::string& key, double fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    return as_number(*v, at(key));
  }

  double as_number(const json& v, const std::string& where) const {
    if (!v.is_number()) fail(where, std::string("expected a number, found ") + type_name(v));
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(where, "expected a finite number");
    return d;
  }

  long long integer(const std::string& key, long long fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    return as_integer(*v, at(key));
  }

  long long as_integer(const json& v, const std::string& where) const {
    if (!v.is_number_integer()) fail(where, std::string("expected an integer, found ") + type_name(v));
    return v.get<long long>();
  }

  bool boolean(const std::string& key, bool fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_boolean()) fail(at(key), std::string("expected a boolean, found ") + type_name(*v));
    return v->get<bool>();
  }

  std::optional<std::string> text(const std::string& key) {
    const json* v = find(key);
    if (!v || v->is_null()) return std::nullopt;
    if (!v->is_string()) fail(at(key), std::string("expected a string, found ") + type_name(*v));
    return v->get<std::string>();
  }

  const json& array(const json& v, const std::string& where) const {
    if (!v.is_array()) fail(where, std::string("expected an array, found ") + type_name(v));
    return v;
  }

  std::vector<double> numbers(const json& v, const std::string& where) const {
    std::vector<double> out;
    const json& arr = array(v, where);
    for (std::size_t i = 0; i < arr.size(); ++i)
      out.push_back(as_number(arr[i], where + "/" + std::to_string(i)));
    return out;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) fail(at(it.key()), "unknown key");
  }

  const std::string& origin() const { return origin_; }

 private:
  const json& j_;
  std::string path_;
  const std::string& origin_;
  std::set<std::string> seen_;
};

const json kEmpty = json::object();

const json& child(Section& parent, const std::string& key) {
  const json* v = parent.find(key);
  return v ? *v : kEmpty;
}

std::vector<double> lattice_axis(Section& sec, const json& v, const std::string& where) {
  const auto spec = sec.numbers(v, where);
  if (spec.size() != 3) sec.fail(where, "expected [lo, hi, count]");
  const double count = spec[2];
  if (count < 1 || count != std::floor(count)) sec.fail(where + "/2", "count must be a positive integer");
  if (spec[1] < spec[0]) sec.fail(where, "hi must not be below lo");
  std::vector<double> out;
  const auto n = static_cast<std::size_t>(count);
  for (std::size_t k = 0; k < n; ++k)
    out.push_back(n == 1 ? spec[0] : spec[0] + (spec[1] - spec[0]) * static_cast<double>(k) / static_cast<double>(n - 1));
  return out;
}

// Packed point [x1..xn, xi1..xin].
PhasePoint point_from(Section& sec, const json& v, const std::string& where, int dim) {
  const auto c = sec.numbers(v, where);
  if (c.size() != static_cast<std::size_t>(2 * dim))
    sec.fail(where, "expected " + std::to_string(2 * dim) + " coordinates (x then xi), found " +
                        std::to_string(c.size()));
  const auto n = static_cast<std::ptrdiff_t>(dim);
  return PhasePoint(std::vector<double>(c.begin(), c.begin() + n), std::vector<double>(c.begin() + n, c.end()));
}

std::vector<PhasePoint> points_from(Section& sec, const json& v, const std::string& where, int dim) {
  std::vector<PhasePoint> out;
  const json& arr = sec.array(v, where);
  for (std::size_t i = 0; i < arr.size(); ++i)
    out.push_back(point_from(sec, arr[i], where + "/" + std::to_string(i), dim));
  return out;
}

void read_seeds(Section& flow, RunConfig& c) {
  const json* v = flow.find("seeds");
  const std::string where = flow.at("seeds");
  if (!v) {
    c.seeds_spec = {{"lattice", {{"x", {-2.0, 2.0, 3}}, {"xi", {-2.0, 2.0, 3}}}}};
    v = &c.seeds_spec;
  } else {
    c.seeds_spec = *v;
  }
  if (v->is_array()) {
    c.seeds = points_from(flow, *v, where, c.dim);
    if (c.seeds.empty()) flow.fail(where, "at least one seed is required");
    return;
  }
  Section spec(*v, where, flow.origin());
  const json& lat = child(spec, "lattice");
  spec.finish();
  Section ls(lat, where + "/lattice", flow.origin());
  const json* xs = ls.find("x");
  const json* xis = ls.find("xi");
  if (!xs || !xis) ls.fail(where + "/lattice", "needs both x and xi as [lo, hi, count]");
  const auto ax = lattice_axis(ls, *xs, where + "/lattice/x");
  const auto axi = lattice_axis(ls, *xis, where + "/lattice/xi");
  ls.finish();
  // Product over the 2n coordinates, last xi coordinate fastest.
  const std::size_t n = static_cast<std::size_t>(c.dim);
  std::vector<std::size_t> idx(2 * n, 0);
  const double total = std::pow(static_cast<double>(ax.size()), static_cast<double>(n)) *
                       std::pow(static_cast<double>(axi.size()), static_cast<double>(n));
  if (total > 1e5) ls.fail(where + "/lattice", "more than 100000 seeds");
  for (;;) {
    PhasePoint p{std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
      p.x[i] = ax[idx[i]];
      p.xi[i] = axi[idx[n + i]];
    }
    c.seeds.push_back(std::move(p));
    std::size_t k = 2 * n;
    while (k > 0) {
      --k;
      const std::size_t size = k < n ? ax.size() : axi.size();
      if (++idx[k] < size) break;
      idx[k] = 0;
      if (k == 0) return;
    }
  }
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    std::string msg = e.what();
    if (auto pos = msg.find("parse error"); pos != std::string::npos) msg = msg.substr(pos);
    throw ConfigError(origin + ": byte " + std::to_string(e.byte) + ": malformed JSON (" + msg + ")");
  }

  RunConfig c;
  c.origin = origin;
  Section top(root, "", origin);

  {
    Section sym(child(top, "symbols"), "/symbols", origin);
    const auto a = sym.text("a");
    if (!a) sym.fail("/symbols/a", "required string is missing");
    c.a = *a;
    c.b = sym.text("b");
    const long long dim = sym.integer("dim", 1);
    if (dim < 1 || dim > 8) sym.fail("/symbols/dim", "must be between 1 and 8");
    c.dim = static_cast<int>(dim);
    sym.finish();
  }
  {
    Section g(child(top, "grid"), "/grid", origin);
    c.grid.L = g.number("L", c.grid.L);
    c.grid.Xi = g.number("Xi", c.grid.Xi);
    const long long nx = g.integer("Nx", static_cast<long long>(c.grid.Nx));
    const long long nxi = g.integer("Nxi", static_cast<long long>(c.grid.Nxi));
    if (nx < 8 || nx > 4096) g.fail("/grid/Nx", "must be between 8 and 4096");
    if (nxi < 8 || nxi > 4096) g.fail("/grid/Nxi", "must be between 8 and 4096");
    c.grid.Nx = static_cast<std::size_t>(nx);
    c.grid.Nxi = static_cast<std::size_t>(nxi);
    g.finish();
  }
  {
    Section f(child(top, "flow"), "/flow", origin);
    read_seeds(f, c);
    c.s = f.number("s", c.s);
    c.t_end = f.number("t_end", c.t_end);
    c.step.h = f.number("h", c.step.h);
    c.step.tol = f.number("tol", c.step.tol);
    c.step.blowup = f.number("blowup", c.step.blowup);
    if (!(c.step.h > 0.0)) f.fail("/flow/h", "must be positive");
    if (c.step.tol < 0.0) f.fail("/flow/tol", "must not be negative");
    if (!(c.step.blowup > 0.0)) f.fail("/flow/blowup", "must be positive");
    f.finish();
  }
  {
    Section d(child(top, "diagnostics"), "/diagnostics", origin);
    const long long cap = d.integer("order_cap", c.order_cap);
    if (cap < 2 || cap > 24) d.fail("/diagnostics/order_cap", "must be between 2 and 24");
    c.order_cap = static_cast<int>(cap);
    const long long N = d.integer("N", c.N);
    if (N < 1) d.fail("/diagnostics/N", "must be a positive integer");
    c.N = static_cast<int>(N);
    if (const json* h = d.find("h_list")) {
      c.h_list = d.numbers(*h, "/diagnostics/h_list");
      for (std::size_t i = 0; i < c.h_list.size(); ++i)
        if (!(c.h_list[i] > 0.0)) d.fail("/diagnostics/h_list/" + std::to_string(i), "must be positive");
    }
    c.threshold = d.number("threshold", c.threshold);
    if (!(c.threshold > 0.0)) d.fail("/diagnostics/threshold", "must be positive");
    c.smallness_check = d.boolean("smallness_check", c.smallness_check);
    if (const json* m = d.find("mizohata")) {
      Section ms(*m, "/diagnostics/mizohata", origin);
      MizohataConfig mc;
      const json* b1 = ms.find("b1");
      if (!b1) ms.fail("/diagnostics/mizohata/b1", "required array of strings is missing");
      const json& arr = ms.array(*b1, "/diagnostics/mizohata/b1");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_string())
          ms.fail("/diagnostics/mizohata/b1/" + std::to_string(i), "expected a string");
        mc.b1.push_back(arr[i].get<std::string>());
      }
      auto vectors = [&](const std::string& key) {
        std::vector<std::vector<double>> out;
        const json* v = ms.find(key);
        const std::string where = "/diagnostics/mizohata/" + key;
        if (!v) ms.fail(where, "required array is missing");
        const json& a = ms.array(*v, where);
        for (std::size_t i = 0; i < a.size(); ++i) {
          out.push_back(ms.numbers(a[i], where + "/" + std::to_string(i)));
          if (out.back().size() != static_cast<std::size_t>(c.dim))
            ms.fail(where + "/" + std::to_string(i), "expected " + std::to_string(c.dim) + " components");
        }
        if (out.empty()) ms.fail(where, "must not be empty");
        return out;
      };
      mc.rays.bases = vectors("bases");
      mc.rays.directions = vectors("directions");
      const json* radii = ms.find("radii");
      if (!radii) ms.fail("/diagnostics/mizohata/radii", "required array is missing");
      mc.rays.radii = ms.numbers(*radii, "/diagnostics/mizohata/radii");
      if (mc.rays.radii.empty()) ms.fail("/diagnostics/mizohata/radii", "must not be empty");
      mc.dr = ms.number("dr", mc.dr);
      if (!(mc.dr > 0.0)) ms.fail("/diagnostics/mizohata/dr", "must be positive");
      ms.finish();
      c.mizohata = std::move(mc);
    }
    d.finish();
  }
  {
    Section k(child(top, "kernel"), "/kernel", origin);
    if (const json* src = k.find("sources"))
      c.sources = points_from(k, *src, "/kernel/sources", c.dim);
    else
      c.sources = {PhasePoint(std::vector<double>(static_cast<std::size_t>(c.dim), 0.0),
                              std::vector<double>(static_cast<std::size_t>(c.dim), 0.0))};
    const long long ns = k.integer("nsteps", c.kernel_steps);
    if (ns < 1) k.fail("/kernel/nsteps", "must be a positive integer");
    c.kernel_steps = static_cast<int>(ns);
    Section fit(child(k, "fit"), "/kernel/fit", origin);
    const long long bins = fit.integer("bins", static_cast<long long>(c.fit.bins));
    if (bins < 2) fit.fail("/kernel/fit/bins", "must be at least 2");
    c.fit.bins = static_cast<std::size_t>(bins);
    c.fit.threshold = fit.number("threshold", c.fit.threshold);
    if (!(c.fit.threshold > 0.0 && c.fit.threshold < 1.0))
      fit.fail("/kernel/fit/threshold", "must lie in (0, 1)");
    const long long ms = fit.integer("min_samples", static_cast<long long>(c.fit.min_samples));
    if (ms < 2) fit.fail("/kernel/fit/min_samples", "must be at least 2");
    c.fit.min_samples = static_cast<std::size_t>(ms);
    c.fit.min_decades = fit.number("min_decades", c.fit.min_decades);
    if (c.fit.min_decades < 0.0) fit.fail("/kernel/fit/min_decades", "must not be negative");
    c.fit.tail_fraction = fit.number("tail_fraction", c.fit.tail_fraction);
    if (c.fit.tail_fraction < 0.0 || c.fit.tail_fraction >= 1.0)
      fit.fail("/kernel/fit/tail_fraction", "must lie in [0, 1)");
    fit.finish();
    k.finish();
  }
  {
    Section sg(child(top, "signal"), "/signal", origin);
    if (const json* terms = sg.find("coherent")) {
      const json& arr = sg.array(*terms, "/signal/coherent");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string where = "/signal/coherent/" + std::to_string(i);
        Section t(arr[i], where, origin);
        CoherentTerm term;
        term.y = t.number("y", term.y);
        term.eta = t.number("eta", term.eta);
        term.re = t.number("re", term.re);
        term.im = t.number("im", term.im);
        t.finish();
        c.signal.push_back(term);
      }
      if (c.signal.empty()) sg.fail("/signal/coherent", "must not be empty");
    } else {
      c.signal = {CoherentTerm{}};
    }
    sg.finish();
  }
  {
    Section p(child(top, "propagate"), "/propagate", origin);
    const long long ns = p.integer("nsteps", c.propagate_steps);
    if (ns < 1) p.fail("/propagate/nsteps", "must be a positive integer");
    c.propagate_steps = static_cast<int>(ns);
    p.finish();
  }
  {
    Section o(child(top, "output"), "/output", origin);
    if (auto dir = o.text("directory")) {
      if (dir->empty()) o.fail("/output/directory", "must not be empty");
      c.directory = *dir;
    }
    if (const json* f = o.find("formats")) {
      const json& arr = o.array(*f, "/output/formats");
      c.formats.clear();
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string where = "/output/formats/" + std::to_string(i);
        if (!arr[i].is_string()) o.fail(where, "expected a string");
        const auto name = arr[i].get<std::string>();
        if (name != "csv" && name != "json" && name != "svg")
          o.fail(where, "unknown format '" + name + "' (csv, json, svg)");
        c.formats.insert(name);
      }
    }
    o.finish();
  }
  top.finish();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot be read");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

nlohmann::json config_echo(const RunConfig& c) {
  json j;
  j["symbols"] = {{"a", c.a}, {"dim", c.dim}};
  if (c.b) j["symbols"]["b"] = *c.b;
  j["grid"] = {{"L", c.grid.L}, {"Nx", c.grid.Nx}, {"Xi", c.grid.Xi}, {"Nxi", c.grid.Nxi}};
  j["flow"] = {{"seeds", c.seeds_spec}, {"seed_count", c.seeds.size()}, {"s", c.s},       {"t_end", c.t_end},
               {"h", c.step.h},         {"tol", c.step.tol},            {"blowup", c.step.blowup}};
  j["diagnostics"] = {{"order_cap", c.order_cap},
                      {"N", c.N},
                      {"h_list", c.h_list},
                      {"threshold", c.threshold},
                      {"smallness_check", c.smallness_check}};
  if (c.mizohata)
    j["diagnostics"]["mizohata"] = {{"b1", c.mizohata->b1},
                                    {"bases", c.mizohata->rays.bases},
                                    {"directions", c.mizohata->rays.directions},
                                    {"radii", c.mizohata->rays.radii},
                                    {"dr", c.mizohata->dr}};
  json sources = json::array();
  for (const auto& p : c.sources) {
    json q = p.x;
    for (double v : p.xi) q.push_back(v);
    sources.push_back(q);
  }
  j["kernel"] = {{"sources", sources},
                 {"nsteps", c.kernel_steps},
                 {"fit",
                  {{"bins", c.fit.bins},
                   {"threshold", c.fit.threshold},
                   {"min_samples", c.fit.min_samples},
                   {"min_decades", c.fit.min_decades},
                   {"tail_fraction", c.fit.tail_fraction}}}};
  json terms = json::array();
  for (const auto& t : c.signal) terms.push_back({{"y", t.y}, {"eta", t.eta}, {"re", t.re}, {"im", t.im}});
  j["signal"] = {{"coherent", terms}};
  j["propagate"] = {{"nsteps", c.propagate_steps}};
  j["output"] = {{"formats", std::vector<std::string>(c.formats.begin(), c.formats.end())}};
  return j;
}

namespace {

void check_symbol(const std::string& text, int dim, const std::string& where, const std::string& origin) {
  try {
    parse_symbol(text, dim);
  } catch (const SyntaxError& e) {
    throw ConfigError(origin + ": " + where + ": byte " + std::to_string(e.offset()) + ": " + e.what());
  } catch (const UnknownIdentifier& e) {
    throw ConfigError(origin + ": " + where + ": byte " + std::to_string(e.offset()) + ": " + e.what());
  } catch (const DimensionMismatch& e) {
    throw ConfigError(origin + ": " + where + ": byte " + std::to_string(e.offset()) + ": " + e.what());
  } catch (const Error& e) {
    throw ConfigError(origin + ": " + where + ": " + e.what());
  }
}

bool in_margin(const PhasePoint& p, const GridSpec& g) {
  return std::abs(p.x[0]) + 4.0 <= g.L && std::abs(p.xi[0]) + 4.0 <= g.Xi;
}

std::string point_text(const PhasePoint& p) {
  std::string s = "(";
  for (double v : p.x) s += std::to_string(v) + ", ";
  for (std::size_t i = 0; i < p.xi.size(); ++i) s += std::to_string(p.xi[i]) + (i + 1 < p.xi.size() ? ", " : ")");
  return s;
}

}  // namespace

Symbols validate(const RunConfig& c, const std::string& command) {
  const std::string& origin = c.origin;
  check_symbol(c.a, c.dim, "/symbols/a", origin);
  if (c.b) check_symbol(*c.b, c.dim, "/symbols/b", origin);
  Symbols out{parse_symbol(c.a, c.dim), std::nullopt};
  if (c.b) out.b = parse_symbol(*c.b, c.dim);

  try {
    c.grid.validate();
  } catch (const Error& e) {
    throw ConfigError(origin + ": /grid: " + e.what());
  }
  if (c.t_end == c.s && command != "parse-check")
    throw ConfigError(origin + ": /flow/t_end: must differ from /flow/s");
  for (std::size_t i = 0; i < c.seeds.size(); ++i) {
    const auto& p = c.seeds[i];
    for (std::size_t k = 0; k < p.dim(); ++k)
      if (std::abs(p.x[k]) >= c.step.blowup || std::abs(p.xi[k]) >= c.step.blowup)
        throw ConfigError(origin + ": /flow/seeds: seed " + std::to_string(i) + " " + point_text(p) +
                          " lies beyond the blowup bound");
  }
  if (c.smallness_check && 4 * c.N > c.order_cap)
    throw ConfigError(origin + ": /diagnostics/N: 4N = " + std::to_string(4 * c.N) +
                      " exceeds order_cap = " + std::to_string(c.order_cap));
  if (c.mizohata) {
    if (c.mizohata->b1.size() != static_cast<std::size_t>(c.dim))
      throw ConfigError(origin + ": /diagnostics/mizohata/b1: expected " + std::to_string(c.dim) +
                        " components");
    for (std::size_t i = 0; i < c.mizohata->b1.size(); ++i)
      check_symbol(c.mizohata->b1[i], c.dim, "/diagnostics/mizohata/b1/" + std::to_string(i), origin);
  }

  const bool phase_stages = command == "transform" || command == "propagate" || command == "kernel";
  if (phase_stages && c.dim != 1)
    throw ConfigError(origin + ": /symbols/dim: the " + command + " stage supports dim = 1 only");
  if (c.dim == 1) {
    for (std::size_t i = 0; i < c.sources.size(); ++i)
      if (!in_margin(c.sources[i], c.grid))
        throw ConfigError(origin + ": /kernel/sources/" + std::to_string(i) + ": source " +
                          point_text(c.sources[i]) + " needs 4 units of margin inside the window");
    for (std::size_t i = 0; i < c.signal.size(); ++i)
      if (!in_margin(PhasePoint(c.signal[i].y, c.signal[i].eta), c.grid))
        throw ConfigError(origin + ": /signal/coherent/" + std::to_string(i) +
                          ": centre needs 4 units of margin inside the window");
  }
  if (c.sources.empty() && (command == "kernel"))
    throw ConfigError(origin + ": /kernel/sources: at least one source is required");
  return out;
}

}  // namespace phaseflow::cli
