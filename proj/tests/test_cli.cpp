#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "phaseflow/cli.hpp"

namespace fs = std::filesystem;
using namespace phaseflow;

namespace {

const fs::path kSource = PHASEFLOW_SOURCE_DIR;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("phaseflow_test_cli_" + name);
  fs::remove_all(p);
  return p;
}

struct Outcome {
  int code;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "phaseflow");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream err;
  auto* old = std::cerr.rdbuf(err.rdbuf());
  const int code = cli::main_entry(static_cast<int>(argv.size()), argv.data());
  std::cerr.rdbuf(old);
  return {code, err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path write_config(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / ("phaseflow_test_cli_" + name + ".json");
  std::ofstream(p) << text;
  return p;
}

std::vector<std::string> last_row(const std::string& csv) {
  std::string body = csv.substr(0, csv.size() - 1);
  std::string line = body.substr(body.rfind('\n') + 1);
  std::vector<std::string> cells;
  std::istringstream in(line);
  for (std::string c; std::getline(in, c, ',');) cells.push_back(c);
  return cells;
}

}  // namespace

TEST_CASE("every example config passes parse-check") {
  int count = 0;
  for (const auto& entry : fs::directory_iterator(kSource / "docs" / "examples")) {
    if (entry.path().extension() != ".json") continue;
    const fs::path out = scratch("example");
    const Outcome r = run_cli({"parse-check", entry.path().string(), "--out", out.string()});
    INFO(entry.path().string(), " ", r.err);
    CHECK(r.code == cli::kExitOk);
    const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
    CHECK(manifest["status"] == "ok");
    CHECK(manifest["results"]["parse-check"]["a"]["max_order"] == manifest["config"]["diagnostics"]["order_cap"]);
    ++count;
  }
  CHECK(count >= 4);
}

TEST_CASE("every broken config fails validation with a located message") {
  const std::map<std::string, std::string> where{
      {"dimension_mismatch.json", "/symbols/a: byte 0"},
      {"fit_threshold.json", "/kernel/fit/threshold"},
      {"grid_not_power_of_two.json", "/grid"},
      {"lattice_incomplete.json", "/flow/seeds/lattice"},
      {"malformed_json.json", "byte 31"},
      {"missing_symbol.json", "/symbols/a"},
      {"negative_step.json", "/flow/h"},
      {"seed_arity.json", "/flow/seeds/0"},
      {"signal_outside_window.json", "/signal/coherent/0"},
      {"smallness_order_cap.json", "/diagnostics/N"},
      {"source_outside_window.json", "/kernel/sources/0"},
      {"syntax_error.json", "/symbols/a: byte 3"},
      {"unknown_format.json", "/output/formats/0"},
      {"unknown_identifier.json", "/symbols/a: byte 0"},
      {"unknown_section.json", "/grdi: unknown key"},
      {"wrong_type.json", "/flow/t_end"},
  };
  std::size_t seen = 0;
  for (const auto& entry : fs::directory_iterator(kSource / "tests" / "configs" / "broken")) {
    const std::string name = entry.path().filename().string();
    const fs::path out = scratch("broken");
    const Outcome r = run_cli({"parse-check", entry.path().string(), "--out", out.string()});
    INFO(name, " ", r.err);
    CHECK(r.code == cli::kExitValidation);
    REQUIRE(where.count(name) == 1);
    CHECK(r.err.find(name + ": " + where.at(name)) != std::string::npos);
    CHECK_FALSE(fs::exists(out));
    ++seen;
  }
  CHECK(seen == where.size());
}

TEST_CASE("usage errors and bad thread settings are validation failures") {
  CHECK(run_cli({"integrate", "x.json"}).code == cli::kExitValidation);
  CHECK(run_cli({"flow"}).code == cli::kExitValidation);
  CHECK(run_cli({"flow", (kSource / "docs/examples/free_particle.json").string(), "--threads", "0"}).code ==
        cli::kExitValidation);
  CHECK(run_cli({"flow", "/nonexistent/config.json"}).code == cli::kExitValidation);
}

TEST_CASE("flow on the oscillator ends at (0, -1)") {
  const fs::path cfg = write_config(
      "osc", R"({"symbols": {"a": "(x^2+xi^2)/2"},
                 "flow": {"seeds": [[1, 0]], "t_end": 1.5707963267948966, "h": 0.001}})");
  const fs::path out = scratch("osc");
  const Outcome r = run_cli({"flow", cfg.string(), "--out", out.string()});
  REQUIRE(r.code == cli::kExitOk);
  const auto row = last_row(slurp(out / "trajectories.csv"));
  REQUIRE(row.size() == 4);
  CHECK(std::abs(std::stod(row[2])) < 1e-8);
  CHECK(std::abs(std::stod(row[3]) + 1.0) < 1e-8);
  CHECK(fs::exists(out / "jacobians.csv"));
  CHECK_FALSE(fs::exists(out / "kernel_0.csv"));
}

TEST_CASE("kernel bundle carries the decay fit and the flow-image marker") {
  const fs::path cfg = write_config(
      "kernel", R"({"symbols": {"a": "xi^2/2"}, "flow": {"t_end": 1}, "kernel": {"sources": [[0, 2]]}})");
  const fs::path out = scratch("kernel");
  const Outcome r = run_cli({"kernel", cfg.string(), "--out", out.string()});
  REQUIRE(r.code == cli::kExitOk);
  const auto fit = nlohmann::json::parse(slurp(out / "decay_0.json"));
  CHECK(fit["decay_fit"]["N_hat"].get<double>() >= 4.0);
  CHECK(std::abs(fit["flow_image"]["x"][0].get<double>() - 2.0) < 1e-12);
  const std::string svg = slurp(out / "kernel_0.svg");
  const auto at = svg.find("<circle id=\"marker\"");
  REQUIRE(at != std::string::npos);
  const std::string circle = svg.substr(at, svg.find("/>", at) - at);
  const auto attr = [&](const std::string& key) {
    const auto p = circle.find(key + "=\"") + key.size() + 2;
    return std::stod(circle.substr(p, circle.find('"', p) - p));
  };
  CHECK(std::abs(attr("data-x") - 2.0) < 1e-9);
  CHECK(std::abs(attr("data-xi") - 2.0) < 1e-9);

  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["conventions"]["sign"] == "D_t = -i d/dt");
  CHECK_FALSE(manifest.contains("timings_seconds"));
  for (const auto& a : manifest["artifacts"]) CHECK(fs::file_size(out / a["path"].get<std::string>()) == a["bytes"]);
}

TEST_CASE("numerical failure exits 3, keeps only the manifest and replaces the old bundle") {
  const fs::path out = scratch("failure");
  fs::create_directories(out);
  std::ofstream(out / "stale.csv") << "old\n";
  // The flow carries the source out of the window before t_end.
  const fs::path cfg = write_config(
      "failure", R"({"symbols": {"a": "6*xi"}, "flow": {"t_end": 1}, "kernel": {"sources": [[4, 0]]}})");
  const Outcome r = run_cli({"kernel", cfg.string(), "--out", out.string()});
  CHECK(r.code == cli::kExitNumerical);
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(out)) files.push_back(e.path().filename().string());
  CHECK(files == std::vector<std::string>{"manifest.json"});
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["status"] == "numerical failure");
  CHECK(manifest["error"]["stage"] == "kernel");
  CHECK(manifest["error"]["kind"] == "OutOfWindow");
  CHECK(manifest["artifacts"].empty());
  for (const auto& e : fs::directory_iterator(out.parent_path()))
    CHECK(e.path().filename().string().find(".phaseflow_test_cli_failure.") == std::string::npos);
}

TEST_CASE("formats filter the artifacts") {
  const fs::path cfg = write_config(
      "formats", R"({"symbols": {"a": "xi^2/2"}, "flow": {"seeds": [[0, 1]]}, "output": {"formats": ["json"]}})");
  const fs::path out = scratch("formats");
  REQUIRE(run_cli({"flow", cfg.string(), "--out", out.string()}).code == cli::kExitOk);
  CHECK(fs::exists(out / "flow.json"));
  CHECK_FALSE(fs::exists(out / "trajectories.csv"));
}

TEST_CASE("bundles do not depend on the thread count") {
  const fs::path cfg = kSource / "docs" / "examples" / "damped_transport.json";
  const fs::path one = scratch("threads1"), four = scratch("threads4");
  REQUIRE(run_cli({"all", cfg.string(), "--out", one.string(), "--threads", "1"}).code == cli::kExitOk);
  REQUIRE(run_cli({"all", cfg.string(), "--out", four.string(), "--threads", "4"}).code == cli::kExitOk);
  std::size_t compared = 0;
  for (const auto& e : fs::directory_iterator(one)) {
    const auto name = e.path().filename();
    INFO(name.string());
    CHECK(slurp(one / name) == slurp(four / name));
    ++compared;
  }
  CHECK(compared >= 15);
}
