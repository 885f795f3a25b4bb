#pragma once

// Config-driven front end: one JSON config per experiment, one report bundle
// per run. Exit codes: 0 ok, 2 validation failure, 3 numerical failure.

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "phaseflow/error.hpp"
#include "phaseflow/grid.hpp"
#include "phaseflow/hamilton.hpp"
#include "phaseflow/phasekernel.hpp"
#include "phaseflow/symbol.hpp"
#include "phaseflow/symclass.hpp"

namespace phaseflow::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr const char* kVersion = "0.1.0";

/// Validation failure; the message starts with its location (a JSON pointer
/// into the config, or a byte offset for malformed JSON).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

struct CoherentTerm {
  double y = 0.0;
  double eta = 0.0;
  double re = 1.0;
  double im = 0.0;
};

struct MizohataConfig {
  std::vector<std::string> b1;
  RayGrid rays;
  double dr = 1e-3;
};

struct RunConfig {
  std::string origin = "config";  // prefix of validation messages

  std::string a;
  std::optional<std::string> b;
  int dim = 1;

  GridSpec grid;

  std::vector<PhasePoint> seeds;
  nlohmann::json seeds_spec;  // as written, for the echo
  double s = 0.0;
  double t_end = 1.0;
  StepControl step;

  int order_cap = kDefaultOrderCap;
  int N = 2;
  std::vector<double> h_list;
  double threshold = kDefaultSmallnessThreshold;
  bool smallness_check = false;
  std::optional<MizohataConfig> mizohata;

  std::vector<PhasePoint> sources;
  int kernel_steps = 200;
  FitOptions fit;

  std::vector<CoherentTerm> signal;
  int propagate_steps = 200;

  std::string directory = "phaseflow_out";
  std::set<std::string> formats{"csv", "json", "svg"};
};

/// Parses and structurally validates a config document. `origin` prefixes
/// every message. Throws ConfigError.
RunConfig parse_config(const std::string& text, const std::string& origin = "config");
RunConfig load_config(const std::string& path);

/// The resolved config (defaults filled in, output directory omitted so that
/// bundles written to different places compare equal).
nlohmann::json config_echo(const RunConfig& config);

struct Symbols {
  SymbolExpr a;
  std::optional<SymbolExpr> b;
};

/// Semantic checks for `command`: symbols parse, grid is sane, seeds and
/// sources sit in the window, 4N <= order_cap for the smallness check, and
/// the transform stages run in one dimension. Throws ConfigError.
Symbols validate(const RunConfig& config, const std::string& command);

struct Options {
  std::string command;
  std::string config_path;
  std::optional<std::string> out;  // overrides output.directory
  int threads = 0;                 // 0: PHASEFLOW_THREADS or runtime default
  bool timings = false;
};

inline const std::vector<std::string> kCommands{"parse-check", "flow",   "kappa", "transform",
                                                "propagate",   "kernel", "all"};

/// Runs one command and writes the bundle atomically. Returns the exit code;
/// diagnostics go to stderr.
int run(const Options& options);

/// argv front end shared by the tool and the tests.
int main_entry(int argc, char** argv);

}  // namespace phaseflow::cli
