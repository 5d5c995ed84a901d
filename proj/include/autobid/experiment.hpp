#pragma once
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "autobid/audit.hpp"
#include "autobid/bidding.hpp"
#include "autobid/config.hpp"
#include "autobid/control.hpp"
#include "autobid/mechanism.hpp"
#include "autobid/scenario.hpp"

namespace autobid {

// Mechanism kinds the runner can build. per_request_spa is the auction-induced
// mechanism used as a negative control; it can be audited but not exported.
enum class RunnerMechanism { theorem1_tcpa, corollary1_submarket, theorem3_decomposed, per_request_spa };

struct ExperimentConfig {
  std::uint64_t seed = 0;
  ScenarioConfig scenario;
  // Explicit request list; replaces generation when present.
  std::optional<Scenario> fixture;
  StrategyParams params;

  RunnerMechanism mechanism = RunnerMechanism::theorem1_tcpa;
  double margin = kDefaultMargin;
  std::vector<double> mechanism_grid;
  Pricing pricing = Pricing::proportional;
  LinearDecomposition weights;
  std::string mechanism_import; // path of an exported mechanism, if any

  ControlConfig control;
  std::optional<double> report; // simulate only; defaults to the truth

  AuditMode audit_mode = AuditMode::closed_form;
  std::vector<double> audit_grid;
  std::size_t audit_seeds = 5;
  std::optional<double> audit_tolerance;

  std::string output_dir = "out";

  const AdvertiserProfile& profile() const noexcept { return scenario.auto_bidder; }
};

// Reads every section the subcommand needs. Throws ValidationError naming
// the first missing or unusable key.
ExperimentConfig parse_experiment(const Config& config, const std::string& subcommand);

// Builds the configured mechanism for one scenario draw.
AggregatedMechanism build_mechanism(const ExperimentConfig& experiment, const Scenario& scenario);

// The scenario of one draw: the fixture when given, else generated from seed.
Scenario scenario_for(const ExperimentConfig& experiment, std::uint64_t seed);

struct CliOptions {
  std::optional<std::string> config_path;
  std::optional<std::string> out_dir;
  bool expect_ic = false;
  std::optional<double> param_m;
  std::optional<double> param_n;
  std::optional<double> value; // repro-example1
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNotIc = 3;
inline constexpr int kExitIo = 4;

// Runs simulate, calibrate, audit or repro-example1 and writes its artifacts.
// Returns the process exit status; diagnostics go to `err`.
int execute(const std::string& subcommand, const CliOptions& options, std::ostream& out, std::ostream& err);

} // namespace autobid
