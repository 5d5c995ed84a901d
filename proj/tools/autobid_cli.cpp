// Experiment runner: autobid <simulate|calibrate|audit|repro-example1> [options]

#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "autobid/experiment.hpp"

namespace {

template <typename T>
void copy_if_set(const CLI::Option* option, const T& value, std::optional<T>& target) {
  if (option->count() > 0) {
    target = value;
  }
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Auto-bidding mechanism simulator and incentive auditor"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string out_dir;
  bool expect_ic = false;
  double param_m = 1.0;
  double param_n = 1.0;
  double value = 10.0;

  struct Flags {
    CLI::Option* config = nullptr;
    CLI::Option* out = nullptr;
    CLI::Option* m = nullptr;
    CLI::Option* n = nullptr;
    CLI::Option* value = nullptr;
  };
  std::map<std::string, Flags> flags;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    Flags f;
    f.config = sub->add_option("--config", config_path, "Experiment config (key = value)");
    if (needs_config) {
      f.config->required()->check(CLI::ExistingFile);
    }
    f.out = sub->add_option("--out", out_dir, "Output directory (overrides output.dir)");
    f.m = sub->add_option("--param-m", param_m, "tCPA dual parameter m of the optimal-bid table");
    f.n = sub->add_option("--param-n", param_n, "tROI dual parameter n of the optimal-bid table");
    flags[sub->get_name()] = f;
    return sub;
  };

  add_common(app.add_subcommand("simulate", "Deliver one report and write the episode log and summary"), true);
  add_common(app.add_subcommand("calibrate", "Write the feasible-conversion frontier and the mechanism export"), true);
  auto* audit = add_common(app.add_subcommand("audit", "Sweep reports and judge incentive compatibility"), true);
  audit->add_flag("--expect-ic", expect_ic, "Exit with status 3 when the audit finds a profitable misreport");
  auto* repro = add_common(app.add_subcommand("repro-example1", "Reproduce the two-request overbidding example"), false);
  flags["repro-example1"].value = repro->add_option("--value", value, "Value per conversion (must exceed 4)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : autobid::kExitValidation;
  }

  CLI::App* chosen = app.get_subcommands().front();
  const Flags& f = flags.at(chosen->get_name());
  autobid::CliOptions options;
  copy_if_set(f.config, config_path, options.config_path);
  copy_if_set(f.out, out_dir, options.out_dir);
  copy_if_set(f.m, param_m, options.param_m);
  copy_if_set(f.n, param_n, options.param_n);
  if (f.value != nullptr) {
    copy_if_set(f.value, value, options.value);
  }
  options.expect_ic = expect_ic;
  return autobid::execute(chosen->get_name(), options, std::cout, std::cerr);
}
