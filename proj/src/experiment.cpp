#include "autobid/experiment.hpp"

#include <filesystem>
#include <ostream>

#include "autobid/error.hpp"
#include "autobid/io.hpp"
#include "autobid/rng.hpp"

namespace autobid {

namespace {

RunnerMechanism parse_runner_mechanism(const std::string& text) {
  if (text == "per_request_spa") {
    return RunnerMechanism::per_request_spa;
  }
  try {
    switch (parse_mechanism_kind(text)) {
    case MechanismKind::theorem1_tcpa:
      return RunnerMechanism::theorem1_tcpa;
    case MechanismKind::corollary1_submarket:
      return RunnerMechanism::corollary1_submarket;
    case MechanismKind::theorem3_decomposed:
      return RunnerMechanism::theorem3_decomposed;
    case MechanismKind::custom:
      break;
    }
  } catch (const DomainError&) {
  }
  throw ValidationError("mechanism.kind", "unknown mechanism '" + text + "'");
}

bool reports_tcpa(RunnerMechanism m) {
  return m == RunnerMechanism::theorem1_tcpa || m == RunnerMechanism::per_request_spa;
}

void require_section(const Config& config, const std::string& section) {
  if (!config.has_section(section)) {
    throw ValidationError(section, "section missing");
  }
}

std::size_t get_count(const Config& config, const std::string& key, long long fallback) {
  const long long n = config.get_int(key, fallback);
  if (n < 0) {
    throw ValidationError(key, "must not be negative");
  }
  return static_cast<std::size_t>(n);
}

std::vector<double> read_grid(const Config& config, const std::string& prefix, double lo, double hi,
                              std::size_t points) {
  if (config.has(prefix + ".grid")) {
    return config.get_doubles(prefix + ".grid");
  }
  lo = config.get_double(prefix + ".grid_min", lo);
  hi = config.get_double(prefix + ".grid_max", hi);
  points = get_count(config, prefix + ".grid_points", static_cast<long long>(points));
  if (!(lo < hi) || points < 2) {
    throw ValidationError(prefix + ".grid_min", "need grid_min < grid_max and at least two points");
  }
  return linear_grid(lo, hi, points);
}

AdvertiserProfile read_profile(const Config& config) {
  AdvertiserProfile p;
  p.id = static_cast<AdvertiserId>(config.get_int("advertiser.id", 0));
  p.values = config.get_class_map("advertiser.values");
  const std::string kind = config.get_string("advertiser.constraint");
  const double target = config.get_double("advertiser.target");
  if (kind == "tcpa") {
    p.constraint = Constraint::tcpa(target);
  } else if (kind == "troi") {
    p.constraint = Constraint::troi(target);
  } else {
    throw ValidationError("advertiser.constraint", "must be tcpa or troi");
  }
  const std::string goal = config.get_string("advertiser.goal", "profit");
  if (goal != "profit" && goal != "revenue") {
    throw ValidationError("advertiser.goal", "must be profit or revenue");
  }
  p.goal = goal == "profit" ? Goal::profit : Goal::revenue;
  try {
    p.validate();
  } catch (const DomainError& e) {
    throw ValidationError("advertiser", e.what());
  }
  return p;
}

ScenarioConfig read_scenario(const Config& config, const AdvertiserProfile& profile) {
  ScenarioConfig s;
  s.requests = get_count(config, "scenario.requests", 0);
  s.slots_min = static_cast<int>(config.get_int("scenario.slots_min", 1));
  s.slots_max = static_cast<int>(config.get_int("scenario.slots_max", s.slots_min));
  s.position_decay = config.get_double("scenario.position_decay", 1.0);
  s.competitor_pool = get_count(config, "scenario.competitor_pool", 0);
  s.competitors_min = static_cast<int>(config.get_int("scenario.competitors_min", 0));
  s.competitors_max = static_cast<int>(config.get_int("scenario.competitors_max", s.competitors_min));
  s.competitor_bid_min = config.get_double("scenario.competitor_bid_min", 0.0);
  s.competitor_bid_max = config.get_double("scenario.competitor_bid_max", s.competitor_bid_min);
  s.bid_noise = config.get_double("scenario.bid_noise", 0.0);
  s.quality_min = config.get_double("scenario.quality_min", 1.0);
  s.quality_max = config.get_double("scenario.quality_max", s.quality_min);
  s.cvr_min = config.get_double("scenario.cvr_min", 1.0);
  s.cvr_max = config.get_double("scenario.cvr_max", s.cvr_min);
  if (config.has("scenario.class_weights")) {
    s.class_weights = config.get_class_map("scenario.class_weights");
  }
  s.reserve = config.get_double("scenario.reserve", 0.0);
  s.auto_bidder = profile;
  return s;
}

// request.<i>.value_class, .slots (position factors), .quality and .cvr
// (advertiser:number maps), .bids (competitor:bid map), for i = 1, 2, ...
std::optional<Scenario> read_fixture(const Config& config, const AdvertiserProfile& profile, double reserve) {
  if (!config.has_section("request")) {
    return std::nullopt;
  }
  Scenario scenario;
  scenario.auto_bidder = profile;
  scenario.reserve = reserve;
  for (std::size_t i = 1;; ++i) {
    const std::string p = "request." + std::to_string(i) + ".";
    if (!config.has(p + "slots")) {
      break;
    }
    AdRequest request;
    request.request_id = i;
    request.value_class = static_cast<ValueClass>(config.get_int(p + "value_class", profile.values.begin()->first));
    int slot_id = 1;
    for (double factor : config.get_doubles(p + "slots")) {
      request.slots.push_back({slot_id++, factor});
    }
    const auto quality = config.get_class_map(p + "quality");
    const auto cvr = config.get_class_map(p + "cvr");
    for (const auto& [id, q] : quality) {
      auto it = cvr.find(id);
      if (it == cvr.end()) {
        throw ValidationError(p + "cvr", "no cvr for advertiser " + std::to_string(id));
      }
      request.matched.push_back({static_cast<AdvertiserId>(id), q, it->second});
    }
    BidProfile bids;
    for (const auto& [id, b] : config.get_class_map(p + "bids")) {
      bids.push_back({static_cast<AdvertiserId>(id), b});
    }
    scenario.requests.push_back(std::move(request));
    scenario.competitor_bids.push_back(std::move(bids));
  }
  if (scenario.requests.empty()) {
    throw ValidationError("request.1.slots", "missing");
  }
  try {
    scenario.validate();
  } catch (const Error& e) {
    throw ValidationError("request", e.what());
  }
  return scenario;
}

ControlConfig read_control(const Config& config) {
  ControlConfig c;
  c.kp = config.get_double("control.kp", c.kp);
  c.ki = config.get_double("control.ki", c.ki);
  c.kd = config.get_double("control.kd", c.kd);
  c.alpha_ratio = config.get_double("control.alpha_ratio", c.alpha_ratio);
  c.beta_ratio = config.get_double("control.beta_ratio", c.beta_ratio);
  c.beta_floor = config.get_double("control.beta_floor", c.beta_floor);
  c.mult_min = config.get_double("control.mult_min", c.mult_min);
  c.mult_max = config.get_double("control.mult_max", c.mult_max);
  c.participation_min = config.get_double("control.participation_min", c.participation_min);
  c.weight_cpa = config.get_double("control.weight_cpa", c.weight_cpa);
  c.weight_cv = config.get_double("control.weight_cv", c.weight_cv);
  c.cpa_guard = config.get_bool("control.cpa_guard", c.cpa_guard);
  c.validate();
  return c;
}

std::filesystem::path out_path(const ExperimentConfig& e, const std::string& name) {
  return std::filesystem::path(e.output_dir) / name;
}

void emit(const ExperimentConfig& e, const std::string& name, const std::string& text, std::ostream& out) {
  const auto path = out_path(e, name);
  write_text(path, text);
  out << "wrote " << path.string() << '\n';
}

std::vector<FrontierRow> frontier_rows(const ExperimentConfig& e, const Scenario& scenario) {
  std::vector<FrontierRow> rows;
  const AdvertiserProfile& profile = e.profile();
  if (reports_tcpa(e.mechanism)) {
    const Frontier f = calibrate_feasible_cv(scenario, profile, e.mechanism_grid, e.params);
    for (std::size_t i = 0; i < f.reports.size(); ++i) {
      rows.push_back({profile.values.begin()->first, f.reports[i], f.reports[i], f.conversions[i]});
    }
    return rows;
  }
  double weighted_value = 0.0;
  for (const auto& [h, k] : e.weights.weights) {
    weighted_value += profile.value(h) * k;
  }
  for (const auto& [h, v] : profile.values) {
    const double priced = e.mechanism == RunnerMechanism::theorem3_decomposed && e.pricing == Pricing::uniform
                              ? weighted_value
                              : v;
    std::vector<double> cpas;
    for (auto it = e.mechanism_grid.rbegin(); it != e.mechanism_grid.rend(); ++it) {
      cpas.push_back(priced / (1.0 + *it));
    }
    const Frontier f = calibrate_feasible_cv(scenario, profile, cpas, e.params, h);
    for (std::size_t i = 0; i < e.mechanism_grid.size(); ++i) {
      const std::size_t r = e.mechanism_grid.size() - 1 - i;
      rows.push_back({h, e.mechanism_grid[i], f.reports[r], f.conversions[r]});
    }
  }
  return rows;
}

int run_simulate(const ExperimentConfig& e, std::ostream& out) {
  const Scenario scenario = scenario_for(e, e.seed);
  const AggregatedMechanism mechanism = build_mechanism(e, scenario);
  const double report = e.report.value_or(e.profile().constraint.target);
  const EpisodeResult result = run_episode(scenario, e.profile(), mechanism, report, e.control, e.seed);
  emit(e, "episode_log.csv", format_episode_log(result.log), out);
  emit(e, "summary.txt",
       format_summary(result.summary, {{"mechanism", mechanism.label()},
                                       {"report", format_double(report)},
                                       {"promised_cpa", format_double(mechanism.cpa(report))},
                                       {"promised_conversions", format_double(mechanism.conversions(report))},
                                       {"requests", std::to_string(scenario.size())},
                                       {"seed", std::to_string(e.seed)}}),
       out);
  return kExitOk;
}

int run_calibrate(const ExperimentConfig& e, std::ostream& out) {
  if (e.mechanism == RunnerMechanism::per_request_spa) {
    throw ValidationError("mechanism.kind", "per_request_spa has no exportable calibration");
  }
  const Scenario scenario = scenario_for(e, e.seed);
  emit(e, "frontier.csv", format_frontier(frontier_rows(e, scenario)), out);
  const AggregatedMechanism mechanism = build_mechanism(e, scenario);
  emit(e, "mechanism.txt", export_mechanism(*mechanism.record()), out);
  return kExitOk;
}

int run_audit(const ExperimentConfig& e, bool expect_ic, std::ostream& out) {
  AuditReport report;
  if (e.audit_mode == AuditMode::closed_form) {
    const Scenario scenario = scenario_for(e, e.seed);
    const AggregatedMechanism mechanism = build_mechanism(e, scenario);
    report = ic_audit_closed_form(mechanism, e.profile(), e.audit_grid, e.audit_tolerance.value_or(kClosedFormTolerance));
  } else {
    std::vector<Scenario> scenarios;
    std::vector<AggregatedMechanism> mechanisms;
    std::vector<std::uint64_t> seeds;
    scenarios.reserve(e.audit_seeds);
    mechanisms.reserve(e.audit_seeds);
    for (std::size_t k = 0; k < e.audit_seeds; ++k) {
      seeds.push_back(derive_seed(e.seed, "audit.seed." + std::to_string(k)));
      scenarios.push_back(scenario_for(e, seeds.back()));
      mechanisms.push_back(build_mechanism(e, scenarios.back()));
    }
    std::vector<SimulatedDraw> draws;
    for (std::size_t k = 0; k < e.audit_seeds; ++k) {
      draws.push_back({&scenarios[k], &mechanisms[k], seeds[k]});
    }
    report = ic_audit_simulated(draws, e.profile(), e.audit_grid, e.control,
                                e.audit_tolerance.value_or(kSimulatedTolerance));
  }
  emit(e, "audit.csv", format_audit_rows(report), out);
  emit(e, "audit_summary.txt", format_audit_summary(report), out);
  out << "ic = " << (report.ic ? "true" : "false") << ", ir = " << (report.ir ? "true" : "false")
      << ", argmax = " << format_double(report.argmax) << ", gap = " << format_double(report.gap) << '\n';
  if (expect_ic && !report.ic) {
    return kExitNotIc;
  }
  return kExitOk;
}

int run_example1(const CliOptions& options, const std::optional<Config>& config, std::ostream& out) {
  double value = 10.0;
  std::string dir = "out";
  if (config) {
    value = config->get_double("example1.value", value);
    dir = config->get_string("output.dir", dir);
  }
  if (options.value) {
    value = *options.value;
  }
  if (options.out_dir) {
    dir = *options.out_dir;
  }
  if (!(value > 4.0)) {
    throw ValidationError("example1.value", "must exceed the tCPA of 4");
  }
  const Example1Result result = example1_reproduction(value);
  ExperimentConfig e;
  e.output_dir = dir;
  const std::string table = format_example1(result);
  out << table;
  out << "overbid gain = " << format_double(result.gain) << '\n';
  emit(e, "example1.csv", table, out);
  emit(e, "example1_summary.txt", format_example1_summary(result), out);
  return kExitOk;
}

} // namespace

ExperimentConfig parse_experiment(const Config& config, const std::string& subcommand) {
  ExperimentConfig e;
  require_section(config, "advertiser");
  const AdvertiserProfile profile = read_profile(config);
  e.fixture = read_fixture(config, profile, config.get_double("scenario.reserve", 0.0));
  if (!e.fixture) {
    require_section(config, "scenario");
  }
  e.seed = static_cast<std::uint64_t>(config.get_int("scenario.seed", 0));
  e.scenario = read_scenario(config, profile);
  if (!e.fixture) {
    e.scenario.validate();
  }
  e.params.m = config.get_double("bidding.m", 1.0);
  e.params.n = config.get_double("bidding.n", 1.0);
  if (!(e.params.m > 0.0) || !(e.params.n > 0.0)) {
    throw ValidationError("bidding.m", "dual parameters must be positive");
  }

  require_section(config, "mechanism");
  e.mechanism = parse_runner_mechanism(config.get_string("mechanism.kind"));
  const bool tcpa = profile.constraint.kind == ConstraintKind::tcpa;
  if (reports_tcpa(e.mechanism) != tcpa) {
    throw ValidationError("advertiser.constraint", "does not match the report kind of mechanism.kind");
  }
  e.margin = config.get_double("mechanism.margin", kDefaultMargin);
  if (!(e.margin > 0.0 && e.margin <= 1.0)) {
    throw ValidationError("mechanism.margin", "must lie in (0, 1]");
  }
  if (tcpa) {
    const double v = profile.values.begin()->second;
    e.mechanism_grid = read_grid(config, "mechanism", 0.05 * v, 0.95 * v, 100);
  } else {
    e.mechanism_grid = read_grid(config, "mechanism", 0.05, 4.0, 100);
  }
  if (e.mechanism == RunnerMechanism::theorem3_decomposed) {
    try {
      e.pricing = parse_pricing(config.get_string("mechanism.pricing", "proportional"));
    } catch (const DomainError& err) {
      throw ValidationError("mechanism.pricing", err.what());
    }
    e.weights.weights = config.get_class_map("mechanism.weights");
    try {
      e.weights.validate();
    } catch (const InvalidMechanism& err) {
      throw ValidationError("mechanism.weights", err.what());
    }
  }
  e.mechanism_import = config.get_string("mechanism.import", "");

  e.control = read_control(config);
  if (config.has("simulate.report")) {
    e.report = config.get_double("simulate.report");
  }

  if (subcommand == "audit") {
    require_section(config, "audit");
    try {
      e.audit_mode = parse_audit_mode(config.get_string("audit.mode", "closed_form"));
    } catch (const DomainError& err) {
      throw ValidationError("audit.mode", err.what());
    }
    const double lo = e.mechanism_grid.front();
    const double hi = e.mechanism_grid.back();
    e.audit_grid = read_grid(config, "audit", lo, hi, 50);
    e.audit_seeds = get_count(config, "audit.seeds", 5);
    if (e.audit_seeds == 0) {
      throw ValidationError("audit.seeds", "need at least one draw");
    }
    if (config.has("audit.tolerance")) {
      e.audit_tolerance = config.get_double("audit.tolerance");
    }
  }
  e.output_dir = config.get_string("output.dir", "out");
  return e;
}

Scenario scenario_for(const ExperimentConfig& e, std::uint64_t seed) {
  if (e.fixture) {
    return *e.fixture;
  }
  return generate_scenario(e.scenario, seed);
}

AggregatedMechanism build_mechanism(const ExperimentConfig& e, const Scenario& scenario) {
  if (!e.mechanism_import.empty()) {
    return AggregatedMechanism::from_record(import_mechanism(read_text(e.mechanism_import)));
  }
  const AdvertiserProfile& profile = e.profile();
  switch (e.mechanism) {
  case RunnerMechanism::theorem1_tcpa:
    return calibrate_theorem1(scenario, profile, e.mechanism_grid, e.params, e.margin);
  case RunnerMechanism::corollary1_submarket:
    return calibrate_corollary1(scenario, profile, e.mechanism_grid, e.params, e.margin);
  case RunnerMechanism::theorem3_decomposed:
    return calibrate_theorem3(scenario, profile, e.mechanism_grid, e.weights, e.pricing, e.params, e.margin);
  case RunnerMechanism::per_request_spa:
    return spa_mechanism(scenario, profile, {e.mechanism_grid.front(), e.mechanism_grid.back()});
  }
  throw ValidationError("mechanism.kind", "unsupported");
}

int execute(const std::string& subcommand, const CliOptions& options, std::ostream& out, std::ostream& err) {
  try {
    std::optional<Config> config;
    if (options.config_path) {
      config = Config::load(*options.config_path);
    }
    if (subcommand == "repro-example1") {
      return run_example1(options, config, out);
    }
    if (subcommand != "simulate" && subcommand != "calibrate" && subcommand != "audit") {
      throw ValidationError("", "unknown subcommand '" + subcommand + "'");
    }
    if (!config) {
      throw ValidationError("--config", "required for " + subcommand);
    }
    if (options.param_m) {
      config->set("bidding.m", format_double(*options.param_m));
    }
    if (options.param_n) {
      config->set("bidding.n", format_double(*options.param_n));
    }
    ExperimentConfig e = parse_experiment(*config, subcommand);
    if (options.out_dir) {
      e.output_dir = *options.out_dir;
    }
    if (subcommand == "simulate") {
      return run_simulate(e, out);
    }
    if (subcommand == "calibrate") {
      return run_calibrate(e, out);
    }
    return run_audit(e, options.expect_ic, out);
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

} // namespace autobid
