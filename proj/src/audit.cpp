#include "autobid/audit.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "autobid/error.hpp"

namespace autobid {

namespace {

struct Totals {
  double spend = 0.0;
  double conversions = 0.0;
  double revenue = 0.0;
  double utility = 0.0;
};

std::optional<double> delivered_metric(const Constraint& constraint, double spend, double conversions,
                                       double revenue) {
  if (constraint.kind == ConstraintKind::tcpa) {
    if (conversions > 0.0) {
      return spend / conversions;
    }
    return std::nullopt;
  }
  if (spend > 0.0) {
    return (revenue - spend) / spend;
  }
  return std::nullopt;
}

void check_report_kind(const AggregatedMechanism& mechanism, const AdvertiserProfile& truth) {
  const bool tcpa = truth.constraint.kind == ConstraintKind::tcpa;
  if (tcpa != (mechanism.report_kind() == ReportKind::tcpa)) {
    throw DomainError("audit: the advertiser's constraint and the mechanism's report differ in kind");
  }
}

DrawVerdict judge(std::span<const ReportEvaluation> rows, double truth, std::uint64_t seed,
                  const std::function<double(double)>& tolerance_of) {
  DrawVerdict verdict;
  verdict.seed = seed;
  const auto truth_row =
      std::find_if(rows.begin(), rows.end(), [truth](const ReportEvaluation& r) { return r.report == truth; });
  if (truth_row == rows.end()) {
    throw DomainError("audit: the truth is missing from the sweep");
  }
  verdict.truth_utility = truth_row->utility;
  verdict.argmax = truth;
  verdict.max_utility = truth_row->utility;
  for (const auto& row : rows) {
    if (row.utility > verdict.max_utility) {
      verdict.max_utility = row.utility;
      verdict.argmax = row.report;
    }
    if (row.utility > verdict.truth_utility) {
      ++verdict.truth_rank;
    }
  }
  verdict.gap = verdict.max_utility - verdict.truth_utility;
  verdict.tolerance = tolerance_of(verdict.truth_utility);
  verdict.ic = verdict.gap <= verdict.tolerance;
  verdict.ir = verdict.truth_utility >= 0.0;
  return verdict;
}

void summarize(AuditReport& report) {
  report.ic = true;
  report.ir = true;
  report.gap = 0.0;
  report.argmax = report.truth;
  report.truth_rank = 1;
  bool first = true;
  for (const auto& d : report.draws) {
    report.ic = report.ic && d.ic;
    report.ir = report.ir && d.ir;
    report.truth_rank = std::max(report.truth_rank, d.truth_rank);
    if (first || d.gap > report.gap) {
      report.gap = d.gap;
      report.argmax = d.argmax;
      first = false;
    }
    if (!d.ic) {
      report.notes.push_back("seed " + std::to_string(d.seed) + ": report " + std::to_string(d.argmax) +
                             " beats the truth by " + std::to_string(d.gap));
    }
    if (!d.ir) {
      report.notes.push_back("seed " + std::to_string(d.seed) + ": truthful utility is negative");
    }
  }
}

// Shared with the per-request auction below.
struct SpaRun {
  std::vector<DeliveryRecord> records;
  std::vector<ValueClass> classes;
};

SpaRun run_spa(const Scenario& scenario, const AdvertiserProfile& truth, double report) {
  if (!(report >= 0.0)) {
    throw DomainError("run_spa_episode: report must be non-negative");
  }
  SpaRun run;
  run.records.reserve(scenario.size());
  run.classes.reserve(scenario.size());
  for (std::size_t j = 0; j < scenario.size(); ++j) {
    const AdRequest& request = scenario.requests[j];
    const MatchedAd* own = request.find(truth.id);
    if (own == nullptr) {
      throw DomainError("run_spa_episode: advertiser not matched to request " + std::to_string(request.request_id));
    }
    BidProfile bids = scenario.competitor_bids[j];
    bids.push_back({truth.id, report * own->cvr});
    const AuctionOutcome outcome = run_gsp_auction(request, bids, scenario.reserve);
    run.records.push_back(compute_request_delivery(outcome, request, truth.id));
    run.classes.push_back(request.value_class);
  }
  return run;
}

Example1Row example1_row(const Scenario& scenario, const AdvertiserProfile& truth, double report, std::string label) {
  const SpaRun run = run_spa(scenario, truth, report);
  const EpisodeSummary summary = aggregate_episode(run.records, truth, run.classes);
  Example1Row row;
  row.label = std::move(label);
  row.report = report;
  row.requests_won = static_cast<std::size_t>(
      std::count_if(run.records.begin(), run.records.end(), [](const DeliveryRecord& r) { return r.conversions > 0.0; }));
  row.profit = summary.utility;
  row.delivered_cpa = summary.delivered_cpa;
  row.constraint_satisfied = summary.constraint_satisfied;
  return row;
}

} // namespace

const char* to_string(AuditMode mode) {
  return mode == AuditMode::closed_form ? "closed_form" : "simulated";
}

AuditMode parse_audit_mode(const std::string& text) {
  if (text == "closed_form") {
    return AuditMode::closed_form;
  }
  if (text == "simulated") {
    return AuditMode::simulated;
  }
  throw DomainError("unknown audit mode: " + text);
}

ReportEvaluation evaluate_report_closed_form(const AggregatedMechanism& mechanism, const AdvertiserProfile& truth,
                                             double report) {
  check_report_kind(mechanism, truth);
  const double indicator = goal_indicator(truth.goal);
  Totals totals;
  for (const auto& p : mechanism.promise(report)) {
    const double v = truth.value(p.value_class);
    totals.spend += p.cpa * p.conversions;
    totals.conversions += p.conversions;
    totals.revenue += v * p.conversions;
    totals.utility += (v - indicator * p.cpa) * p.conversions;
  }
  ReportEvaluation row;
  row.report = report;
  row.spend = totals.spend;
  row.conversions = totals.conversions;
  row.delivered = delivered_metric(truth.constraint, totals.spend, totals.conversions, totals.revenue);
  row.constraint_satisfied = constraint_met(truth.constraint, totals.spend, totals.conversions, totals.revenue);
  row.utility = row.constraint_satisfied ? totals.utility : -totals.spend;
  row.violations = row.constraint_satisfied ? 0 : 1;
  return row;
}

ReportEvaluation evaluate_report_simulated(const AggregatedMechanism& mechanism, const AdvertiserProfile& truth,
                                           double report, const Scenario& scenario, const ControlConfig& control,
                                           std::uint64_t seed) {
  check_report_kind(mechanism, truth);
  const EpisodeResult episode = run_episode(scenario, truth, mechanism, report, control, seed);
  const EpisodeSummary& s = episode.summary;
  ReportEvaluation row;
  row.report = report;
  row.seed = seed;
  row.utility = s.utility;
  row.spend = s.total_spend;
  row.conversions = s.total_conversions;
  row.delivered = delivered_metric(truth.constraint, s.total_spend, s.total_conversions, s.revenue);
  row.constraint_satisfied = s.constraint_satisfied;
  row.violations = s.violation_events;
  return row;
}

double utility_of_report(const AggregatedMechanism& mechanism, const AdvertiserProfile& truth, double report) {
  return evaluate_report_closed_form(mechanism, truth, report).utility;
}

std::vector<double> audit_grid(const AggregatedMechanism& mechanism, double truth, std::span<const double> grid) {
  std::vector<double> reports(grid.begin(), grid.end());
  reports.push_back(truth);
  std::sort(reports.begin(), reports.end());
  reports.erase(std::unique(reports.begin(), reports.end()), reports.end());
  for (double r : reports) {
    if (!std::isfinite(r) || !mechanism.contains(r)) {
      throw DomainError("audit: report " + std::to_string(r) + " outside the mechanism domain");
    }
  }
  if (reports.size() < kMinAuditGrid) {
    throw DomainError("audit: need at least " + std::to_string(kMinAuditGrid) + " reports including the truth");
  }
  return reports;
}

AuditReport ic_audit_closed_form(const AggregatedMechanism& mechanism, const AdvertiserProfile& truth,
                                 std::span<const double> grid, double tolerance) {
  check_report_kind(mechanism, truth);
  AuditReport report;
  report.mode = AuditMode::closed_form;
  report.truth = truth.constraint.target;
  report.reports = audit_grid(mechanism, report.truth, grid);
  for (double r : report.reports) {
    report.rows.push_back(evaluate_report_closed_form(mechanism, truth, r));
  }
  report.draws.push_back(judge(report.rows, report.truth, 0, [tolerance](double) { return tolerance; }));
  summarize(report);
  return report;
}

AuditReport ic_audit_simulated(std::span<const SimulatedDraw> draws, const AdvertiserProfile& truth,
                               std::span<const double> grid, const ControlConfig& control, double tolerance_ratio) {
  if (draws.empty()) {
    throw DomainError("ic_audit_simulated: no competitor draws");
  }
  AuditReport report;
  report.mode = AuditMode::simulated;
  report.truth = truth.constraint.target;
  for (const auto& draw : draws) {
    if (draw.scenario == nullptr || draw.mechanism == nullptr) {
      throw DomainError("ic_audit_simulated: draw without scenario or mechanism");
    }
    const auto reports = audit_grid(*draw.mechanism, report.truth, grid);
    if (report.reports.empty()) {
      report.reports = reports;
    } else if (reports != report.reports) {
      throw DomainError("ic_audit_simulated: draws disagree on the report grid");
    }
  }
  std::vector<std::vector<ReportEvaluation>> per_draw(draws.size());
  for (std::size_t k = 0; k < draws.size(); ++k) {
    for (double r : report.reports) {
      per_draw[k].push_back(
          evaluate_report_simulated(*draws[k].mechanism, truth, r, *draws[k].scenario, control, draws[k].seed));
    }
    report.draws.push_back(judge(per_draw[k], report.truth, draws[k].seed,
                                 [tolerance_ratio](double u) { return tolerance_ratio * std::abs(u); }));
  }
  for (std::size_t i = 0; i < report.reports.size(); ++i) {
    for (std::size_t k = 0; k < draws.size(); ++k) {
      report.rows.push_back(per_draw[k][i]);
    }
  }
  std::stable_sort(report.rows.begin(), report.rows.end(), [](const ReportEvaluation& a, const ReportEvaluation& b) {
    return a.report < b.report || (a.report == b.report && a.seed < b.seed);
  });
  summarize(report);
  return report;
}

EpisodeSummary run_spa_episode(const Scenario& scenario, const AdvertiserProfile& truth, double report) {
  const SpaRun run = run_spa(scenario, truth, report);
  return aggregate_episode(run.records, truth, run.classes);
}

AggregatedMechanism spa_mechanism(const Scenario& scenario, const AdvertiserProfile& truth,
                                  std::pair<double, double> domain) {
  if (!truth.constant_value()) {
    throw DomainError("spa_mechanism: needs a constant-value advertiser");
  }
  auto shared = std::make_shared<const Scenario>(scenario);
  auto totals = [shared, bidder = truth](double report) {
    const SpaRun run = run_spa(*shared, bidder, report);
    double spend = 0.0;
    double cv = 0.0;
    for (const auto& r : run.records) {
      spend += r.spend;
      cv += r.conversions;
    }
    return std::pair{spend, cv};
  };
  AggregatedMechanism::SubMarket sm;
  sm.value_class = truth.values.begin()->first;
  sm.value = truth.values.begin()->second;
  sm.cpa = [totals](double report) {
    const auto [spend, cv] = totals(report);
    return cv > 0.0 ? spend / cv : 0.0;
  };
  sm.conversions = [totals](double report) { return totals(report).second; };
  return AggregatedMechanism::custom(ReportKind::tcpa, truth.goal, {std::move(sm)}, domain, "per_request_spa");
}

Scenario example1_scenario(double value) {
  ScenarioConfig config;
  config.requests = 2;
  config.slots_min = 1;
  config.slots_max = 1;
  // Competitors b, c, d bid their tCPAs per click since ctr = cvr = 1.
  config.fixed_competitors = {{{1, 5.0}, {2, 2.0}, {3, 1.0}}, {{3, 1.0}}};
  config.auto_bidder.id = 0;
  config.auto_bidder.values = {{0, value}};
  config.auto_bidder.constraint = Constraint::tcpa(4.0);
  config.auto_bidder.goal = Goal::profit;
  return generate_scenario(config, 0);
}

Example1Result example1_reproduction(double value) {
  if (!(value > 4.0)) {
    throw DomainError("example1_reproduction: the value must exceed the tCPA of 4");
  }
  const Scenario scenario = example1_scenario(value);
  Example1Result result;
  result.value = value;
  result.truth = scenario.auto_bidder.constraint.target;
  result.truthful = example1_row(scenario, scenario.auto_bidder, result.truth, "truthful");
  result.overbid = example1_row(scenario, scenario.auto_bidder, 5.0 + 1e-6, "overbid");
  result.gain = result.overbid.profit - result.truthful.profit;
  return result;
}

std::vector<Counterexample> prop2_demo(const std::function<double(double)>& conversions,
                                       std::span<const std::pair<double, double>> pairs,
                                       std::span<const double> report_grid) {
  std::vector<Counterexample> out;
  for (const auto& [v, t] : pairs) {
    if (!(t > 0.0 && t < v)) {
      throw DomainError("prop2_demo: need 0 < t < v");
    }
    std::vector<double> candidates;
    for (double r : report_grid) {
      if (r > 0.0 && r <= t && r < v) {
        candidates.push_back(r);
      }
    }
    for (const auto& [v2, t2] : pairs) {
      if (v2 == v && t2 <= t) {
        candidates.push_back(t2);
      }
    }
    const double truthful = (v - t) * conversions(t);
    Counterexample best{v, t, truthful, t, truthful};
    for (double r : candidates) {
      const double u = (v - r) * conversions(r);
      if (u > best.best_utility) {
        best.best_utility = u;
        best.best_report = r;
      }
    }
    if (best.best_utility > truthful + 1e-12 * std::max(1.0, std::abs(truthful))) {
      out.push_back(best);
    }
  }
  return out;
}

EquivalenceReport cpa_roi_equivalence_check(const Scenario& scenario, double gamma, const StrategyParams& params,
                                            double bid_scale, std::optional<double> tcpa_override) {
  params.validate();
  const AdvertiserProfile& base = scenario.auto_bidder;
  if (!base.constant_value()) {
    throw DomainError("cpa_roi_equivalence_check: needs a constant value per conversion");
  }
  if (!(bid_scale > 0.0)) {
    throw DomainError("cpa_roi_equivalence_check: bid scale must be positive");
  }
  const double v = base.values.begin()->second;
  EquivalenceReport report;
  report.value = v;
  report.gamma = gamma;
  report.tcpa = tcpa_override ? *tcpa_override : roi_to_tcpa(v, gamma);

  AdvertiserProfile roi = base;
  roi.constraint = Constraint::troi(gamma);
  roi.validate();
  AdvertiserProfile cpa = base;
  cpa.constraint = Constraint::tcpa(report.tcpa);
  cpa.validate();
  // With t = v / (1 + gamma) and m = n the two bid formulas coincide.
  const StrategyParams matched{params.n, params.n};

  auto run = [&](const AdvertiserProfile& profile) {
    std::vector<DeliveryRecord> records;
    std::vector<ValueClass> classes;
    for (std::size_t j = 0; j < scenario.size(); ++j) {
      const AdRequest& request = scenario.requests[j];
      const MatchedAd* own = request.find(profile.id);
      const double bid =
          bid_scale * table1_bid(profile.goal, profile.constraint, profile.value(request.value_class), own->cvr, matched);
      BidProfile bids = scenario.competitor_bids[j];
      bids.push_back({profile.id, bid});
      records.push_back(compute_request_delivery(run_gsp_auction(request, bids, scenario.reserve), request, profile.id));
      classes.push_back(request.value_class);
    }
    return aggregate_episode(records, profile, classes);
  };
  const EpisodeSummary under_roi = run(roi);
  const EpisodeSummary under_cpa = run(cpa);
  report.troi_satisfied = under_roi.constraint_satisfied;
  report.tcpa_satisfied = under_cpa.constraint_satisfied;
  report.troi_bound = under_roi.cpa_bound.value_or(v / (1.0 + gamma));
  report.tcpa_bound = report.tcpa;
  report.troi_delivered_cpa = under_roi.delivered_cpa;
  report.tcpa_delivered_cpa = under_cpa.delivered_cpa;
  report.flags_agree = report.troi_satisfied == report.tcpa_satisfied;
  report.bounds_agree = std::abs(report.troi_bound - report.tcpa_bound) <= 0.01 * report.tcpa_bound;
  return report;
}

} // namespace autobid
