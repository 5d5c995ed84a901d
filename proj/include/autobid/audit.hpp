#pragma once
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "autobid/bidding.hpp"
#include "autobid/control.hpp"
#include "autobid/market.hpp"
#include "autobid/mechanism.hpp"
#include "autobid/scenario.hpp"

namespace autobid {

enum class AuditMode { closed_form, simulated };

const char* to_string(AuditMode mode);
AuditMode parse_audit_mode(const std::string& text);

inline constexpr double kClosedFormTolerance = 1e-9; // absolute
inline constexpr double kSimulatedTolerance = 0.03;  // relative to |U(truth)|
inline constexpr std::size_t kMinAuditGrid = 20;

// What one report earns the advertiser, judged against the true profile.
struct ReportEvaluation {
  double report = 0.0;
  std::uint64_t seed = 0; // 0 in closed form
  double utility = 0.0;
  // Delivered CPA for tCPA profiles, delivered ROI for tROI profiles.
  std::optional<double> delivered;
  bool constraint_satisfied = true;
  std::size_t violations = 0;
  double spend = 0.0;
  double conversions = 0.0;
};

// Reads the promise at `report` straight off the mechanism's curves. A
// promise that breaks the true constraint is worth -spend.
ReportEvaluation evaluate_report_closed_form(const AggregatedMechanism& mechanism, const AdvertiserProfile& truth,
                                             double report);

// Delivers the promise with run_episode on the scenario and reads the
// episode summary.
ReportEvaluation evaluate_report_simulated(const AggregatedMechanism& mechanism, const AdvertiserProfile& truth,
                                           double report, const Scenario& scenario, const ControlConfig& control,
                                           std::uint64_t seed);

double utility_of_report(const AggregatedMechanism& mechanism, const AdvertiserProfile& truth, double report);

// One competitor draw of a misreport sweep.
struct DrawVerdict {
  std::uint64_t seed = 0;
  double truth_utility = 0.0;
  double argmax = 0.0;
  double max_utility = 0.0;
  double gap = 0.0; // max_utility - truth_utility, never negative
  double tolerance = 0.0;
  bool ic = true;
  bool ir = true;
  // 1 + number of reports strictly better than the truth.
  std::size_t truth_rank = 1;
};

struct AuditReport {
  AuditMode mode = AuditMode::closed_form;
  double truth = 0.0;
  std::vector<double> reports; // ascending, truth included
  std::vector<ReportEvaluation> rows; // sorted by report, then seed
  std::vector<DrawVerdict> draws;
  // Worst case over draws.
  double argmax = 0.0;
  double gap = 0.0;
  bool ic = true;
  bool ir = true;
  std::size_t truth_rank = 1;
  std::vector<std::string> notes;
};

// The report grid with the truth inserted exactly. Throws DomainError when
// fewer than kMinAuditGrid points result or any point leaves the domain.
std::vector<double> audit_grid(const AggregatedMechanism& mechanism, double truth, std::span<const double> grid);

AuditReport ic_audit_closed_form(const AggregatedMechanism& mechanism, const AdvertiserProfile& truth,
                                 std::span<const double> grid, double tolerance = kClosedFormTolerance);

// One sweep per scenario; the seed of draw k is seeds[k].
struct SimulatedDraw {
  const Scenario* scenario = nullptr;
  const AggregatedMechanism* mechanism = nullptr;
  std::uint64_t seed = 0;
};

AuditReport ic_audit_simulated(std::span<const SimulatedDraw> draws, const AdvertiserProfile& truth,
                               std::span<const double> grid, const ControlConfig& control,
                               double tolerance_ratio = kSimulatedTolerance);

// Runs a per-request CPA-based second-price auction: the auto-bidder bids
// report * cvr per click in every request.
EpisodeSummary run_spa_episode(const Scenario& scenario, const AdvertiserProfile& truth, double report);

// The aggregated mechanism induced by that auction on a fixed scenario.
AggregatedMechanism spa_mechanism(const Scenario& scenario, const AdvertiserProfile& truth,
                                  std::pair<double, double> domain);

// The two-request market where overbidding a tCPA pays.
Scenario example1_scenario(double value);

struct Example1Row {
  std::string label;
  double report = 0.0;
  std::size_t requests_won = 0;
  double profit = 0.0;
  std::optional<double> delivered_cpa;
  bool constraint_satisfied = true;
};

struct Example1Result {
  double value = 0.0;
  double truth = 4.0;
  Example1Row truthful;
  Example1Row overbid;
  double gain = 0.0; // overbid profit - truthful profit
};

Example1Result example1_reproduction(double value);

// A (v, t) pair whose truthful report is strictly beaten by a feasible
// misreport under cpa(t) = t and the value-blind conversion curve.
struct Counterexample {
  double value = 0.0;
  double truth = 0.0;
  double truthful_utility = 0.0;
  double best_report = 0.0;
  double best_utility = 0.0;
};

// For each pair, searches the report grid (plus the truth) for reports below
// both the truth and the value and lists the pairs where one beats the truth.
std::vector<Counterexample> prop2_demo(const std::function<double(double)>& conversions,
                                       std::span<const std::pair<double, double>> pairs,
                                       std::span<const double> report_grid);

struct EquivalenceReport {
  double value = 0.0;
  double gamma = 0.0;
  double tcpa = 0.0;
  bool troi_satisfied = false;
  bool tcpa_satisfied = false;
  // The CPA each constraint allows on the delivered episode.
  double troi_bound = 0.0;
  double tcpa_bound = 0.0;
  std::optional<double> troi_delivered_cpa;
  std::optional<double> tcpa_delivered_cpa;
  bool flags_agree = false;
  bool bounds_agree = false;
  bool agree() const noexcept { return flags_agree && bounds_agree; }
};

// Bids the optimal-bid formula directly (scaled by `bid_scale`) once under
// tROI gamma with parameter n and once under tCPA v/(1+gamma) with m = n,
// where the two formulas coincide, and compares the outcomes. `tcpa_override`
// replaces the matched tCPA for negative controls.
EquivalenceReport cpa_roi_equivalence_check(const Scenario& scenario, double gamma, const StrategyParams& params = {},
                                            double bid_scale = 1.0,
                                            std::optional<double> tcpa_override = std::nullopt);

} // namespace autobid
