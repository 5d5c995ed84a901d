#pragma once
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "autobid/bidding.hpp"
#include "autobid/curve.hpp"
#include "autobid/market.hpp"
#include "autobid/scenario.hpp"

namespace autobid {

enum class MechanismKind { theorem1_tcpa, corollary1_submarket, theorem3_decomposed, custom };
enum class ReportKind { tcpa, troi };
enum class Pricing { uniform, proportional };

inline constexpr double kGFloor = 1e-6;
inline constexpr double kDefaultMargin = 0.9;
// Tolerances of the grid-level IC verifier.
inline constexpr double kPriceIdentityTolerance = 1e-9; // relative
inline constexpr double kMonotonicityTolerance = 1e-9;  // absolute

const char* to_string(MechanismKind kind);
const char* to_string(Pricing pricing);
MechanismKind parse_mechanism_kind(const std::string& text);
Pricing parse_pricing(const std::string& text);

// Best conversions the oracle bidder reaches at each tCPA on a grid.
struct Frontier {
  std::vector<double> reports;
  std::vector<double> conversions;

  bool empty() const noexcept;
  PiecewiseLinear curve() const { return {reports, conversions}; }
};

// Utility curve of a known-value tCPA mechanism: positive and non-decreasing.
class GFunction {
public:
  explicit GFunction(PiecewiseLinear curve);

  double operator()(double report) const { return curve_(report); }
  const PiecewiseLinear& curve() const noexcept { return curve_; }
  std::pair<double, double> domain() const { return curve_.domain(); }

private:
  PiecewiseLinear curve_;
};

// Split of the cumulative conversion curve across value classes.
struct LinearDecomposition {
  std::map<ValueClass, double> weights;

  // Weights non-negative and summing to one within 1e-12.
  void validate() const;
};

struct SubMarketPromise {
  ValueClass value_class = 0;
  double value = 0.0;
  double cpa = 0.0;
  double conversions = 0.0;
};

// Serializable description of every non-custom mechanism.
struct MechanismRecord {
  MechanismKind kind = MechanismKind::theorem1_tcpa;
  Goal goal = Goal::profit;
  std::map<ValueClass, double> values;
  // theorem1: g over tCPA reports. theorem3: cumulative cv over tROI reports.
  PiecewiseLinear curve;
  // corollary1: conversions of each sub-market over tROI reports.
  std::map<ValueClass, PiecewiseLinear> submarket_curves;
  // theorem3 only.
  std::map<ValueClass, double> weights;
  Pricing pricing = Pricing::proportional;
};

// The episode-level promise (cpa, cv) as functions of the report, kept per
// sub-market so that multi-value mechanisms can be delivered class by class.
class AggregatedMechanism {
public:
  using Curve = std::function<double(double)>;

  struct SubMarket {
    ValueClass value_class = 0;
    double value = 0.0;
    Curve cpa;
    Curve conversions;
  };

  // A mechanism given directly by curves: counterexamples and mechanisms
  // induced by per-request auctions. Not exportable.
  static AggregatedMechanism custom(ReportKind report_kind, Goal goal, std::vector<SubMarket> submarkets,
                                    std::pair<double, double> domain, std::string label = "custom");
  // Rebuilds a mechanism from its serialized record.
  static AggregatedMechanism from_record(const MechanismRecord& record);

  MechanismKind kind() const noexcept { return kind_; }
  ReportKind report_kind() const noexcept { return report_kind_; }
  Goal goal() const noexcept { return goal_; }
  const std::string& label() const noexcept { return label_; }
  std::pair<double, double> domain() const noexcept { return domain_; }
  bool contains(double report) const noexcept;
  const std::vector<SubMarket>& submarkets() const noexcept { return submarkets_; }
  const std::optional<MechanismRecord>& record() const noexcept { return record_; }

  // Per-sub-market promise; throws DomainError outside the domain.
  std::vector<SubMarketPromise> promise(double report) const;

  double conversions(double report) const;
  // Conversion-weighted CPA over all sub-markets.
  double cpa(double report) const;
  double spend(double report) const;
  double revenue(double report) const;
  std::optional<double> delivered_roi(double report) const;
  // Sum over sub-markets of (v_h - I * cpa_h) * cv_h, without any
  // constraint check.
  double utility(double report) const;

private:
  friend AggregatedMechanism theorem1_mechanism(double, Goal, const class GFunction&, ValueClass);
  friend AggregatedMechanism corollary1_mechanism(ValueClass, double, Goal, const PiecewiseLinear&);
  friend AggregatedMechanism combine_submarkets(std::span<const AggregatedMechanism>);
  friend AggregatedMechanism theorem3_mechanism(const std::map<ValueClass, double>&, const struct LinearDecomposition&,
                                                const PiecewiseLinear&, Goal, Pricing);

  AggregatedMechanism() = default;

  MechanismKind kind_ = MechanismKind::custom;
  ReportKind report_kind_ = ReportKind::tcpa;
  Goal goal_ = Goal::profit;
  std::string label_;
  std::pair<double, double> domain_{0.0, 0.0};
  std::vector<SubMarket> submarkets_;
  std::optional<MechanismRecord> record_;
};

// For each tCPA on an ascending grid, the most conversions an oracle bidder
// with full knowledge of competitor bids reaches while keeping delivered CPA
// at or below that tCPA. The oracle bids a global multiplier times the
// optimal-bid formula and binary-searches the multiplier. When `submarket`
// is set, only requests of that value class count.
Frontier calibrate_feasible_cv(const Scenario& scenario, const AdvertiserProfile& profile,
                               std::span<const double> report_grid, const StrategyParams& params = {},
                               std::optional<ValueClass> submarket = std::nullopt);

// g = max(kGFloor, running max of (v - I t) * margin * frontier(t)). Knots
// where v - I t <= 0 are dropped.
GFunction make_g_function(const Frontier& frontier, double value, Goal goal, double margin = kDefaultMargin);

// cpa(t) = t, cv(t) = g(t) / (v - I t).
AggregatedMechanism theorem1_mechanism(double value, Goal goal, const GFunction& g, ValueClass value_class = 0);

// One sub-market: cpa(gamma) = v_h / (1 + gamma), cv(gamma) from the curve.
// The curve must make (1 + gamma - I) / (1 + gamma) * cv non-increasing at
// its knots.
AggregatedMechanism corollary1_mechanism(ValueClass value_class, double value, Goal goal,
                                         const PiecewiseLinear& conversions);

// Runs independent sub-market mechanisms side by side over the common domain.
AggregatedMechanism combine_submarkets(std::span<const AggregatedMechanism> parts);

// Sub-market h receives k_h * cv_a(gamma) conversions at a CPA fixed by the
// pricing rule: uniform sum_h(v_h k_h) / (1 + gamma), proportional
// v_h / (1 + gamma).
AggregatedMechanism theorem3_mechanism(const std::map<ValueClass, double>& values, const LinearDecomposition& k,
                                       const PiecewiseLinear& cumulative_conversions, Goal goal, Pricing pricing);

// Calibrated constructions used by the experiment runner.
AggregatedMechanism calibrate_theorem1(const Scenario& scenario, const AdvertiserProfile& profile,
                                       std::span<const double> report_grid, const StrategyParams& params = {},
                                       double margin = kDefaultMargin);
AggregatedMechanism calibrate_corollary1(const Scenario& scenario, const AdvertiserProfile& profile,
                                         std::span<const double> gamma_grid, const StrategyParams& params = {},
                                         double margin = kDefaultMargin);
AggregatedMechanism calibrate_theorem3(const Scenario& scenario, const AdvertiserProfile& profile,
                                       std::span<const double> gamma_grid, const LinearDecomposition& k,
                                       Pricing pricing, const StrategyParams& params = {},
                                       double margin = kDefaultMargin);

struct IcViolation {
  enum class Kind { price_identity, monotonicity };
  Kind kind = Kind::price_identity;
  double report = 0.0;
  std::optional<double> next_report;
  std::optional<ValueClass> value_class; // set by the per-sub-market check
  double expected = 0.0;
  double actual = 0.0;
  std::string detail;
};

struct IcVerdict {
  bool ok = true;
  std::optional<IcViolation> violation; // first one found
};

// Grid-level certificate: the delivered price identity (cpa(t) = t, or
// delivered ROI = gamma) at every point, and utility monotone between
// neighbours (non-decreasing in t, non-increasing in gamma). Needs at least
// three grid points inside the domain.
IcVerdict verify_mechanism_ic(const AggregatedMechanism& mechanism, std::span<const double> report_grid);

// The same certificate applied to each sub-market on its own.
IcVerdict verify_submarket_ic(const AggregatedMechanism& mechanism, std::span<const double> report_grid);

} // namespace autobid
