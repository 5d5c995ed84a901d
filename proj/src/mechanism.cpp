#include "autobid/mechanism.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "autobid/error.hpp"

namespace autobid {

namespace {

bool rel_close(double a, double b, double tolerance) {
  return std::abs(a - b) <= tolerance * std::max(std::abs(a), std::abs(b));
}

std::string describe(double x) {
  std::ostringstream out;
  out.precision(10);
  out << x;
  return out.str();
}

// Weak antitonicity of (1 + gamma - I) / (1 + gamma) * cv at the curve's knots.
void check_troi_monotone(const PiecewiseLinear& cv, Goal goal, const char* what) {
  const double indicator = goal_indicator(goal);
  const auto& xs = cv.xs();
  const auto& ys = cv.ys();
  double previous = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double gamma = xs[i];
    if (!(gamma > -1.0) || (indicator > 0.0 && !(gamma > 0.0))) {
      throw InvalidMechanism(std::string(what) + ": report " + describe(gamma) + " outside the tROI domain");
    }
    if (ys[i] < 0.0) {
      throw InvalidMechanism(std::string(what) + ": negative conversions at report " + describe(gamma));
    }
    const double weighted = (1.0 + gamma - indicator) / (1.0 + gamma) * ys[i];
    if (i > 0 && weighted > previous + kMonotonicityTolerance) {
      throw InvalidMechanism(std::string(what) + ": (1+gamma-I)/(1+gamma)*cv increases between gamma=" +
                             describe(xs[i - 1]) + " and gamma=" + describe(gamma));
    }
    previous = weighted;
  }
}

// Conversions of a tROI sub-market between knots. Interpolating the weighted
// curve (1 + gamma - I) / (1 + gamma) * cv, rather than cv itself, keeps the
// utility monotone at every report and not only at the knots.
std::function<double(double)> troi_conversions(const PiecewiseLinear& cv, Goal goal, double scale = 1.0) {
  const double indicator = goal_indicator(goal);
  std::vector<double> weighted;
  weighted.reserve(cv.size());
  for (std::size_t i = 0; i < cv.size(); ++i) {
    const double gamma = cv.xs()[i];
    weighted.push_back((1.0 + gamma - indicator) / (1.0 + gamma) * cv.ys()[i]);
  }
  PiecewiseLinear w(cv.xs(), std::move(weighted));
  return [w, indicator, scale](double gamma) { return scale * w(gamma) * (1.0 + gamma) / (1.0 + gamma - indicator); };
}

std::vector<double> validated_grid(std::span<const double> grid, const char* what) {
  std::vector<double> out(grid.begin(), grid.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!std::isfinite(out[i]) || (i > 0 && !(out[i - 1] < out[i]))) {
      throw DomainError(std::string(what) + ": grid must be finite and strictly ascending");
    }
  }
  return out;
}

double profile_value(const AdvertiserProfile& profile, std::optional<ValueClass> submarket) {
  if (submarket) {
    return profile.value(*submarket);
  }
  if (!profile.constant_value()) {
    throw DomainError("calibration over several value classes needs a sub-market");
  }
  return profile.values.begin()->second;
}

} // namespace

const char* to_string(MechanismKind kind) {
  switch (kind) {
  case MechanismKind::theorem1_tcpa:
    return "theorem1_tcpa";
  case MechanismKind::corollary1_submarket:
    return "corollary1_submarket";
  case MechanismKind::theorem3_decomposed:
    return "theorem3_decomposed";
  case MechanismKind::custom:
    return "custom";
  }
  return "custom";
}

const char* to_string(Pricing pricing) {
  return pricing == Pricing::uniform ? "uniform" : "proportional";
}

MechanismKind parse_mechanism_kind(const std::string& text) {
  if (text == "theorem1_tcpa" || text == "theorem1") {
    return MechanismKind::theorem1_tcpa;
  }
  if (text == "corollary1_submarket" || text == "corollary1") {
    return MechanismKind::corollary1_submarket;
  }
  if (text == "theorem3_decomposed" || text == "theorem3") {
    return MechanismKind::theorem3_decomposed;
  }
  throw DomainError("unknown mechanism kind: " + text);
}

Pricing parse_pricing(const std::string& text) {
  if (text == "uniform") {
    return Pricing::uniform;
  }
  if (text == "proportional") {
    return Pricing::proportional;
  }
  throw DomainError("unknown pricing rule: " + text);
}

bool Frontier::empty() const noexcept {
  return std::none_of(conversions.begin(), conversions.end(), [](double c) { return c > 0.0; });
}

GFunction::GFunction(PiecewiseLinear curve) : curve_(std::move(curve)) {
  if (curve_.empty()) {
    throw InvalidMechanism("g function needs at least one knot");
  }
  const auto& ys = curve_.ys();
  for (std::size_t i = 0; i < ys.size(); ++i) {
    if (!(ys[i] > 0.0)) {
      throw InvalidMechanism("g must be strictly positive");
    }
    if (i > 0 && ys[i] < ys[i - 1]) {
      throw InvalidMechanism("g must be non-decreasing");
    }
  }
}

void LinearDecomposition::validate() const {
  if (weights.empty()) {
    throw InvalidMechanism("linear decomposition has no weights");
  }
  double total = 0.0;
  for (const auto& [h, k] : weights) {
    if (!(k >= 0.0) || !std::isfinite(k)) {
      throw InvalidMechanism("decomposition weight for class " + std::to_string(h) + " must be non-negative");
    }
    total += k;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw InvalidMechanism("decomposition weights sum to " + describe(total) + ", not 1");
  }
}

AggregatedMechanism AggregatedMechanism::custom(ReportKind report_kind, Goal goal, std::vector<SubMarket> submarkets,
                                                std::pair<double, double> domain, std::string label) {
  if (submarkets.empty()) {
    throw InvalidMechanism("mechanism needs at least one sub-market");
  }
  if (!(domain.first <= domain.second)) {
    throw InvalidMechanism("mechanism domain is empty");
  }
  for (const auto& sm : submarkets) {
    if (!sm.cpa || !sm.conversions || !(sm.value > 0.0)) {
      throw InvalidMechanism("sub-market needs a positive value and both curves");
    }
  }
  AggregatedMechanism m;
  m.kind_ = MechanismKind::custom;
  m.report_kind_ = report_kind;
  m.goal_ = goal;
  m.label_ = std::move(label);
  m.domain_ = domain;
  m.submarkets_ = std::move(submarkets);
  return m;
}

bool AggregatedMechanism::contains(double report) const noexcept {
  const double scale = std::max(1.0, std::max(std::abs(domain_.first), std::abs(domain_.second)));
  return report >= domain_.first - 1e-12 * scale && report <= domain_.second + 1e-12 * scale;
}

std::vector<SubMarketPromise> AggregatedMechanism::promise(double report) const {
  if (!contains(report)) {
    throw DomainError("report " + describe(report) + " outside mechanism domain [" + describe(domain_.first) + ", " +
                      describe(domain_.second) + "]");
  }
  std::vector<SubMarketPromise> out;
  out.reserve(submarkets_.size());
  for (const auto& sm : submarkets_) {
    out.push_back({sm.value_class, sm.value, sm.cpa(report), sm.conversions(report)});
  }
  return out;
}

double AggregatedMechanism::conversions(double report) const {
  double total = 0.0;
  for (const auto& p : promise(report)) {
    total += p.conversions;
  }
  return total;
}

double AggregatedMechanism::spend(double report) const {
  double total = 0.0;
  for (const auto& p : promise(report)) {
    total += p.cpa * p.conversions;
  }
  return total;
}

double AggregatedMechanism::revenue(double report) const {
  double total = 0.0;
  for (const auto& p : promise(report)) {
    total += p.value * p.conversions;
  }
  return total;
}

double AggregatedMechanism::cpa(double report) const {
  const auto promises = promise(report);
  if (promises.size() == 1) {
    return promises.front().cpa;
  }
  double cv = 0.0;
  double spent = 0.0;
  for (const auto& p : promises) {
    cv += p.conversions;
    spent += p.cpa * p.conversions;
  }
  if (!(cv > 0.0)) {
    throw DomainError("mechanism promises no conversions at report " + describe(report));
  }
  return spent / cv;
}

std::optional<double> AggregatedMechanism::delivered_roi(double report) const {
  double spent = 0.0;
  double rev = 0.0;
  for (const auto& p : promise(report)) {
    spent += p.cpa * p.conversions;
    rev += p.value * p.conversions;
  }
  if (!(spent > 0.0)) {
    return std::nullopt;
  }
  return (rev - spent) / spent;
}

double AggregatedMechanism::utility(double report) const {
  const double indicator = goal_indicator(goal_);
  double total = 0.0;
  for (const auto& p : promise(report)) {
    total += (p.value - indicator * p.cpa) * p.conversions;
  }
  return total;
}

AggregatedMechanism AggregatedMechanism::from_record(const MechanismRecord& record) {
  switch (record.kind) {
  case MechanismKind::theorem1_tcpa: {
    if (record.values.size() != 1) {
      throw InvalidMechanism("theorem1 record needs exactly one value");
    }
    const auto& [h, v] = *record.values.begin();
    return theorem1_mechanism(v, record.goal, GFunction(record.curve), h);
  }
  case MechanismKind::corollary1_submarket: {
    std::vector<AggregatedMechanism> parts;
    for (const auto& [h, curve] : record.submarket_curves) {
      auto it = record.values.find(h);
      if (it == record.values.end()) {
        throw InvalidMechanism("corollary1 record has a curve for unknown class " + std::to_string(h));
      }
      parts.push_back(corollary1_mechanism(h, it->second, record.goal, curve));
    }
    if (parts.size() == 1) {
      return parts.front();
    }
    return combine_submarkets(parts);
  }
  case MechanismKind::theorem3_decomposed:
    return theorem3_mechanism(record.values, LinearDecomposition{record.weights}, record.curve, record.goal,
                              record.pricing);
  case MechanismKind::custom:
    break;
  }
  throw InvalidMechanism("custom mechanisms cannot be rebuilt from a record");
}

Frontier calibrate_feasible_cv(const Scenario& scenario, const AdvertiserProfile& profile,
                               std::span<const double> report_grid, const StrategyParams& params,
                               std::optional<ValueClass> submarket) {
  params.validate();
  Frontier frontier;
  frontier.reports = validated_grid(report_grid, "calibrate_feasible_cv");
  frontier.conversions.assign(frontier.reports.size(), 0.0);
  const double value = profile_value(profile, submarket);
  for (double t : frontier.reports) {
    if (!(t > 0.0) || (!submarket && !(t < value))) {
      throw DomainError("calibrate_feasible_cv: report " + describe(t) + " outside (0, value)");
    }
  }

  struct Opportunity {
    BidLadder ladder;
    double value;
    double cvr;
  };
  std::vector<Opportunity> opportunities;
  opportunities.reserve(scenario.size());
  for (std::size_t j = 0; j < scenario.size(); ++j) {
    const AdRequest& request = scenario.requests[j];
    if (submarket && request.value_class != *submarket) {
      continue;
    }
    BidLadder ladder(request, scenario.competitor_bids[j], scenario.reserve, profile.id);
    const double cvr = ladder.cvr();
    opportunities.push_back({std::move(ladder), profile.value(request.value_class), cvr});
  }
  if (opportunities.empty()) {
    return frontier;
  }

  std::vector<double> base(opportunities.size());
  for (std::size_t g = 0; g < frontier.reports.size(); ++g) {
    const double t = frontier.reports[g];
    const Constraint constraint = Constraint::tcpa(t);
    for (std::size_t i = 0; i < opportunities.size(); ++i) {
      base[i] = table1_bid(profile.goal, constraint, opportunities[i].value, opportunities[i].cvr, params);
    }
    auto evaluate = [&](double multiplier) {
      double cv = 0.0;
      double spent = 0.0;
      for (std::size_t i = 0; i < opportunities.size(); ++i) {
        const BidPrediction p = opportunities[i].ladder.predict(multiplier * base[i]);
        cv += p.conversions;
        spent += p.spend;
      }
      return std::pair{cv, spent};
    };
    auto feasible = [&](const std::pair<double, double>& point) {
      return constraint_met(constraint, point.second, point.first, 0.0);
    };

    double best = 0.0;
    double lo = 0.0;
    double hi = 1.0;
    auto at_hi = evaluate(hi);
    // Grow the bracket until the multiplier overshoots the constraint.
    while (feasible(at_hi) && hi < 1e9) {
      best = std::max(best, at_hi.first);
      lo = hi;
      hi *= 2.0;
      at_hi = evaluate(hi);
    }
    if (feasible(at_hi)) {
      best = std::max(best, at_hi.first);
    } else {
      for (int iter = 0; iter < 60; ++iter) {
        const double mid = 0.5 * (lo + hi);
        const auto at_mid = evaluate(mid);
        if (feasible(at_mid)) {
          best = std::max(best, at_mid.first);
          lo = mid;
        } else {
          hi = mid;
        }
      }
    }
    frontier.conversions[g] = best;
  }
  // The optimal-bid family at report t is a rescaling of the family at any
  // other report, so a bid vector feasible at t is feasible at every larger
  // report: the true frontier is non-decreasing.
  frontier.conversions = running_max(frontier.conversions);
  return frontier;
}

GFunction make_g_function(const Frontier& frontier, double value, Goal goal, double margin) {
  if (!(margin > 0.0 && margin <= 1.0)) {
    throw DomainError("make_g_function: margin must lie in (0, 1]");
  }
  if (!(value > 0.0)) {
    throw DomainError("make_g_function: value must be positive");
  }
  if (frontier.reports.size() != frontier.conversions.size() || frontier.reports.empty()) {
    throw DomainError("make_g_function: malformed frontier");
  }
  const double indicator = goal_indicator(goal);
  std::vector<double> xs;
  std::vector<double> candidate;
  for (std::size_t i = 0; i < frontier.reports.size(); ++i) {
    const double t = frontier.reports[i];
    const double headroom = value - indicator * t;
    if (!(headroom > 0.0)) {
      continue;
    }
    xs.push_back(t);
    candidate.push_back(headroom * margin * frontier.conversions[i]);
  }
  if (xs.empty()) {
    throw DomainError("make_g_function: v - I*t <= 0 on the whole grid");
  }
  if (std::none_of(candidate.begin(), candidate.end(), [](double u) { return u > 0.0; })) {
    throw DomainError("make_g_function: frontier is zero everywhere");
  }
  std::vector<double> g = running_max(candidate);
  for (double& y : g) {
    y = std::max(y, kGFloor);
  }
  return GFunction(PiecewiseLinear(std::move(xs), std::move(g)));
}

AggregatedMechanism theorem1_mechanism(double value, Goal goal, const GFunction& g, ValueClass value_class) {
  if (!(value > 0.0)) {
    throw DomainError("theorem1_mechanism: value must be positive");
  }
  const auto [lo, hi] = g.domain();
  if (!(lo > 0.0)) {
    throw DomainError("theorem1_mechanism: reports must be positive");
  }
  const double indicator = goal_indicator(goal);
  if (indicator > 0.0 && !(hi < value)) {
    throw DomainError("theorem1_mechanism: domain must lie below the value for a profit-maximizer");
  }
  AggregatedMechanism::SubMarket sm;
  sm.value_class = value_class;
  sm.value = value;
  sm.cpa = [](double t) { return t; };
  sm.conversions = [g, value, indicator](double t) { return g(t) / (value - indicator * t); };

  AggregatedMechanism m = AggregatedMechanism::custom(ReportKind::tcpa, goal, {std::move(sm)}, {lo, hi}, "theorem1_tcpa");
  m.kind_ = MechanismKind::theorem1_tcpa;
  MechanismRecord record;
  record.kind = MechanismKind::theorem1_tcpa;
  record.goal = goal;
  record.values = {{value_class, value}};
  record.curve = g.curve();
  m.record_ = std::move(record);
  return m;
}

AggregatedMechanism corollary1_mechanism(ValueClass value_class, double value, Goal goal,
                                         const PiecewiseLinear& conversions) {
  if (!(value > 0.0)) {
    throw DomainError("corollary1_mechanism: value must be positive");
  }
  check_troi_monotone(conversions, goal, "corollary1_mechanism");
  AggregatedMechanism::SubMarket sm;
  sm.value_class = value_class;
  sm.value = value;
  sm.cpa = [value](double gamma) { return value / (1.0 + gamma); };
  sm.conversions = troi_conversions(conversions, goal);

  AggregatedMechanism m = AggregatedMechanism::custom(ReportKind::troi, goal, {std::move(sm)}, conversions.domain(), "corollary1_submarket");
  m.kind_ = MechanismKind::corollary1_submarket;
  MechanismRecord record;
  record.kind = MechanismKind::corollary1_submarket;
  record.goal = goal;
  record.values = {{value_class, value}};
  record.submarket_curves = {{value_class, conversions}};
  m.record_ = std::move(record);
  return m;
}

AggregatedMechanism combine_submarkets(std::span<const AggregatedMechanism> parts) {
  if (parts.empty()) {
    throw InvalidMechanism("combine_submarkets: nothing to combine");
  }
  MechanismRecord record;
  record.kind = MechanismKind::corollary1_submarket;
  record.goal = parts.front().goal();
  std::vector<AggregatedMechanism::SubMarket> submarkets;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (const auto& part : parts) {
    if (part.kind() != MechanismKind::corollary1_submarket || !part.record()) {
      throw InvalidMechanism("combine_submarkets: every part must be a sub-market mechanism");
    }
    if (part.goal() != record.goal) {
      throw InvalidMechanism("combine_submarkets: parts disagree on the advertiser's goal");
    }
    for (const auto& sm : part.submarkets()) {
      if (record.values.count(sm.value_class) != 0) {
        throw InvalidMechanism("combine_submarkets: value class " + std::to_string(sm.value_class) + " repeated");
      }
      record.values[sm.value_class] = sm.value;
      submarkets.push_back(sm);
    }
    for (const auto& [h, curve] : part.record()->submarket_curves) {
      record.submarket_curves.emplace(h, curve);
    }
    lo = std::max(lo, part.domain().first);
    hi = std::min(hi, part.domain().second);
  }
  if (!(lo <= hi)) {
    throw InvalidMechanism("combine_submarkets: sub-market domains do not overlap");
  }
  AggregatedMechanism m = AggregatedMechanism::custom(ReportKind::troi, record.goal, std::move(submarkets), {lo, hi},
                                                      "corollary1_submarket");
  m.kind_ = MechanismKind::corollary1_submarket;
  m.record_ = std::move(record);
  return m;
}

AggregatedMechanism theorem3_mechanism(const std::map<ValueClass, double>& values, const LinearDecomposition& k,
                                       const PiecewiseLinear& cumulative_conversions, Goal goal, Pricing pricing) {
  k.validate();
  check_troi_monotone(cumulative_conversions, goal, "theorem3_mechanism");
  double weighted_value = 0.0;
  for (const auto& [h, weight] : k.weights) {
    auto it = values.find(h);
    if (it == values.end()) {
      throw InvalidMechanism("theorem3_mechanism: no value for class " + std::to_string(h));
    }
    if (!(it->second > 0.0)) {
      throw InvalidMechanism("theorem3_mechanism: values must be positive");
    }
    weighted_value += it->second * weight;
  }
  std::vector<AggregatedMechanism::SubMarket> submarkets;
  for (const auto& [h, weight] : k.weights) {
    AggregatedMechanism::SubMarket sm;
    sm.value_class = h;
    sm.value = values.at(h);
    if (pricing == Pricing::uniform) {
      sm.cpa = [weighted_value](double gamma) { return weighted_value / (1.0 + gamma); };
    } else {
      sm.cpa = [v = sm.value](double gamma) { return v / (1.0 + gamma); };
    }
    sm.conversions = troi_conversions(cumulative_conversions, goal, weight);
    submarkets.push_back(std::move(sm));
  }
  AggregatedMechanism m = AggregatedMechanism::custom(ReportKind::troi, goal, std::move(submarkets),
                                                      cumulative_conversions.domain(), "theorem3_decomposed");
  m.kind_ = MechanismKind::theorem3_decomposed;
  MechanismRecord record;
  record.kind = MechanismKind::theorem3_decomposed;
  record.goal = goal;
  for (const auto& [h, weight] : k.weights) {
    record.values[h] = values.at(h);
  }
  record.weights = k.weights;
  record.curve = cumulative_conversions;
  record.pricing = pricing;
  m.record_ = std::move(record);
  return m;
}

AggregatedMechanism calibrate_theorem1(const Scenario& scenario, const AdvertiserProfile& profile,
                                       std::span<const double> report_grid, const StrategyParams& params,
                                       double margin) {
  const Frontier frontier = calibrate_feasible_cv(scenario, profile, report_grid, params);
  if (frontier.empty()) {
    throw DomainError("calibrate_theorem1: no report reaches positive conversions");
  }
  const auto& [h, v] = *profile.values.begin();
  return theorem1_mechanism(v, profile.goal, make_g_function(frontier, v, profile.goal, margin), h);
}

namespace {

// Sub-market frontier over a gamma grid: calibrates at the CPA the pricing
// assigns to each gamma. `cpa_of` must be decreasing in gamma.
std::vector<double> frontier_over_gamma(const Scenario& scenario, const AdvertiserProfile& profile,
                                        std::span<const double> gammas, ValueClass h,
                                        const std::function<double(double)>& cpa_of, const StrategyParams& params) {
  std::vector<double> cpa_grid;
  cpa_grid.reserve(gammas.size());
  for (auto it = gammas.rbegin(); it != gammas.rend(); ++it) {
    cpa_grid.push_back(cpa_of(*it));
  }
  const Frontier f = calibrate_feasible_cv(scenario, profile, cpa_grid, params, h);
  return {f.conversions.rbegin(), f.conversions.rend()};
}

// Antitonic envelope of margin * (1 + gamma - I) / (1 + gamma) * cap, mapped
// back to conversions.
std::vector<double> antitonic_conversions(std::span<const double> gammas, std::span<const double> cap, Goal goal,
                                          double margin) {
  const double indicator = goal_indicator(goal);
  std::vector<double> weighted(gammas.size());
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    weighted[i] = margin * (1.0 + gammas[i] - indicator) / (1.0 + gammas[i]) * cap[i];
  }
  std::vector<double> env = running_min(weighted);
  std::vector<double> cv(gammas.size());
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    cv[i] = std::max(env[i], kGFloor) * (1.0 + gammas[i]) / (1.0 + gammas[i] - indicator);
  }
  // The floor can lift later knots above earlier ones; restore weak
  // antitonicity of the weighted curve exactly at the knots.
  for (std::size_t i = 1; i < gammas.size(); ++i) {
    const double prev = (1.0 + gammas[i - 1] - indicator) / (1.0 + gammas[i - 1]) * cv[i - 1];
    const double here = (1.0 + gammas[i] - indicator) / (1.0 + gammas[i]) * cv[i];
    if (here > prev) {
      cv[i] = prev * (1.0 + gammas[i]) / (1.0 + gammas[i] - indicator);
    }
  }
  return cv;
}

void check_gamma_grid(std::span<const double> gammas, Goal goal, const char* what) {
  validated_grid(gammas, what);
  if (gammas.empty() || !(gammas.front() > 0.0)) {
    throw DomainError(std::string(what) + ": tROI reports must be positive");
  }
  (void)goal;
}

} // namespace

AggregatedMechanism calibrate_corollary1(const Scenario& scenario, const AdvertiserProfile& profile,
                                         std::span<const double> gamma_grid, const StrategyParams& params,
                                         double margin) {
  check_gamma_grid(gamma_grid, profile.goal, "calibrate_corollary1");
  std::vector<AggregatedMechanism> parts;
  const std::vector<double> gammas(gamma_grid.begin(), gamma_grid.end());
  for (const auto& [h, v] : profile.values) {
    const auto cap =
        frontier_over_gamma(scenario, profile, gammas, h, [v = v](double g) { return v / (1.0 + g); }, params);
    const auto cv = antitonic_conversions(gammas, cap, profile.goal, margin);
    parts.push_back(corollary1_mechanism(h, v, profile.goal, PiecewiseLinear(gammas, cv)));
  }
  if (parts.size() == 1) {
    return parts.front();
  }
  return combine_submarkets(parts);
}

AggregatedMechanism calibrate_theorem3(const Scenario& scenario, const AdvertiserProfile& profile,
                                       std::span<const double> gamma_grid, const LinearDecomposition& k,
                                       Pricing pricing, const StrategyParams& params, double margin) {
  check_gamma_grid(gamma_grid, profile.goal, "calibrate_theorem3");
  k.validate();
  const std::vector<double> gammas(gamma_grid.begin(), gamma_grid.end());
  double weighted_value = 0.0;
  for (const auto& [h, weight] : k.weights) {
    weighted_value += profile.value(h) * weight;
  }
  std::vector<double> cap(gammas.size(), std::numeric_limits<double>::infinity());
  for (const auto& [h, weight] : k.weights) {
    if (!(weight > 0.0)) {
      continue;
    }
    const double v = profile.value(h);
    auto cpa_of = [&](double g) { return (pricing == Pricing::uniform ? weighted_value : v) / (1.0 + g); };
    const auto frontier = frontier_over_gamma(scenario, profile, gammas, h, cpa_of, params);
    for (std::size_t i = 0; i < gammas.size(); ++i) {
      cap[i] = std::min(cap[i], frontier[i] / weight);
    }
  }
  const auto cv = antitonic_conversions(gammas, cap, profile.goal, margin);
  std::map<ValueClass, double> values;
  for (const auto& [h, weight] : k.weights) {
    values[h] = profile.value(h);
  }
  return theorem3_mechanism(values, k, PiecewiseLinear(gammas, cv), profile.goal, pricing);
}

namespace {

IcVerdict verify_points(ReportKind report_kind, std::span<const double> grid,
                        const std::function<std::vector<SubMarketPromise>(double)>& promise, Goal goal,
                        std::optional<ValueClass> value_class) {
  const double indicator = goal_indicator(goal);
  std::optional<double> previous_utility;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double report = grid[i];
    double cv = 0.0;
    double spent = 0.0;
    double rev = 0.0;
    double utility = 0.0;
    for (const auto& p : promise(report)) {
      cv += p.conversions;
      spent += p.cpa * p.conversions;
      rev += p.value * p.conversions;
      utility += (p.value - indicator * p.cpa) * p.conversions;
    }
    IcViolation v;
    v.report = report;
    v.value_class = value_class;
    if (report_kind == ReportKind::tcpa) {
      const double delivered = cv > 0.0 ? spent / cv : promise(report).front().cpa;
      if (!rel_close(delivered, report, kPriceIdentityTolerance)) {
        v.kind = IcViolation::Kind::price_identity;
        v.expected = report;
        v.actual = delivered;
        v.detail = "delivered CPA " + describe(delivered) + " differs from report " + describe(report);
        return {false, v};
      }
    } else if (spent > 0.0) {
      const double roi = (rev - spent) / spent;
      if (!rel_close(roi, report, kPriceIdentityTolerance)) {
        v.kind = IcViolation::Kind::price_identity;
        v.expected = report;
        v.actual = roi;
        v.detail = "delivered ROI " + describe(roi) + " differs from report " + describe(report);
        return {false, v};
      }
    }
    if (previous_utility) {
      const bool increasing_required = report_kind == ReportKind::tcpa;
      const bool broken = increasing_required ? utility < *previous_utility - kMonotonicityTolerance
                                              : utility > *previous_utility + kMonotonicityTolerance;
      if (broken) {
        v.kind = IcViolation::Kind::monotonicity;
        v.report = grid[i - 1];
        v.next_report = report;
        v.expected = *previous_utility;
        v.actual = utility;
        v.detail = std::string("utility ") + (increasing_required ? "decreases" : "increases") + " from " +
                   describe(*previous_utility) + " to " + describe(utility) + " between reports " +
                   describe(grid[i - 1]) + " and " + describe(report);
        return {false, v};
      }
    }
    previous_utility = utility;
  }
  return {};
}

void check_verifier_grid(const AggregatedMechanism& mechanism, std::span<const double> grid) {
  if (grid.size() < 3) {
    throw DomainError("verify_mechanism_ic: need at least three grid points");
  }
  validated_grid(grid, "verify_mechanism_ic");
  for (double r : grid) {
    if (!mechanism.contains(r)) {
      throw DomainError("verify_mechanism_ic: report " + describe(r) + " outside the mechanism domain");
    }
  }
}

} // namespace

IcVerdict verify_mechanism_ic(const AggregatedMechanism& mechanism, std::span<const double> report_grid) {
  check_verifier_grid(mechanism, report_grid);
  return verify_points(
      mechanism.report_kind(), report_grid, [&](double r) { return mechanism.promise(r); }, mechanism.goal(),
      std::nullopt);
}

IcVerdict verify_submarket_ic(const AggregatedMechanism& mechanism, std::span<const double> report_grid) {
  check_verifier_grid(mechanism, report_grid);
  for (std::size_t i = 0; i < mechanism.submarkets().size(); ++i) {
    const auto& sm = mechanism.submarkets()[i];
    auto single = [&sm](double r) {
      return std::vector<SubMarketPromise>{{sm.value_class, sm.value, sm.cpa(r), sm.conversions(r)}};
    };
    IcVerdict verdict = verify_points(mechanism.report_kind(), report_grid, single, mechanism.goal(), sm.value_class);
    if (!verdict.ok) {
      return verdict;
    }
  }
  return {};
}

} // namespace autobid
