#include "autobid/control.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "autobid/error.hpp"
#include "autobid/rng.hpp"

namespace autobid {

namespace {

// Participation shrinks by this factor per over-delivering request and
// recovers by its inverse otherwise.
constexpr double kParticipationStep = 0.9;

void require(bool ok, const char* key, const char* what) {
  if (!ok) {
    throw ValidationError(key, what);
  }
}

} // namespace

void ControlConfig::validate() const {
  require(std::isfinite(kp) && std::isfinite(ki) && std::isfinite(kd), "control.kp", "gains must be finite");
  require(mult_min > 0.0 && mult_min <= 1.0, "control.mult_min", "must lie in (0, 1]");
  require(mult_max >= 1.0 && std::isfinite(mult_max), "control.mult_max", "must be finite and at least 1");
  require(participation_min > 0.0 && participation_min <= 1.0, "control.participation_min", "must lie in (0, 1]");
  require(alpha_ratio >= 0.0 && std::isfinite(alpha_ratio), "control.alpha_ratio", "must be non-negative");
  require(beta_ratio >= 0.0 && std::isfinite(beta_ratio), "control.beta_ratio", "must be non-negative");
  require(beta_floor > 0.0 && std::isfinite(beta_floor), "control.beta_floor", "must be positive");
  require(weight_cpa >= 0.0 && weight_cv >= 0.0, "control.weight_cpa", "violation weights must be non-negative");
}

DeliveryPlan ics_next_target(const ControllerState& state, const EpisodeTarget& target, std::size_t remaining,
                             const ControlConfig& config) {
  if (remaining == 0) {
    throw PlanningError("ics_next_target: no requests remain");
  }
  DeliveryPlan plan;
  plan.remaining_requests = remaining;
  const double x = state.conversions;
  if (x >= target.conversions) {
    // Promise met: stop buying, and judge any stray win at the current CPA.
    plan.tcv = 0.0;
    plan.tcpa = x > 0.0 ? state.running_cpa() : target.cpa;
    plan.alpha = config.alpha_ratio * plan.tcpa;
    plan.beta = 0.0;
    return plan;
  }
  const double left = target.conversions - x;
  plan.tcv = left / static_cast<double>(remaining);
  plan.tcpa = std::max(0.0, (target.cpa * target.conversions - state.spend) / left);
  plan.alpha = config.alpha_ratio * plan.tcpa;
  plan.beta = config.beta_ratio * std::max(plan.tcv, config.beta_floor);
  return plan;
}

BidDecision constrained_bid(const AdRequest& request, std::span<const Bid> estimated, const DeliveryPlan& plan,
                            double value, Goal goal, double multiplier, double reserve, AdvertiserId self,
                            const ControlConfig& config, double bid_cap) {
  const BidLadder ladder(request, estimated, reserve, self);
  const double indicator = goal_indicator(goal);
  const double cpa_scale = std::max(plan.tcpa, 1e-12);
  const double cv_scale = std::max(plan.tcv, config.beta_floor);

  struct Scored {
    double bid;
    BidPrediction p;
    double cpa_slack;
    double cv_slack;
  };
  std::optional<Scored> best_feasible;
  double best_utility = 0.0;
  std::optional<Scored> least_violating;
  double least_violation = 0.0;

  for (double candidate : ladder.candidate_bids()) {
    if (candidate > bid_cap && candidate > 0.0) {
      continue;
    }
    const BidPrediction p = ladder.predict(candidate);
    // A losing candidate has no CPA; it meets the CPA tolerance vacuously.
    const double cpa_slack = p.conversions > 0.0 ? std::abs(*p.cpa() - plan.tcpa) - plan.alpha : -plan.alpha;
    const double cv_slack = std::abs(p.conversions - plan.tcv) - plan.beta;
    const Scored scored{candidate, p, cpa_slack, cv_slack};
    if (cpa_slack <= 0.0 && cv_slack <= 0.0) {
      const double utility = p.conversions > 0.0 ? (value - indicator * *p.cpa()) * p.conversions : 0.0;
      if (!best_feasible || utility > best_utility) {
        best_feasible = scored;
        best_utility = utility;
      }
      continue;
    }
    const double violation = config.weight_cpa * std::max(0.0, cpa_slack) / cpa_scale +
                             config.weight_cv * std::max(0.0, cv_slack) / cv_scale;
    if (!least_violating || violation < least_violation) {
      least_violating = scored;
      least_violation = violation;
    }
  }

  BidDecision decision;
  const Scored& chosen = best_feasible ? *best_feasible : *least_violating;
  decision.violation = !best_feasible;
  decision.unscaled_bid = chosen.bid;
  decision.predicted = chosen.p;
  decision.cpa_slack = chosen.cpa_slack;
  decision.cv_slack = chosen.cv_slack;
  if (chosen.bid > 0.0 && chosen.p.won()) {
    // The multiplier moves the bid inside the predicted outcome tier only,
    // buying margin against estimation error without changing the plan.
    const auto [lo, hi] = ladder.tier(chosen.bid);
    double bid = std::clamp(chosen.bid * multiplier, lo, std::max(lo, hi));
    bid = std::max(chosen.bid, std::min(bid, bid_cap));
    decision.bid = bid;
  }
  return decision;
}

void ecs_adjust(ControllerState& state, const EpisodeTarget& target, double progress, const ControlConfig& config) {
  double cpa_error = 0.0;
  if (state.conversions > 0.0 && target.cpa > 0.0) {
    cpa_error = (state.running_cpa() - target.cpa) / target.cpa;
  }
  double pace_error = 0.0;
  if (target.conversions > 0.0) {
    pace_error = state.conversions / target.conversions - progress;
  }
  const double error = 0.5 * cpa_error + 0.5 * pace_error;
  const double derivative = state.has_previous ? error - state.previous_error : 0.0;
  const double integral = state.integral + error;
  const double raw = state.multiplier * std::exp(-(config.kp * error + config.ki * integral + config.kd * derivative));
  const double clipped = std::clamp(raw, config.mult_min, config.mult_max);
  // Conditional integration: a saturated actuator does not wind up.
  if (clipped == raw) {
    state.integral = integral;
  }
  state.multiplier = clipped;
  state.previous_error = error;
  state.has_previous = true;

  const bool over_delivering = target.conversions > 0.0 && state.conversions >= target.conversions;
  if (over_delivering && state.running_cpa() > target.cpa) {
    state.participation = std::max(config.participation_min, state.participation * kParticipationStep);
  } else {
    state.participation = std::min(1.0, state.participation / kParticipationStep);
  }
}

EpisodeResult run_episode(const Scenario& scenario, const AdvertiserProfile& truth,
                          const AggregatedMechanism& mechanism, double report, const ControlConfig& config,
                          std::uint64_t seed, const BidEstimator& estimator) {
  config.validate();
  truth.validate();
  scenario.validate();
  if (truth.id != scenario.auto_bidder.id) {
    throw DomainError("run_episode: profile is not the scenario's auto-bidder");
  }

  struct SubMarketRun {
    EpisodeTarget target;
    double value = 0.0;
    std::size_t total = 0;
    std::size_t processed = 0;
    ControllerState state;
  };
  std::map<ValueClass, SubMarketRun> runs;
  for (const auto& p : mechanism.promise(report)) {
    SubMarketRun run;
    run.target = {p.cpa, p.conversions};
    run.value = p.value;
    runs.emplace(p.value_class, run);
  }
  for (const auto& request : scenario.requests) {
    auto it = runs.find(request.value_class);
    if (it != runs.end()) {
      ++it->second.total;
    }
  }

  EpisodeResult result;
  result.log.reserve(scenario.size());
  std::vector<DeliveryRecord> records;
  std::vector<ValueClass> classes;
  records.reserve(scenario.size());
  classes.reserve(scenario.size());

  Rng rng(derive_seed(seed, "episode"));
  BidHistory history;
  double total_spend = 0.0;
  double total_conversions = 0.0;

  for (std::size_t j = 0; j < scenario.size(); ++j) {
    const AdRequest& request = scenario.requests[j];
    const BidProfile& competitors = scenario.competitor_bids[j];
    const double draw = rng.canonical();

    RequestLog entry;
    entry.request_id = request.request_id;
    entry.participated = false;
    double own_bid = 0.0;

    auto it = runs.find(request.value_class);
    if (it != runs.end()) {
      SubMarketRun& run = it->second;
      ControllerState& state = run.state;
      const std::size_t remaining = run.total - run.processed;
      if (draw < state.participation) {
        entry.participated = true;
        const DeliveryPlan plan = ics_next_target(state, run.target, remaining, config);
        double cap = std::numeric_limits<double>::infinity();
        if (config.cpa_guard) {
          const MatchedAd* own = request.find(truth.id);
          const double max_ctr = own->quality * request.slots.front().position_factor;
          const double slack = std::max(0.0, run.target.cpa * state.conversions - state.spend);
          cap = (run.target.cpa * own->cvr + slack / max_ctr) * (1.0 - 1e-12);
        }
        const BidProfile estimate = estimator(history, request, truth.id, scenario.reserve);
        const BidDecision decision = constrained_bid(request, estimate, plan, run.value, mechanism.goal(),
                                                     state.multiplier, scenario.reserve, truth.id, config, cap);
        own_bid = decision.bid;
        if (decision.violation) {
          result.violations.push_back({request.request_id, decision.cpa_slack, decision.cv_slack});
        }
      }
    }

    BidProfile bids = competitors;
    if (own_bid > 0.0) {
      bids.push_back({truth.id, own_bid});
    }
    const AuctionOutcome outcome = run_gsp_auction(request, bids, scenario.reserve);
    DeliveryRecord record = compute_request_delivery(outcome, request, truth.id);
    history.observe(competitors);

    if (it != runs.end()) {
      SubMarketRun& run = it->second;
      run.state.conversions += record.conversions;
      run.state.spend += record.spend;
      ++run.processed;
      ecs_adjust(run.state, run.target, static_cast<double>(run.processed) / static_cast<double>(run.total), config);
    }

    total_spend += record.spend;
    total_conversions += record.conversions;
    entry.slot = record.slot_index;
    entry.bid = own_bid;
    entry.price = record.price_per_click;
    entry.conversions = record.conversions;
    entry.spend = record.spend;
    entry.cumulative_cpa = total_conversions > 0.0 ? total_spend / total_conversions : 0.0;
    result.log.push_back(entry);
    records.push_back(record);
    classes.push_back(request.value_class);
  }

  result.summary = aggregate_episode(records, truth, classes);
  result.summary.violation_events = result.violations.size();
  return result;
}

} // namespace autobid
