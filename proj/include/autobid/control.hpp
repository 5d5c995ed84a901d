#pragma once
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "autobid/bidding.hpp"
#include "autobid/market.hpp"
#include "autobid/mechanism.hpp"
#include "autobid/scenario.hpp"

namespace autobid {

struct ControlConfig {
  // Exterior controller: multiplicative-exponential PID on the bid multiplier.
  double kp = 0.2;
  double ki = 0.01;
  double kd = 0.0;
  double mult_min = 0.2;
  double mult_max = 5.0;
  double participation_min = 0.05;

  // Interior planner tolerances: alpha = alpha_ratio * tcpa,
  // beta = beta_ratio * max(tcv, beta_floor).
  double alpha_ratio = 0.25;
  double beta_ratio = 0.5;
  double beta_floor = 1e-4;

  // Weights of the normalized violation used when no candidate is feasible.
  double weight_cpa = 1.0;
  double weight_cv = 1.0;

  // Keep every bid low enough that the cumulative CPA cannot exceed the
  // promised CPA whatever price the auction charges.
  bool cpa_guard = true;

  // Throws ValidationError naming the offending key.
  void validate() const;
};

// The promise being delivered in one sub-market.
struct EpisodeTarget {
  double cpa = 0.0;
  double conversions = 0.0;
};

struct DeliveryPlan {
  std::size_t remaining_requests = 0;
  double tcpa = 0.0;
  double tcv = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
};

struct ControllerState {
  double conversions = 0.0; // x
  double spend = 0.0;
  double integral = 0.0;
  double previous_error = 0.0;
  bool has_previous = false;
  double multiplier = 1.0;
  double participation = 1.0;

  // y: cumulative spend per conversion, 0 before the first conversion.
  double running_cpa() const noexcept { return conversions > 0.0 ? spend / conversions : 0.0; }
};

// Egality split of what is left of the target over the remaining requests.
// Throws PlanningError when no request remains.
DeliveryPlan ics_next_target(const ControllerState& state, const EpisodeTarget& target, std::size_t remaining,
                             const ControlConfig& config);

struct BidDecision {
  double bid = 0.0;          // after the multiplier and outcome clipping
  double unscaled_bid = 0.0; // the chosen candidate
  BidPrediction predicted;   // outcome of the candidate under the estimates
  bool violation = false;    // no candidate met both tolerances
  double cpa_slack = 0.0;    // |cpa - tcpa| - alpha, positive when outside
  double cv_slack = 0.0;     // |cv - tcv| - beta, positive when outside
};

// Chooses a per-click bid for one request from the candidate ladder under the
// estimated competitor bids. Candidates above `bid_cap` are discarded.
BidDecision constrained_bid(const AdRequest& request, std::span<const Bid> estimated, const DeliveryPlan& plan,
                            double value, Goal goal, double multiplier, double reserve, AdvertiserId self,
                            const ControlConfig& config,
                            double bid_cap = std::numeric_limits<double>::infinity());

// Exterior update after a request. `progress` is the fraction of the
// sub-market's requests processed so far.
void ecs_adjust(ControllerState& state, const EpisodeTarget& target, double progress, const ControlConfig& config);

struct RequestLog {
  RequestId request_id = 0;
  std::optional<std::size_t> slot;
  double bid = 0.0;
  double price = 0.0;
  double conversions = 0.0;
  double spend = 0.0;
  double cumulative_cpa = 0.0; // episode-wide, 0 before the first conversion
  bool participated = true;
};

struct ViolationEvent {
  RequestId request_id = 0;
  double cpa_slack = 0.0;
  double cv_slack = 0.0;
};

struct EpisodeResult {
  EpisodeSummary summary;
  std::vector<RequestLog> log;
  std::vector<ViolationEvent> violations;
};

// Delivers the mechanism's promise at `report` over the scenario, one
// controller per sub-market. `truth` is the advertiser's real profile and
// decides constraint satisfaction. The scenario's own competitor bids are the
// ground truth of every auction; the estimator only sees past ones.
EpisodeResult run_episode(const Scenario& scenario, const AdvertiserProfile& truth,
                          const AggregatedMechanism& mechanism, double report, const ControlConfig& config,
                          std::uint64_t seed, const BidEstimator& estimator = estimate_competitor_bids);

} // namespace autobid
