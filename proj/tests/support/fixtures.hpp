#pragma once
// Shared scenario fixtures for the unit and acceptance tests.

#include <cstddef>
#include <cstdint>

#include "autobid/control.hpp"
#include "autobid/curve.hpp"
#include "autobid/market.hpp"
#include "autobid/scenario.hpp"

namespace autobid::fixtures {

inline constexpr double kReferenceValue = 10.0;
inline constexpr double kReferenceTruth = 4.0;

inline AdvertiserProfile tcpa_bidder(double value, double tcpa, Goal goal = Goal::profit) {
  AdvertiserProfile p;
  p.id = 0;
  p.values = {{0, value}};
  p.constraint = Constraint::tcpa(tcpa);
  p.goal = goal;
  return p;
}

// The reference market: 1-3 slots, a pool of 30 competitors of whom 2-6
// show up per request.
inline ScenarioConfig reference_config(std::size_t requests = 10000) {
  ScenarioConfig c;
  c.requests = requests;
  c.slots_min = 1;
  c.slots_max = 3;
  c.position_decay = 0.6;
  c.competitor_pool = 30;
  c.competitors_min = 2;
  c.competitors_max = 6;
  c.competitor_bid_min = 0.05;
  c.competitor_bid_max = 0.6;
  c.bid_noise = 0.1;
  c.quality_min = 0.02;
  c.quality_max = 0.1;
  c.cvr_min = 0.02;
  c.cvr_max = 0.1;
  c.auto_bidder = tcpa_bidder(kReferenceValue, kReferenceTruth);
  return c;
}

// The reference config with three value classes and a target-ROI constraint.
inline ScenarioConfig submarket_config(std::size_t requests, double gamma) {
  ScenarioConfig c = reference_config(requests);
  c.auto_bidder.values = {{0, 6.0}, {1, 10.0}, {2, 14.0}};
  c.auto_bidder.constraint = Constraint::troi(gamma);
  c.class_weights = {{0, 1.0}, {1, 1.0}, {2, 1.0}};
  return c;
}

// Controller settings used for the reference family.
inline ControlConfig reference_control() {
  ControlConfig c;
  c.alpha_ratio = 1.0;
  c.beta_floor = 0.05;
  return c;
}

inline std::vector<double> reference_grid(std::size_t points = 91) {
  return linear_grid(0.5, 9.5, points);
}

} // namespace autobid::fixtures
