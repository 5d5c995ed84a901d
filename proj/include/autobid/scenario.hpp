#pragma once
#include <cstdint>
#include <map>
#include <vector>

#include "autobid/market.hpp"

namespace autobid {

struct ScenarioConfig {
  std::size_t requests = 0;
  int slots_min = 1;
  int slots_max = 1;
  // Position factor of slot s (0-based) is position_decay^s.
  double position_decay = 1.0;

  std::size_t competitor_pool = 0;
  int competitors_min = 0;
  int competitors_max = 0;
  // Each competitor draws a base per-click bid once, then bids
  // base * U[1 - bid_noise, 1 + bid_noise] in every request it matches.
  double competitor_bid_min = 0.0;
  double competitor_bid_max = 0.0;
  double bid_noise = 0.0;

  double quality_min = 1.0;
  double quality_max = 1.0;
  double cvr_min = 1.0;
  double cvr_max = 1.0;

  // Mixture over the auto-bidder's value classes. Empty means every request
  // takes the profile's first class.
  std::map<ValueClass, double> class_weights;
  double reserve = 0.0;

  // Optional fixture: per request, the exact competitor bids. When non-empty
  // it replaces the pool draw and must have one entry per request.
  std::vector<BidProfile> fixed_competitors;

  AdvertiserProfile auto_bidder;

  // Throws ValidationError naming the offending field.
  void validate() const;
};

struct Scenario {
  std::uint64_t seed = 0;
  std::vector<AdRequest> requests;
  // competitor_bids[j] holds every non-auto-bidding bid in requests[j].
  std::vector<BidProfile> competitor_bids;
  AdvertiserProfile auto_bidder;
  double reserve = 0.0;

  std::size_t size() const noexcept { return requests.size(); }
  double competitor_bid(std::size_t index, AdvertiserId advertiser) const;
  // Scenario-level invariants: positive competitor bids, auto-bidder matched
  // everywhere, value classes known to the profile.
  void validate() const;
};

Scenario generate_scenario(const ScenarioConfig& config, std::uint64_t seed);

} // namespace autobid
