#include "autobid/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "autobid/error.hpp"
#include "autobid/rng.hpp"

namespace autobid {

namespace {

void require(bool ok, const char* key, const char* what) {
  if (!ok) {
    throw ValidationError(key, what);
  }
}

void require_range(double lo, double hi, const char* key) {
  require(std::isfinite(lo) && std::isfinite(hi), key, "range must be finite");
  require(lo >= 0.0, key, "negative support");
  require(lo <= hi, key, "min exceeds max");
}

} // namespace

void ScenarioConfig::validate() const {
  require(slots_min >= 1 && slots_min <= slots_max, "scenario.slots", "need 1 <= slots_min <= slots_max");
  require(position_decay > 0.0 && position_decay <= 1.0, "scenario.position_decay", "must lie in (0, 1]");
  require(slots_max == 1 || position_decay < 1.0, "scenario.position_decay",
          "must be below 1 when requests can have several slots");
  require_range(competitor_bid_min, competitor_bid_max, "scenario.competitor_bid");
  require(bid_noise >= 0.0 && bid_noise < 1.0, "scenario.bid_noise", "must lie in [0, 1)");
  require_range(quality_min, quality_max, "scenario.quality");
  require(quality_min > 0.0 && quality_max <= 1.0, "scenario.quality", "must lie in (0, 1]");
  require_range(cvr_min, cvr_max, "scenario.cvr");
  require(cvr_min > 0.0 && cvr_max <= 1.0, "scenario.cvr", "must lie in (0, 1]");
  require(reserve >= 0.0, "scenario.reserve", "negative support");
  for (const auto& [h, w] : class_weights) {
    require(w >= 0.0, "scenario.class_weights", "negative weight");
    require(auto_bidder.values.count(h) == 1, "scenario.class_weights", "class missing from advertiser values");
  }
  if (!class_weights.empty()) {
    double total = 0.0;
    for (const auto& [h, w] : class_weights) {
      total += w;
    }
    require(total > 0.0, "scenario.class_weights", "weights must have a positive sum");
  }
  if (fixed_competitors.empty()) {
    require(competitors_min >= 0 && competitors_min <= competitors_max, "scenario.competitors",
            "need 0 <= competitors_min <= competitors_max");
    require(static_cast<std::size_t>(competitors_max) <= competitor_pool, "scenario.competitors",
            "competitors_max exceeds the pool");
    require(competitor_pool == 0 || competitor_bid_min > 0.0, "scenario.competitor_bid",
            "competitor bids must be positive");
  } else {
    require(fixed_competitors.size() == requests, "scenario.fixed_competitors", "need one entry per request");
    for (const auto& profile : fixed_competitors) {
      for (const auto& bid : profile) {
        require(bid.amount > 0.0, "scenario.fixed_competitors", "competitor bids must be positive");
        require(bid.advertiser != auto_bidder.id, "scenario.fixed_competitors",
                "competitor id collides with the auto-bidder");
      }
    }
  }
  try {
    auto_bidder.validate();
  } catch (const DomainError& e) {
    throw ValidationError("advertiser", e.what());
  }
}

double Scenario::competitor_bid(std::size_t index, AdvertiserId advertiser) const {
  for (const auto& bid : competitor_bids.at(index)) {
    if (bid.advertiser == advertiser) {
      return bid.amount;
    }
  }
  throw DomainError("advertiser " + std::to_string(advertiser) + " has no bid in request index " +
                    std::to_string(index));
}

void Scenario::validate() const {
  if (competitor_bids.size() != requests.size()) {
    throw MalformedRequest("scenario: competitor bid table does not match the request stream");
  }
  for (std::size_t j = 0; j < requests.size(); ++j) {
    const auto& request = requests[j];
    request.validate();
    if (request.find(auto_bidder.id) == nullptr) {
      throw MalformedRequest("request " + std::to_string(request.request_id) + " does not match the auto-bidder");
    }
    if (auto_bidder.values.count(request.value_class) == 0) {
      throw MalformedRequest("request " + std::to_string(request.request_id) + " has an unknown value class");
    }
    for (const auto& bid : competitor_bids[j]) {
      if (!(bid.amount > 0.0)) {
        throw MalformedRequest("request " + std::to_string(request.request_id) + ": competitor bid not positive");
      }
      if (bid.advertiser == auto_bidder.id || request.find(bid.advertiser) == nullptr) {
        throw MalformedRequest("request " + std::to_string(request.request_id) + ": unmatched competitor bid");
      }
    }
  }
}

Scenario generate_scenario(const ScenarioConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(derive_seed(seed, "scenario"));

  Scenario scenario;
  scenario.seed = seed;
  scenario.auto_bidder = config.auto_bidder;
  scenario.reserve = config.reserve;
  scenario.requests.reserve(config.requests);
  scenario.competitor_bids.reserve(config.requests);

  const AdvertiserId self = config.auto_bidder.id;
  // Competitor ids follow the auto-bidder's so they never collide.
  std::vector<double> base_bids(config.competitor_pool);
  for (auto& b : base_bids) {
    b = rng.uniform(config.competitor_bid_min, config.competitor_bid_max);
  }

  std::vector<ValueClass> classes;
  std::vector<double> class_weights;
  for (const auto& [h, w] : config.class_weights) {
    classes.push_back(h);
    class_weights.push_back(w);
  }

  std::vector<std::size_t> pool(config.competitor_pool);
  for (std::size_t j = 0; j < config.requests; ++j) {
    AdRequest request;
    request.request_id = j + 1;
    request.value_class =
        classes.empty() ? config.auto_bidder.values.begin()->first : classes[rng.pick(class_weights)];

    const auto slot_count = rng.uniform_int(config.slots_min, config.slots_max);
    double factor = 1.0;
    for (std::int64_t s = 0; s < slot_count; ++s) {
      request.slots.push_back({static_cast<int>(s + 1), factor});
      factor *= config.position_decay;
    }

    BidProfile bids;
    if (!config.fixed_competitors.empty()) {
      bids = config.fixed_competitors[j];
    } else {
      const auto count = static_cast<std::size_t>(rng.uniform_int(config.competitors_min, config.competitors_max));
      std::iota(pool.begin(), pool.end(), std::size_t{0});
      for (std::size_t k = 0; k < count; ++k) {
        const auto pick = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(k),
                                                                   static_cast<std::int64_t>(pool.size()) - 1));
        std::swap(pool[k], pool[pick]);
        const double noise = rng.uniform(1.0 - config.bid_noise, 1.0 + config.bid_noise);
        bids.push_back({static_cast<AdvertiserId>(self + 1 + pool[k]), base_bids[pool[k]] * noise});
      }
    }
    std::sort(bids.begin(), bids.end(), [](const Bid& a, const Bid& b) { return a.advertiser < b.advertiser; });

    request.matched.push_back(
        {self, rng.uniform(config.quality_min, config.quality_max), rng.uniform(config.cvr_min, config.cvr_max)});
    for (const auto& bid : bids) {
      request.matched.push_back(
          {bid.advertiser, rng.uniform(config.quality_min, config.quality_max), rng.uniform(config.cvr_min, config.cvr_max)});
    }
    std::sort(request.matched.begin(), request.matched.end(),
              [](const MatchedAd& a, const MatchedAd& b) { return a.advertiser < b.advertiser; });

    scenario.requests.push_back(std::move(request));
    scenario.competitor_bids.push_back(std::move(bids));
  }
  scenario.validate();
  return scenario;
}

} // namespace autobid
