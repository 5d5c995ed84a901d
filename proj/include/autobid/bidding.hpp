#pragma once
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>

#include "autobid/market.hpp"

namespace autobid {

// Dual parameters of the optimal bid family: m for tCPA, n for tROI.
struct StrategyParams {
  double m = 1.0;
  double n = 1.0;

  void validate() const;
};

// Per-click bid from the optimal-bid table for the goal and constraint:
//
//   tCPA revenue  (m t + v) cvr / m          tCPA profit  (m t + v) cvr / (m + 1)
//   tROI revenue  (n + g + 1) v cvr / (n (g + 1))
//   tROI profit   (n + g + 1) v cvr / ((n + 1)(g + 1))
double table1_bid(Goal goal, const Constraint& constraint, double value, double cvr, const StrategyParams& params);

// Competitor bids observed so far in an episode.
class BidHistory {
public:
  void observe(AdvertiserId advertiser, double bid);
  void observe(std::span<const Bid> bids);

  std::optional<double> last(AdvertiserId advertiser) const;
  // Mean of every bid observed, across all competitors.
  std::optional<double> mean() const;
  std::size_t observations() const noexcept { return count_; }

private:
  std::map<AdvertiserId, double> last_;
  double sum_ = 0.0;
  std::size_t count_ = 0;
};

using BidEstimator =
    std::function<BidProfile(const BidHistory& history, const AdRequest& request, AdvertiserId self, double reserve)>;

// Last observed bid per competitor, else the history mean, else the reserve.
BidProfile estimate_competitor_bids(const BidHistory& history, const AdRequest& request, AdvertiserId self,
                                    double reserve);

// Named estimators; "last_observed" is always present.
void register_estimator(const std::string& name, BidEstimator estimator);
BidEstimator find_estimator(const std::string& name);

} // namespace autobid
