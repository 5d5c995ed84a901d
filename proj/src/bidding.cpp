#include "autobid/bidding.hpp"

#include <cmath>
#include <mutex>
#include <string>

#include "autobid/error.hpp"

namespace autobid {

void StrategyParams::validate() const {
  if (!(m > 0.0) || !(n > 0.0) || !std::isfinite(m) || !std::isfinite(n)) {
    throw DomainError("strategy parameters m and n must be positive");
  }
}

double table1_bid(Goal goal, const Constraint& constraint, double value, double cvr, const StrategyParams& params) {
  params.validate();
  if (!(value > 0.0)) {
    throw DomainError("table1_bid: value must be positive");
  }
  if (!(cvr > 0.0 && cvr <= 1.0)) {
    throw DomainError("table1_bid: cvr must lie in (0, 1]");
  }
  if (!(constraint.target > 0.0)) {
    throw DomainError("table1_bid: constraint target must be positive");
  }
  const bool profit = goal == Goal::profit;
  if (constraint.kind == ConstraintKind::tcpa) {
    const double m = params.m;
    return (m * constraint.target + value) * cvr / (profit ? m + 1.0 : m);
  }
  const double n = params.n;
  const double gamma = constraint.target;
  return (n + gamma + 1.0) * value * cvr / ((profit ? n + 1.0 : n) * (gamma + 1.0));
}

void BidHistory::observe(AdvertiserId advertiser, double bid) {
  last_[advertiser] = bid;
  sum_ += bid;
  ++count_;
}

void BidHistory::observe(std::span<const Bid> bids) {
  for (const auto& bid : bids) {
    observe(bid.advertiser, bid.amount);
  }
}

std::optional<double> BidHistory::last(AdvertiserId advertiser) const {
  auto it = last_.find(advertiser);
  if (it == last_.end()) {
    return std::nullopt;
  }
  return it->second;
}

std::optional<double> BidHistory::mean() const {
  if (count_ == 0) {
    return std::nullopt;
  }
  return sum_ / static_cast<double>(count_);
}

BidProfile estimate_competitor_bids(const BidHistory& history, const AdRequest& request, AdvertiserId self,
                                    double reserve) {
  BidProfile estimate;
  estimate.reserve(request.matched.size());
  const std::optional<double> mean = history.mean();
  for (const auto& ad : request.matched) {
    if (ad.advertiser == self) {
      continue;
    }
    const std::optional<double> last = history.last(ad.advertiser);
    estimate.push_back({ad.advertiser, last ? *last : mean ? *mean : reserve});
  }
  return estimate;
}

namespace {

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

std::map<std::string, BidEstimator>& registry() {
  static std::map<std::string, BidEstimator> estimators{{"last_observed", &estimate_competitor_bids}};
  return estimators;
}

} // namespace

void register_estimator(const std::string& name, BidEstimator estimator) {
  std::lock_guard lock(registry_mutex());
  registry()[name] = std::move(estimator);
}

BidEstimator find_estimator(const std::string& name) {
  std::lock_guard lock(registry_mutex());
  auto it = registry().find(name);
  if (it == registry().end()) {
    throw DomainError("unknown bid estimator: " + name);
  }
  return it->second;
}

} // namespace autobid
