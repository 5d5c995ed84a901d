#include "autobid/market.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "autobid/error.hpp"

namespace autobid {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Ranked {
  AdvertiserId id;
  double score;
  double bid;
  double quality;
};

bool ranks_before(AdvertiserId a_id, double a_score, AdvertiserId b_id, double b_score) {
  if (a_score != b_score) {
    return a_score > b_score;
  }
  return a_id < b_id;
}

} // namespace

void AdvertiserProfile::validate() const {
  if (values.empty()) {
    throw DomainError("advertiser " + std::to_string(id) + ": empty value map");
  }
  for (const auto& [h, v] : values) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw DomainError("advertiser " + std::to_string(id) + ": value for class " + std::to_string(h) +
                        " must be positive");
    }
  }
  if (constraint.kind == ConstraintKind::tcpa) {
    if (values.size() != 1) {
      throw DomainError("tCPA constraint requires a single value per conversion");
    }
    const double v = values.begin()->second;
    if (!(constraint.target > 0.0 && constraint.target < v)) {
      throw DomainError("tCPA must lie in (0, value)");
    }
  } else if (!(constraint.target > 0.0) || !std::isfinite(constraint.target)) {
    throw DomainError("tROI must be positive");
  }
}

double AdvertiserProfile::value(ValueClass h) const {
  auto it = values.find(h);
  if (it == values.end()) {
    throw DomainError("advertiser " + std::to_string(id) + " has no value for class " + std::to_string(h));
  }
  return it->second;
}

const MatchedAd* AdRequest::find(AdvertiserId id) const noexcept {
  auto it = std::lower_bound(matched.begin(), matched.end(), id,
                             [](const MatchedAd& ad, AdvertiserId key) { return ad.advertiser < key; });
  if (it != matched.end() && it->advertiser == id) {
    return &*it;
  }
  return nullptr;
}

void AdRequest::validate() const {
  if (slots.empty()) {
    throw MalformedRequest("request " + std::to_string(request_id) + " has no slots");
  }
  for (std::size_t s = 0; s < slots.size(); ++s) {
    const double pf = slots[s].position_factor;
    if (!(pf > 0.0 && pf <= 1.0)) {
      throw MalformedRequest("request " + std::to_string(request_id) + ": position factor outside (0, 1]");
    }
    if (s > 0 && !(pf < slots[s - 1].position_factor)) {
      throw MalformedRequest("request " + std::to_string(request_id) +
                             ": position factors must strictly decrease");
    }
  }
  for (std::size_t i = 0; i < matched.size(); ++i) {
    const auto& ad = matched[i];
    if (i > 0 && !(matched[i - 1].advertiser < ad.advertiser)) {
      throw MalformedRequest("request " + std::to_string(request_id) + ": matched list not sorted by id");
    }
    if (!(ad.quality > 0.0 && ad.quality <= 1.0) || !(ad.cvr > 0.0 && ad.cvr <= 1.0)) {
      throw MalformedRequest("request " + std::to_string(request_id) + ": quality and cvr must lie in (0, 1]");
    }
  }
}

const Placement* AuctionOutcome::placement_of(AdvertiserId id) const noexcept {
  for (const auto& p : placements) {
    if (p.advertiser == id) {
      return &p;
    }
  }
  return nullptr;
}

AuctionOutcome run_gsp_auction(const AdRequest& request, std::span<const Bid> bids, double reserve) {
  if (request.slots.empty()) {
    throw MalformedRequest("request " + std::to_string(request.request_id) + " has no slots");
  }
  if (bids.empty()) {
    throw MalformedRequest("request " + std::to_string(request.request_id) + " has no bids");
  }
  if (reserve < 0.0) {
    throw DomainError("reserve must be non-negative");
  }

  std::vector<Ranked> ranked;
  ranked.reserve(bids.size());
  for (const auto& bid : bids) {
    if (!(bid.amount >= 0.0)) {
      throw DomainError("negative bid from advertiser " + std::to_string(bid.advertiser));
    }
    const MatchedAd* ad = request.find(bid.advertiser);
    if (ad == nullptr) {
      throw MalformedRequest("advertiser " + std::to_string(bid.advertiser) + " is not matched to request " +
                             std::to_string(request.request_id));
    }
    for (const auto& seen : ranked) {
      if (seen.id == bid.advertiser) {
        throw MalformedRequest("duplicate bid from advertiser " + std::to_string(bid.advertiser));
      }
    }
    if (bid.amount > 0.0 && bid.amount >= reserve) {
      ranked.push_back({bid.advertiser, bid.amount * ad->quality, bid.amount, ad->quality});
    }
  }
  std::sort(ranked.begin(), ranked.end(),
            [](const Ranked& a, const Ranked& b) { return ranks_before(a.id, a.score, b.id, b.score); });

  AuctionOutcome outcome;
  outcome.rank_scores.reserve(ranked.size());
  for (const auto& r : ranked) {
    outcome.rank_scores.emplace_back(r.id, r.score);
  }
  const std::size_t winners = std::min(ranked.size(), request.slots.size());
  outcome.placements.reserve(winners);
  for (std::size_t k = 0; k < winners; ++k) {
    const Ranked& r = ranked[k];
    const double next_score = k + 1 < ranked.size() ? ranked[k + 1].score : 0.0;
    const double price = std::min(std::max(next_score, reserve * r.quality) / r.quality, r.bid);
    outcome.placements.push_back({k, r.id, price});
  }
  return outcome;
}

DeliveryRecord compute_request_delivery(const AuctionOutcome& outcome, const AdRequest& request,
                                        AdvertiserId advertiser) {
  const MatchedAd* ad = request.find(advertiser);
  if (ad == nullptr) {
    throw DomainError("advertiser " + std::to_string(advertiser) + " is not matched to request " +
                      std::to_string(request.request_id));
  }
  DeliveryRecord record;
  record.request_id = request.request_id;
  const Placement* placement = outcome.placement_of(advertiser);
  if (placement == nullptr) {
    return record;
  }
  const double ctr = request.ctr(*ad, placement->slot_index);
  record.slot_index = placement->slot_index;
  record.price_per_click = placement->price_per_click;
  record.conversions = ctr * ad->cvr;
  record.spend = placement->price_per_click * ctr;
  if (record.conversions > 0.0) {
    record.cpa = record.spend / record.conversions;
  }
  return record;
}

bool constraint_met(const Constraint& constraint, double spend, double conversions, double revenue) {
  if (!(conversions > 0.0)) {
    return spend <= 0.0;
  }
  if (constraint.kind == ConstraintKind::tcpa) {
    return spend <= constraint.target * conversions * (1.0 + kConstraintSlack);
  }
  return spend * (1.0 + constraint.target) <= revenue * (1.0 + kConstraintSlack);
}

EpisodeSummary aggregate_episode(std::span<const DeliveryRecord> records, const AdvertiserProfile& profile,
                                 std::span<const ValueClass> value_classes) {
  if (records.size() != value_classes.size()) {
    throw DomainError("aggregate_episode: one value class per record is required");
  }
  EpisodeSummary summary;
  const double indicator = goal_indicator(profile.goal);
  double utility = 0.0;
  for (std::size_t j = 0; j < records.size(); ++j) {
    const auto& r = records[j];
    if (!(r.conversions > 0.0)) {
      continue;
    }
    const double v = profile.value(value_classes[j]);
    summary.total_conversions += r.conversions;
    summary.total_spend += r.spend;
    summary.revenue += v * r.conversions;
    utility += (v - indicator * r.spend / r.conversions) * r.conversions;
  }
  if (summary.total_conversions > 0.0) {
    summary.delivered_cpa = summary.total_spend / summary.total_conversions;
    if (profile.constraint.kind == ConstraintKind::tcpa) {
      summary.cpa_bound = profile.constraint.target;
    } else {
      summary.cpa_bound = summary.revenue / summary.total_conversions / (1.0 + profile.constraint.target);
    }
  } else if (profile.constraint.kind == ConstraintKind::tcpa) {
    summary.cpa_bound = profile.constraint.target;
  }
  if (summary.total_spend > 0.0) {
    summary.delivered_roi = (summary.revenue - summary.total_spend) / summary.total_spend;
  }
  summary.constraint_satisfied =
      constraint_met(profile.constraint, summary.total_spend, summary.total_conversions, summary.revenue);
  summary.utility = summary.constraint_satisfied ? utility : -summary.total_spend;
  return summary;
}

double roi_to_tcpa(double value, double gamma) {
  if (!(value > 0.0) || !(gamma > 0.0)) {
    throw DomainError("roi_to_tcpa: value and gamma must be positive");
  }
  return value / (1.0 + gamma);
}

BidLadder::BidLadder(const AdRequest& request, std::span<const Bid> competitor_bids, double reserve,
                     AdvertiserId self)
    : self_(self), reserve_(reserve) {
  if (request.slots.empty()) {
    throw MalformedRequest("request " + std::to_string(request.request_id) + " has no slots");
  }
  const MatchedAd* own = request.find(self);
  if (own == nullptr) {
    throw DomainError("advertiser " + std::to_string(self) + " is not matched to request " +
                      std::to_string(request.request_id));
  }
  quality_ = own->quality;
  cvr_ = own->cvr;
  position_factors_.reserve(request.slots.size());
  for (const auto& slot : request.slots) {
    position_factors_.push_back(slot.position_factor);
  }
  max_ctr_ = quality_ * position_factors_.front();

  rivals_.reserve(competitor_bids.size());
  for (const auto& bid : competitor_bids) {
    if (bid.advertiser == self) {
      continue;
    }
    const MatchedAd* ad = request.find(bid.advertiser);
    if (ad == nullptr) {
      throw MalformedRequest("advertiser " + std::to_string(bid.advertiser) + " is not matched to request " +
                             std::to_string(request.request_id));
    }
    if (bid.amount > 0.0 && bid.amount >= reserve) {
      rivals_.push_back({bid.advertiser, bid.amount * ad->quality});
    }
  }
  std::sort(rivals_.begin(), rivals_.end(),
            [](const Rival& a, const Rival& b) { return ranks_before(a.id, a.score, b.id, b.score); });
}

bool BidLadder::rival_ahead(const Rival& rival, double bid) const {
  return ranks_before(rival.id, rival.score, self_, bid * quality_);
}

std::size_t BidLadder::rivals_above(double bid) const {
  auto it = std::partition_point(rivals_.begin(), rivals_.end(),
                                 [&](const Rival& r) { return rival_ahead(r, bid); });
  return static_cast<std::size_t>(it - rivals_.begin());
}

BidPrediction BidLadder::predict(double bid) const {
  BidPrediction p;
  if (!eligible(bid)) {
    return p;
  }
  const std::size_t above = rivals_above(bid);
  if (above >= position_factors_.size()) {
    return p;
  }
  const double next_score = above < rivals_.size() ? rivals_[above].score : 0.0;
  p.slot_index = above;
  p.price_per_click = std::min(std::max(next_score, reserve_ * quality_) / quality_, bid);
  const double ctr = quality_ * position_factors_[above];
  p.conversions = ctr * cvr_;
  p.spend = p.price_per_click * ctr;
  return p;
}

double BidLadder::smallest_bid_outranking(const Rival& rival) const {
  double b = rival.score / quality_;
  if (!rival_ahead(rival, b)) {
    for (double lower = std::nextafter(b, 0.0); lower > 0.0 && !rival_ahead(rival, lower);
         lower = std::nextafter(lower, 0.0)) {
      b = lower;
    }
    return b;
  }
  while (rival_ahead(rival, b)) {
    b = std::nextafter(b, kInf);
  }
  return b;
}

double BidLadder::largest_bid_below(const Rival& rival) const {
  double b = rival.score / quality_;
  if (rival_ahead(rival, b)) {
    for (double higher = std::nextafter(b, kInf); rival_ahead(rival, higher); higher = std::nextafter(higher, kInf)) {
      b = higher;
    }
    return b;
  }
  while (b > 0.0 && !rival_ahead(rival, b)) {
    b = std::nextafter(b, 0.0);
  }
  return b;
}

std::vector<double> BidLadder::candidate_bids() const {
  std::vector<double> bids;
  bids.reserve(rivals_.size() + 2);
  bids.push_back(0.0);
  // Lowest eligible bid: wins any slot left empty by the rivals.
  bids.push_back(reserve_ > 0.0 ? reserve_ : std::numeric_limits<double>::min());
  for (const auto& rival : rivals_) {
    bids.push_back(smallest_bid_outranking(rival));
  }
  std::sort(bids.begin(), bids.end());
  bids.erase(std::unique(bids.begin(), bids.end()), bids.end());
  return bids;
}

std::pair<double, double> BidLadder::tier(double bid) const {
  const BidPrediction p = predict(bid);
  if (!p.won()) {
    // Losing bids form a down-closed set: ineligible bids plus bids ranked
    // below the holder of the last slot.
    double hi = 0.0;
    if (reserve_ > 0.0) {
      hi = std::nextafter(reserve_, 0.0);
    }
    const std::size_t slots = position_factors_.size();
    if (rivals_.size() >= slots) {
      hi = std::max(hi, largest_bid_below(rivals_[slots - 1]));
    }
    return {0.0, hi};
  }
  const std::size_t above = *p.slot_index;
  double lo = reserve_ > 0.0 ? reserve_ : std::numeric_limits<double>::denorm_min();
  if (above < rivals_.size()) {
    lo = std::max(lo, smallest_bid_outranking(rivals_[above]));
  }
  const double hi = above > 0 ? largest_bid_below(rivals_[above - 1]) : kInf;
  return {lo, hi};
}

} // namespace autobid
