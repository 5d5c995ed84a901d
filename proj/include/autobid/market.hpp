#pragma once
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace autobid {

using AdvertiserId = std::uint32_t;
using RequestId = std::uint64_t;
using ValueClass = std::int32_t;

// Relative slack used whenever a delivered point is compared against a
// constraint, so that a CPA equal to its target up to rounding counts as met.
inline constexpr double kConstraintSlack = 1e-9;

struct Slot {
  int slot_id = 0;
  double position_factor = 1.0;
};

enum class Goal { revenue = 0, profit = 1 };

// The 0/1 indicator multiplying CPA in the utility.
constexpr double goal_indicator(Goal goal) noexcept {
  return goal == Goal::profit ? 1.0 : 0.0;
}

enum class ConstraintKind { tcpa, troi };

struct Constraint {
  ConstraintKind kind = ConstraintKind::tcpa;
  double target = 0.0;

  static Constraint tcpa(double t) { return {ConstraintKind::tcpa, t}; }
  static Constraint troi(double gamma) { return {ConstraintKind::troi, gamma}; }
};

struct AdvertiserProfile {
  AdvertiserId id = 0;
  std::map<ValueClass, double> values;
  Constraint constraint;
  Goal goal = Goal::profit;
  bool auto_bidding = true;

  // Throws DomainError on a profile that breaks the type's invariants.
  void validate() const;
  double value(ValueClass h) const;
  bool constant_value() const noexcept { return values.size() == 1; }
};

struct MatchedAd {
  AdvertiserId advertiser = 0;
  double quality = 1.0; // base click probability
  double cvr = 1.0;
};

struct AdRequest {
  RequestId request_id = 0;
  ValueClass value_class = 0;
  std::vector<Slot> slots;
  std::vector<MatchedAd> matched; // sorted by advertiser id

  const MatchedAd* find(AdvertiserId id) const noexcept;
  // Separable click-through rate: quality times position factor.
  double ctr(const MatchedAd& ad, std::size_t slot_index) const {
    return ad.quality * slots.at(slot_index).position_factor;
  }
  void validate() const;
};

struct Bid {
  AdvertiserId advertiser = 0;
  double amount = 0.0;
};

using BidProfile = std::vector<Bid>;

struct Placement {
  std::size_t slot_index = 0;
  AdvertiserId advertiser = 0;
  double price_per_click = 0.0;
};

struct AuctionOutcome {
  std::vector<Placement> placements; // in slot order
  // Every eligible bidder in rank order with its score bid * quality.
  std::vector<std::pair<AdvertiserId, double>> rank_scores;

  const Placement* placement_of(AdvertiserId id) const noexcept;
};

// Generalized second-price position auction ranked by bid * quality.
//
// A bidder is eligible when its bid is positive and at least the reserve.
// Ties go to the lower advertiser id. The k-th ranked bidder takes slot k and
// pays max(score of rank k+1, reserve * quality_k) / quality_k per click.
AuctionOutcome run_gsp_auction(const AdRequest& request, std::span<const Bid> bids, double reserve = 0.0);

struct DeliveryRecord {
  RequestId request_id = 0;
  double conversions = 0.0;
  double spend = 0.0;
  std::optional<double> cpa; // absent when nothing converted
  std::optional<std::size_t> slot_index;
  double price_per_click = 0.0;
};

// Expected-CPC accounting: spend = price * ctr, so cpa = price / cvr.
DeliveryRecord compute_request_delivery(const AuctionOutcome& outcome, const AdRequest& request,
                                        AdvertiserId advertiser);

struct EpisodeSummary {
  double total_conversions = 0.0;
  double total_spend = 0.0;
  double revenue = 0.0;
  std::optional<double> delivered_cpa;
  std::optional<double> delivered_roi;
  double utility = 0.0;
  bool constraint_satisfied = true;
  std::size_t violation_events = 0;

  // The CPA ceiling the advertiser's constraint implies on this episode:
  // t for tCPA, revenue / (conversions * (1 + gamma)) for tROI.
  std::optional<double> cpa_bound;
};

// Conversion-weighted episode totals and the bottom-line utility. A violated
// constraint overrides the utility with -total_spend.
EpisodeSummary aggregate_episode(std::span<const DeliveryRecord> records, const AdvertiserProfile& profile,
                                 std::span<const ValueClass> value_classes);

// Largest CPA that keeps ROI at or above gamma for a constant value.
double roi_to_tcpa(double value, double gamma);

// Whether spend and conversions (with the given revenue) meet the constraint.
bool constraint_met(const Constraint& constraint, double spend, double conversions, double revenue);

// What a single bid buys in one request when every competitor's bid is fixed.
// Agrees exactly with run_gsp_auction followed by compute_request_delivery.
struct BidPrediction {
  std::optional<std::size_t> slot_index;
  double price_per_click = 0.0;
  double conversions = 0.0;
  double spend = 0.0;

  bool won() const noexcept { return slot_index.has_value(); }
  std::optional<double> cpa() const {
    if (conversions > 0.0) {
      return spend / conversions;
    }
    return std::nullopt;
  }
};

class BidLadder {
public:
  BidLadder(const AdRequest& request, std::span<const Bid> competitor_bids, double reserve, AdvertiserId self);

  BidPrediction predict(double bid) const;

  // 0, the lowest eligible bid (the reserve, or the smallest positive double
  // when there is none), and the smallest bid outranking each competitor.
  std::vector<double> candidate_bids() const;

  // Closed range of bids giving the same predicted outcome as `bid`.
  std::pair<double, double> tier(double bid) const;

  // Largest click-through rate any slot could give this advertiser.
  double max_ctr() const noexcept { return max_ctr_; }
  double quality() const noexcept { return quality_; }
  double cvr() const noexcept { return cvr_; }

private:
  struct Rival {
    AdvertiserId id;
    double score;
  };

  // Number of competitors ranked above a bid (ignoring eligibility).
  std::size_t rivals_above(double bid) const;
  bool rival_ahead(const Rival& rival, double bid) const;
  bool eligible(double bid) const noexcept { return bid > 0.0 && bid >= reserve_; }
  double smallest_bid_outranking(const Rival& rival) const;
  double largest_bid_below(const Rival& rival) const;

  std::vector<double> position_factors_;
  AdvertiserId self_;
  double reserve_;
  double quality_ = 0.0;
  double cvr_ = 0.0;
  double max_ctr_ = 0.0;
  std::vector<Rival> rivals_; // rank order
};

} // namespace autobid
