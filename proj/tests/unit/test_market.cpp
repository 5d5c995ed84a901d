#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"

#include "autobid/error.hpp"
#include "autobid/market.hpp"
#include "autobid/rng.hpp"

using namespace autobid;

namespace {

AdRequest make_request(std::vector<double> factors, std::vector<MatchedAd> ads, RequestId id = 1) {
  AdRequest r;
  r.request_id = id;
  int slot_id = 1;
  for (double f : factors) {
    r.slots.push_back({slot_id++, f});
  }
  std::sort(ads.begin(), ads.end(), [](const MatchedAd& a, const MatchedAd& b) { return a.advertiser < b.advertiser; });
  r.matched = std::move(ads);
  return r;
}

AdvertiserProfile const_profile(double v, double t) {
  AdvertiserProfile p;
  p.id = 0;
  p.values = {{0, v}};
  p.constraint = Constraint::tcpa(t);
  p.goal = Goal::profit;
  return p;
}

DeliveryRecord record(double cv, double cpa) {
  DeliveryRecord r;
  r.conversions = cv;
  r.spend = cv * cpa;
  r.cpa = cpa;
  return r;
}

// Random request with n advertisers (ids 0..n-1) and random bids.
struct RandomMarket {
  AdRequest request;
  BidProfile bids;
};

RandomMarket random_market(Rng& rng) {
  const auto n = static_cast<std::size_t>(rng.uniform_int(1, 7));
  const auto slots = rng.uniform_int(1, 4);
  std::vector<double> factors;
  double f = 1.0;
  for (std::int64_t s = 0; s < slots; ++s) {
    factors.push_back(f);
    f *= rng.uniform(0.3, 0.9);
  }
  std::vector<MatchedAd> ads;
  BidProfile bids;
  for (std::size_t i = 0; i < n; ++i) {
    ads.push_back({static_cast<AdvertiserId>(i), rng.uniform(0.05, 1.0), rng.uniform(0.01, 1.0)});
    // Coarse bids so that ties happen.
    bids.push_back({static_cast<AdvertiserId>(i), std::round(rng.uniform(0.0, 4.0) * 4.0) / 4.0});
  }
  return {make_request(factors, ads), bids};
}

} // namespace

TEST_SUITE("gsp auction") {
  TEST_CASE("single slot second price") {
    const AdRequest r = make_request({1.0}, {{1, 1.0, 1.0}, {2, 1.0, 1.0}});
    const std::vector<Bid> bids{{1, 2.0}, {2, 1.0}};
    const AuctionOutcome out = run_gsp_auction(r, bids);
    REQUIRE(out.placements.size() == 1);
    CHECK(out.placements[0].advertiser == 1);
    CHECK(out.placements[0].price_per_click == doctest::Approx(1.0));
  }

  TEST_CASE("four bidders, highest pays the second bid") {
    const AdRequest r = make_request({1.0}, {{1, 1, 1}, {2, 1, 1}, {3, 1, 1}, {4, 1, 1}});
    const std::vector<Bid> bids{{1, 4.0}, {2, 5.0}, {3, 2.0}, {4, 1.0}};
    const AuctionOutcome out = run_gsp_auction(r, bids);
    REQUIRE(out.placements.size() == 1);
    CHECK(out.placements[0].advertiser == 2);
    CHECK(out.placements[0].price_per_click == doctest::Approx(4.0));
  }

  TEST_CASE("two slots follow the next-bid ladder") {
    const AdRequest r = make_request({1.0, 0.5}, {{1, 1, 1}, {2, 1, 1}, {3, 1, 1}});
    const std::vector<Bid> bids{{1, 3.0}, {2, 2.0}, {3, 1.0}};
    const AuctionOutcome out = run_gsp_auction(r, bids);
    REQUIRE(out.placements.size() == 2);
    CHECK(out.placements[0].advertiser == 1);
    CHECK(out.placements[0].price_per_click == doctest::Approx(2.0));
    CHECK(out.placements[1].advertiser == 2);
    CHECK(out.placements[1].price_per_click == doctest::Approx(1.0));
  }

  TEST_CASE("ties go to the lower advertiser id") {
    const AdRequest r = make_request({1.0}, {{3, 1, 1}, {7, 1, 1}});
    const std::vector<Bid> bids{{7, 2.0}, {3, 2.0}};
    const AuctionOutcome out = run_gsp_auction(r, bids);
    CHECK(out.placements[0].advertiser == 3);
    CHECK(out.placements[0].price_per_click == doctest::Approx(2.0));
  }

  TEST_CASE("ranking uses bid times quality and prices normalize by own quality") {
    const AdRequest r = make_request({1.0}, {{1, 0.5, 1}, {2, 1.0, 1}});
    // Scores: 1 -> 1.5, 2 -> 1.0. Winner 1 pays 1.0 / 0.5 = 2.0 per click.
    const std::vector<Bid> bids{{1, 3.0}, {2, 1.0}};
    const AuctionOutcome out = run_gsp_auction(r, bids);
    CHECK(out.placements[0].advertiser == 1);
    CHECK(out.placements[0].price_per_click == doctest::Approx(2.0));
  }

  TEST_CASE("a lone bidder clears at the reserve") {
    const AdRequest r = make_request({1.0}, {{1, 0.5, 1}});
    const std::vector<Bid> bids{{1, 3.0}};
    CHECK(run_gsp_auction(r, bids, 0.4).placements[0].price_per_click == doctest::Approx(0.4));
    CHECK(run_gsp_auction(r, bids, 0.0).placements[0].price_per_click == 0.0);
    // Below the reserve nobody is eligible.
    CHECK(run_gsp_auction(r, bids, 3.5).placements.empty());
  }

  TEST_CASE("malformed requests are rejected") {
    AdRequest r = make_request({}, {{1, 1, 1}});
    const std::vector<Bid> bids{{1, 1.0}};
    CHECK_THROWS_AS(run_gsp_auction(r, bids), MalformedRequest);
    r = make_request({1.0}, {{1, 1, 1}});
    CHECK_THROWS_AS(run_gsp_auction(r, std::vector<Bid>{}), MalformedRequest);
    CHECK_THROWS_AS(run_gsp_auction(r, std::vector<Bid>{{9, 1.0}}), MalformedRequest);
    CHECK_THROWS_AS(run_gsp_auction(r, std::vector<Bid>{{1, -1.0}}), DomainError);
  }

  TEST_CASE("allocation feasibility, payment sandwich and cv bound over random markets") {
    Rng rng(derive_seed(11, "market.properties"));
    for (int trial = 0; trial < 500; ++trial) {
      const RandomMarket m = random_market(rng);
      const double reserve = trial % 3 == 0 ? rng.uniform(0.0, 1.0) : 0.0;
      const AuctionOutcome out = run_gsp_auction(m.request, m.bids, reserve);
      CHECK(out.placements.size() <= m.request.slots.size());
      std::vector<AdvertiserId> winners;
      for (std::size_t k = 0; k < out.placements.size(); ++k) {
        const Placement& p = out.placements[k];
        CHECK(p.slot_index == k);
        winners.push_back(p.advertiser);
        const auto bid = std::find_if(m.bids.begin(), m.bids.end(), [&](const Bid& b) { return b.advertiser == p.advertiser; });
        CHECK(p.price_per_click >= 0.0);
        CHECK(p.price_per_click <= bid->amount);
        CHECK(bid->amount >= reserve);
      }
      std::sort(winners.begin(), winners.end());
      CHECK(std::adjacent_find(winners.begin(), winners.end()) == winners.end());
      for (const auto& ad : m.request.matched) {
        const DeliveryRecord d = compute_request_delivery(out, m.request, ad.advertiser);
        double bound = 0.0;
        for (std::size_t s = 0; s < m.request.slots.size(); ++s) {
          bound += m.request.ctr(ad, s) * ad.cvr;
        }
        CHECK(d.conversions <= bound + 1e-15);
        if (d.conversions == 0.0) {
          CHECK(d.spend == 0.0);
        }
      }
    }
  }

  TEST_CASE("raising one bid never lowers its position") {
    Rng rng(derive_seed(12, "market.monotone"));
    for (int trial = 0; trial < 300; ++trial) {
      RandomMarket m = random_market(rng);
      const std::size_t who = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(m.bids.size()) - 1));
      auto position = [&](const BidProfile& bids) {
        const AuctionOutcome out = run_gsp_auction(m.request, bids);
        const Placement* p = out.placement_of(bids[who].advertiser);
        return p ? static_cast<int>(p->slot_index) : 1000;
      };
      const int before = position(m.bids);
      m.bids[who].amount += rng.uniform(0.0, 2.0);
      CHECK(position(m.bids) <= before);
    }
  }
}

TEST_SUITE("delivery accounting") {
  TEST_CASE("winning a slot: cv = ctr * cvr, spend = price * ctr, cpa = price / cvr") {
    // Own quality 0.2 in a single full-strength slot gives ctr 0.2.
    const AdRequest r = make_request({1.0}, {{0, 0.2, 0.1}, {1, 0.2, 0.5}});
    const std::vector<Bid> bids{{0, 2.0}, {1, 1.5}};
    const DeliveryRecord d = compute_request_delivery(run_gsp_auction(r, bids), r, 0);
    CHECK(d.conversions == doctest::Approx(0.02));
    CHECK(d.spend == doctest::Approx(0.30));
    REQUIRE(d.cpa.has_value());
    CHECK(*d.cpa == doctest::Approx(15.0));
  }

  TEST_CASE("a second winning example: ctr 0.5, cvr 0.2, price 2") {
    const AdRequest r = make_request({1.0}, {{0, 0.5, 0.2}, {1, 0.5, 0.5}});
    const std::vector<Bid> bids{{0, 3.0}, {1, 2.0}};
    const DeliveryRecord d = compute_request_delivery(run_gsp_auction(r, bids), r, 0);
    CHECK(d.conversions == doctest::Approx(0.1));
    CHECK(d.spend == doctest::Approx(1.0));
    CHECK(*d.cpa == doctest::Approx(10.0));
  }

  TEST_CASE("losing delivers nothing") {
    const AdRequest r = make_request({1.0}, {{0, 1, 1}, {1, 1, 1}});
    const std::vector<Bid> bids{{0, 1.0}, {1, 2.0}};
    const DeliveryRecord d = compute_request_delivery(run_gsp_auction(r, bids), r, 0);
    CHECK(d.conversions == 0.0);
    CHECK(d.spend == 0.0);
    CHECK_FALSE(d.cpa.has_value());
    CHECK_FALSE(d.slot_index.has_value());
  }

  TEST_CASE("an unmatched advertiser is an error") {
    const AdRequest r = make_request({1.0}, {{0, 1, 1}});
    const std::vector<Bid> bids{{0, 1.0}};
    CHECK_THROWS_AS(compute_request_delivery(run_gsp_auction(r, bids), r, 5), DomainError);
  }
}

TEST_SUITE("episode aggregation") {
  TEST_CASE("overbid branch of the two-request example") {
    const std::vector<DeliveryRecord> records{record(1, 5), record(1, 1)};
    const std::vector<ValueClass> classes{0, 0};
    const EpisodeSummary s = aggregate_episode(records, const_profile(10, 4), classes);
    CHECK(*s.delivered_cpa == doctest::Approx(3.0));
    CHECK(s.utility == doctest::Approx(14.0));
    CHECK(s.constraint_satisfied);
  }

  TEST_CASE("truthful branch of the two-request example") {
    const std::vector<DeliveryRecord> records{record(1, 1)};
    const std::vector<ValueClass> classes{0};
    const EpisodeSummary s = aggregate_episode(records, const_profile(10, 4), classes);
    CHECK(*s.delivered_cpa == doctest::Approx(1.0));
    CHECK(s.utility == doctest::Approx(9.0));
    CHECK(s.constraint_satisfied);
  }

  TEST_CASE("a violated constraint is worth minus the spend") {
    const std::vector<DeliveryRecord> records{record(1.5, 6), record(0.5, 2)};
    const std::vector<ValueClass> classes{0, 0};
    const EpisodeSummary s = aggregate_episode(records, const_profile(10, 4), classes);
    CHECK(s.total_conversions == doctest::Approx(2.0));
    CHECK(s.total_spend == doctest::Approx(10.0));
    CHECK(*s.delivered_cpa == doctest::Approx(5.0));
    CHECK_FALSE(s.constraint_satisfied);
    CHECK(s.utility == doctest::Approx(-10.0));
  }

  TEST_CASE("no conversions gives a zero summary") {
    const std::vector<DeliveryRecord> records{DeliveryRecord{}, DeliveryRecord{}};
    const std::vector<ValueClass> classes{0, 0};
    const EpisodeSummary s = aggregate_episode(records, const_profile(10, 4), classes);
    CHECK(s.total_conversions == 0.0);
    CHECK_FALSE(s.delivered_cpa.has_value());
    CHECK(s.utility == 0.0);
    CHECK(s.constraint_satisfied);
    CHECK(aggregate_episode({}, const_profile(10, 4), {}).utility == 0.0);
  }

  TEST_CASE("ROI and CPA views of a summary agree") {
    Rng rng(derive_seed(3, "roi.cpa"));
    for (int trial = 0; trial < 200; ++trial) {
      AdvertiserProfile p;
      p.values = {{0, rng.uniform(1, 20)}, {1, rng.uniform(1, 20)}, {2, rng.uniform(1, 20)}};
      const double gamma = rng.uniform(0.05, 3.0);
      p.constraint = Constraint::troi(gamma);
      std::vector<DeliveryRecord> records;
      std::vector<ValueClass> classes;
      for (int j = 0; j < 20; ++j) {
        records.push_back(record(rng.uniform(0.0, 0.1), rng.uniform(0.5, 15.0)));
        classes.push_back(static_cast<ValueClass>(rng.uniform_int(0, 2)));
      }
      const EpisodeSummary s = aggregate_episode(records, p, classes);
      REQUIRE(s.total_conversions > 0.0);
      const double mean_value = s.revenue / s.total_conversions;
      const double cpa = *s.delivered_cpa;
      const double roi = *s.delivered_roi;
      // roi = (mean_value - cpa) / cpa, so cpa = mean_value / (1 + roi).
      CHECK(std::abs(cpa - mean_value / (1.0 + roi)) <= 1e-9 * cpa);
      CHECK(std::abs(*s.cpa_bound - mean_value / (1.0 + gamma)) <= 1e-9 * *s.cpa_bound);
      const bool by_roi = roi >= gamma;
      const bool by_cpa = cpa <= mean_value / (1.0 + gamma);
      if (std::abs(roi - gamma) > 1e-9) {
        CHECK(by_roi == by_cpa);
        CHECK(s.constraint_satisfied == by_roi);
      }
    }
  }
}

TEST_SUITE("roi to tcpa") {
  TEST_CASE("substitution") {
    CHECK(roi_to_tcpa(10, 1) == doctest::Approx(5.0));
    CHECK(roi_to_tcpa(10, 0.25) == doctest::Approx(8.0));
  }

  TEST_CASE("approaches the value as gamma shrinks") {
    CHECK(roi_to_tcpa(10, 1e-9) < 10.0);
    CHECK(roi_to_tcpa(10, 1e-9) == doctest::Approx(10.0));
  }

  TEST_CASE("non-positive inputs are domain errors") {
    CHECK_THROWS_AS(roi_to_tcpa(0, 1), DomainError);
    CHECK_THROWS_AS(roi_to_tcpa(10, 0), DomainError);
    CHECK_THROWS_AS(roi_to_tcpa(10, -1), DomainError);
  }

  TEST_CASE("gamma zero degenerates to spend at most revenue") {
    const Constraint c = Constraint::troi(0.0);
    CHECK(constraint_met(c, 10.0, 1.0, 10.0));
    CHECK(constraint_met(c, 9.0, 1.0, 10.0));
    CHECK_FALSE(constraint_met(c, 10.5, 1.0, 10.0));
  }
}

TEST_SUITE("bid ladder") {
  TEST_CASE("prediction matches the auction for every candidate and random bids") {
    Rng rng(derive_seed(5, "ladder"));
    for (int trial = 0; trial < 300; ++trial) {
      RandomMarket m = random_market(rng);
      const AdvertiserId self = m.bids.front().advertiser;
      const double reserve = trial % 2 == 0 ? rng.uniform(0.0, 1.0) : 0.0;
      BidProfile rivals(m.bids.begin() + 1, m.bids.end());
      const BidLadder ladder(m.request, rivals, reserve, self);
      std::vector<double> probes = ladder.candidate_bids();
      for (int k = 0; k < 10; ++k) {
        probes.push_back(rng.uniform(0.0, 5.0));
      }
      for (double bid : probes) {
        BidProfile all = rivals;
        all.push_back({self, bid});
        const DeliveryRecord truth = compute_request_delivery(run_gsp_auction(m.request, all, reserve), m.request, self);
        const BidPrediction p = ladder.predict(bid);
        CHECK(p.slot_index == truth.slot_index);
        CHECK(p.price_per_click == truth.price_per_click);
        CHECK(p.conversions == truth.conversions);
        CHECK(p.spend == truth.spend);
        const auto [lo, hi] = ladder.tier(bid);
        CHECK(lo <= bid);
        CHECK(bid <= hi);
        const BidPrediction at_lo = ladder.predict(lo);
        CHECK(at_lo.slot_index == p.slot_index);
        if (std::isfinite(hi)) {
          CHECK(ladder.predict(hi).slot_index == p.slot_index);
        }
      }
    }
  }

  TEST_CASE("candidates reach every attainable slot") {
    const AdRequest r = make_request({1.0, 0.5}, {{0, 1, 1}, {1, 1, 1}, {2, 1, 1}});
    const std::vector<Bid> rivals{{1, 3.0}, {2, 2.0}};
    const BidLadder ladder(r, rivals, 0.0, 0);
    std::vector<std::optional<std::size_t>> slots;
    for (double c : ladder.candidate_bids()) {
      slots.push_back(ladder.predict(c).slot_index);
    }
    CHECK(std::count(slots.begin(), slots.end(), std::optional<std::size_t>{}) >= 1);
    CHECK(std::count(slots.begin(), slots.end(), std::optional<std::size_t>{0}) == 1);
    CHECK(std::count(slots.begin(), slots.end(), std::optional<std::size_t>{1}) == 1);
  }

  TEST_CASE("an empty market is won at the smallest positive bid") {
    const AdRequest r = make_request({1.0}, {{0, 1, 1}});
    const BidLadder ladder(r, {}, 0.0, 0);
    const auto c = ladder.candidate_bids();
    REQUIRE(c.size() == 2);
    CHECK_FALSE(ladder.predict(c[0]).won());
    CHECK(ladder.predict(c[1]).won());
    CHECK(ladder.predict(c[1]).spend == 0.0);
  }
}
