#include <algorithm>
#include <cmath>

#include "doctest.h"

#include "../support/fixtures.hpp"
#include "autobid/error.hpp"
#include "autobid/mechanism.hpp"
#include "autobid/rng.hpp"

using namespace autobid;

namespace {

// A random positive, non-decreasing curve on [lo, hi].
PiecewiseLinear random_increasing(Rng& rng, double lo, double hi, std::size_t knots) {
  std::vector<double> xs = linear_grid(lo, hi, knots);
  std::vector<double> ys;
  double y = rng.uniform(0.01, 1.0);
  for (std::size_t i = 0; i < knots; ++i) {
    ys.push_back(y);
    y += rng.canonical() < 0.3 ? 0.0 : rng.uniform(0.0, 0.5);
  }
  return {xs, ys};
}

// A random cumulative conversion curve over gamma for which
// (1 + gamma - I) / (1 + gamma) * cv is non-increasing.
PiecewiseLinear random_troi_curve(Rng& rng, double lo, double hi, std::size_t knots, Goal goal) {
  const double indicator = goal_indicator(goal);
  std::vector<double> xs = linear_grid(lo, hi, knots);
  std::vector<double> ys;
  double w = rng.uniform(0.5, 5.0);
  for (double g : xs) {
    ys.push_back(w * (1.0 + g) / (1.0 + g - indicator));
    w *= rng.uniform(0.7, 1.0);
  }
  return {xs, ys};
}

AggregatedMechanism constant_cv_mechanism(double value, double cv, double lo, double hi) {
  AggregatedMechanism::SubMarket sm;
  sm.value = value;
  sm.cpa = [](double t) { return t; };
  sm.conversions = [cv](double) { return cv; };
  return AggregatedMechanism::custom(ReportKind::tcpa, Goal::profit, {sm}, {lo, hi}, "constant_cv");
}

} // namespace

TEST_SUITE("curves") {
  TEST_CASE("piecewise linear interpolation is defined on its knots' range only") {
    const PiecewiseLinear f({0.0, 1.0, 3.0}, {0.0, 2.0, 2.0});
    CHECK(f(0.5) == doctest::Approx(1.0));
    CHECK(f(2.0) == doctest::Approx(2.0));
    CHECK_THROWS_AS(f(-1.0), DomainError);
    CHECK_THROWS_AS(f(10.0), DomainError);
    CHECK(f.domain() == std::pair<double, double>{0.0, 3.0});
    CHECK_THROWS_AS(PiecewiseLinear({1.0, 1.0}, {0.0, 1.0}), DomainError);
    CHECK_THROWS_AS(PiecewiseLinear({1.0, 2.0}, {0.0}), DomainError);
  }

  TEST_CASE("running envelopes") {
    const std::vector<double> xs{1, 3, 2, 5, 4};
    CHECK(running_max(xs) == std::vector<double>{1, 3, 3, 5, 5});
    CHECK(running_min(xs) == std::vector<double>{1, 1, 1, 1, 1});
    CHECK(linear_grid(0, 1, 3) == std::vector<double>{0, 0.5, 1});
  }
}

TEST_SUITE("single-value tcpa mechanism") {
  TEST_CASE("random value, goal and g triples verify") {
    Rng rng(derive_seed(21, "theorem1.random"));
    for (int trial = 0; trial < 100; ++trial) {
      const double v = rng.uniform(2.0, 50.0);
      const Goal goal = rng.canonical() < 0.5 ? Goal::profit : Goal::revenue;
      const double lo = rng.uniform(0.01, 0.3) * v;
      const double hi = rng.uniform(0.5, 0.99) * v;
      const GFunction g(random_increasing(rng, lo, hi, static_cast<std::size_t>(rng.uniform_int(2, 12))));
      const AggregatedMechanism m = theorem1_mechanism(v, goal, g);
      const std::vector<double> grid = linear_grid(lo, hi, 200);
      const IcVerdict verdict = verify_mechanism_ic(m, grid);
      CHECK(verdict.ok);
      for (double t : grid) {
        CHECK(m.cpa(t) == t);
        CHECK(m.utility(t) == doctest::Approx(g(t)).epsilon(1e-12));
        CHECK(m.conversions(t) == doctest::Approx(g(t) / (v - goal_indicator(goal) * t)));
      }
    }
  }

  TEST_CASE("a profit domain must stay below the value") {
    const GFunction g(PiecewiseLinear({1.0, 10.0}, {1.0, 2.0}));
    CHECK_THROWS_AS(theorem1_mechanism(10.0, Goal::profit, g), DomainError);
    CHECK_NOTHROW(theorem1_mechanism(10.0, Goal::revenue, g));
  }

  TEST_CASE("g must be positive and non-decreasing") {
    CHECK_THROWS_AS(GFunction(PiecewiseLinear({1.0, 2.0}, {1.0, 0.5})), InvalidMechanism);
    CHECK_THROWS_AS(GFunction(PiecewiseLinear({1.0, 2.0}, {0.0, 0.5})), InvalidMechanism);
    CHECK_THROWS_AS(GFunction{PiecewiseLinear{}}, InvalidMechanism);
  }

  TEST_CASE("make_g_function drops knots at or above the value and keeps the margin") {
    Frontier f;
    f.reports = {2.0, 4.0, 6.0, 10.0, 12.0};
    f.conversions = {1.0, 0.5, 2.0, 3.0, 3.0};
    const GFunction g = make_g_function(f, 10.0, Goal::profit, 0.5);
    CHECK(g.curve().xs() == std::vector<double>{2.0, 4.0, 6.0});
    // Candidates: 0.5*8*1 = 4, 0.5*6*0.5 = 1.5, 0.5*4*2 = 4; running max keeps 4.
    CHECK(g.curve().ys() == std::vector<double>{4.0, 4.0, 4.0});
    f.conversions = {0, 0, 0, 0, 0};
    CHECK_THROWS_AS(make_g_function(f, 10.0, Goal::profit), DomainError);
    CHECK_THROWS_AS(make_g_function(f, 10.0, Goal::profit, 1.5), DomainError);
  }

  TEST_CASE("constant conversions break monotonicity and the verifier names the pair") {
    const AggregatedMechanism m = constant_cv_mechanism(10.0, 1.0, 1.0, 9.0);
    const std::vector<double> grid = linear_grid(1.0, 9.0, 9);
    const IcVerdict verdict = verify_mechanism_ic(m, grid);
    REQUIRE_FALSE(verdict.ok);
    CHECK(verdict.violation->kind == IcViolation::Kind::monotonicity);
    CHECK(verdict.violation->report == 1.0);
    CHECK(*verdict.violation->next_report == 2.0);
    CHECK(verdict.violation->detail.find("decreases") != std::string::npos);
  }

  TEST_CASE("a discount on the reported CPA breaks the price identity") {
    AggregatedMechanism::SubMarket sm;
    sm.value = 10.0;
    sm.cpa = [](double t) { return 0.9 * t; };
    sm.conversions = [](double t) { return 1.0 / (10.0 - t); };
    const auto m = AggregatedMechanism::custom(ReportKind::tcpa, Goal::profit, {sm}, {1.0, 9.0});
    const std::vector<double> grid = linear_grid(1.0, 9.0, 5);
    const IcVerdict verdict = verify_mechanism_ic(m, grid);
    REQUIRE_FALSE(verdict.ok);
    CHECK(verdict.violation->kind == IcViolation::Kind::price_identity);
    CHECK(verdict.violation->expected == 1.0);
    CHECK(verdict.violation->actual == doctest::Approx(0.9));
  }

  TEST_CASE("verifier grid requirements") {
    const AggregatedMechanism m = constant_cv_mechanism(10.0, 1.0, 1.0, 9.0);
    const std::vector<double> short_grid{1.0, 2.0};
    const std::vector<double> outside{1.0, 2.0, 9.5};
    const std::vector<double> unsorted{1.0, 3.0, 2.0};
    CHECK_THROWS_AS(verify_mechanism_ic(m, short_grid), DomainError);
    CHECK_THROWS_AS(verify_mechanism_ic(m, outside), DomainError);
    CHECK_THROWS_AS(verify_mechanism_ic(m, unsorted), DomainError);
    CHECK_THROWS_AS(m.promise(9.5), DomainError);
  }
}

TEST_SUITE("sub-market mechanisms") {
  TEST_CASE("one sub-market prices at value over one plus gamma") {
    Rng rng(derive_seed(22, "corollary1"));
    for (int trial = 0; trial < 50; ++trial) {
      const Goal goal = trial % 2 == 0 ? Goal::profit : Goal::revenue;
      const double v = rng.uniform(1.0, 30.0);
      const PiecewiseLinear cv = random_troi_curve(rng, 0.05, 3.0, 12, goal);
      const AggregatedMechanism m = corollary1_mechanism(3, v, goal, cv);
      const std::vector<double> grid = linear_grid(0.05, 3.0, 60);
      CHECK(verify_mechanism_ic(m, grid).ok);
      for (double g : grid) {
        CHECK(m.cpa(g) == doctest::Approx(v / (1.0 + g)));
        CHECK(*m.delivered_roi(g) == doctest::Approx(g));
      }
    }
  }

  TEST_CASE("an increasing weighted curve is rejected") {
    const PiecewiseLinear cv({0.5, 1.0}, {1.0, 3.0});
    CHECK_THROWS_AS(corollary1_mechanism(0, 10.0, Goal::profit, cv), InvalidMechanism);
    // Profit reports must be positive.
    const PiecewiseLinear at_zero({0.0, 1.0}, {1.0, 1.0});
    CHECK_THROWS_AS(corollary1_mechanism(0, 10.0, Goal::profit, at_zero), InvalidMechanism);
  }

  TEST_CASE("combining sub-markets keeps every part and the aggregate truthful") {
    Rng rng(derive_seed(23, "combine"));
    for (int trial = 0; trial < 30; ++trial) {
      const Goal goal = trial % 2 == 0 ? Goal::profit : Goal::revenue;
      std::vector<AggregatedMechanism> parts;
      for (ValueClass h = 0; h < 4; ++h) {
        parts.push_back(corollary1_mechanism(h, rng.uniform(1, 20), goal, random_troi_curve(rng, 0.1, 2.0, 8, goal)));
      }
      const AggregatedMechanism m = combine_submarkets(parts);
      CHECK(m.submarkets().size() == 4);
      CHECK(m.kind() == MechanismKind::corollary1_submarket);
      const std::vector<double> grid = linear_grid(0.1, 2.0, 40);
      CHECK(verify_submarket_ic(m, grid).ok);
      CHECK(verify_mechanism_ic(m, grid).ok);
      for (double g : grid) {
        CHECK(*m.delivered_roi(g) == doctest::Approx(g));
      }
    }
  }

  TEST_CASE("combining rejects repeated classes and mixed goals") {
    const PiecewiseLinear cv({0.5, 1.0}, {2.0, 1.0});
    const std::vector<AggregatedMechanism> repeated{corollary1_mechanism(0, 5, Goal::profit, cv),
                                                   corollary1_mechanism(0, 6, Goal::profit, cv)};
    CHECK_THROWS_AS(combine_submarkets(repeated), InvalidMechanism);
    const std::vector<AggregatedMechanism> mixed{corollary1_mechanism(0, 5, Goal::profit, cv),
                                                corollary1_mechanism(1, 6, Goal::revenue, cv)};
    CHECK_THROWS_AS(combine_submarkets(mixed), InvalidMechanism);
  }
}

TEST_SUITE("decomposed mechanism") {
  TEST_CASE("random draws verify under both pricings") {
    Rng rng(derive_seed(24, "theorem3"));
    for (Pricing pricing : {Pricing::uniform, Pricing::proportional}) {
      for (int trial = 0; trial < 50; ++trial) {
        const Goal goal = trial % 2 == 0 ? Goal::profit : Goal::revenue;
        const auto classes = rng.uniform_int(1, 5);
        std::map<ValueClass, double> values;
        std::map<ValueClass, double> weights;
        double total = 0.0;
        for (ValueClass h = 0; h < classes; ++h) {
          values[h] = rng.uniform(1.0, 30.0);
          weights[h] = rng.uniform(0.1, 1.0);
          total += weights[h];
        }
        for (auto& [h, w] : weights) {
          w /= total;
        }
        // Renormalize the last weight so the sum is exactly one.
        double head = 0.0;
        for (auto it = weights.begin(); std::next(it) != weights.end(); ++it) {
          head += it->second;
        }
        weights.rbegin()->second = 1.0 - head;
        const PiecewiseLinear cv = random_troi_curve(rng, 0.05, 3.0, 10, goal);
        const AggregatedMechanism m = theorem3_mechanism(values, LinearDecomposition{weights}, cv, goal, pricing);
        const std::vector<double> grid = linear_grid(0.05, 3.0, 50);
        const IcVerdict verdict = verify_mechanism_ic(m, grid);
        CHECK(verdict.ok);
        for (double g : grid) {
          CHECK(*m.delivered_roi(g) == doctest::Approx(g));
        }
        for (double g : cv.xs()) {
          CHECK(m.conversions(g) == doctest::Approx(cv(g)));
          for (const auto& p : m.promise(g)) {
            CHECK(p.conversions == doctest::Approx(weights.at(p.value_class) * cv(g)));
          }
        }
      }
    }
  }

  TEST_CASE("weights must form a distribution over known classes") {
    const PiecewiseLinear cv({0.5, 1.0}, {2.0, 1.0});
    const std::map<ValueClass, double> values{{0, 5.0}, {1, 8.0}};
    CHECK_THROWS_AS(theorem3_mechanism(values, {{{0, 0.5}, {1, 0.4}}}, cv, Goal::profit, Pricing::uniform),
                    InvalidMechanism);
    CHECK_THROWS_AS(theorem3_mechanism(values, {{{0, 0.5}, {2, 0.5}}}, cv, Goal::profit, Pricing::uniform),
                    InvalidMechanism);
    CHECK_THROWS_AS(theorem3_mechanism(values, {{{0, 1.5}, {1, -0.5}}}, cv, Goal::profit, Pricing::uniform),
                    InvalidMechanism);
  }

  TEST_CASE("records rebuild the same mechanism") {
    const PiecewiseLinear cv({0.5, 1.0, 2.0}, {3.0, 2.0, 1.5});
    const AggregatedMechanism m =
        theorem3_mechanism({{0, 5.0}, {1, 8.0}}, {{{0, 0.25}, {1, 0.75}}}, cv, Goal::profit, Pricing::uniform);
    const AggregatedMechanism r = AggregatedMechanism::from_record(*m.record());
    for (double g : linear_grid(0.5, 2.0, 7)) {
      CHECK(r.utility(g) == m.utility(g));
      CHECK(r.cpa(g) == m.cpa(g));
    }
    CHECK(parse_mechanism_kind(to_string(MechanismKind::theorem3_decomposed)) == MechanismKind::theorem3_decomposed);
    CHECK(parse_pricing("uniform") == Pricing::uniform);
    CHECK_THROWS_AS(parse_pricing("flat"), DomainError);
  }
}

TEST_SUITE("calibration") {
  TEST_CASE("the tcpa frontier is non-decreasing and yields a verified mechanism") {
    const Scenario s = generate_scenario(fixtures::reference_config(1500), 5);
    const std::vector<double> grid = linear_grid(0.5, 9.5, 19);
    const Frontier f = calibrate_feasible_cv(s, s.auto_bidder, grid);
    REQUIRE(f.conversions.size() == grid.size());
    CHECK_FALSE(f.empty());
    CHECK(std::is_sorted(f.conversions.begin(), f.conversions.end()));
    const AggregatedMechanism m = calibrate_theorem1(s, s.auto_bidder, grid);
    CHECK(m.kind() == MechanismKind::theorem1_tcpa);
    CHECK(verify_mechanism_ic(m, linear_grid(0.5, 9.5, 100)).ok);
    // Up to the peak of (v - t) * F(t) the promise stays within what the
    // market can deliver at that CPA; past it g is held flat.
    double peak = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double candidate = (10.0 - grid[i]) * f.conversions[i];
      if (candidate >= peak) {
        peak = candidate;
        CHECK(m.conversions(grid[i]) <= f.conversions[i] * kDefaultMargin + kGFloor);
      }
    }
  }

  TEST_CASE("calibrated sub-market and decomposed mechanisms verify") {
    const Scenario s = generate_scenario(fixtures::submarket_config(1500, 1.0), 6);
    const std::vector<double> gammas = linear_grid(0.2, 3.0, 15);
    const AggregatedMechanism c = calibrate_corollary1(s, s.auto_bidder, gammas);
    CHECK(c.submarkets().size() == 3);
    CHECK(verify_submarket_ic(c, gammas).ok);
    CHECK(verify_mechanism_ic(c, gammas).ok);
    for (Pricing pricing : {Pricing::uniform, Pricing::proportional}) {
      const LinearDecomposition k{{{0, 0.3}, {1, 0.3}, {2, 0.4}}};
      const AggregatedMechanism d = calibrate_theorem3(s, s.auto_bidder, gammas, k, pricing);
      CHECK(verify_mechanism_ic(d, gammas).ok);
    }
  }

  TEST_CASE("calibration input checks") {
    const Scenario s = generate_scenario(fixtures::submarket_config(50, 1.0), 6);
    const std::vector<double> grid{1.0, 2.0, 3.0};
    // Several value classes need an explicit sub-market.
    CHECK_THROWS_AS(calibrate_feasible_cv(s, s.auto_bidder, grid), DomainError);
    const std::vector<double> non_positive{0.0, 1.0};
    CHECK_THROWS_AS(calibrate_corollary1(s, s.auto_bidder, non_positive), DomainError);
  }
}
