#include "autobid/curve.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "autobid/error.hpp"

namespace autobid {

namespace {
constexpr double kDomainSlack = 1e-12;
}

PiecewiseLinear::PiecewiseLinear(std::vector<double> xs, std::vector<double> ys) : xs_(std::move(xs)), ys_(std::move(ys)) {
  if (xs_.empty() || xs_.size() != ys_.size()) {
    throw DomainError("piecewise-linear curve needs matching, non-empty knot lists");
  }
  for (std::size_t i = 0; i < xs_.size(); ++i) {
    if (!std::isfinite(xs_[i]) || !std::isfinite(ys_[i])) {
      throw DomainError("piecewise-linear curve has a non-finite knot");
    }
    if (i > 0 && !(xs_[i - 1] < xs_[i])) {
      throw DomainError("piecewise-linear knots must strictly increase");
    }
  }
}

std::pair<double, double> PiecewiseLinear::domain() const {
  if (xs_.empty()) {
    throw DomainError("empty curve has no domain");
  }
  return {xs_.front(), xs_.back()};
}

bool PiecewiseLinear::contains(double x) const noexcept {
  if (xs_.empty()) {
    return false;
  }
  const double scale = std::max(1.0, std::max(std::abs(xs_.front()), std::abs(xs_.back())));
  return x >= xs_.front() - kDomainSlack * scale && x <= xs_.back() + kDomainSlack * scale;
}

double PiecewiseLinear::operator()(double x) const {
  if (!contains(x)) {
    throw DomainError("curve evaluated outside its domain at " + std::to_string(x));
  }
  if (x <= xs_.front()) {
    return ys_.front();
  }
  if (x >= xs_.back()) {
    return ys_.back();
  }
  const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
  const std::size_t hi = static_cast<std::size_t>(it - xs_.begin());
  const std::size_t lo = hi - 1;
  if (x == xs_[lo]) {
    return ys_[lo];
  }
  const double w = (x - xs_[lo]) / (xs_[hi] - xs_[lo]);
  return ys_[lo] + w * (ys_[hi] - ys_[lo]);
}

std::vector<double> linear_grid(double lo, double hi, std::size_t points) {
  if (points == 0) {
    return {};
  }
  if (points == 1) {
    return {lo};
  }
  if (!(lo < hi)) {
    throw DomainError("linear_grid: need lo < hi");
  }
  std::vector<double> grid(points);
  const double step = (hi - lo) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = lo + step * static_cast<double>(i);
  }
  grid.back() = hi;
  return grid;
}

std::vector<double> running_max(std::span<const double> values) {
  std::vector<double> out(values.begin(), values.end());
  for (std::size_t i = 1; i < out.size(); ++i) {
    out[i] = std::max(out[i], out[i - 1]);
  }
  return out;
}

std::vector<double> running_min(std::span<const double> values) {
  std::vector<double> out(values.begin(), values.end());
  for (std::size_t i = 1; i < out.size(); ++i) {
    out[i] = std::min(out[i], out[i - 1]);
  }
  return out;
}

} // namespace autobid
