#pragma once
#include <span>
#include <utility>
#include <vector>

namespace autobid {

// Piecewise-linear curve through knots with strictly increasing abscissae.
// Evaluation outside [front, back] is a domain error.
class PiecewiseLinear {
public:
  PiecewiseLinear() = default;
  PiecewiseLinear(std::vector<double> xs, std::vector<double> ys);

  double operator()(double x) const;

  const std::vector<double>& xs() const noexcept { return xs_; }
  const std::vector<double>& ys() const noexcept { return ys_; }
  std::size_t size() const noexcept { return xs_.size(); }
  bool empty() const noexcept { return xs_.empty(); }
  std::pair<double, double> domain() const;
  bool contains(double x) const noexcept;

private:
  std::vector<double> xs_;
  std::vector<double> ys_;
};

// Evenly spaced grid of `points` values from lo to hi inclusive.
std::vector<double> linear_grid(double lo, double hi, std::size_t points);

// Non-decreasing envelope: running maximum from the left.
std::vector<double> running_max(std::span<const double> values);
// Non-increasing envelope: running minimum from the left.
std::vector<double> running_min(std::span<const double> values);

} // namespace autobid
