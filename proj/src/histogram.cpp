#include "nngp/histogram.hpp"

#include <algorithm>
#include <cmath>

#include "nngp/errors.hpp"

namespace nngp {

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - double(lo)) * (values[hi] - values[lo]);
}

int freedman_diaconis_bins(std::span<const double> values, int max_bins) {
  if (values.empty()) throw InvalidArgument("histogram of an empty sample");
  std::vector<double> v(values.begin(), values.end());
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double range = *hi - *lo;
  const double iqr = quantile(v, 0.75) - quantile(v, 0.25);
  if (!(range > 0.0) || !(iqr > 0.0)) return 1;
  const double width = 2.0 * iqr / std::cbrt(static_cast<double>(v.size()));
  return std::clamp(static_cast<int>(std::ceil(range / width)), 1, max_bins);
}

Histogram make_histogram(std::span<const double> values, int bins) {
  if (values.empty()) throw InvalidArgument("histogram of an empty sample");
  if (bins <= 0) bins = freedman_diaconis_bins(values);
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  Histogram h;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) h.edges[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / bins;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double x : values) {
    auto b = static_cast<long>((x - lo) / (hi - lo) * bins);
    b = std::clamp<long>(b, 0, bins - 1);
    ++h.counts[static_cast<std::size_t>(b)];
  }
  return h;
}

}  // namespace nngp
