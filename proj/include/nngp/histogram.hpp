#pragma once

#include <span>
#include <vector>

namespace nngp {

struct Histogram {
  std::vector<double> edges;  // bins + 1 edges
  std::vector<long> counts;

  std::size_t bins() const { return counts.size(); }
};

// Freedman-Diaconis bin count (2 IQR n^{-1/3}), clamped to [1, max_bins].
int freedman_diaconis_bins(std::span<const double> values, int max_bins = 1000);

// Equal-width histogram over [min, max]; bins <= 0 selects Freedman-Diaconis.
Histogram make_histogram(std::span<const double> values, int bins = 0);

double quantile(std::vector<double> values, double q);

}  // namespace nngp
