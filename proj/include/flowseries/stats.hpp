#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flowseries/pipeline.hpp"

namespace flowseries {

struct AdfResult {
  double statistic = 0.0;  // t-ratio of the lagged level coefficient
  bool stationary_at_95 = false;
  int lag = 0;             // augmentation lags chosen by AIC
  std::size_t nobs = 0;
  bool degenerate = false;
  std::string note;
};

// Large-sample 5% critical value, constant-only regression.
inline constexpr double kAdfCritical5 = -2.86;

// floor(12 * (n / 100)^(1/4))
int default_adf_max_lag(std::size_t n);

/// Augmented Dickey-Fuller test with a constant and no trend:
///   dy_t = c + gamma * y_{t-1} + sum_{i=1..p} delta_i * dy_{t-i} + e_t
/// p is chosen in 0..max_lag by minimum AIC on a common sample, then the
/// regression is refit on all usable observations. Rejecting the unit root
/// (statistic < -2.86) marks the series stationary.
/// Throws Error("dataset-stats", ...) when fewer than 20 + max_lag values.
AdfResult adf_test(std::span<const double> series, int max_lag);
AdfResult adf_test(std::span<const double> series);

// Equal-width histogram over [min, max]; constant input gives 0.
double shannon_entropy_bits(std::span<const double> series, int bins);

struct DatasetSummary {
  std::size_t series_count = 0;
  std::size_t object_count = 0;
  double mean_length = 0.0;
  double length_cv = 0.0;  // population std / mean
  std::size_t min_length = 0;
  std::size_t max_length = 0;
  double value_mean = 0.0;
  double value_std = 0.0;
  double stationary_fraction = 0.0;  // over series long enough for the test
  std::size_t adf_tested = 0;
  std::size_t adf_skipped = 0;
  double mean_entropy_bits = 0.0;
  int entropy_bins = 64;
};

DatasetSummary summarize_dataset(const std::vector<SeriesRecord>& records, int bins = 64,
                                 int jobs = 1);

struct PcaPoint {
  std::string label;
  std::string series_id;
  double pc1 = 0.0;
  double pc2 = 0.0;
};

struct PcaProjection {
  std::vector<PcaPoint> points;
  std::vector<std::vector<double>> components;  // 2 x resample_len, orthonormal
  double explained_variance[2] = {0.0, 0.0};
  double explained_ratio[2] = {0.0, 0.0};
  std::size_t dropped_constant = 0;
};

/// z-normalises each series, resamples it to `resample_len`, stacks both
/// datasets and projects onto the top two covariance eigenvectors. Constant
/// series are dropped (counted in dropped_constant). Component signs are
/// fixed so the largest-magnitude entry is positive.
PcaProjection pca_compare(const std::vector<SeriesRecord>& dataset_a,
                          const std::vector<SeriesRecord>& dataset_b, int resample_len = 256,
                          const std::string& label_a = "a", const std::string& label_b = "b");

}  // namespace flowseries
