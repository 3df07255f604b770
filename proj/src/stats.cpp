#include "flowseries/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <Eigen/Dense>

#include "flowseries/error.hpp"
#include "flowseries/numeric.hpp"
#include "flowseries/parallel.hpp"

namespace flowseries {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error("dataset-stats", msg); }

struct OlsFit {
  double rss = 0.0;
  double gamma = 0.0;
  double gamma_se = 0.0;
  bool full_rank = true;
};

// Rows t = first..n-1 of the ADF regression with p augmentation lags.
OlsFit fit_adf(std::span<const double> y, const std::vector<double>& dy, int p, std::size_t first) {
  const std::size_t n = y.size();
  const std::size_t rows = n - first;
  const int k = 2 + p;
  Eigen::MatrixXd x(rows, k);
  Eigen::VectorXd z(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t t = first + r;
    z(r) = dy[t];
    x(r, 0) = y[t - 1];
    x(r, 1) = 1.0;
    for (int i = 1; i <= p; ++i) x(r, 1 + i) = dy[t - i];
  }
  OlsFit fit;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> rank_qr(x);
  if (rank_qr.rank() < k) {
    fit.full_rank = false;
    return fit;
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  const Eigen::VectorXd beta = qr.solve(z);
  fit.rss = (z - x * beta).squaredNorm();
  fit.gamma = beta(0);
  // se^2 = s^2 * [(X'X)^-1]_00 = s^2 * || R^-T e_0 ||^2
  Eigen::VectorXd e0 = Eigen::VectorXd::Zero(k);
  e0(0) = 1.0;
  const Eigen::VectorXd v = r.transpose().triangularView<Eigen::Lower>().solve(e0);
  const double dof = static_cast<double>(rows) - k;
  fit.gamma_se = std::sqrt(fit.rss / dof * v.squaredNorm());
  return fit;
}

}  // namespace

int default_adf_max_lag(std::size_t n) {
  return static_cast<int>(std::floor(12.0 * std::pow(static_cast<double>(n) / 100.0, 0.25)));
}

AdfResult adf_test(std::span<const double> y) { return adf_test(y, default_adf_max_lag(y.size())); }

AdfResult adf_test(std::span<const double> y, int max_lag) {
  if (max_lag < 0) fail("ADF max_lag must be >= 0");
  const std::size_t n = y.size();
  if (n < static_cast<std::size_t>(20 + max_lag))
    fail("series too short for ADF: length " + std::to_string(n) + " < 20 + max_lag (" +
         std::to_string(max_lag) + ")");

  AdfResult res;
  auto degenerate = [&](const std::string& why) {
    res.statistic = std::numeric_limits<double>::quiet_NaN();
    res.stationary_at_95 = false;
    res.degenerate = true;
    res.note = "degenerate: " + why;
    return res;
  };
  if (pstdev(y) == 0.0) return degenerate("constant series");

  std::vector<double> dy(n, 0.0);
  for (std::size_t t = 1; t < n; ++t) dy[t] = y[t] - y[t - 1];

  // Lag selection on the common sample t = max_lag+1 .. n-1.
  const std::size_t common_first = static_cast<std::size_t>(max_lag) + 1;
  const double nobs_common = static_cast<double>(n - common_first);
  int best_lag = -1;
  double best_aic = std::numeric_limits<double>::infinity();
  for (int p = 0; p <= max_lag; ++p) {
    const OlsFit f = fit_adf(y, dy, p, common_first);
    if (!f.full_rank || f.rss <= 0.0) continue;
    const double aic = nobs_common * std::log(f.rss / nobs_common) + 2.0 * (p + 2);
    if (aic < best_aic) {
      best_aic = aic;
      best_lag = p;
    }
  }
  if (best_lag < 0) return degenerate("rank-deficient or exact-fit regression");

  const OlsFit f = fit_adf(y, dy, best_lag, static_cast<std::size_t>(best_lag) + 1);
  if (!f.full_rank || !(f.gamma_se > 0.0)) return degenerate("rank-deficient or exact-fit regression");
  res.lag = best_lag;
  res.nobs = n - static_cast<std::size_t>(best_lag) - 1;
  res.statistic = f.gamma / f.gamma_se;
  res.stationary_at_95 = res.statistic < kAdfCritical5;
  return res;
}

double shannon_entropy_bits(std::span<const double> v, int bins) {
  if (bins < 2) fail("entropy needs at least 2 bins");
  if (v.empty()) fail("entropy of an empty series");
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) return 0.0;
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  const double width = (hi - lo) / bins;
  for (double x : v) {
    auto b = static_cast<long>(std::floor((x - lo) / width));
    b = std::clamp<long>(b, 0, bins - 1);
    ++counts[static_cast<std::size_t>(b)];
  }
  double h = 0.0;
  const double total = static_cast<double>(v.size());
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log2(p);
  }
  return std::clamp(h, 0.0, std::log2(static_cast<double>(bins)));
}

DatasetSummary summarize_dataset(const std::vector<SeriesRecord>& records, int bins, int jobs) {
  if (records.empty()) fail("cannot summarise an empty dataset");
  DatasetSummary s;
  s.series_count = records.size();
  s.entropy_bins = bins;

  std::set<std::string> objects;
  std::vector<double> lengths;
  double vsum = 0.0;
  std::size_t vcount = 0;
  for (const auto& r : records) {
    objects.insert(r.object_tag);
    lengths.push_back(static_cast<double>(r.length()));
    for (double x : r.values) vsum += x;
    vcount += r.values.size();
  }
  s.object_count = objects.size();
  s.mean_length = mean(lengths);
  s.length_cv = s.mean_length > 0.0 ? pstdev(lengths) / s.mean_length : 0.0;
  s.min_length = static_cast<std::size_t>(*std::min_element(lengths.begin(), lengths.end()));
  s.max_length = static_cast<std::size_t>(*std::max_element(lengths.begin(), lengths.end()));
  s.value_mean = vcount ? vsum / static_cast<double>(vcount) : 0.0;
  double ss = 0.0;
  for (const auto& r : records)
    for (double x : r.values) ss += (x - s.value_mean) * (x - s.value_mean);
  s.value_std = vcount ? std::sqrt(ss / static_cast<double>(vcount)) : 0.0;

  // 1 stationary, 0 not, -1 too short.
  std::vector<int> adf(records.size(), -1);
  std::vector<double> entropy(records.size(), 0.0);
  parallel_for(records.size(), jobs, [&](std::size_t i) {
    const auto& v = records[i].values;
    if (!v.empty()) entropy[i] = shannon_entropy_bits(v, bins);
    const int lag = default_adf_max_lag(v.size());
    if (v.size() >= static_cast<std::size_t>(20 + lag)) adf[i] = adf_test(v, lag).stationary_at_95;
  });
  std::size_t stationary = 0;
  for (int a : adf) {
    if (a < 0) {
      ++s.adf_skipped;
    } else {
      ++s.adf_tested;
      stationary += static_cast<std::size_t>(a);
    }
  }
  s.stationary_fraction =
      s.adf_tested ? static_cast<double>(stationary) / static_cast<double>(s.adf_tested) : 0.0;
  s.mean_entropy_bits = mean(entropy);
  return s;
}

PcaProjection pca_compare(const std::vector<SeriesRecord>& a, const std::vector<SeriesRecord>& b,
                          int resample_len, const std::string& label_a,
                          const std::string& label_b) {
  if (a.empty() || b.empty()) fail("PCA comparison needs two non-empty datasets");
  if (resample_len < 8) fail("resample length must be >= 8");

  PcaProjection proj;
  std::vector<std::vector<double>> rows;
  std::vector<const SeriesRecord*> kept;
  std::vector<const std::string*> labels;
  auto add = [&](const std::vector<SeriesRecord>& ds, const std::string& label) {
    for (const auto& r : ds) {
      const double sd = pstdev(r.values);
      if (r.values.size() < 2 || !(sd > 0.0)) {
        ++proj.dropped_constant;
        continue;
      }
      const double m = mean(r.values);
      std::vector<double> z(r.values.size());
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = (r.values[i] - m) / sd;
      rows.push_back(resample_linear(z, static_cast<std::size_t>(resample_len)));
      kept.push_back(&r);
      labels.push_back(&label);
    }
  };
  add(a, label_a);
  add(b, label_b);
  if (rows.empty()) fail("all series are constant; nothing to project");

  const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index d = resample_len;
  Eigen::MatrixXd x(m, d);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mu;
  const Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(std::max<Eigen::Index>(m - 1, 1));

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) fail("covariance eigendecomposition failed");
  const double total = std::max(0.0, eig.eigenvalues().sum());

  Eigen::MatrixXd top(d, 2);
  for (int c = 0; c < 2; ++c) {
    const Eigen::Index idx = d - 1 - c;  // eigenvalues ascending
    Eigen::VectorXd v = eig.eigenvectors().col(idx);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    top.col(c) = v;
    proj.explained_variance[c] = std::max(0.0, eig.eigenvalues()(idx));
    proj.explained_ratio[c] = total > 0.0 ? proj.explained_variance[c] / total : 0.0;
    proj.components.emplace_back(v.data(), v.data() + v.size());
  }

  const Eigen::MatrixXd scores = centered * top;
  for (Eigen::Index i = 0; i < m; ++i)
    proj.points.push_back({*labels[static_cast<std::size_t>(i)],
                           kept[static_cast<std::size_t>(i)]->series_id, scores(i, 0), scores(i, 1)});
  return proj;
}

}  // namespace flowseries
