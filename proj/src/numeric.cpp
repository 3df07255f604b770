#include "flowseries/numeric.hpp"

#include <cmath>
#include <numeric>

#include "flowseries/error.hpp"

namespace flowseries {

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double pstdev(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("numeric", "pearson: length mismatch");
  if (a.size() < 2) return 0.0;
  const double ma = mean(a);
  const double mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

std::vector<double> resample_linear(std::span<const double> v, std::size_t n) {
  if (v.empty() || n == 0) throw Error("numeric", "resample_linear: empty input or target");
  if (v.size() == 1) return std::vector<double>(n, v[0]);
  if (n == 1) return {v.front()};
  if (n == v.size()) return {v.begin(), v.end()};
  std::vector<double> out(n);
  const double step = static_cast<double>(v.size() - 1) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = static_cast<double>(i) * step;
    std::size_t k = static_cast<std::size_t>(u);
    if (k >= v.size() - 1) k = v.size() - 2;
    const double f = u - static_cast<double>(k);
    out[i] = v[k] + f * (v[k + 1] - v[k]);
  }
  out.front() = v.front();
  out.back() = v.back();
  return out;
}

}  // namespace flowseries
