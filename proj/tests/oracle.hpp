// Independent oracles for the statistics tests: plain pair enumeration,
// quadrature for the normal CDF, and seeded series generators. These
// deliberately avoid every fast path the library uses.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "aginglab/metrics.hpp"

namespace oracle {

inline aginglab::TimeSeries make_series(const std::vector<double>& values,
                                        const std::vector<double>& times = {}) {
  aginglab::TimeSeries s(aginglab::MetricKind::process_rss, "oracle");
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double t = times.empty() ? static_cast<double>(i) : times[i];
    s.append(t, values[i]);
  }
  return s;
}

inline long long mk_s(const std::vector<double>& v) {
  long long s = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = i + 1; j < v.size(); ++j) {
      if (v[j] > v[i]) ++s;
      else if (v[j] < v[i]) --s;
    }
  }
  return s;
}

inline double mk_var(const std::vector<double>& v) {
  const long long n = static_cast<long long>(v.size());
  std::map<double, long long> groups;
  for (double x : v) ++groups[x];
  long long numerator = n * (n - 1) * (2 * n + 5);
  for (const auto& [value, count] : groups) {
    (void)value;
    numerator -= count * (count - 1) * (2 * count + 5);
  }
  return static_cast<double>(numerator) / 18.0;
}

inline std::vector<double> all_pairwise_slopes(const std::vector<double>& v,
                                               const std::vector<double>& t) {
  std::vector<double> slopes;
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = i + 1; j < v.size(); ++j) {
      if (t[j] != t[i]) slopes.push_back((v[j] - v[i]) / (t[j] - t[i]));
    }
  }
  std::sort(slopes.begin(), slopes.end());
  return slopes;
}

inline double sen_slope(const std::vector<double>& v,
                        const std::vector<double>& t) {
  const auto slopes = all_pairwise_slopes(v, t);
  const std::size_t m = slopes.size();
  if (m % 2 == 1) return slopes[m / 2];
  return 0.5 * (slopes[m / 2 - 1] + slopes[m / 2]);
}

// Composite-Simpson integral of the standard normal density over [0, x].
inline double normal_cdf(double z) {
  const double x = std::fabs(z);
  const double upper = std::min(x, 12.0);
  const int intervals = 16384;  // even; keeps the quadrature error ~1e-13
  const double h = upper / intervals;
  auto phi = [](double u) {
    return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::acos(-1.0));
  };
  double sum = phi(0.0) + phi(upper);
  for (int i = 1; i < intervals; ++i) {
    sum += phi(i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  }
  const double integral = sum * h / 3.0;
  const double tail_cdf = 0.5 + integral;
  return z >= 0.0 ? tail_cdf : 1.0 - tail_cdf;
}

inline double normal_quantile(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (normal_cdf(mid) < p) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

// The rank-based slope interval, spelled out on the fully enumerated
// slope list.
inline std::pair<double, double> sen_slope_ci(const std::vector<double>& v,
                                              const std::vector<double>& t,
                                              double alpha) {
  const auto slopes = all_pairwise_slopes(v, t);
  const double m = static_cast<double>(slopes.size());
  const double c = normal_quantile(1.0 - alpha / 2.0) * std::sqrt(mk_var(v));
  double r1 = std::ceil((m - c) / 2.0);
  double r2 = std::ceil((m + c) / 2.0) + 1.0;
  r1 = std::clamp(r1, 1.0, m);
  r2 = std::clamp(r2, 1.0, m);
  return {slopes[static_cast<std::size_t>(r1) - 1],
          slopes[static_cast<std::size_t>(r2) - 1]};
}

// Random series with a configurable chance of tied values (drawn from a
// small integer grid) and strictly increasing, jittered times.
inline aginglab::TimeSeries random_series(std::mt19937_64& rng, std::size_t n,
                                          double tie_fraction) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> grid(0, 9);
  std::normal_distribution<double> wide(0.0, 10.0);
  aginglab::TimeSeries s(aginglab::MetricKind::process_rss, "random");
  double t = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    t += 0.25 + unit(rng);
    const double v =
        unit(rng) < tie_fraction ? static_cast<double>(grid(rng)) : wide(rng);
    s.append(t, v);
  }
  return s;
}

inline aginglab::TimeSeries white_noise(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> noise(0.0, 1.0);
  aginglab::TimeSeries s(aginglab::MetricKind::response_time, "noise");
  for (std::size_t i = 0; i < n; ++i) {
    s.append(static_cast<double>(i), noise(rng));
  }
  return s;
}

}  // namespace oracle
