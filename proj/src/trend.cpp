#include "aginglab/trend.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <vector>

namespace aginglab {

std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::increasing: return "increasing";
    case Verdict::decreasing: return "decreasing";
    case Verdict::no_trend: return "no-trend";
  }
  return "unknown";
}

double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error("bad-quantile-probability");
  double lo = -40.0, hi = 40.0;
  // ~160 halvings; converges to the last representable bit
  while (true) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) return mid;
    if (normal_cdf(mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
}

namespace {

// Count pairs i<j with v[i] > v[j] (strict inversions) by merge sort.
long long count_inversions(std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<double> tmp(n);
  long long inversions = 0;
  for (std::size_t width = 1; width < n; width *= 2) {
    for (std::size_t left = 0; left + width < n; left += 2 * width) {
      const std::size_t mid = left + width;
      const std::size_t right = std::min(left + 2 * width, n);
      std::size_t i = left, j = mid, k = left;
      while (i < mid && j < right) {
        if (v[i] > v[j]) {
          // v[i..mid) all exceed v[j]
          inversions += static_cast<long long>(mid - i);
          tmp[k++] = v[j++];
        } else {
          tmp[k++] = v[i++];
        }
      }
      while (i < mid) tmp[k++] = v[i++];
      while (j < right) tmp[k++] = v[j++];
      std::copy(tmp.begin() + static_cast<std::ptrdiff_t>(left),
                tmp.begin() + static_cast<std::ptrdiff_t>(right),
                v.begin() + static_cast<std::ptrdiff_t>(left));
    }
  }
  return inversions;
}

// Sizes of groups of exactly-equal values.
std::vector<long long> tie_group_sizes(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  std::vector<long long> groups;
  std::size_t i = 0;
  while (i < values.size()) {
    std::size_t j = i + 1;
    while (j < values.size() && values[j] == values[i]) ++j;
    if (j - i > 1) groups.push_back(static_cast<long long>(j - i));
    i = j;
  }
  return groups;
}

struct SlopeSet {
  std::vector<double> slopes;    // sorted ascending
  std::size_t full_pair_count;   // n(n-1)/2
  bool subsampled;
};

SlopeSet pairwise_slopes(const TimeSeries& series, const SlopeOptions& opts) {
  const auto& s = series.samples();
  const std::size_t n = s.size();
  SlopeSet out;
  out.full_pair_count = n * (n - 1) / 2;
  out.subsampled = n > opts.subsample_threshold;

  if (!out.subsampled) {
    out.slopes.reserve(out.full_pair_count);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dt = s[j].t - s[i].t;
        if (dt != 0.0) out.slopes.push_back((s[j].value - s[i].value) / dt);
      }
    }
  } else {
    std::mt19937_64 rng(opts.seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    out.slopes.reserve(opts.subsample_pairs);
    while (out.slopes.size() < opts.subsample_pairs) {
      std::size_t i = pick(rng);
      std::size_t j = pick(rng);
      if (i == j) continue;
      if (i > j) std::swap(i, j);
      const double dt = s[j].t - s[i].t;
      if (dt != 0.0) out.slopes.push_back((s[j].value - s[i].value) / dt);
    }
  }
  std::sort(out.slopes.begin(), out.slopes.end());
  return out;
}

double median_of_sorted(const std::vector<double>& v) {
  const std::size_t m = v.size();
  if (m % 2 == 1) return v[m / 2];
  return 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

}  // namespace

long long mk_statistic(const TimeSeries& series) {
  const std::size_t n = series.size();
  if (n < 2) throw Error("insufficient-samples", "mk_statistic needs n >= 2");
  std::vector<double> values = series.values();

  const long long total_pairs = static_cast<long long>(n) *
                                static_cast<long long>(n - 1) / 2;
  long long tie_pairs = 0;
  for (long long t : tie_group_sizes(values)) tie_pairs += t * (t - 1) / 2;
  const long long inversions = count_inversions(values);

  // S = concordant - discordant = (T - ties - M) - M
  return total_pairs - tie_pairs - 2 * inversions;
}

double mk_variance(const TimeSeries& series) {
  const long long n = static_cast<long long>(series.size());
  if (n < 2) throw Error("insufficient-samples", "mk_variance needs n >= 2");
  long long numerator = n * (n - 1) * (2 * n + 5);
  for (long long t : tie_group_sizes(series.values())) {
    numerator -= t * (t - 1) * (2 * t + 5);
  }
  return static_cast<double>(numerator) / 18.0;
}

double sen_slope(const TimeSeries& series, const SlopeOptions& opts) {
  if (series.size() < 2) {
    throw Error("insufficient-samples", "sen_slope needs n >= 2");
  }
  const auto set = pairwise_slopes(series, opts);
  if (set.slopes.empty()) throw Error("degenerate-times");
  return median_of_sorted(set.slopes);
}

std::pair<double, double> sen_slope_ci(const TimeSeries& series, double alpha,
                                       const SlopeOptions& opts) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("bad-alpha");
  if (series.size() < 2) {
    throw Error("insufficient-samples", "sen_slope_ci needs n >= 2");
  }
  const auto set = pairwise_slopes(series, opts);
  if (set.slopes.size() < 2) throw Error("degenerate-times");

  const double z = normal_quantile(1.0 - alpha / 2.0);
  double c = z * std::sqrt(mk_variance(series));
  const auto m = static_cast<double>(set.slopes.size());
  if (set.subsampled) {
    // ranks live on the full pair count; rescale onto the subsample
    c *= m / static_cast<double>(set.full_pair_count);
  }

  auto rank_clamped = [&](double r) {
    const double clamped = std::clamp(r, 1.0, m);
    return set.slopes[static_cast<std::size_t>(clamped) - 1];
  };
  const double low = rank_clamped(std::ceil((m - c) / 2.0));
  const double high = rank_clamped(std::ceil((m + c) / 2.0) + 1.0);
  return {low, high};
}

TrendResult mk_test(const TimeSeries& series, double alpha,
                    const SlopeOptions& opts) {
  if (series.size() < 3) {
    throw Error("insufficient-samples", "mk_test needs n >= 3");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("bad-alpha");

  TrendResult r;
  r.n = series.size();
  r.alpha = alpha;
  r.s_statistic = mk_statistic(series);
  r.variance = mk_variance(series);

  if (r.variance > 0.0) {
    const double sd = std::sqrt(r.variance);
    if (r.s_statistic > 0) {
      r.z_score = (static_cast<double>(r.s_statistic) - 1.0) / sd;
    } else if (r.s_statistic < 0) {
      r.z_score = (static_cast<double>(r.s_statistic) + 1.0) / sd;
    }
  }
  r.p_value = std::clamp(2.0 * (1.0 - normal_cdf(std::fabs(r.z_score))), 0.0, 1.0);

  r.slope = sen_slope(series, opts);
  std::tie(r.slope_ci_low, r.slope_ci_high) = sen_slope_ci(series, alpha, opts);

  if (r.p_value < alpha && r.s_statistic > 0) {
    r.verdict = Verdict::increasing;
  } else if (r.p_value < alpha && r.s_statistic < 0) {
    r.verdict = Verdict::decreasing;
  } else {
    r.verdict = Verdict::no_trend;
  }
  return r;
}

namespace {

long long brute_s(const std::vector<int>& ranks) {
  long long s = 0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    for (std::size_t j = i + 1; j < ranks.size(); ++j) {
      if (ranks[j] > ranks[i]) ++s;
      else if (ranks[j] < ranks[i]) --s;
    }
  }
  return s;
}

// Null distribution of |S| for tie-free series of length n: counts[k] =
// number of permutations with |S| = k. Built once per n and cached; 10!
// permutations is the worst case.
const std::vector<long long>& exact_abs_s_counts(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, std::vector<long long>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  const std::size_t max_s = n * (n - 1) / 2;
  std::vector<long long> counts(max_s + 1, 0);
  std::vector<int> ranks(n);
  std::iota(ranks.begin(), ranks.end(), 0);
  do {
    counts[static_cast<std::size_t>(std::llabs(brute_s(ranks)))] += 1;
  } while (std::next_permutation(ranks.begin(), ranks.end()));
  return cache.emplace(n, std::move(counts)).first->second;
}

}  // namespace

double exact_mk_p(const TimeSeries& series) {
  const std::size_t n = series.size();
  if (n < 3) throw Error("insufficient-samples", "exact_mk_p needs n >= 3");
  if (n > 10) throw Error("too-large-for-exact");
  if (!tie_group_sizes(series.values()).empty()) {
    throw Error("ties-unsupported-exact");
  }

  const long long s_obs = std::llabs(mk_statistic(series));
  const auto& counts = exact_abs_s_counts(n);

  long long at_least = 0, total = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    total += counts[k];
    if (static_cast<long long>(k) >= s_obs) at_least += counts[k];
  }
  return static_cast<double>(at_least) / static_cast<double>(total);
}

}  // namespace aginglab
