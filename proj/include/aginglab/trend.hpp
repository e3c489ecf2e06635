#pragma once

#include <cstdint>
#include <string_view>
#include <utility>

#include "aginglab/metrics.hpp"

namespace aginglab {

enum class Verdict { increasing, decreasing, no_trend };

std::string_view verdict_name(Verdict v);

// Output of the Mann-Kendall test plus Sen's slope estimate for one
// series. Slope is in the series' canonical unit per second; callers
// convert for display.
struct TrendResult {
  std::size_t n = 0;
  long long s_statistic = 0;
  double variance = 0.0;
  double z_score = 0.0;
  double p_value = 1.0;
  double slope = 0.0;
  double slope_ci_low = 0.0;
  double slope_ci_high = 0.0;
  double alpha = 0.05;
  Verdict verdict = Verdict::no_trend;
};

// Pairwise-slope computation is O(n^2); above subsample_threshold samples
// the pairs are drawn uniformly at random (seeded, reproducible) instead
// of enumerated. 50-hour runs at 1 Hz produce 180k samples, which would
// otherwise need 16e9 pairs.
struct SlopeOptions {
  std::uint64_t seed = 0x61676c6162ULL;
  std::size_t subsample_threshold = 20000;
  std::size_t subsample_pairs = 2'000'000;
};

// S = sum over i<j of sign(v_j - v_i). Computed by merge-sort inversion
// counting in O(n log n); the brute-force definition lives in the test
// oracles. Throws "insufficient-samples" for n < 2.
long long mk_statistic(const TimeSeries& series);

// Null variance of S with the tie correction
//   Var(S) = [n(n-1)(2n+5) - sum_g t_g(t_g-1)(2t_g+5)] / 18
// over tie groups g of size t_g (exact value equality).
// https://en.wikipedia.org/wiki/Mann%E2%80%93Kendall_test
double mk_variance(const TimeSeries& series);

// Median of pairwise slopes (v_j - v_i)/(t_j - t_i) over actual sample
// times. Throws "degenerate-times" when fewer than one valid pair exists.
double sen_slope(const TimeSeries& series, const SlopeOptions& opts = {});

// Rank-based confidence interval for Sen's slope: with N' sorted pairwise
// slopes and C = z_{1-alpha/2} * sqrt(Var(S)), the bounds are the slopes
// at ranks ceil((N'-C)/2) and ceil((N'+C)/2)+1, clamped to [1, N'].
std::pair<double, double> sen_slope_ci(const TimeSeries& series, double alpha,
                                       const SlopeOptions& opts = {});

// Full test: continuity-corrected z, two-sided normal p, Sen's slope and
// its CI, and the verdict (no-trend iff p >= alpha). An all-tied series is
// a valid no-trend result, not an error. Throws "insufficient-samples"
// for n < 3.
TrendResult mk_test(const TimeSeries& series, double alpha,
                    const SlopeOptions& opts = {});

// Exact two-sided p-value P(|S_perm| >= |S_observed|) from the full
// permutation null distribution. Small-n guard for the normal
// approximation; limited to 3 <= n <= 10 and tie-free values.
double exact_mk_p(const TimeSeries& series);

// Standard normal CDF via the complementary error function (cmath),
// accurate well below the 1e-7 needed for table-precision p-values.
double normal_cdf(double z);

// Inverse of normal_cdf by bisection; exact to double round-off.
double normal_quantile(double p);

}  // namespace aginglab
