#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "openbias/core/error.hpp"

namespace openbias::metrics {

/// Cohen's kappa for two binary annotators: (p_o - p_e) / (1 - p_e) with
/// p_e = P(a=1)P(b=1) + P(a=0)P(b=0). When p_e = 1 both annotators used one
/// label throughout and agreed everywhere, which is reported as 1.0.
inline double cohens_kappa(std::span<const int> a, std::span<const int> b) {
  require(a.size() == b.size(), ErrorKind::LengthMismatch,
          "annotator label lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  require(!a.empty(), ErrorKind::LengthMismatch, "no labels");
  const double n = static_cast<double>(a.size());
  double agree = 0.0, a1 = 0.0, b1 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    require((a[i] == 0 || a[i] == 1) && (b[i] == 0 || b[i] == 1), ErrorKind::InvariantViolation,
            "kappa labels must be 0 or 1");
    agree += a[i] == b[i];
    a1 += a[i];
    b1 += b[i];
  }
  const double po = agree / n;
  const double pa = a1 / n, pb = b1 / n;
  const double pe = pa * pb + (1.0 - pa) * (1.0 - pb);
  if (pe == 1.0) return 1.0;
  return (po - pe) / (1.0 - pe);
}

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  fail(ErrorKind::NumericalFault, "incomplete beta continued fraction did not converge");
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double regularized_incomplete_beta(double a, double b, double x) {
  require(a > 0.0 && b > 0.0 && x >= 0.0 && x <= 1.0, ErrorKind::PreconditionFailed, "incomplete beta domain");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
inline double student_t_two_sided_p(double t, double df) {
  require(df > 0.0, ErrorKind::PreconditionFailed, "degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p_two_sided = 1.0;
  double mean_difference = 0.0;
};

/// Paired t-test on per-instance differences a_i - b_i.
/// Zero variance: p = 1 when every difference is 0, p = 0 (t = ±inf) otherwise.
inline TTestResult paired_ttest_differences(std::span<const double> d) {
  require(d.size() >= 2, ErrorKind::LengthMismatch, "paired t-test needs n >= 2");
  const double n = static_cast<double>(d.size());
  double mean = 0.0;
  for (double v : d) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  TTestResult r;
  r.df = n - 1.0;
  r.mean_difference = mean;
  if (sd == 0.0) {
    if (mean == 0.0) {
      r.t = 0.0;
      r.p_two_sided = 1.0;
    } else {
      r.t = mean > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
      r.p_two_sided = 0.0;
    }
    return r;
  }
  r.t = mean / (sd / std::sqrt(n));
  r.p_two_sided = student_t_two_sided_p(r.t, r.df);
  return r;
}

inline TTestResult paired_ttest(std::span<const double> correct_a, std::span<const double> correct_b) {
  require(correct_a.size() == correct_b.size(), ErrorKind::LengthMismatch,
          "paired samples of length " + std::to_string(correct_a.size()) + " and " + std::to_string(correct_b.size()));
  std::vector<double> d(correct_a.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = correct_a[i] - correct_b[i];
  return paired_ttest_differences(d);
}

/// min(1, p * m) for each p.
inline std::vector<double> bonferroni(std::span<const double> p_values, std::size_t m) {
  require(m >= p_values.size(), ErrorKind::InvalidP,
          "family size " + std::to_string(m) + " smaller than " + std::to_string(p_values.size()) + " tests");
  std::vector<double> out;
  out.reserve(p_values.size());
  for (double p : p_values) {
    require(p >= 0.0 && p <= 1.0, ErrorKind::InvalidP, "p-value " + std::to_string(p) + " outside [0,1]");
    out.push_back(std::min(1.0, p * static_cast<double>(m)));
  }
  return out;
}

}  // namespace openbias::metrics
