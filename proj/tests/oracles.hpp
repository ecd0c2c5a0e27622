#pragma once

// Independent reference implementations used to cross-check the library.
// They favour directness over speed and share no code with the code under test.

#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

struct ClassTally {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long support = 0;
};

struct Tally {
  std::map<std::string, ClassTally> per_class;  // labels seen in truth or prediction
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
  std::map<std::pair<std::string, std::string>, double> normalized;  // (true, predicted) -> row share
};

/// Brute-force metrics from parallel label vectors.
inline Tally tally(const std::vector<std::string>& truth, const std::vector<std::string>& pred) {
  Tally t;
  std::set<std::string> labels(truth.begin(), truth.end());
  labels.insert(pred.begin(), pred.end());
  std::map<std::pair<std::string, std::string>, long> cells;
  long correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++cells[{truth[i], pred[i]}];
    if (truth[i] == pred[i]) ++correct;
  }
  const double n = static_cast<double>(truth.size());
  t.accuracy = correct / n;
  double macro = 0.0, weighted = 0.0;
  for (const auto& l : labels) {
    long tp = 0, fp = 0, fn = 0;
    for (const auto& [cell, count] : cells) {
      const bool is_true = cell.first == l;
      const bool is_pred = cell.second == l;
      if (is_true && is_pred) tp += count;
      if (!is_true && is_pred) fp += count;
      if (is_true && !is_pred) fn += count;
    }
    ClassTally c;
    c.support = tp + fn;
    c.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    c.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    c.f1 = c.precision + c.recall == 0.0 ? 0.0 : 2 * c.precision * c.recall / (c.precision + c.recall);
    macro += c.f1;
    weighted += c.f1 * static_cast<double>(c.support);
    t.per_class[l] = c;
  }
  t.macro_f1 = macro / static_cast<double>(labels.size());
  t.weighted_f1 = weighted / n;
  for (const auto& a : labels) {
    long row = 0;
    for (const auto& b : labels) {
      auto it = cells.find({a, b});
      row += it == cells.end() ? 0 : it->second;
    }
    for (const auto& b : labels) {
      auto it = cells.find({a, b});
      const long c = it == cells.end() ? 0 : it->second;
      t.normalized[{a, b}] = row == 0 ? 0.0 : static_cast<double>(c) / static_cast<double>(row);
    }
  }
  return t;
}

/// Pearson r by the single-pass textbook formula in extended precision.
inline double pearson_r(const std::vector<double>& x, const std::vector<double>& y) {
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  const long double n = static_cast<long double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += static_cast<long double>(x[i]) * x[i];
    syy += static_cast<long double>(y[i]) * y[i];
    sxy += static_cast<long double>(x[i]) * y[i];
  }
  const long double num = n * sxy - sx * sy;
  const long double den = std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
  return static_cast<double>(num / den);
}

inline double t_density(double s, double df) {
  const double log_c = std::lgamma((df + 1) / 2) - std::lgamma(df / 2) - 0.5 * std::log(df * M_PI);
  return std::exp(log_c - (df + 1) / 2 * std::log1p(s * s / df));
}

inline double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                      double whole, double eps, int depth) {
  const double m = (a + b) / 2;
  const double lm = (a + m) / 2, rm = (m + b) / 2;
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6 * (fa + 4 * flm + fm);
  const double right = (b - m) / 6 * (fm + 4 * frm + fb);
  if (depth <= 0 || std::fabs(left + right - whole) <= 15 * eps) return left + right + (left + right - whole) / 15;
  return simpson(f, a, m, fa, flm, fm, left, eps / 2, depth - 1) + simpson(f, m, b, fm, frm, fb, right, eps / 2, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b, double eps = 1e-13) {
  const double fa = f(a), fb = f(b), fm = f((a + b) / 2);
  return simpson(f, a, b, fa, fm, fb, (b - a) / 6 * (fa + 4 * fm + fb), eps, 60);
}

/// Two-sided p-value 1 - 2 * integral_0^|t| of the t density.
inline double t_two_sided_p(double t, double df) {
  const double half = integrate([df](double s) { return t_density(s, df); }, 0.0, std::fabs(t));
  return 1.0 - 2.0 * half;
}

}  // namespace oracle
