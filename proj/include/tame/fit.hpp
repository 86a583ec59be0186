#pragma once

// Weighted least-squares line fits for log-log scaling measurements.

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace tame {

struct LineFit {
  double slope = 0;
  double intercept = 0;
  double r2 = 1;           // coefficient of determination
  double slope_stderr = 0; // standard error of the slope
  double slope_ci95 = 0;   // 1.96 * stderr
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y,
                        std::span<const double> w = {}) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) throw std::invalid_argument("fit_line: need >= 2 matched points");
  std::vector<double> wv(n, 1.0);
  if (!w.empty()) {
    if (w.size() != n) throw std::invalid_argument("fit_line: weight size mismatch");
    wv.assign(w.begin(), w.end());
  }
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += wv[i];
    sx += wv[i] * x[i];
    sy += wv[i] * y[i];
  }
  const double xb = sx / sw, yb = sy / sw;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += wv[i] * (x[i] - xb) * (x[i] - xb);
    sxy += wv[i] * (x[i] - xb) * (y[i] - yb);
    syy += wv[i] * (y[i] - yb) * (y[i] - yb);
  }
  if (sxx == 0) throw std::invalid_argument("fit_line: degenerate abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = yb - f.slope * xb;
  double ss_res = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += wv[i] * r * r;
  }
  f.r2 = syy == 0 ? 1.0 : 1.0 - ss_res / syy;
  if (n > 2) {
    f.slope_stderr = std::sqrt(ss_res / (sw * (1.0 - 2.0 / static_cast<double>(n))) / sxx);
    f.slope_ci95 = 1.96 * f.slope_stderr;
  }
  return f;
}

/// Log-log slope of (x_i, y_i) pairs with optional weights.
inline LineFit fit_loglog(std::span<const double> x, std::span<const double> y,
                          std::span<const double> w = {}) {
  std::vector<double> lx, ly;
  lx.reserve(x.size());
  ly.reserve(y.size());
  for (double v : x) lx.push_back(std::log(v));
  for (double v : y) ly.push_back(std::log(v));
  return fit_line(lx, ly, w);
}

} // namespace tame
