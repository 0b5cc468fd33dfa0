#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tfqkd {

struct QuadratureOptions {
  double rel_tol = 1e-9;
  double abs_floor = 1e-30;
  int max_depth = 48;
};

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <typename Scalar, typename F>
Scalar simpson_step(F& f, Scalar a, Scalar b, Scalar fa, Scalar fm, Scalar fb,
                    Scalar whole, Scalar tol, int depth) {
  const Scalar m = (a + b) / 2;
  const Scalar lm = (a + m) / 2;
  const Scalar rm = (m + b) / 2;
  const Scalar flm = f(lm);
  const Scalar frm = f(rm);
  const Scalar left = (m - a) / 6 * (fa + 4 * flm + fm);
  const Scalar right = (b - m) / 6 * (fm + 4 * frm + fb);
  const Scalar diff = left + right - whole;
  if (depth <= 0 || std::abs(diff) <= 15 * tol) {
    return left + right + diff / 15;
  }
  return simpson_step(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson integration of f over [a, b].
///
/// The tolerance is relative to a coarse estimate of the integral of |f|,
/// floored at `abs_floor`. Non-finite integrand values raise QuadratureError.
template <typename F, typename Scalar = double>
Scalar adaptive_simpson(F&& f, Scalar a, Scalar b, const QuadratureOptions& opt = {}) {
  if (a == b) return Scalar(0);
  // A fixed 9-point pass gives the scale the relative tolerance refers to.
  constexpr int kProbe = 8;
  Scalar scale = 0;
  for (int i = 0; i <= kProbe; ++i) {
    const Scalar v = f(a + (b - a) * Scalar(i) / kProbe);
    if (!std::isfinite(v)) throw QuadratureError("non-finite integrand");
    scale += std::abs(v);
  }
  scale *= std::abs(b - a) / (kProbe + 1);
  const Scalar tol = std::max<Scalar>(opt.rel_tol * scale, opt.abs_floor);

  auto checked = [&](Scalar x) {
    const Scalar v = f(x);
    if (!std::isfinite(v)) throw QuadratureError("non-finite integrand");
    return v;
  };
  const Scalar fa = checked(a);
  const Scalar fb = checked(b);
  const Scalar fm = checked((a + b) / 2);
  const Scalar whole = (b - a) / 6 * (fa + 4 * fm + fb);
  return detail::simpson_step(checked, a, b, fa, fm, fb, whole, tol, opt.max_depth);
}

}  // namespace tfqkd
