#include "warpflow/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace warpflow {

std::vector<std::vector<double>> fd_weights(double x0, std::span<const double> nodes, int max_order) {
  // B. Fornberg, "Generation of finite difference formulas on arbitrarily
  // spaced grids", Math. Comp. 51 (1988).
  const int nd = static_cast<int>(nodes.size()) - 1;
  const int m = max_order;
  require(nd >= m, "fd_weights: not enough nodes for requested order");
  std::vector<std::vector<double>> c(m + 1, std::vector<double>(nd + 1, 0.0));
  double c1 = 1.0;
  double c4 = nodes[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i <= nd; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = nodes[i] - x0;
    for (int j = 0; j <= i - 1; ++j) {
      const double c3 = nodes[i] - nodes[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
        c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
      }
      for (int k = mn; k >= 1; --k)
        c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
      c[0][j] = c4 * c[0][j] / c3;
    }
    c1 = c2;
  }
  return c;
}

GridDerivative::GridDerivative(std::vector<double> nodes, int half_width, int edge_width)
    : nodes_(std::move(nodes)), half_width_(half_width) {
  const std::size_t n = nodes_.size();
  require(n >= static_cast<std::size_t>(edge_width), "GridDerivative: grid too small");
  first_.resize(n);
  w1_.resize(n);
  w2_.resize(n);
  const int full = 2 * half_width_ + 1;
  for (std::size_t i = 0; i < n; ++i) {
    int width = full;
    long lo = static_cast<long>(i) - half_width_;
    if (lo < 0 || lo + width > static_cast<long>(n)) {
      width = edge_width;
      lo = std::clamp<long>(static_cast<long>(i) - width / 2, 0, static_cast<long>(n) - width);
    }
    first_[i] = static_cast<std::size_t>(lo);
    auto w = fd_weights(nodes_[i], std::span<const double>(nodes_.data() + lo, width), 2);
    w1_[i] = std::move(w[1]);
    w2_[i] = std::move(w[2]);
  }
}

double GridDerivative::deriv(std::span<const double> f, std::size_t i, int m) const {
  const auto& w = (m == 1) ? w1_[i] : w2_[i];
  double acc = 0.0;
  const std::size_t lo = first_[i];
  for (std::size_t j = 0; j < w.size(); ++j) acc += w[j] * f[lo + j];
  return acc;
}

std::vector<double> GridDerivative::deriv_all(std::span<const double> f, int m) const {
  std::vector<double> out(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) out[i] = deriv(f, i, m);
  return out;
}

void solve_tridiagonal(std::span<const double> sub, std::vector<double> diag,
                       std::span<const double> super, std::vector<double>& rhs) {
  const std::size_t n = diag.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double w = sub[i - 1] / diag[i - 1];
    diag[i] -= w * super[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  rhs[n - 1] /= diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;)
    rhs[i] = (rhs[i] - super[i] * rhs[i + 1]) / diag[i];
}

namespace {
inline double hypot2(double a, double b) { return std::sqrt(a * a + b * b); }
}  // namespace

void symmetric_tridiagonal_eigen(std::vector<double>& d, std::vector<double>& e,
                                 std::vector<double>& z) {
  // Implicit QL with Wilkinson shifts, tracking only the first row of the
  // accumulated rotations (Golub-Welsch needs just that).
  const int n = static_cast<int>(d.size());
  e.resize(n, 0.0);
  z.assign(n, 0.0);
  if (n == 0) return;
  z[0] = 1.0;
  for (int l = 0; l < n; ++l) {
    int iter = 0;
    int mm;
    do {
      for (mm = l; mm < n - 1; ++mm) {
        const double dd = std::abs(d[mm]) + std::abs(d[mm + 1]);
        if (std::abs(e[mm]) <= std::numeric_limits<double>::epsilon() * dd) break;
      }
      if (mm != l) {
        if (++iter > 60) throw std::runtime_error("symmetric_tridiagonal_eigen: no convergence");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = hypot2(g, 1.0);
        g = d[mm] - d[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0, c = 1.0, p = 0.0;
        for (int i = mm - 1; i >= l; --i) {
          double f = s * e[i];
          const double b = c * e[i];
          r = hypot2(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[mm] = 0.0;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
          f = z[i + 1];
          z[i + 1] = s * z[i] + c * f;
          z[i] = c * z[i] - s * f;
        }
        if (r == 0.0 && mm - 1 >= l) continue;
        d[l] -= p;
        e[l] = g;
        e[mm] = 0.0;
      }
    } while (mm != l);
  }
  // sort ascending, carrying z
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return d[a] < d[b]; });
  std::vector<double> d2(n), z2(n);
  for (int i = 0; i < n; ++i) {
    d2[i] = d[idx[i]];
    z2[i] = z[idx[i]];
  }
  d = std::move(d2);
  z = std::move(z2);
}

Pchip::Pchip(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
  const std::size_t n = x_.size();
  require(n >= 2 && y_.size() == n, "Pchip: bad inputs");
  for (std::size_t i = 1; i < n; ++i) require(x_[i] > x_[i - 1], "Pchip: nodes must increase");
  std::vector<double> h(n - 1), slope(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = x_[i + 1] - x_[i];
    slope[i] = (y_[i + 1] - y_[i]) / h[i];
  }
  d_.assign(n, 0.0);
  if (n == 2) {
    d_[0] = d_[1] = slope[0];
    return;
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (slope[i - 1] * slope[i] <= 0.0) {
      d_[i] = 0.0;
    } else {
      const double w1 = 2.0 * h[i] + h[i - 1];
      const double w2 = h[i] + 2.0 * h[i - 1];
      d_[i] = (w1 + w2) / (w1 / slope[i - 1] + w2 / slope[i]);
    }
  }
  auto edge = [&](double h0, double h1, double s0, double s1) {
    double d0 = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
    if (d0 * s0 <= 0.0)
      d0 = 0.0;
    else if (s0 * s1 <= 0.0 && std::abs(d0) > 3.0 * std::abs(s0))
      d0 = 3.0 * s0;
    return d0;
  };
  d_[0] = edge(h[0], h[1], slope[0], slope[1]);
  d_[n - 1] = edge(h[n - 2], h[n - 3], slope[n - 2], slope[n - 3]);
}

std::size_t Pchip::find(double xq) const {
  auto it = std::upper_bound(x_.begin(), x_.end(), xq);
  std::size_t i = (it == x_.begin()) ? 0 : static_cast<std::size_t>(it - x_.begin() - 1);
  return std::min(i, x_.size() - 2);
}

double Pchip::operator()(double xq) const {
  const std::size_t i = find(xq);
  const double h = x_[i + 1] - x_[i];
  const double t = (xq - x_[i]) / h;
  const double t2 = t * t, t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
  return h00 * y_[i] + h * h10 * d_[i] + h01 * y_[i + 1] + h * h11 * d_[i + 1];
}

double Pchip::deriv(double xq) const {
  const std::size_t i = find(xq);
  const double h = x_[i + 1] - x_[i];
  const double t = (xq - x_[i]) / h;
  const double t2 = t * t;
  const double dh00 = (6 * t2 - 6 * t) / h, dh10 = 3 * t2 - 4 * t + 1;
  const double dh01 = (-6 * t2 + 6 * t) / h, dh11 = 3 * t2 - 2 * t;
  return dh00 * y_[i] + dh10 * d_[i] + dh01 * y_[i + 1] + dh11 * d_[i + 1];
}

double interp_cubic(std::span<const double> x, std::span<const double> y, double xq) {
  const std::size_t n = x.size();
  require(n >= 4, "interp_cubic: need >= 4 nodes");
  auto it = std::upper_bound(x.begin(), x.end(), xq);
  long i = (it - x.begin()) - 1;
  long lo = std::clamp<long>(i - 1, 0, static_cast<long>(n) - 4);
  double acc = 0.0;
  for (long a = lo; a < lo + 4; ++a) {
    double l = 1.0;
    for (long b = lo; b < lo + 4; ++b)
      if (b != a) l *= (xq - x[b]) / (x[a] - x[b]);
    acc += l * y[a];
  }
  return acc;
}

namespace {
double simpson(double a, double fa, double b, double fb, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_step(const std::function<double(double)>& f, double a, double fa, double b,
                     double fb, double m, double fm, double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(a, fa, m, fm, flm);
  const double right = simpson(m, fm, b, fb, frm);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         adaptive_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}
}  // namespace

double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double rel_tol, double abs_tol, int max_depth) {
  if (a == b) return 0.0;
  const double fa = f(a), fb = f(b);
  const double m = 0.5 * (a + b), fm = f(m);
  const double whole = simpson(a, fa, b, fb, fm);
  const double tol = std::max(abs_tol, std::abs(whole) * rel_tol);
  return adaptive_step(f, a, fa, b, fb, m, fm, whole, tol, max_depth);
}

double SmoothBump::value(double u) {
  if (u <= 0.0) return 1.0;
  if (u >= 1.0) return 0.0;
  const double u2 = u * u, u3 = u2 * u;
  return 1.0 - (6.0 * u2 * u3 - 15.0 * u2 * u2 + 10.0 * u3);
}

double SmoothBump::d1(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  const double u2 = u * u;
  return -(30.0 * u2 * u2 - 60.0 * u * u2 + 30.0 * u2);
}

double SmoothBump::d2(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  const double u2 = u * u;
  return -(120.0 * u * u2 - 180.0 * u2 + 60.0 * u);
}

double bisect(const std::function<double(double)>& f, double a, double b, double tol,
              int max_iter) {
  double fa = f(a), fb = f(b);
  require(fa == fa && fb == fb, "bisect: NaN endpoint");
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  require(fa * fb < 0.0, "bisect: no sign change");
  for (int it = 0; it < max_iter; ++it) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    if (fm == 0.0 || 0.5 * (b - a) < tol * std::max(1.0, std::abs(m))) return m;
    if (fa * fm < 0.0) {
      b = m;
      fb = fm;
    } else {
      a = m;
      fa = fm;
    }
  }
  return 0.5 * (a + b);
}

}  // namespace warpflow
