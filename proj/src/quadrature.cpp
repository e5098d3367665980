#include "qpat/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <queue>

#include "qpat/error.hpp"

namespace qpat::quad {

namespace {

// Kronrod 15-point abscissae (positive half) and weights, with the embedded
// 7-point Gauss weights on the odd-indexed abscissae.
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Piece {
  double a;
  double b;
  double value;
  double error;
  long order;  // tie-breaker for deterministic heap ordering
};

struct WorseFirst {
  bool operator()(const Piece& l, const Piece& r) const {
    if (l.error != r.error) return l.error < r.error;
    return l.order > r.order;
  }
};

Piece gk15(const Integrand& f, double a, double b, long order) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double kron = fc * kWgk[7];
  double gauss = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const double fsum = f(c - dx) + f(c + dx);
    kron += kWgk[j] * fsum;
    if (j % 2 == 1) gauss += kWg[j / 2] * fsum;
  }
  kron *= h;
  gauss *= h;
  return {a, b, kron, std::abs(kron - gauss), order};
}

}  // namespace

Result integrate(const Integrand& f, std::span<const double> breakpoints, const Tolerance& tol) {
  if (breakpoints.size() < 2) throw ArgumentError("integrate: need at least two breakpoints");
  std::priority_queue<Piece, std::vector<Piece>, WorseFirst> heap;
  long order = 0;
  double total = 0.0;
  double err = 0.0;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    if (breakpoints[i + 1] <= breakpoints[i]) continue;
    Piece p = gk15(f, breakpoints[i], breakpoints[i + 1], order++);
    total += p.value;
    err += p.error;
    heap.push(p);
  }
  Result res;
  while (!heap.empty() && err > std::max(tol.abs, tol.rel * std::abs(total))) {
    if (static_cast<int>(heap.size()) >= tol.max_intervals) {
      res.converged = false;
      break;
    }
    Piece worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b) {
      // Interval at machine resolution; keep its estimate as is.
      res.converged = false;
      break;
    }
    Piece left = gk15(f, worst.a, mid, order++);
    Piece right = gk15(f, mid, worst.b, order++);
    total += left.value + right.value - worst.value;
    err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }
  // Re-sum in interval order so the reported value does not depend on the
  // floating-point history of incremental updates.
  std::vector<Piece> pieces;
  pieces.reserve(heap.size());
  while (!heap.empty()) {
    pieces.push_back(heap.top());
    heap.pop();
  }
  std::sort(pieces.begin(), pieces.end(), [](const Piece& l, const Piece& r) { return l.a < r.a; });
  res.value = 0.0;
  res.error = 0.0;
  for (const auto& p : pieces) {
    res.value += p.value;
    res.error += p.error;
  }
  res.intervals = static_cast<int>(pieces.size());
  return res;
}

std::vector<double> graded_breakpoints(double a, double b, double focus, double scale, int max_levels) {
  if (!(b > a)) throw ArgumentError("graded_breakpoints: empty interval");
  focus = std::clamp(focus, a, b);
  scale = std::max(scale, 0.0);
  std::vector<double> bp{a};
  // Left side, graded toward focus.
  if (focus > a) {
    double d = focus - a;
    int level = 0;
    while (d > scale && level < max_levels) {
      d *= 0.5;
      bp.push_back(focus - d);
      ++level;
    }
    bp.push_back(focus);
  }
  if (focus < b) {
    std::vector<double> right;
    double d = b - focus;
    int level = 0;
    while (d > scale && level < max_levels) {
      d *= 0.5;
      right.push_back(focus + d);
      ++level;
    }
    bp.insert(bp.end(), right.rbegin(), right.rend());
    bp.push_back(b);
  }
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
  return bp;
}

const Rule& gauss_legendre(int n) {
  static std::mutex mu;
  static std::map<int, Rule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  if (n < 1) throw ArgumentError("gauss_legendre: order must be positive");
  Rule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    r.nodes[i] = x;
    r.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return cache.emplace(n, std::move(r)).first->second;
}

double composite_gauss(const Integrand& f, double a, double b, int segments, int order) {
  const Rule& rule = gauss_legendre(order);
  const double h = (b - a) / segments;
  double sum = 0.0;
  for (int s = 0; s < segments; ++s) {
    const double c = a + (s + 0.5) * h;
    double part = 0.0;
    for (int i = 0; i < order; ++i) part += rule.weights[i] * f(c + 0.5 * h * rule.nodes[i]);
    sum += 0.5 * h * part;
  }
  return sum;
}

namespace {

// Integral over [lo, hi] of the cubic through (xs[k], ys[k]), k = 0..3.
double cubic_piece(const double* xs, const double* ys, double lo, double hi) {
  // Gauss-Legendre 2-point is exact for cubics.
  const double c = 0.5 * (lo + hi);
  const double h = 0.5 * (hi - lo);
  const double g = h / std::sqrt(3.0);
  auto lag = [&](double t) {
    double s = 0.0;
    for (int i = 0; i < 4; ++i) {
      double l = 1.0;
      for (int j = 0; j < 4; ++j)
        if (j != i) l *= (t - xs[j]) / (xs[i] - xs[j]);
      s += ys[i] * l;
    }
    return s;
  };
  return h * (lag(c - g) + lag(c + g));
}

}  // namespace

std::vector<double> cumulative_integral(std::span<const double> ts, std::span<const double> ys, double start) {
  const std::size_t n = ts.size();
  if (n != ys.size()) throw ArgumentError("cumulative_integral: size mismatch");
  if (n < 4) throw ArgumentError("cumulative_integral: need at least four samples");
  for (std::size_t i = 1; i < n; ++i)
    if (!(ts[i] > ts[i - 1])) throw ArgumentError("cumulative_integral: abscissae must increase");
  std::vector<double> out(n);
  out[0] = cubic_piece(ts.data(), ys.data(), start, ts[0]);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    std::size_t first = (i == 0) ? 0 : i - 1;
    if (first + 4 > n) first = n - 4;
    out[i + 1] = out[i] + cubic_piece(ts.data() + first, ys.data() + first, ts[i], ts[i + 1]);
  }
  return out;
}

double interpolate_cubic(std::span<const double> ts, std::span<const double> ys, double t) {
  const std::size_t n = ts.size();
  if (n < 4 || ys.size() != n) throw ArgumentError("interpolate_cubic: need four or more samples");
  t = std::clamp(t, ts.front(), ts.back());
  std::size_t hi = static_cast<std::size_t>(std::upper_bound(ts.begin(), ts.end(), t) - ts.begin());
  std::size_t first = hi >= 2 ? hi - 2 : 0;
  if (first + 4 > n) first = n - 4;
  double s = 0.0;
  for (std::size_t i = first; i < first + 4; ++i) {
    double l = 1.0;
    for (std::size_t j = first; j < first + 4; ++j)
      if (j != i) l *= (t - ts[j]) / (ts[i] - ts[j]);
    s += ys[i] * l;
  }
  return s;
}

}  // namespace qpat::quad
