#include "solar/decomp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace solar {

namespace {

constexpr double kPivotTiny = 1e-300;

double col_dot(const Matrix &m, std::size_t a, std::size_t b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < m.rows; ++i) acc += m(i, a) * m(i, b);
  return acc;
}

}  // namespace

QrThin qr_thin(const Matrix &a) {
  if (a.rows < a.cols)
    throw std::invalid_argument("qr_thin: need rows >= cols, got " + a.shape_str());
  if (!is_finite(a)) throw std::invalid_argument("qr_thin: non-finite input");

  const std::size_t n = a.rows, k = a.cols;
  Matrix work = a;
  // Householder vectors, one per column, stored dense for simplicity.
  Matrix hh(n, k);
  std::vector<bool> active(k, false);
  int deficient = 0;

  for (std::size_t j = 0; j < k; ++j) {
    double normx = 0.0;
    for (std::size_t i = j; i < n; ++i) normx += work(i, j) * work(i, j);
    normx = std::sqrt(normx);
    if (normx <= kPivotTiny) {
      ++deficient;
      continue;  // reflector is the identity; R(j,j) stays 0
    }
    const double alpha = work(j, j) >= 0.0 ? -normx : normx;
    double vnorm2 = 0.0;
    hh(j, j) = work(j, j) - alpha;
    vnorm2 += hh(j, j) * hh(j, j);
    for (std::size_t i = j + 1; i < n; ++i) {
      hh(i, j) = work(i, j);
      vnorm2 += hh(i, j) * hh(i, j);
    }
    if (vnorm2 <= kPivotTiny) continue;  // column already reduced
    active[j] = true;
    const double inv = 2.0 / vnorm2;
    for (std::size_t c = j; c < k; ++c) {
      double proj = 0.0;
      for (std::size_t i = j; i < n; ++i) proj += hh(i, j) * work(i, c);
      proj *= inv;
      for (std::size_t i = j; i < n; ++i) work(i, c) -= proj * hh(i, j);
    }
  }

  QrThin out;
  out.deficient_cols = deficient;
  out.r = Matrix(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i; j < k; ++j) out.r(i, j) = work(i, j);

  // Q = H_0 ... H_{k-1} applied to the first k identity columns.
  out.q = Matrix(n, k);
  for (std::size_t j = 0; j < k; ++j) out.q(j, j) = 1.0;
  for (std::size_t j = k; j-- > 0;) {
    if (!active[j]) continue;
    double vnorm2 = 0.0;
    for (std::size_t i = j; i < n; ++i) vnorm2 += hh(i, j) * hh(i, j);
    const double inv = 2.0 / vnorm2;
    for (std::size_t c = 0; c < k; ++c) {
      double proj = 0.0;
      for (std::size_t i = j; i < n; ++i) proj += hh(i, j) * out.q(i, c);
      proj *= inv;
      for (std::size_t i = j; i < n; ++i) out.q(i, c) -= proj * hh(i, j);
    }
  }

  // Nonnegative diagonal of R, compensated in Q.
  for (std::size_t j = 0; j < k; ++j) {
    if (out.r(j, j) < 0.0) {
      for (std::size_t c = j; c < k; ++c) out.r(j, c) = -out.r(j, c);
      for (std::size_t i = 0; i < n; ++i) out.q(i, j) = -out.q(i, j);
    }
  }
  return out;
}

SvdDense svd_dense(const Matrix &a) {
  if (!is_finite(a)) throw std::invalid_argument("svd_dense: non-finite input");

  // One-sided Jacobi orthogonalizes columns; run on the tall orientation.
  if (a.rows < a.cols) {
    SvdDense t = svd_dense(transpose(a));
    std::swap(t.u, t.v);
    // The sign convention tracks right vectors; reapply on the swapped V.
    const std::size_t k = t.s.size();
    for (std::size_t j = 0; j < k; ++j) {
      std::size_t arg = 0;
      double best = -1.0;
      for (std::size_t i = 0; i < t.v.rows; ++i) {
        const double m = std::fabs(t.v(i, j));
        if (m > best) { best = m; arg = i; }
      }
      if (t.v(arg, j) < 0.0) {
        for (std::size_t i = 0; i < t.v.rows; ++i) t.v(i, j) = -t.v(i, j);
        for (std::size_t i = 0; i < t.u.rows; ++i) t.u(i, j) = -t.u(i, j);
      }
    }
    return t;
  }

  const std::size_t n = a.rows, m = a.cols;
  Matrix b = a;
  Matrix v = Matrix::identity(m);

  constexpr double kTol = 1e-15;
  constexpr int kMaxSweeps = 60;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < m; ++p) {
      for (std::size_t q = p + 1; q < m; ++q) {
        const double alpha = col_dot(b, p, p);
        const double beta = col_dot(b, q, q);
        const double gamma = col_dot(b, p, q);
        if (gamma == 0.0 || std::fabs(gamma) <= kTol * std::sqrt(alpha * beta))
          continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < n; ++i) {
          const double bp = b(i, p), bq = b(i, q);
          b(i, p) = c * bp - s * bq;
          b(i, q) = s * bp + c * bq;
        }
        for (std::size_t i = 0; i < m; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(m);
  for (std::size_t j = 0; j < m; ++j) sigma[j] = std::sqrt(col_dot(b, j, j));

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  SvdDense out;
  out.s.resize(m);
  out.u = Matrix(n, m);
  out.v = Matrix(m, m);
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t src = order[j];
    out.s[j] = sigma[src];
    for (std::size_t i = 0; i < m; ++i) out.v(i, j) = v(i, src);
    if (sigma[src] > 0.0) {
      for (std::size_t i = 0; i < n; ++i) out.u(i, j) = b(i, src) / sigma[src];
    }
  }

  // Orthonormal completion of U for zero singular values (they sort to the
  // tail): first canonical basis vector with a large residual against the
  // columns already in place.
  for (std::size_t j = 0; j < m; ++j) {
    if (out.s[j] > 0.0) continue;
    for (std::size_t e = 0; e < n; ++e) {
      std::vector<double> cand(n, 0.0);
      cand[e] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t c = 0; c < j; ++c) {
          double proj = 0.0;
          for (std::size_t i = 0; i < n; ++i) proj += cand[i] * out.u(i, c);
          for (std::size_t i = 0; i < n; ++i) cand[i] -= proj * out.u(i, c);
        }
      }
      double norm = 0.0;
      for (double x : cand) norm += x * x;
      norm = std::sqrt(norm);
      if (norm > 0.5) {
        for (std::size_t i = 0; i < n; ++i) out.u(i, j) = cand[i] / norm;
        break;
      }
    }
  }

  // Sign convention on right vectors.
  for (std::size_t j = 0; j < m; ++j) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double mag = std::fabs(out.v(i, j));
      if (mag > best) { best = mag; arg = i; }
    }
    if (out.v(arg, j) < 0.0) {
      for (std::size_t i = 0; i < m; ++i) out.v(i, j) = -out.v(i, j);
      for (std::size_t i = 0; i < n; ++i) out.u(i, j) = -out.u(i, j);
    }
  }
  return out;
}

}  // namespace solar
