// Copyright 2026 The DGRL Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dgrl/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dgrl/error.hpp"

namespace dgrl::linalg {

ComplexDense ComplexDense::identity(std::size_t n) {
  ComplexDense m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.re[i * n + i] = 1.0;
  return m;
}

ComplexDense multiply(const ComplexDense& a, const ComplexDense& b) {
  if (a.cols != b.rows) fail(ErrorCode::kShapeMismatch, "complex multiply inner dimensions differ");
  ComplexDense c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double ar = a.re[i * a.cols + k];
      const double ai = a.im[i * a.cols + k];
      if (ar == 0.0 && ai == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) {
        const double br = b.re[k * b.cols + j];
        const double bi = b.im[k * b.cols + j];
        c.re[i * c.cols + j] += ar * br - ai * bi;
        c.im[i * c.cols + j] += ar * bi + ai * br;
      }
    }
  }
  return c;
}

ComplexDense conjugate_transpose(const ComplexDense& a) {
  ComplexDense t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < a.cols; ++j) {
      t.re[j * t.cols + i] = a.re[i * a.cols + j];
      t.im[j * t.cols + i] = -a.im[i * a.cols + j];
    }
  }
  return t;
}

ComplexDense subtract(const ComplexDense& a, const ComplexDense& b) {
  if (a.rows != b.rows || a.cols != b.cols) fail(ErrorCode::kShapeMismatch, "complex subtract shapes differ");
  ComplexDense c(a.rows, a.cols);
  for (std::size_t i = 0; i < a.re.size(); ++i) {
    c.re[i] = a.re[i] - b.re[i];
    c.im[i] = a.im[i] - b.im[i];
  }
  return c;
}

double max_abs(const ComplexDense& a) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.re.size(); ++i) m = std::max(m, std::hypot(a.re[i], a.im[i]));
  return m;
}

double frobenius_norm(const ComplexDense& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.re.size(); ++i) s += a.re[i] * a.re[i] + a.im[i] * a.im[i];
  return std::sqrt(s);
}

double hermitian_residual(const ComplexDense& m) {
  if (m.rows != m.cols) {
    fail(ErrorCode::kNotSquare, std::to_string(m.rows) + "x" + std::to_string(m.cols) + " matrix");
  }
  double r = 0.0;
  const std::size_t n = m.rows;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double dr = m.re[i * n + j] - m.re[j * n + i];
      const double di = m.im[i * n + j] + m.im[j * n + i];
      r = std::max(r, std::hypot(dr, di));
    }
  }
  return r;
}

SymmetricEigen jacobi_eigen_symmetric(std::vector<double> a, std::size_t n, int max_sweeps) {
  if (a.size() != n * n) fail(ErrorCode::kShapeMismatch, "jacobi input is not n x n");
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

  double norm = 0.0;
  for (double x : a) norm += x * x;
  norm = std::sqrt(norm);
  const double target = 1e-12 * norm;

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j) s += a[i * n + j] * a[i * n + j];
      }
    }
    return std::sqrt(s);
  };

  bool converged = false;
  for (int sweep = 0; sweep <= max_sweeps; ++sweep) {
    if (off_norm() <= target) {
      converged = true;
      break;
    }
    if (sweep == max_sweeps) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double app = a[p * n + p];
        const double aqq = a[q * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p];
          const double akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k];
          const double aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        a[p * n + q] = 0.0;
        a[q * n + p] = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p];
          const double vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }
  if (!converged) {
    fail(ErrorCode::kConvergenceFailure, "Jacobi did not converge within " + std::to_string(max_sweeps) + " sweeps");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a[i * n + i] < a[j * n + j]; });
  SymmetricEigen out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n * n);
  for (std::size_t j = 0; j < n; ++j) {
    out.eigenvalues[j] = a[order[j] * n + order[j]];
    for (std::size_t k = 0; k < n; ++k) out.eigenvectors[k * n + j] = v[k * n + order[j]];
  }
  return out;
}

void normalize_column_phase(ComplexDense& v, std::size_t j) {
  double best = 0.0;
  for (std::size_t r = 0; r < v.rows; ++r) best = std::max(best, std::abs(v.at(r, j)));
  if (best == 0.0) return;
  std::size_t pivot = 0;
  for (std::size_t r = 0; r < v.rows; ++r) {
    if (std::abs(v.at(r, j)) >= best * (1.0 - 1e-12)) {
      pivot = r;
      break;
    }
  }
  const Complex p = v.at(pivot, j);
  const Complex rot = std::conj(p) / std::abs(p);
  for (std::size_t r = 0; r < v.rows; ++r) v.set(r, j, v.at(r, j) * rot);
  v.im[pivot * v.cols + j] = 0.0;
}

namespace {

using CVec = std::vector<Complex>;

Complex dot(const CVec& a, const CVec& b) {  // a^dagger b
  Complex s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

double norm2(const CVec& a) { return std::sqrt(std::real(dot(a, a))); }

// Picks k orthonormal complex vectors spanning the candidates, largest
// residual first.
std::vector<CVec> pivoted_gram_schmidt(std::vector<CVec> candidates, std::size_t k) {
  std::vector<CVec> basis;
  std::vector<bool> used(candidates.size(), false);
  while (basis.size() < k) {
    std::size_t pick = candidates.size();
    double best = -1.0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (used[c]) continue;
      const double r = norm2(candidates[c]);
      if (r > best) {
        best = r;
        pick = c;
      }
    }
    if (pick == candidates.size() || best <= 1e-6) {
      fail(ErrorCode::kConvergenceFailure, "degenerate eigenspace reconstruction lost rank");
    }
    used[pick] = true;
    CVec q = candidates[pick];
    // Re-orthogonalize once more for stability.
    for (const auto& b : basis) {
      const Complex proj = dot(b, q);
      for (std::size_t i = 0; i < q.size(); ++i) q[i] -= proj * b[i];
    }
    const double nq = norm2(q);
    for (auto& x : q) x /= nq;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (used[c]) continue;
      const Complex proj = dot(q, candidates[c]);
      for (std::size_t i = 0; i < q.size(); ++i) candidates[c][i] -= proj * q[i];
    }
    basis.push_back(std::move(q));
  }
  return basis;
}

}  // namespace

EigenDecomposition eig_hermitian(const ComplexDense& m) {
  const double residual = hermitian_residual(m);
  if (!(residual < 1e-8)) {
    fail(ErrorCode::kNotHermitian, "hermitian residual " + std::to_string(residual));
  }
  const std::size_t n = m.rows;
  EigenDecomposition dec;
  dec.eigenvectors = ComplexDense(n, n);
  if (n == 0) return dec;

  // Symmetric embedding of the Hermitian part.
  const std::size_t n2 = 2 * n;
  std::vector<double> s(n2 * n2, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double hr = 0.5 * (m.re[i * n + j] + m.re[j * n + i]);
      const double hi = 0.5 * (m.im[i * n + j] - m.im[j * n + i]);
      s[i * n2 + j] = hr;
      s[(i + n) * n2 + (j + n)] = hr;
      s[i * n2 + (j + n)] = -hi;
      s[(i + n) * n2 + j] = hi;
    }
  }
  const SymmetricEigen real = jacobi_eigen_symmetric(std::move(s), n2);

  double scale = 1.0;
  for (double lam : real.eigenvalues) scale = std::max(scale, std::abs(lam));
  const double tol = 1e-9 * scale;

  struct Pair {
    double value;
    CVec vec;
  };
  std::vector<Pair> pairs;
  std::size_t start = 0;
  while (start < n2) {
    std::size_t end = start + 1;
    while (end < n2 && real.eigenvalues[end] - real.eigenvalues[end - 1] <= tol) ++end;
    const std::size_t size = end - start;
    if (size % 2 != 0) {
      fail(ErrorCode::kConvergenceFailure, "real embedding produced an unpaired eigenvalue cluster");
    }
    std::vector<CVec> candidates;
    for (std::size_t c = start; c < end; ++c) {
      CVec v(n);
      for (std::size_t r = 0; r < n; ++r) {
        v[r] = Complex(real.eigenvectors[r * n2 + c], real.eigenvectors[(r + n) * n2 + c]);
      }
      candidates.push_back(std::move(v));
    }
    for (auto& v : pivoted_gram_schmidt(std::move(candidates), size / 2)) {
      // Rayleigh quotient v^dagger M v is real for Hermitian M.
      double rq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        Complex mv = 0.0;
        for (std::size_t j = 0; j < n; ++j) mv += m.at(i, j) * v[j];
        rq += std::real(std::conj(v[i]) * mv);
      }
      pairs.push_back({rq, std::move(v)});
    }
    start = end;
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.value < b.value; });

  dec.eigenvalues.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    dec.eigenvalues[j] = pairs[j].value;
    for (std::size_t r = 0; r < n; ++r) dec.eigenvectors.set(r, j, pairs[j].vec[r]);
    normalize_column_phase(dec.eigenvectors, j);
  }
  return dec;
}

EigenDecomposition smallest_d(const EigenDecomposition& dec, std::size_t d) {
  const std::size_t n = dec.eigenvectors.rows;
  const std::size_t kept = std::min(d, dec.eigenvalues.size());
  EigenDecomposition out;
  out.eigenvalues.assign(d, 0.0);
  out.eigenvectors = ComplexDense(n, d);
  for (std::size_t j = 0; j < kept; ++j) {
    out.eigenvalues[j] = dec.eigenvalues[j];
    for (std::size_t r = 0; r < n; ++r) out.eigenvectors.set(r, j, dec.eigenvectors.at(r, j));
  }
  const std::size_t real_pairs = dec.eigenvalues.size() - dec.pad_count;
  out.pad_count = (kept > real_pairs ? kept - real_pairs : 0) + (d - kept);
  return out;
}

}  // namespace dgrl::linalg
