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

#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace dgrl::linalg {

using Complex = std::complex<double>;

/// Row-major complex matrix stored as separate real and imaginary planes.
struct ComplexDense {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> re;
  std::vector<double> im;

  ComplexDense() = default;
  ComplexDense(std::size_t r, std::size_t c) : rows(r), cols(c), re(r * c, 0.0), im(r * c, 0.0) {}

  Complex at(std::size_t r, std::size_t c) const { return {re[r * cols + c], im[r * cols + c]}; }
  void set(std::size_t r, std::size_t c, Complex v) {
    re[r * cols + c] = v.real();
    im[r * cols + c] = v.imag();
  }

  static ComplexDense identity(std::size_t n);
};

ComplexDense multiply(const ComplexDense& a, const ComplexDense& b);
ComplexDense conjugate_transpose(const ComplexDense& a);
ComplexDense subtract(const ComplexDense& a, const ComplexDense& b);
double max_abs(const ComplexDense& a);
double frobenius_norm(const ComplexDense& a);

/// max |M - M^dagger| over entries. Throws NotSquare.
double hermitian_residual(const ComplexDense& m);

struct EigenDecomposition {
  /// Ascending.
  std::vector<double> eigenvalues;
  /// Column j pairs with eigenvalues[j].
  ComplexDense eigenvectors;
  /// Trailing zero eigenpairs added by smallest_d.
  std::size_t pad_count = 0;
};

struct SymmetricEigen {
  std::vector<double> eigenvalues;  // ascending
  std::vector<double> eigenvectors;  // row-major n x n, column j pairs with eigenvalue j
};

/// Cyclic Jacobi on a real symmetric row-major n x n matrix. Converges when the
/// off-diagonal Frobenius norm drops below 1e-12 * ||A||_F; throws
/// ConvergenceFailure after max_sweeps.
SymmetricEigen jacobi_eigen_symmetric(std::vector<double> a, std::size_t n, int max_sweeps = 100);

/// Eigendecomposition of a Hermitian matrix via its real 2n x 2n symmetric
/// embedding [[Re, -Im], [Im, Re]].
///
/// Columns are phase-normalized: each is rotated so that its largest-modulus
/// entry is real and positive (lowest index among ties). Throws NotSquare,
/// NotHermitian (residual >= 1e-8) or ConvergenceFailure.
EigenDecomposition eig_hermitian(const ComplexDense& m);

/// First min(d, n) eigenpairs; zero-padded up to d when n < d.
EigenDecomposition smallest_d(const EigenDecomposition& dec, std::size_t d);

/// Rotates column j so its largest-modulus entry is real positive.
void normalize_column_phase(ComplexDense& v, std::size_t j);

}  // namespace dgrl::linalg
