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

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dgrl/autodiff.hpp"
#include "dgrl/graph.hpp"
#include "dgrl/linalg.hpp"
#include "dgrl/nn.hpp"

namespace dgrl::pe {

enum class PEMode { kNone, kNpe, kEpe };

std::string_view pe_mode_name(PEMode mode);
PEMode parse_pe_mode(std::string_view name);

struct PEConfig {
  PEMode mode = PEMode::kNone;
  /// Potential in [0, 1).
  double q = 0.1;
  /// Number of eigenpairs kept.
  std::size_t d = 8;
  /// EPE matrix-function channels.
  std::size_t m = 4;
  /// EPE output channels.
  std::size_t c = 8;

  /// Throws InvalidPotential or InvalidSpec.
  void validate() const;
  bool operator==(const PEConfig&) const = default;
};

inline constexpr std::size_t kDefaultPeNodeCap = 2000;

/// Smallest-d spectrum of the Magnetic Laplacian of one graph.
struct SpectralDecomposition {
  double q = 0.0;
  std::vector<double> eigenvalues;
  linalg::ComplexDense eigenvectors;  // n x d
  std::size_t pad_count = 0;

  bool operator==(const SpectralDecomposition& o) const {
    return q == o.q && eigenvalues == o.eigenvalues && eigenvectors.rows == o.eigenvectors.rows &&
           eigenvectors.cols == o.eigenvectors.cols && eigenvectors.re == o.eigenvectors.re &&
           eigenvectors.im == o.eigenvectors.im && pad_count == o.pad_count;
  }
};

/// [A_q]_{uv} = e^{i 2 pi q} for (u,v) in E only, e^{-i 2 pi q} for (v,u) in E
/// only, 1 for a reciprocal pair, 0 otherwise. Throws InvalidPotential.
linalg::ComplexDense magnetic_adjacency(const DirectedGraph& g, double q);

/// L_q = I - D^{-1/2} A_q D^{-1/2} with D counting in- plus out-degree.
/// Isolated nodes take D^{-1/2} = 0, leaving an identity row.
linalg::ComplexDense magnetic_laplacian(const DirectedGraph& g, double q);

/// Nonzero entries of D^{-1/2} A_q D^{-1/2} = I - L_q in edge-list form.
struct SparseComplex {
  std::size_t n = 0;
  std::vector<std::size_t> row;
  std::vector<std::size_t> col;
  std::vector<double> re;
  std::vector<double> im;
};
SparseComplex magnetic_propagation(const DirectedGraph& g, double q);

SpectralDecomposition compute_pe_basis(const DirectedGraph& g, double q, std::size_t d);

/// [Re V | Im V], n x 2d.
RealMatrix npe(const SpectralDecomposition& dec);

/// Constant operands of the EPE matrix functions for one graph:
/// re_outer[(u*n+v), i] = Re(V_ui conj(V_vi)) and likewise for im_outer, so that
/// Re{V diag(k) V^dagger} flattened equals re_outer * k.
struct EpeBasis {
  std::size_t n = 0;
  std::size_t d = 0;
  ad::Tensor re_outer;     // [n*n x d]
  ad::Tensor im_outer;     // [n*n x d]
  ad::Tensor eigenvalues;  // [d x 1]
};

/// Throws NodeCapExceeded when n > node_cap.
EpeBasis make_epe_basis(const SpectralDecomposition& dec, std::size_t node_cap = kDefaultPeNodeCap);

/// kappa: shared per-eigenvalue MLP 1 -> 16 -> 16 -> m; rho: per-pair MLP 2m -> 16 -> c.
class EPENetworks {
 public:
  EPENetworks() = default;
  EPENetworks(ad::ParamStore& store, const std::string& name, std::size_t m, std::size_t c);

  const nn::Mlp& kappa() const { return kappa_; }
  const nn::Mlp& rho() const { return rho_; }
  std::size_t m() const { return m_; }
  std::size_t c() const { return c_; }

 private:
  nn::Mlp kappa_;
  nn::Mlp rho_;
  std::size_t m_ = 0;
  std::size_t c_ = 0;
};

/// Dense pairwise encoding; row u*n+v of values holds the c channels of (u,v).
struct EpeTensor {
  std::size_t n = 0;
  std::size_t c = 0;
  ad::Tensor values;  // [n*n x c]
};

/// Stacks (Re B_1..m, Im B_1..m) with B_l = V diag(K[:, l]) V^dagger for a
/// given [d x m] channel matrix K. Result is [n*n x 2m].
ad::Tensor epe_channels(const EpeBasis& basis, const ad::Tensor& kappa_values);

/// rho(epe_channels(basis, kappa(lambda))). Differentiable in the networks only.
EpeTensor epe(const EpeBasis& basis, const EPENetworks& nets);

/// Row k = epe[src_k, dst_k, :]. Throws ShapeMismatch.
ad::Tensor epe_edge_slice(const EpeTensor& epe, const DirectedGraph& g);

/// Per-head [n x n] attention bias from a [c x H] projection. Throws ShapeMismatch.
std::vector<ad::Tensor> epe_attn_bias(const EpeTensor& epe, const ad::Tensor& head_projection);

/// FNV-1a over node count and ordered edge list.
std::uint64_t graph_hash(const DirectedGraph& g);

/// Binary PE record: magic "DGPE", u32 version, u64 n, u64 d, f64 q,
/// u64 pad_count, then eigenvalues[d], Re V[n*d], Im V[n*d]; all little-endian.
void write_pe_record(const SpectralDecomposition& dec, std::ostream& out);
SpectralDecomposition read_pe_record(std::istream& in);

/// Directory of PE records keyed by (graph hash, q, d).
class PeCache {
 public:
  explicit PeCache(std::string dir);

  std::string path_for(std::uint64_t hash, double q, std::size_t d) const;
  std::optional<SpectralDecomposition> load(std::uint64_t hash, double q, std::size_t d) const;
  void store(std::uint64_t hash, const SpectralDecomposition& dec) const;
  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
};

/// compute_pe_basis with an optional read-through cache.
SpectralDecomposition cached_pe_basis(const DirectedGraph& g, double q, std::size_t d, const PeCache* cache);

}  // namespace dgrl::pe
