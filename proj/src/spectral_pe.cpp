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

#include "dgrl/spectral_pe.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <utility>

#include "dgrl/error.hpp"

namespace dgrl::pe {

using linalg::Complex;
using linalg::ComplexDense;

std::string_view pe_mode_name(PEMode mode) {
  switch (mode) {
    case PEMode::kNone: return "none";
    case PEMode::kNpe: return "npe";
    case PEMode::kEpe: return "epe";
  }
  return "none";
}

PEMode parse_pe_mode(std::string_view name) {
  if (name == "none") return PEMode::kNone;
  if (name == "npe") return PEMode::kNpe;
  if (name == "epe") return PEMode::kEpe;
  fail(ErrorCode::kInvalidSpec, "unknown PE mode '" + std::string(name) + "'");
}

namespace {

void check_potential(double q) {
  if (!(q >= 0.0 && q < 1.0)) fail(ErrorCode::kInvalidPotential, "q = " + std::to_string(q) + " outside [0, 1)");
}

Complex phase(double q) {
  const double angle = 2.0 * std::numbers::pi * q;
  return {std::cos(angle), std::sin(angle)};
}

std::vector<double> inv_sqrt_degree(const DirectedGraph& g) {
  auto deg = degree_total(g);
  for (double& x : deg) x = x > 0.0 ? 1.0 / std::sqrt(x) : 0.0;
  return deg;
}

}  // namespace

void PEConfig::validate() const {
  check_potential(q);
  if (d < 1) fail(ErrorCode::kInvalidSpec, "PE eigenpair count d must be >= 1");
  if (m < 1) fail(ErrorCode::kInvalidSpec, "EPE channel count m must be >= 1");
  if (c < 1) fail(ErrorCode::kInvalidSpec, "EPE output channels c must be >= 1");
}

ComplexDense magnetic_adjacency(const DirectedGraph& g, double q) {
  check_potential(q);
  const std::size_t n = g.num_nodes();
  std::set<std::pair<std::size_t, std::size_t>> present;
  for (const Edge& e : g.edges()) present.emplace(e.src, e.dst);
  const Complex fwd = phase(q);
  ComplexDense a(n, n);
  for (const Edge& e : g.edges()) {
    if (e.src == e.dst) {
      a.set(e.src, e.dst, 1.0);
      continue;
    }
    if (present.count({e.dst, e.src}) != 0) {
      a.set(e.src, e.dst, 1.0);
      a.set(e.dst, e.src, 1.0);
    } else {
      a.set(e.src, e.dst, fwd);
      a.set(e.dst, e.src, std::conj(fwd));
    }
  }
  return a;
}

ComplexDense magnetic_laplacian(const DirectedGraph& g, double q) {
  ComplexDense l = magnetic_adjacency(g, q);
  const auto s = inv_sqrt_degree(g);
  const std::size_t n = g.num_nodes();
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      const double w = u < v ? s[u] * s[v] : s[v] * s[u];
      l.re[u * n + v] = -w * l.re[u * n + v];
      l.im[u * n + v] = -w * l.im[u * n + v];
    }
    l.re[u * n + u] += 1.0;
  }
  return l;
}

SparseComplex magnetic_propagation(const DirectedGraph& g, double q) {
  check_potential(q);
  const auto s = inv_sqrt_degree(g);
  std::set<std::pair<std::size_t, std::size_t>> present;
  for (const Edge& e : g.edges()) present.emplace(e.src, e.dst);
  const Complex fwd = phase(q);
  SparseComplex p;
  p.n = g.num_nodes();
  auto push = [&](std::size_t r, std::size_t c, Complex v) {
    const double w = r < c ? s[r] * s[c] : s[c] * s[r];
    p.row.push_back(r);
    p.col.push_back(c);
    p.re.push_back(w * v.real());
    p.im.push_back(w * v.imag());
  };
  for (const Edge& e : g.edges()) {
    if (e.src == e.dst) {
      push(e.src, e.dst, 1.0);
    } else if (present.count({e.dst, e.src}) != 0) {
      // Reciprocal pair: emitted once per direction, each with weight 1.
      push(e.src, e.dst, 1.0);
    } else {
      push(e.src, e.dst, fwd);
      push(e.dst, e.src, std::conj(fwd));
    }
  }
  return p;
}

SpectralDecomposition compute_pe_basis(const DirectedGraph& g, double q, std::size_t d) {
  if (d < 1) fail(ErrorCode::kInvalidSpec, "PE eigenpair count d must be >= 1");
  const auto full = linalg::eig_hermitian(magnetic_laplacian(g, q));
  auto kept = linalg::smallest_d(full, d);
  SpectralDecomposition dec;
  dec.q = q;
  dec.eigenvalues = std::move(kept.eigenvalues);
  dec.eigenvectors = std::move(kept.eigenvectors);
  dec.pad_count = kept.pad_count;
  return dec;
}

RealMatrix npe(const SpectralDecomposition& dec) {
  const auto& v = dec.eigenvectors;
  RealMatrix out(v.rows, 2 * v.cols);
  for (std::size_t r = 0; r < v.rows; ++r) {
    for (std::size_t j = 0; j < v.cols; ++j) {
      out(r, j) = v.re[r * v.cols + j];
      out(r, v.cols + j) = v.im[r * v.cols + j];
    }
  }
  return out;
}

EpeBasis make_epe_basis(const SpectralDecomposition& dec, std::size_t node_cap) {
  const auto& v = dec.eigenvectors;
  const std::size_t n = v.rows;
  const std::size_t d = v.cols;
  if (n > node_cap) {
    fail(ErrorCode::kNodeCapExceeded, "EPE on " + std::to_string(n) + " nodes exceeds pe_node_cap=" +
                                          std::to_string(node_cap));
  }
  std::vector<double> re(n * n * d), im(n * n * d);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t w = 0; w < n; ++w) {
      const std::size_t row = u * n + w;
      for (std::size_t i = 0; i < d; ++i) {
        const Complex prod = v.at(u, i) * std::conj(v.at(w, i));
        re[row * d + i] = prod.real();
        im[row * d + i] = prod.imag();
      }
    }
  }
  EpeBasis basis;
  basis.n = n;
  basis.d = d;
  basis.re_outer = ad::Tensor::constant(n * n, d, std::move(re));
  basis.im_outer = ad::Tensor::constant(n * n, d, std::move(im));
  basis.eigenvalues = ad::Tensor::constant(d, 1, dec.eigenvalues);
  return basis;
}

EPENetworks::EPENetworks(ad::ParamStore& store, const std::string& name, std::size_t m, std::size_t c)
    : kappa_(store, name + ".kappa", {1, 16, 16, m}), rho_(store, name + ".rho", {2 * m, 16, c}), m_(m), c_(c) {}

ad::Tensor epe_channels(const EpeBasis& basis, const ad::Tensor& kappa_values) {
  if (kappa_values.rows() != basis.d) {
    fail(ErrorCode::kShapeMismatch, "epe: kappa produced " + std::to_string(kappa_values.rows()) +
                                        " rows for d=" + std::to_string(basis.d));
  }
  return ad::concat({ad::matmul(basis.re_outer, kappa_values), ad::matmul(basis.im_outer, kappa_values)}, 1);
}

EpeTensor epe(const EpeBasis& basis, const EPENetworks& nets) {
  const nn::ForwardContext eval;
  const ad::Tensor k = nets.kappa().forward(basis.eigenvalues, eval);
  EpeTensor out;
  out.n = basis.n;
  out.c = nets.c();
  out.values = nets.rho().forward(epe_channels(basis, k), eval);
  return out;
}

namespace {

void check_epe(const EpeTensor& epe, const char* op) {
  if (epe.c == 0 || !epe.values.defined() || epe.values.cols() != epe.c || epe.values.rows() != epe.n * epe.n) {
    fail(ErrorCode::kShapeMismatch, std::string(op) + ": EPE tensor is not [n*n x c] with c >= 1");
  }
}

}  // namespace

ad::Tensor epe_edge_slice(const EpeTensor& epe, const DirectedGraph& g) {
  check_epe(epe, "epe_edge_slice");
  if (epe.n != g.num_nodes()) {
    fail(ErrorCode::kShapeMismatch, "epe_edge_slice: EPE built for " + std::to_string(epe.n) + " nodes, graph has " +
                                        std::to_string(g.num_nodes()));
  }
  std::vector<std::size_t> rows;
  rows.reserve(g.num_edges());
  for (const Edge& e : g.edges()) rows.push_back(e.src * epe.n + e.dst);
  return ad::gather_rows(epe.values, std::move(rows));
}

std::vector<ad::Tensor> epe_attn_bias(const EpeTensor& epe, const ad::Tensor& head_projection) {
  check_epe(epe, "epe_attn_bias");
  if (head_projection.rows() != epe.c) {
    fail(ErrorCode::kShapeMismatch, "epe_attn_bias: projection has " + std::to_string(head_projection.rows()) +
                                        " rows, EPE has c=" + std::to_string(epe.c));
  }
  const ad::Tensor flat = ad::matmul(epe.values, head_projection);
  std::vector<ad::Tensor> heads;
  for (std::size_t h = 0; h < head_projection.cols(); ++h) {
    heads.push_back(ad::reshape(ad::slice_cols(flat, h, h + 1), epe.n, epe.n));
  }
  return heads;
}

std::uint64_t graph_hash(const DirectedGraph& g) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t x) {
    for (int b = 0; b < 8; ++b) {
      h ^= (x >> (8 * b)) & 0xFFu;
      h *= 1099511628211ULL;
    }
  };
  mix(g.num_nodes());
  for (const Edge& e : g.edges()) {
    mix(e.src);
    mix(e.dst);
  }
  return h;
}

static_assert(std::endian::native == std::endian::little, "PE records assume a little-endian host");

namespace {

constexpr char kMagic[4] = {'D', 'G', 'P', 'E'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) fail(ErrorCode::kParseError, "truncated PE record");
  return v;
}

}  // namespace

void write_pe_record(const SpectralDecomposition& dec, std::ostream& out) {
  const auto& v = dec.eigenvectors;
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, v.rows);
  put<std::uint64_t>(out, v.cols);
  put<double>(out, dec.q);
  put<std::uint64_t>(out, dec.pad_count);
  for (double x : dec.eigenvalues) put<double>(out, x);
  for (double x : v.re) put<double>(out, x);
  for (double x : v.im) put<double>(out, x);
}

SpectralDecomposition read_pe_record(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) fail(ErrorCode::kParseError, "not a PE record");
  if (get<std::uint32_t>(in) != kVersion) fail(ErrorCode::kParseError, "unsupported PE record version");
  const auto n = get<std::uint64_t>(in);
  const auto d = get<std::uint64_t>(in);
  SpectralDecomposition dec;
  dec.q = get<double>(in);
  dec.pad_count = get<std::uint64_t>(in);
  dec.eigenvalues.resize(d);
  for (auto& x : dec.eigenvalues) x = get<double>(in);
  dec.eigenvectors = ComplexDense(n, d);
  for (auto& x : dec.eigenvectors.re) x = get<double>(in);
  for (auto& x : dec.eigenvectors.im) x = get<double>(in);
  return dec;
}

PeCache::PeCache(std::string dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

std::string PeCache::path_for(std::uint64_t hash, double q, std::size_t d) const {
  char name[96];
  std::snprintf(name, sizeof(name), "%016llx_q%.17g_d%zu.bin", static_cast<unsigned long long>(hash), q, d);
  return (std::filesystem::path(dir_) / name).string();
}

std::optional<SpectralDecomposition> PeCache::load(std::uint64_t hash, double q, std::size_t d) const {
  std::ifstream in(path_for(hash, q, d), std::ios::binary);
  if (!in) return std::nullopt;
  return read_pe_record(in);
}

void PeCache::store(std::uint64_t hash, const SpectralDecomposition& dec) const {
  const std::string path = path_for(hash, dec.q, dec.eigenvalues.size());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) fail(ErrorCode::kIoError, "cannot write " + tmp);
    write_pe_record(dec, out);
  }
  std::filesystem::rename(tmp, path);
}

SpectralDecomposition cached_pe_basis(const DirectedGraph& g, double q, std::size_t d, const PeCache* cache) {
  if (!cache) return compute_pe_basis(g, q, d);
  const auto hash = graph_hash(g);
  if (auto hit = cache->load(hash, q, d)) {
    if (hit->eigenvectors.rows == g.num_nodes()) return *hit;
  }
  auto dec = compute_pe_basis(g, q, d);
  cache->store(hash, dec);
  return dec;
}

}  // namespace dgrl::pe
