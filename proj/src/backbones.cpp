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

#include "dgrl/backbones.hpp"

#include <cmath>
#include <numeric>

#include "dgrl/error.hpp"

namespace dgrl {

std::string_view direction_name(DirectionKind kind) {
  switch (kind) {
    case DirectionKind::kPlane: return "plane";
    case DirectionKind::kDirected: return "directed";
    case DirectionKind::kBidirected: return "bidirected";
  }
  return "?";
}

DirectionKind parse_direction(std::string_view name) {
  if (name == "plane" || name == "pl") return DirectionKind::kPlane;
  if (name == "directed" || name == "di") return DirectionKind::kDirected;
  if (name == "bidirected" || name == "bi") return DirectionKind::kBidirected;
  fail(ErrorCode::kConfigError, "unknown direction '" + std::string(name) + "'");
}

std::string_view combine_name(Combine c) { return c == Combine::kMean ? "mean" : "sum"; }

Combine parse_combine(std::string_view name) {
  if (name == "mean") return Combine::kMean;
  if (name == "sum") return Combine::kSum;
  fail(ErrorCode::kConfigError, "unknown combine '" + std::string(name) + "'");
}

std::vector<MessageBranch> expand_direction(const std::vector<Edge>& edges, DirectionMode mode) {
  MessageBranch fwd;
  MessageBranch rev;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    fwd.src.push_back(edges[k].src);
    fwd.dst.push_back(edges[k].dst);
    fwd.edge_row.push_back(k);
    rev.src.push_back(edges[k].dst);
    rev.dst.push_back(edges[k].src);
    rev.edge_row.push_back(k);
  }
  switch (mode.kind) {
    case DirectionKind::kPlane: {
      fwd.tag = BranchTag::kShared;
      fwd.src.insert(fwd.src.end(), rev.src.begin(), rev.src.end());
      fwd.dst.insert(fwd.dst.end(), rev.dst.begin(), rev.dst.end());
      fwd.edge_row.insert(fwd.edge_row.end(), rev.edge_row.begin(), rev.edge_row.end());
      return {std::move(fwd)};
    }
    case DirectionKind::kDirected:
      fwd.tag = BranchTag::kForward;
      return {std::move(fwd)};
    case DirectionKind::kBidirected:
      fwd.tag = BranchTag::kForward;
      rev.tag = BranchTag::kReverse;
      return {std::move(fwd), std::move(rev)};
  }
  return {};
}

std::vector<MessageBranch> expand_direction(const DirectedGraph& g, DirectionMode mode) {
  return expand_direction(g.edges(), mode);
}

GraphBatch make_batch(const std::vector<const PreparedGraph*>& graphs, const BatchOptions& options) {
  GraphBatch b;
  b.graphs = graphs;
  b.node_offset.push_back(0);
  b.edge_offset.push_back(0);
  std::size_t feat = 0;
  std::size_t efeat = 0;
  bool has_edge = false;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const DirectedGraph& g = *graphs[gi]->graph;
    if (gi == 0) {
      feat = g.node_features().cols;
      has_edge = g.edge_features().has_value();
      if (has_edge) efeat = g.edge_features()->cols;
    } else {
      if (g.node_features().cols != feat) fail(ErrorCode::kShapeMismatch, "batch: node feature widths differ");
      if (g.edge_features().has_value() != has_edge || (has_edge && g.edge_features()->cols != efeat)) {
        fail(ErrorCode::kShapeMismatch, "batch: edge feature layouts differ");
      }
    }
    b.node_offset.push_back(b.node_offset.back() + g.num_nodes());
    b.edge_offset.push_back(b.edge_offset.back() + g.num_edges());
  }
  b.num_nodes = b.node_offset.back();

  std::size_t pe_cols = 0;
  if (options.append_npe) {
    for (const PreparedGraph* p : graphs) {
      if (!p->spectrum) fail(ErrorCode::kShapeMismatch, "batch: NPE requested but a graph has no spectrum");
    }
    if (!graphs.empty()) pe_cols = 2 * graphs.front()->spectrum->eigenvalues.size();
  }
  const std::size_t width = feat + pe_cols;
  std::vector<double> x(b.num_nodes * width, 0.0);
  std::vector<double> ea;
  if (has_edge) ea.reserve(b.edge_offset.back() * efeat);
  if (options.with_magnetic) b.magnetic.emplace();

  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const PreparedGraph& p = *graphs[gi];
    const DirectedGraph& g = *p.graph;
    const std::size_t off = b.node_offset[gi];
    RealMatrix pe_mat;
    if (pe_cols) {
      pe_mat = pe::npe(*p.spectrum);
      if (pe_mat.cols != pe_cols) fail(ErrorCode::kShapeMismatch, "batch: NPE widths differ");
    }
    for (std::size_t i = 0; i < g.num_nodes(); ++i) {
      double* row = &x[(off + i) * width];
      for (std::size_t c = 0; c < feat; ++c) row[c] = g.node_features()(i, c);
      for (std::size_t c = 0; c < pe_cols; ++c) row[feat + c] = pe_mat(i, c);
      b.node_graph.push_back(gi);
    }
    for (const Edge& e : g.edges()) b.edges.push_back({e.src + off, e.dst + off});
    if (has_edge) ea.insert(ea.end(), g.edge_features()->data.begin(), g.edge_features()->data.end());
    if (options.with_magnetic) {
      if (!p.magnetic) fail(ErrorCode::kShapeMismatch, "batch: MagNet propagation missing");
      auto& m = *b.magnetic;
      for (std::size_t k = 0; k < p.magnetic->row.size(); ++k) {
        m.row.push_back(p.magnetic->row[k] + off);
        m.col.push_back(p.magnetic->col[k] + off);
        m.re.push_back(p.magnetic->re[k]);
        m.im.push_back(p.magnetic->im[k]);
      }
    }
  }
  if (b.magnetic) b.magnetic->n = b.num_nodes;
  b.x = ad::Tensor::constant(b.num_nodes, width, std::move(x));
  if (has_edge) b.edge_features = ad::Tensor::constant(b.edges.size(), efeat, std::move(ea));
  return b;
}

ad::Tensor combine_branches(const std::vector<ad::Tensor>& outputs, DirectionMode mode) {
  if (outputs.size() == 1) return outputs.front();
  ad::Tensor total = ad::add(outputs[0], outputs[1]);
  return mode.combine == Combine::kMean ? ad::scale(total, 0.5) : total;
}

namespace {

const GraphBatch& batch_of(const LayerInput& in) {
  if (!in.batch) fail(ErrorCode::kShapeMismatch, "layer input without a batch");
  return *in.batch;
}

ad::Tensor edge_rows(const LayerInput& in, const MessageBranch& b) {
  if (!in.edge_attr) fail(ErrorCode::kShapeMismatch, "layer expects edge features");
  return ad::gather_rows(*in.edge_attr, b.edge_row);
}

std::string set_name(const std::string& name, DirectionMode mode, std::size_t set) {
  if (mode.kind != DirectionKind::kBidirected) return name + (mode.kind == DirectionKind::kPlane ? ".shared" : ".fwd");
  return name + (set == 0 ? ".fwd" : ".rev");
}

}  // namespace

GinLayer::GinLayer(ad::ParamStore& store, const std::string& name, DirectionMode mode, std::size_t hidden,
                   std::size_t edge_dim)
    : mode_(mode) {
  for (std::size_t s = 0; s < mode.num_param_sets(); ++s) {
    const std::string base = set_name(name, mode, s);
    message_.emplace_back(store, base + ".msg", hidden, hidden, false);
    if (edge_dim > 0) edge_proj_.emplace_back(store, base + ".edge", edge_dim, hidden, true);
  }
  mlp_ = nn::Mlp(store, name + ".mlp", {hidden, hidden, hidden});
}

ad::Tensor GinLayer::forward(const LayerInput& in, const nn::ForwardContext& ctx) const {
  const GraphBatch& batch = batch_of(in);
  std::vector<ad::Tensor> aggs;
  for (const MessageBranch& b : expand_direction(batch.edges, mode_)) {
    const std::size_t s = b.param_set();
    ad::Tensor msg = message_[s](ad::gather_rows(in.x, b.src));
    if (uses_edges()) msg = ad::relu(ad::add(msg, edge_proj_[s](edge_rows(in, b))));
    aggs.push_back(ad::scatter_add_rows(msg, b.dst, in.x.rows()));
  }
  return mlp_.forward(ad::add(in.x, combine_branches(aggs, mode_)), ctx);
}

GcnLayer::GcnLayer(ad::ParamStore& store, const std::string& name, DirectionMode mode, std::size_t in,
                   std::size_t out, std::size_t edge_dim)
    : mode_(mode) {
  for (std::size_t s = 0; s < mode.num_param_sets(); ++s) {
    const std::string base = set_name(name, mode, s);
    theta_.emplace_back(store, base + ".theta", in, out, false);
    if (edge_dim > 0) edge_weight_.emplace_back(store, base + ".edge_weight", edge_dim, 1, true);
  }
}

ad::Tensor GcnLayer::branch(const LayerInput& in, const MessageBranch& b, const ad::Tensor& weights) const {
  const std::size_t n = in.x.rows();
  const ad::Tensor deg = ad::add(ad::scatter_add_rows(weights, b.dst, n), ad::Tensor::scalar(1.0));
  const ad::Tensor dinv = ad::pow(deg, -0.5);
  const ad::Tensor norm = ad::mul(ad::mul(ad::gather_rows(dinv, b.src), weights), ad::gather_rows(dinv, b.dst));
  const ad::Tensor msgs = ad::mul(ad::gather_rows(in.x, b.src), norm);
  const ad::Tensor self = ad::mul(in.x, ad::mul(dinv, dinv));
  return theta_[b.param_set()](ad::add(ad::scatter_add_rows(msgs, b.dst, n), self));
}

ad::Tensor GcnLayer::forward(const LayerInput& in, const nn::ForwardContext&) const {
  const GraphBatch& batch = batch_of(in);
  std::vector<ad::Tensor> outs;
  for (const MessageBranch& b : expand_direction(batch.edges, mode_)) {
    ad::Tensor w;
    if (!edge_weight_.empty()) {
      w = ad::sigmoid(edge_weight_[b.param_set()](edge_rows(in, b)));
    } else {
      w = ad::Tensor::constant(b.src.size(), 1, std::vector<double>(b.src.size(), 1.0));
    }
    outs.push_back(branch(in, b, w));
  }
  return combine_branches(outs, mode_);
}

ad::Tensor GcnLayer::forward_weighted(const LayerInput& in, const ad::Tensor& edge_weight) const {
  const GraphBatch& batch = batch_of(in);
  if (edge_weight.rows() != batch.edges.size() || edge_weight.cols() != 1) {
    fail(ErrorCode::kShapeMismatch, "gcn: edge weights must be [E x 1]");
  }
  std::vector<ad::Tensor> outs;
  for (const MessageBranch& b : expand_direction(batch.edges, mode_)) {
    outs.push_back(branch(in, b, ad::gather_rows(edge_weight, b.edge_row)));
  }
  return combine_branches(outs, mode_);
}

GatLayer::GatLayer(ad::ParamStore& store, const std::string& name, DirectionMode mode, std::size_t hidden,
                   std::size_t heads, std::size_t edge_dim)
    : mode_(mode), hidden_(hidden), heads_(heads) {
  if (heads == 0 || hidden % heads != 0) {
    fail(ErrorCode::kInvalidCombo, "gat: hidden_dim " + std::to_string(hidden) + " is not divisible by heads " +
                                       std::to_string(heads));
  }
  for (std::size_t s = 0; s < mode.num_param_sets(); ++s) {
    const std::string base = set_name(name, mode, s);
    GatParams p;
    p.theta_s = nn::Linear(store, base + ".theta_s", hidden, hidden, false);
    p.theta_t = nn::Linear(store, base + ".theta_t", hidden, hidden, false);
    p.a_s = store.add_weight(base + ".a_s", 1, hidden);
    p.a_t = store.add_weight(base + ".a_t", 1, hidden);
    if (edge_dim > 0) {
      p.theta_e = nn::Linear(store, base + ".theta_e", edge_dim, hidden, false);
      p.a_e = store.add_weight(base + ".a_e", 1, hidden);
    }
    params_.push_back(std::move(p));
  }
}

ad::Tensor GatLayer::branch(const LayerInput& in, const MessageBranch& b, std::vector<ad::Tensor>* alphas) const {
  const GatParams& p = params_[b.param_set()];
  const std::size_t n = in.x.rows();
  const std::size_t dh = hidden_ / heads_;

  std::vector<std::size_t> ext_src = b.src;
  std::vector<std::size_t> ext_dst = b.dst;
  for (std::size_t i = 0; i < n; ++i) {
    ext_src.push_back(i);
    ext_dst.push_back(i);
  }
  const ad::Tensor s = p.theta_s(in.x);
  const ad::Tensor t = p.theta_t(in.x);
  const ad::Tensor sa = ad::mul(s, p.a_s);
  const ad::Tensor ta = ad::mul(t, p.a_t);
  ad::Tensor ea;
  if (p.a_e.defined()) ea = ad::mul(p.theta_e(edge_rows(in, b)), p.a_e);

  std::vector<ad::Tensor> outs;
  for (std::size_t h = 0; h < heads_; ++h) {
    const std::size_t lo = h * dh;
    const std::size_t hi = lo + dh;
    ad::Tensor score = ad::add(ad::gather_rows(ad::sum(ad::slice_cols(sa, lo, hi), 1), ext_dst),
                               ad::gather_rows(ad::sum(ad::slice_cols(ta, lo, hi), 1), ext_src));
    if (ea.defined()) {
      score = ad::add(score, ad::concat({ad::sum(ad::slice_cols(ea, lo, hi), 1), ad::Tensor::zeros(n, 1)}, 0));
    }
    const ad::Tensor alpha = ad::segment_softmax(ad::leaky_relu(score, 0.2), ext_dst, n);
    if (alphas) alphas->push_back(alpha);
    const ad::Tensor values =
        ad::concat({ad::gather_rows(ad::slice_cols(t, lo, hi), b.src), ad::slice_cols(s, lo, hi)}, 0);
    outs.push_back(ad::scatter_add_rows(ad::mul(values, alpha), ext_dst, n));
  }
  return outs.size() == 1 ? outs.front() : ad::concat(outs, 1);
}

ad::Tensor GatLayer::forward(const LayerInput& in, const nn::ForwardContext&) const {
  const GraphBatch& batch = batch_of(in);
  std::vector<ad::Tensor> outs;
  for (const MessageBranch& b : expand_direction(batch.edges, mode_)) outs.push_back(branch(in, b, nullptr));
  return combine_branches(outs, mode_);
}

std::pair<std::vector<ad::Tensor>, std::vector<std::size_t>> GatLayer::attention(const LayerInput& in,
                                                                                 std::size_t branch_index) const {
  const GraphBatch& batch = batch_of(in);
  const auto branches = expand_direction(batch.edges, mode_);
  if (branch_index >= branches.size()) fail(ErrorCode::kIndexOutOfRange, "gat: no such branch");
  const MessageBranch& b = branches[branch_index];
  std::vector<ad::Tensor> alphas;
  branch(in, b, &alphas);
  std::vector<std::size_t> dst = b.dst;
  for (std::size_t i = 0; i < in.x.rows(); ++i) dst.push_back(i);
  return {std::move(alphas), std::move(dst)};
}

std::pair<ad::Tensor, ad::Tensor> complex_relu(const ad::Tensor& re, const ad::Tensor& im) {
  if (re.rows() != im.rows() || re.cols() != im.cols()) fail(ErrorCode::kShapeMismatch, "complex_relu: shapes differ");
  const auto& r = re.values();
  const auto& i = im.values();
  std::vector<double> mask(r.size());
  for (std::size_t k = 0; k < r.size(); ++k) mask[k] = (r[k] > 0.0 || (r[k] == 0.0 && i[k] < 0.0)) ? 1.0 : 0.0;
  return {ad::mask_mul(re, mask), ad::mask_mul(im, mask)};
}

MagnetLayer::MagnetLayer(ad::ParamStore& store, const std::string& name, std::size_t in, std::size_t out) {
  w_re_ = store.add_weight(name + ".weight_re", in, out);
  w_im_ = store.add_weight(name + ".weight_im", in, out);
  bias_ = store.add_bias(name + ".bias", out);
}

std::pair<ad::Tensor, ad::Tensor> MagnetLayer::forward(const pe::SparseComplex& prop, const ad::Tensor& re,
                                                       const ad::Tensor& im) const {
  const std::size_t n = re.rows();
  if (prop.n != n) fail(ErrorCode::kShapeMismatch, "magnet: propagation size differs from node count");
  const std::size_t nnz = prop.row.size();
  const ad::Tensor pre = ad::Tensor::constant(nnz, 1, prop.re);
  const ad::Tensor pim = ad::Tensor::constant(nnz, 1, prop.im);
  const ad::Tensor xr = ad::gather_rows(re, prop.col);
  const ad::Tensor xi = ad::gather_rows(im, prop.col);
  const ad::Tensor pr = ad::scatter_add_rows(ad::sub(ad::mul(xr, pre), ad::mul(xi, pim)), prop.row, n);
  const ad::Tensor pi = ad::scatter_add_rows(ad::add(ad::mul(xi, pre), ad::mul(xr, pim)), prop.row, n);
  const ad::Tensor zr = ad::add(ad::sub(ad::matmul(pr, w_re_), ad::matmul(pi, w_im_)), bias_);
  const ad::Tensor zi = ad::add(ad::add(ad::matmul(pr, w_im_), ad::matmul(pi, w_re_)), bias_);
  return complex_relu(zr, zi);
}

AttentionLayer::AttentionLayer(ad::ParamStore& store, const std::string& name, std::size_t hidden, std::size_t heads,
                               std::size_t node_cap)
    : hidden_(hidden), heads_(heads), node_cap_(node_cap) {
  if (heads == 0 || hidden % heads != 0) {
    fail(ErrorCode::kInvalidCombo, "attention: hidden_dim " + std::to_string(hidden) +
                                       " is not divisible by heads " + std::to_string(heads));
  }
  wq_ = nn::Linear(store, name + ".q", hidden, hidden);
  wk_ = nn::Linear(store, name + ".k", hidden, hidden);
  wv_ = nn::Linear(store, name + ".v", hidden, hidden);
  wo_ = nn::Linear(store, name + ".o", hidden, hidden);
}

std::vector<ad::Tensor> AttentionLayer::probabilities(const ad::Tensor& x, const std::vector<ad::Tensor>* bias) const {
  const std::size_t n = x.rows();
  if (n > node_cap_) {
    fail(ErrorCode::kNodeCapExceeded, "attention over " + std::to_string(n) + " nodes exceeds gps_node_cap " +
                                          std::to_string(node_cap_));
  }
  if (bias && bias->size() != heads_) fail(ErrorCode::kShapeMismatch, "attention: one bias per head expected");
  const std::size_t dh = hidden_ / heads_;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  const ad::Tensor q = wq_(x);
  const ad::Tensor k = wk_(x);
  std::vector<ad::Tensor> probs;
  for (std::size_t h = 0; h < heads_; ++h) {
    ad::Tensor logits =
        ad::scale(ad::matmul(ad::slice_cols(q, h * dh, (h + 1) * dh), ad::transpose(ad::slice_cols(k, h * dh, (h + 1) * dh))),
                  inv);
    if (bias) {
      const ad::Tensor& bh = (*bias)[h];
      if (bh.rows() != n || bh.cols() != n) fail(ErrorCode::kShapeMismatch, "attention: bias must be [n x n]");
      logits = ad::add(logits, bh);
    }
    probs.push_back(ad::softmax(logits, 1));
  }
  return probs;
}

ad::Tensor AttentionLayer::forward(const ad::Tensor& x, const std::vector<ad::Tensor>* bias) const {
  const std::size_t dh = hidden_ / heads_;
  const auto probs = probabilities(x, bias);
  const ad::Tensor v = wv_(x);
  std::vector<ad::Tensor> outs;
  for (std::size_t h = 0; h < heads_; ++h) outs.push_back(ad::matmul(probs[h], ad::slice_cols(v, h * dh, (h + 1) * dh)));
  return wo_(outs.size() == 1 ? outs.front() : ad::concat(outs, 1));
}

ad::Tensor batched_attention(const AttentionLayer& attn, const GraphBatch& batch, const ad::Tensor& x,
                             const std::vector<pe::EpeTensor>* epe, const ad::Tensor& bias_projection) {
  std::vector<ad::Tensor> parts;
  for (std::size_t gi = 0; gi < batch.num_graphs(); ++gi) {
    const std::size_t lo = batch.node_offset[gi];
    const std::size_t hi = batch.node_offset[gi + 1];
    if (hi == lo) continue;
    std::vector<std::size_t> idx(hi - lo);
    std::iota(idx.begin(), idx.end(), lo);
    const ad::Tensor xg = ad::gather_rows(x, std::move(idx));
    if (epe && bias_projection.defined()) {
      const auto bias = pe::epe_attn_bias((*epe)[gi], bias_projection);
      parts.push_back(attn.forward(xg, &bias));
    } else {
      parts.push_back(attn.forward(xg));
    }
  }
  if (parts.empty()) return ad::Tensor::zeros(0, x.cols());
  return parts.size() == 1 ? parts.front() : ad::concat(parts, 0);
}

GpsLayer::GpsLayer(ad::ParamStore& store, const std::string& name, DirectionMode mode, std::size_t hidden,
                   std::size_t heads, std::size_t edge_dim, std::size_t epe_channels, std::size_t node_cap) {
  mpnn_ = GinLayer(store, name + ".mpnn", mode, hidden, edge_dim);
  attn_ = AttentionLayer(store, name + ".attn", hidden, heads, node_cap);
  if (epe_channels > 0) bias_proj_ = store.add_weight(name + ".attn_bias", epe_channels, heads);
  mlp_ = nn::Mlp(store, name + ".mlp", {hidden, hidden, hidden});
}

ad::Tensor GpsLayer::forward(const LayerInput& in, const nn::ForwardContext& ctx) const {
  const GraphBatch& batch = batch_of(in);
  const ad::Tensor xm = mpnn_.forward(in, ctx);
  const ad::Tensor xt = batched_attention(attn_, batch, in.x, in.epe, bias_proj_);
  return mlp_.forward(ad::add(xm, xt), ctx);
}

}  // namespace dgrl
