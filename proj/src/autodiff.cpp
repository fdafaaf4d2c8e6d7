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

#include "dgrl/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_set>

#include "dgrl/error.hpp"

namespace dgrl::ad {

namespace {
std::atomic<std::uint64_t> g_next_id{1};
}  // namespace

using BackwardFn =
    std::function<void(const Node& self, const std::vector<double>& gout, std::vector<std::vector<double>*>& gin)>;

struct Node {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> value;
  bool requires_grad = false;
  std::uint64_t id = 0;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward_fn;

  bool recorded() const { return static_cast<bool>(backward_fn); }
  const std::vector<double>& in(std::size_t i) const { return inputs[i]->value; }
};

struct OpBuilder {
  static Tensor make(const char* op, std::size_t rows, std::size_t cols, std::vector<double> value,
                     std::initializer_list<const Tensor*> inputs, BackwardFn fn) {
    auto node = std::make_shared<Node>();
    node->rows = rows;
    node->cols = cols;
    node->value = std::move(value);
    node->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
    node->op = op;
    bool any = false;
    for (const Tensor* t : inputs) any = any || t->node_->requires_grad;
    if (any) {
      node->requires_grad = true;
      for (const Tensor* t : inputs) node->inputs.push_back(t->node_);
      node->backward_fn = std::move(fn);
    }
    return Tensor(std::move(node));
  }

  static Tensor make_n(const char* op, std::size_t rows, std::size_t cols, std::vector<double> value,
                       const std::vector<Tensor>& inputs, BackwardFn fn) {
    auto node = std::make_shared<Node>();
    node->rows = rows;
    node->cols = cols;
    node->value = std::move(value);
    node->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
    node->op = op;
    bool any = false;
    for (const Tensor& t : inputs) any = any || t.node_->requires_grad;
    if (any) {
      node->requires_grad = true;
      for (const Tensor& t : inputs) node->inputs.push_back(t.node_);
      node->backward_fn = std::move(fn);
    }
    return Tensor(std::move(node));
  }

  static const Node& node(const Tensor& t) { return *t.node_; }
};

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  fail(ErrorCode::kShapeMismatch, std::string(op) + ": [" + std::to_string(a.rows()) + "x" +
                                      std::to_string(a.cols()) + "] vs [" + std::to_string(b.rows()) + "x" +
                                      std::to_string(b.cols()) + "]");
}

void require_defined(const char* op, const Tensor& t) {
  if (!t.defined()) fail(ErrorCode::kShapeMismatch, std::string(op) + ": undefined tensor");
}

enum class Broadcast { kSame, kRow, kCol, kScalar };

Broadcast classify(const char* op, const Tensor& a, const Tensor& b, bool allow_col) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::kSame;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::kScalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::kRow;
  if (allow_col && b.cols() == 1 && b.rows() == a.rows()) return Broadcast::kCol;
  shape_error(op, a, b);
}

inline std::size_t bindex(Broadcast kind, std::size_t r, std::size_t c, std::size_t cols) {
  switch (kind) {
    case Broadcast::kSame: return r * cols + c;
    case Broadcast::kRow: return c;
    case Broadcast::kCol: return r;
    case Broadcast::kScalar: return 0;
  }
  return 0;
}

// Group layout for axis-wise ops: `groups` groups of `len` entries at `stride`.
struct AxisLayout {
  std::size_t groups, len, stride, group_step;
};

AxisLayout layout(const char* op, std::size_t rows, std::size_t cols, int axis) {
  if (axis == 1) return {rows, cols, 1, cols};
  if (axis == 0) return {cols, rows, cols, 1};
  fail(ErrorCode::kShapeMismatch, std::string(op) + ": axis must be 0 or 1");
}

}  // namespace

Tensor Tensor::constant(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return leaf(rows, cols, std::move(values), false);
}

Tensor Tensor::constant(const RealMatrix& m) { return constant(m.rows, m.cols, m.data); }

Tensor Tensor::zeros(std::size_t rows, std::size_t cols) {
  return constant(rows, cols, std::vector<double>(rows * cols, 0.0));
}

Tensor Tensor::scalar(double v) { return constant(1, 1, {v}); }

Tensor Tensor::leaf(std::size_t rows, std::size_t cols, std::vector<double> values, bool requires_grad) {
  if (values.size() != rows * cols) {
    fail(ErrorCode::kShapeMismatch, "tensor: " + std::to_string(values.size()) + " values for [" +
                                        std::to_string(rows) + "x" + std::to_string(cols) + "]");
  }
  auto node = std::make_shared<Node>();
  node->rows = rows;
  node->cols = cols;
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  node->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  return Tensor(std::move(node));
}

std::size_t Tensor::rows() const { return node_->rows; }
std::size_t Tensor::cols() const { return node_->cols; }
std::size_t Tensor::size() const { return node_->value.size(); }
const std::vector<double>& Tensor::values() const { return node_->value; }
double Tensor::operator()(std::size_t r, std::size_t c) const { return node_->value[r * node_->cols + c]; }
double Tensor::item() const {
  if (size() != 1) fail(ErrorCode::kShapeMismatch, "item: tensor is not a scalar");
  return node_->value[0];
}
bool Tensor::requires_grad() const { return node_->requires_grad; }
bool Tensor::is_leaf() const { return !node_->recorded(); }
std::uint64_t Tensor::id() const { return node_->id; }
std::string_view Tensor::op() const { return node_->op; }
RealMatrix Tensor::to_matrix() const { return RealMatrix(rows(), cols(), values()); }

std::vector<double>& Tensor::mutable_values() {
  if (!is_leaf()) fail(ErrorCode::kShapeMismatch, "mutable_values: tensor is not a leaf");
  return node_->value;
}

const std::vector<double>* Gradients::find(const Tensor& leaf) const {
  auto it = by_id_.find(leaf.id());
  return it == by_id_.end() ? nullptr : &it->second;
}

const std::vector<double>& Gradients::at(const Tensor& leaf) const {
  const auto* g = find(leaf);
  if (!g) fail(ErrorCode::kMissingGrad, "no gradient for tensor " + std::to_string(leaf.id()));
  return *g;
}

Gradients backward(const Tensor& root) {
  require_defined("backward", root);
  if (root.size() != 1) {
    fail(ErrorCode::kNonScalarRoot, "root has shape [" + std::to_string(root.rows()) + "x" +
                                        std::to_string(root.cols()) + "]");
  }
  Gradients result;
  if (!root.requires_grad()) return result;

  // Iterative post-order DFS over nodes that need gradients.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node_.get(), 0);
  visited.insert(root.node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  std::unordered_map<Node*, std::vector<double>> grads;
  grads[root.node_.get()] = {1.0};
  std::vector<std::vector<double>*> gin;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (!node->recorded()) continue;
    auto g = grads.find(node);
    if (g == grads.end()) continue;
    gin.assign(node->inputs.size(), nullptr);
    for (std::size_t i = 0; i < node->inputs.size(); ++i) {
      Node* in = node->inputs[i].get();
      if (!in->requires_grad) continue;
      auto& buf = grads[in];
      if (buf.empty()) buf.assign(in->value.size(), 0.0);
      gin[i] = &buf;
    }
    node->backward_fn(*node, g->second, gin);
  }
  for (Node* node : order) {
    if (node->recorded()) continue;
    auto g = grads.find(node);
    if (g != grads.end()) result.by_id_[node->id] = std::move(g->second);
  }
  return result;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined("matmul", a);
  require_defined("matmul", b);
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  std::vector<double> out(n * m, 0.0);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = out.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double x = av[i * k + p];
      if (x == 0.0) continue;
      const double* brow = bv.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += x * brow[j];
    }
  }
  return OpBuilder::make("matmul", n, m, std::move(out), {&a, &b},
                         [n, k, m](const Node& self, const std::vector<double>& g, auto& gin) {
                           const auto& av = self.in(0);
                           const auto& bv = self.in(1);
                           if (gin[0]) {
                             auto& ga = *gin[0];
                             for (std::size_t i = 0; i < n; ++i) {
                               for (std::size_t p = 0; p < k; ++p) {
                                 double s = 0.0;
                                 for (std::size_t j = 0; j < m; ++j) s += g[i * m + j] * bv[p * m + j];
                                 ga[i * k + p] += s;
                               }
                             }
                           }
                           if (gin[1]) {
                             auto& gb = *gin[1];
                             for (std::size_t i = 0; i < n; ++i) {
                               for (std::size_t p = 0; p < k; ++p) {
                                 const double x = av[i * k + p];
                                 if (x == 0.0) continue;
                                 for (std::size_t j = 0; j < m; ++j) gb[p * m + j] += x * g[i * m + j];
                               }
                             }
                           }
                         });
}

namespace {

Tensor add_like(const char* op, const Tensor& a, const Tensor& b, double sign) {
  require_defined(op, a);
  require_defined(op, b);
  const Broadcast kind = classify(op, a, b, false);
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(a.values());
  const auto& bv = b.values();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += sign * bv[bindex(kind, i, j, c)];
  }
  return OpBuilder::make(op, r, c, std::move(out), {&a, &b},
                         [kind, r, c, sign](const Node&, const std::vector<double>& g, auto& gin) {
                           if (gin[0]) {
                             for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
                           }
                           if (gin[1]) {
                             auto& gb = *gin[1];
                             for (std::size_t i = 0; i < r; ++i) {
                               for (std::size_t j = 0; j < c; ++j) gb[bindex(kind, i, j, c)] += sign * g[i * c + j];
                             }
                           }
                         });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return add_like("add", a, b, 1.0); }
Tensor sub(const Tensor& a, const Tensor& b) { return add_like("sub", a, b, -1.0); }

Tensor mul(const Tensor& a, const Tensor& b) {
  require_defined("mul", a);
  require_defined("mul", b);
  const Broadcast kind = classify("mul", a, b, true);
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(r * c);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = av[i * c + j] * bv[bindex(kind, i, j, c)];
  }
  return OpBuilder::make("mul", r, c, std::move(out), {&a, &b},
                         [kind, r, c](const Node& self, const std::vector<double>& g, auto& gin) {
                           const auto& av = self.in(0);
                           const auto& bv = self.in(1);
                           for (std::size_t i = 0; i < r; ++i) {
                             for (std::size_t j = 0; j < c; ++j) {
                               const std::size_t k = i * c + j;
                               const std::size_t kb = bindex(kind, i, j, c);
                               if (gin[0]) (*gin[0])[k] += g[k] * bv[kb];
                               if (gin[1]) (*gin[1])[kb] += g[k] * av[k];
                             }
                           }
                         });
}

Tensor scale(const Tensor& a, double s) {
  require_defined("scale", a);
  std::vector<double> out(a.values());
  for (double& x : out) x *= s;
  return OpBuilder::make("scale", a.rows(), a.cols(), std::move(out), {&a},
                         [s](const Node&, const std::vector<double>& g, auto& gin) {
                           for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += s * g[i];
                         });
}

namespace {

template <typename Fwd, typename Deriv>
Tensor unary(const char* op, const Tensor& a, Fwd fwd, Deriv deriv) {
  require_defined(op, a);
  std::vector<double> out(a.size());
  const auto& av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i]);
  return OpBuilder::make(op, a.rows(), a.cols(), std::move(out), {&a},
                         [deriv](const Node& self, const std::vector<double>& g, auto& gin) {
                           const auto& x = self.in(0);
                           for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] * deriv(x[i], self.value[i]);
                         });
}

}  // namespace

Tensor relu(const Tensor& a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary(
      "leaky_relu", a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      "sigmoid", a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor pow(const Tensor& a, double p) {
  return unary(
      "pow", a, [p](double x) { return std::pow(x, p); }, [p](double x, double) { return p * std::pow(x, p - 1.0); });
}

Tensor softmax(const Tensor& a, int axis) {
  require_defined("softmax", a);
  const AxisLayout L = layout("softmax", a.rows(), a.cols(), axis);
  std::vector<double> out(a.size());
  const auto& av = a.values();
  for (std::size_t gi = 0; gi < L.groups; ++gi) {
    const std::size_t base = gi * L.group_step;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < L.len; ++t) mx = std::max(mx, av[base + t * L.stride]);
    double z = 0.0;
    for (std::size_t t = 0; t < L.len; ++t) {
      const double e = std::exp(av[base + t * L.stride] - mx);
      out[base + t * L.stride] = e;
      z += e;
    }
    for (std::size_t t = 0; t < L.len; ++t) out[base + t * L.stride] /= z;
  }
  return OpBuilder::make("softmax", a.rows(), a.cols(), std::move(out), {&a},
                         [L](const Node& self, const std::vector<double>& g, auto& gin) {
                           const auto& y = self.value;
                           for (std::size_t gi = 0; gi < L.groups; ++gi) {
                             const std::size_t base = gi * L.group_step;
                             double dot = 0.0;
                             for (std::size_t t = 0; t < L.len; ++t) dot += g[base + t * L.stride] * y[base + t * L.stride];
                             for (std::size_t t = 0; t < L.len; ++t) {
                               const std::size_t k = base + t * L.stride;
                               (*gin[0])[k] += y[k] * (g[k] - dot);
                             }
                           }
                         });
}

Tensor log_softmax(const Tensor& a, int axis) {
  require_defined("log_softmax", a);
  const AxisLayout L = layout("log_softmax", a.rows(), a.cols(), axis);
  std::vector<double> out(a.size());
  const auto& av = a.values();
  for (std::size_t gi = 0; gi < L.groups; ++gi) {
    const std::size_t base = gi * L.group_step;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < L.len; ++t) mx = std::max(mx, av[base + t * L.stride]);
    double z = 0.0;
    for (std::size_t t = 0; t < L.len; ++t) z += std::exp(av[base + t * L.stride] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t t = 0; t < L.len; ++t) out[base + t * L.stride] = av[base + t * L.stride] - lse;
  }
  return OpBuilder::make("log_softmax", a.rows(), a.cols(), std::move(out), {&a},
                         [L](const Node& self, const std::vector<double>& g, auto& gin) {
                           const auto& y = self.value;
                           for (std::size_t gi = 0; gi < L.groups; ++gi) {
                             const std::size_t base = gi * L.group_step;
                             double gs = 0.0;
                             for (std::size_t t = 0; t < L.len; ++t) gs += g[base + t * L.stride];
                             for (std::size_t t = 0; t < L.len; ++t) {
                               const std::size_t k = base + t * L.stride;
                               (*gin[0])[k] += g[k] - std::exp(y[k]) * gs;
                             }
                           }
                         });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) fail(ErrorCode::kShapeMismatch, "concat: no inputs");
  for (const auto& p : parts) require_defined("concat", p);
  if (axis != 0 && axis != 1) fail(ErrorCode::kShapeMismatch, "concat: axis must be 0 or 1");
  std::vector<std::size_t> offsets;
  std::size_t rows = 0, cols = 0;
  if (axis == 0) {
    cols = parts[0].cols();
    for (const auto& p : parts) {
      if (p.cols() != cols) shape_error("concat", parts[0], p);
      offsets.push_back(rows);
      rows += p.rows();
    }
  } else {
    rows = parts[0].rows();
    for (const auto& p : parts) {
      if (p.rows() != rows) shape_error("concat", parts[0], p);
      offsets.push_back(cols);
      cols += p.cols();
    }
  }
  std::vector<double> out(rows * cols);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& pv = parts[i].values();
    const std::size_t pr = parts[i].rows(), pc = parts[i].cols();
    for (std::size_t r = 0; r < pr; ++r) {
      for (std::size_t c = 0; c < pc; ++c) {
        const std::size_t k = axis == 0 ? (offsets[i] + r) * cols + c : r * cols + offsets[i] + c;
        out[k] = pv[r * pc + c];
      }
    }
  }
  return OpBuilder::make_n("concat", rows, cols, std::move(out), parts,
                           [offsets, axis, cols](const Node& self, const std::vector<double>& g, auto& gin) {
                             for (std::size_t i = 0; i < self.inputs.size(); ++i) {
                               if (!gin[i]) continue;
                               const std::size_t pr = self.inputs[i]->rows, pc = self.inputs[i]->cols;
                               for (std::size_t r = 0; r < pr; ++r) {
                                 for (std::size_t c = 0; c < pc; ++c) {
                                   const std::size_t k =
                                       axis == 0 ? (offsets[i] + r) * cols + c : r * cols + offsets[i] + c;
                                   (*gin[i])[r * pc + c] += g[k];
                                 }
                               }
                             }
                           });
}

Tensor sum(const Tensor& a) {
  require_defined("sum", a);
  double s = 0.0;
  for (double x : a.values()) s += x;
  return OpBuilder::make("sum", 1, 1, {s}, {&a}, [](const Node&, const std::vector<double>& g, auto& gin) {
    for (double& x : *gin[0]) x += g[0];
  });
}

Tensor sum(const Tensor& a, int axis) {
  require_defined("sum", a);
  const std::size_t r = a.rows(), c = a.cols();
  if (axis != 0 && axis != 1) fail(ErrorCode::kShapeMismatch, "sum: axis must be 0 or 1");
  const std::size_t out_r = axis == 0 ? 1 : r;
  const std::size_t out_c = axis == 0 ? c : 1;
  std::vector<double> out(out_r * out_c, 0.0);
  const auto& av = a.values();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[axis == 0 ? j : i] += av[i * c + j];
  }
  return OpBuilder::make("sum_axis", out_r, out_c, std::move(out), {&a},
                         [r, c, axis](const Node&, const std::vector<double>& g, auto& gin) {
                           for (std::size_t i = 0; i < r; ++i) {
                             for (std::size_t j = 0; j < c; ++j) (*gin[0])[i * c + j] += g[axis == 0 ? j : i];
                           }
                         });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) fail(ErrorCode::kShapeMismatch, "mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor mean(const Tensor& a, int axis) {
  const std::size_t count = axis == 0 ? a.rows() : a.cols();
  if (count == 0) fail(ErrorCode::kShapeMismatch, "mean: empty axis");
  return scale(sum(a, axis), 1.0 / static_cast<double>(count));
}

Tensor gather_rows(const Tensor& a, std::vector<std::size_t> index) {
  require_defined("gather_rows", a);
  const std::size_t c = a.cols();
  std::vector<double> out(index.size() * c);
  const auto& av = a.values();
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] >= a.rows()) {
      fail(ErrorCode::kShapeMismatch, "gather_rows: index " + std::to_string(index[k]) + " >= " +
                                          std::to_string(a.rows()));
    }
    std::copy_n(av.begin() + static_cast<std::ptrdiff_t>(index[k] * c), c, out.begin() + static_cast<std::ptrdiff_t>(k * c));
  }
  const std::size_t n = index.size();
  return OpBuilder::make("gather_rows", n, c, std::move(out), {&a},
                         [index = std::move(index), c](const Node&, const std::vector<double>& g, auto& gin) {
                           auto& ga = *gin[0];
                           for (std::size_t k = 0; k < index.size(); ++k) {
                             for (std::size_t j = 0; j < c; ++j) ga[index[k] * c + j] += g[k * c + j];
                           }
                         });
}

Tensor scatter_add_rows(const Tensor& a, std::vector<std::size_t> index, std::size_t out_rows) {
  require_defined("scatter_add_rows", a);
  if (index.size() != a.rows()) {
    fail(ErrorCode::kShapeMismatch, "scatter_add_rows: " + std::to_string(index.size()) + " indices for " +
                                        std::to_string(a.rows()) + " rows");
  }
  const std::size_t c = a.cols();
  std::vector<double> out(out_rows * c, 0.0);
  const auto& av = a.values();
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] >= out_rows) fail(ErrorCode::kShapeMismatch, "scatter_add_rows: index out of range");
    for (std::size_t j = 0; j < c; ++j) out[index[k] * c + j] += av[k * c + j];
  }
  return OpBuilder::make("scatter_add_rows", out_rows, c, std::move(out), {&a},
                         [index = std::move(index), c](const Node&, const std::vector<double>& g, auto& gin) {
                           auto& ga = *gin[0];
                           for (std::size_t k = 0; k < index.size(); ++k) {
                             for (std::size_t j = 0; j < c; ++j) ga[k * c + j] += g[index[k] * c + j];
                           }
                         });
}

Tensor segment_softmax(const Tensor& a, std::vector<std::size_t> segment, std::size_t num_segments) {
  require_defined("segment_softmax", a);
  if (segment.size() != a.rows()) fail(ErrorCode::kShapeMismatch, "segment_softmax: segment ids do not cover rows");
  const std::size_t r = a.rows(), c = a.cols();
  const auto& av = a.values();
  std::vector<double> mx(num_segments * c, -std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < r; ++k) {
    if (segment[k] >= num_segments) fail(ErrorCode::kShapeMismatch, "segment_softmax: segment id out of range");
    for (std::size_t j = 0; j < c; ++j) mx[segment[k] * c + j] = std::max(mx[segment[k] * c + j], av[k * c + j]);
  }
  std::vector<double> out(r * c);
  std::vector<double> z(num_segments * c, 0.0);
  for (std::size_t k = 0; k < r; ++k) {
    for (std::size_t j = 0; j < c; ++j) {
      out[k * c + j] = std::exp(av[k * c + j] - mx[segment[k] * c + j]);
      z[segment[k] * c + j] += out[k * c + j];
    }
  }
  for (std::size_t k = 0; k < r; ++k) {
    for (std::size_t j = 0; j < c; ++j) out[k * c + j] /= z[segment[k] * c + j];
  }
  return OpBuilder::make("segment_softmax", r, c, std::move(out), {&a},
                         [segment = std::move(segment), num_segments, r, c](const Node& self,
                                                                            const std::vector<double>& g, auto& gin) {
                           const auto& y = self.value;
                           std::vector<double> dot(num_segments * c, 0.0);
                           for (std::size_t k = 0; k < r; ++k) {
                             for (std::size_t j = 0; j < c; ++j) dot[segment[k] * c + j] += g[k * c + j] * y[k * c + j];
                           }
                           for (std::size_t k = 0; k < r; ++k) {
                             for (std::size_t j = 0; j < c; ++j) {
                               (*gin[0])[k * c + j] += y[k * c + j] * (g[k * c + j] - dot[segment[k] * c + j]);
                             }
                           }
                         });
}

Tensor transpose(const Tensor& a) {
  require_defined("transpose", a);
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(r * c);
  const auto& av = a.values();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  }
  return OpBuilder::make("transpose", c, r, std::move(out), {&a},
                         [r, c](const Node&, const std::vector<double>& g, auto& gin) {
                           for (std::size_t i = 0; i < r; ++i) {
                             for (std::size_t j = 0; j < c; ++j) (*gin[0])[i * c + j] += g[j * r + i];
                           }
                         });
}

Tensor reshape(const Tensor& a, std::size_t rows, std::size_t cols) {
  require_defined("reshape", a);
  if (rows * cols != a.size()) {
    fail(ErrorCode::kShapeMismatch, "reshape: " + std::to_string(a.size()) + " values into [" +
                                        std::to_string(rows) + "x" + std::to_string(cols) + "]");
  }
  return OpBuilder::make("reshape", rows, cols, a.values(), {&a},
                         [](const Node&, const std::vector<double>& g, auto& gin) {
                           for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
                         });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  require_defined("slice_cols", a);
  if (begin > end || end > a.cols()) fail(ErrorCode::kShapeMismatch, "slice_cols: range outside tensor");
  const std::size_t r = a.rows(), c = a.cols(), w = end - begin;
  std::vector<double> out(r * w);
  const auto& av = a.values();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = av[i * c + begin + j];
  }
  return OpBuilder::make("slice_cols", r, w, std::move(out), {&a},
                         [r, c, w, begin](const Node&, const std::vector<double>& g, auto& gin) {
                           for (std::size_t i = 0; i < r; ++i) {
                             for (std::size_t j = 0; j < w; ++j) (*gin[0])[i * c + begin + j] += g[i * w + j];
                           }
                         });
}

Tensor mask_mul(const Tensor& a, std::vector<double> mask) {
  require_defined("mask_mul", a);
  if (mask.size() != a.size()) fail(ErrorCode::kShapeMismatch, "mask_mul: mask size differs from tensor size");
  std::vector<double> out(a.size());
  const auto& av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * mask[i];
  return OpBuilder::make("mask_mul", a.rows(), a.cols(), std::move(out), {&a},
                         [mask = std::move(mask)](const Node&, const std::vector<double>& g, auto& gin) {
                           for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] * mask[i];
                         });
}

Tensor dropout(const Tensor& a, std::vector<double> mask) { return mask_mul(a, std::move(mask)); }

std::vector<double> sample_dropout_mask(std::size_t count, double p, std::mt19937_64& rng) {
  std::vector<double> mask(count, 1.0);
  if (p <= 0.0) return mask;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double keep = 1.0 / (1.0 - p);
  for (double& m : mask) m = unit(rng) < p ? 0.0 : keep;
  return mask;
}

Tensor ParamStore::insert(const std::string& name, Tensor t) {
  if (index_.count(name) != 0) fail(ErrorCode::kShapeMismatch, "parameter '" + name + "' already exists");
  index_[name] = entries_.size();
  entries_.emplace_back(name, t);
  return t;
}

Tensor ParamStore::add_weight(const std::string& name, std::size_t fan_in, std::size_t fan_out) {
  const double bound = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(fan_in + fan_out, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(fan_in * fan_out);
  for (double& x : v) x = dist(rng_);
  return insert(name, Tensor::leaf(fan_in, fan_out, std::move(v), true));
}

Tensor ParamStore::add_bias(const std::string& name, std::size_t width) {
  return insert(name, Tensor::leaf(1, width, std::vector<double>(width, 0.0), true));
}

Tensor ParamStore::add(const std::string& name, std::size_t rows, std::size_t cols, std::vector<double> values) {
  return insert(name, Tensor::leaf(rows, cols, std::move(values), true));
}

const Tensor* ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &entries_[it->second].second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  const Tensor* t = find(name);
  if (!t) fail(ErrorCode::kMissingGrad, "unknown parameter '" + name + "'");
  return *t;
}

std::size_t ParamStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

void ParamStore::copy_values_from(const ParamStore& other) {
  if (other.size() != size()) fail(ErrorCode::kShapeMismatch, "parameter stores differ in size");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto& mine = entries_[i].second;
    const auto& theirs = other.entries_[i].second;
    if (entries_[i].first != other.entries_[i].first || mine.size() != theirs.size()) {
      fail(ErrorCode::kShapeMismatch, "parameter '" + entries_[i].first + "' does not match");
    }
    mine.mutable_values() = theirs.values();
  }
}

double grad_check(const std::function<Tensor(const ParamStore&)>& f, ParamStore& params, double eps) {
  if (!(eps > 0.0 && eps <= 1e-3)) fail(ErrorCode::kShapeMismatch, "grad_check: eps must lie in (0, 1e-3]");
  const Gradients grads = backward(f(params));
  double worst = 0.0;
  for (const auto& entry : params.entries()) {
    Tensor t = entry.second;
    auto& values = t.mutable_values();
    const auto* analytic = grads.find(t);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + eps;
      const double plus = f(params).item();
      values[i] = orig - eps;
      const double minus = f(params).item();
      values[i] = orig;
      const double fd = (plus - minus) / (2.0 * eps);
      const double an = analytic ? (*analytic)[i] : 0.0;
      const double err = std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

void adam_step(ParamStore& params, const Gradients& grads, AdamState& state, const AdamHyper& hyper) {
  const auto& entries = params.entries();
  for (const auto& [name, t] : entries) {
    if (!grads.contains(t)) fail(ErrorCode::kMissingGrad, "no gradient for parameter '" + name + "'");
  }
  if (state.m.size() != entries.size()) {
    state.m.clear();
    state.v.clear();
    for (const auto& entry : entries) {
      state.m.emplace_back(entry.second.size(), 0.0);
      state.v.emplace_back(entry.second.size(), 0.0);
    }
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.t));
  for (std::size_t p = 0; p < entries.size(); ++p) {
    Tensor t = entries[p].second;
    const auto& g = grads.at(t);
    auto& w = t.mutable_values();
    auto& m = state.m[p];
    auto& v = state.v[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g[i];
      v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= hyper.lr * mhat / (std::sqrt(vhat) + hyper.eps);
    }
  }
}

}  // namespace dgrl::ad
