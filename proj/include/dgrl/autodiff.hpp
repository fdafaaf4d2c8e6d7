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
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dgrl/matrix.hpp"

namespace dgrl::ad {

struct Node;
class Gradients;
class Tensor;
Gradients backward(const Tensor& root);

/// Handle to a dense 2-D float64 value in the autodiff graph.
///
/// Forward values are computed eagerly. An operation keeps a record of its
/// inputs only when at least one input requires a gradient. Vectors are
/// represented as [1 x c] rows or [r x 1] columns; scalars are [1 x 1].
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor constant(const RealMatrix& m);
  static Tensor zeros(std::size_t rows, std::size_t cols);
  static Tensor scalar(double v);
  /// A leaf; parameters are leaves with requires_grad = true.
  static Tensor leaf(std::size_t rows, std::size_t cols, std::vector<double> values, bool requires_grad);

  bool defined() const { return node_ != nullptr; }
  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t size() const;
  const std::vector<double>& values() const;
  double operator()(std::size_t r, std::size_t c) const;
  double item() const;
  bool requires_grad() const;
  bool is_leaf() const;
  std::uint64_t id() const;
  std::string_view op() const;
  RealMatrix to_matrix() const;

  /// Leaf values only; used by optimizers and finite-difference checks.
  std::vector<double>& mutable_values();

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  friend struct OpBuilder;
  friend class Gradients;
  friend Gradients backward(const Tensor& root);

  std::shared_ptr<Node> node_;
};

/// Leaf id -> gradient array, for leaves that require grad and were reached.
class Gradients {
 public:
  const std::vector<double>* find(const Tensor& leaf) const;
  const std::vector<double>& at(const Tensor& leaf) const;
  bool contains(const Tensor& leaf) const { return find(leaf) != nullptr; }
  std::size_t size() const { return by_id_.size(); }

 private:
  friend Gradients backward(const Tensor& root);
  std::unordered_map<std::uint64_t, std::vector<double>> by_id_;
};

/// Reverse pass from a [1 x 1] root; gradients sum over all paths.
/// Throws NonScalarRoot.
Gradients backward(const Tensor& root);

// Primitives. Each throws ShapeMismatch naming the primitive.
Tensor matmul(const Tensor& a, const Tensor& b);
/// b may match a, be a [1 x c] row broadcast over rows, or a [1 x 1] scalar.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// b may match a, be a [r x 1] column, a [1 x c] row, or a [1 x 1] scalar.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor sigmoid(const Tensor& a);
/// Elementwise a^p; inputs must stay positive when p is non-integral.
Tensor pow(const Tensor& a, double p);
/// axis 1 normalizes each row, axis 0 each column.
Tensor softmax(const Tensor& a, int axis);
Tensor log_softmax(const Tensor& a, int axis);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor sum(const Tensor& a);
Tensor sum(const Tensor& a, int axis);
Tensor mean(const Tensor& a);
Tensor mean(const Tensor& a, int axis);
Tensor gather_rows(const Tensor& a, std::vector<std::size_t> index);
Tensor scatter_add_rows(const Tensor& a, std::vector<std::size_t> index, std::size_t out_rows);
/// Column-wise softmax within each segment of rows (rows sharing a segment id).
Tensor segment_softmax(const Tensor& a, std::vector<std::size_t> segment, std::size_t num_segments);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, std::size_t rows, std::size_t cols);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
/// Multiplication by an externally supplied constant mask of a's shape.
Tensor mask_mul(const Tensor& a, std::vector<double> mask);
/// Inverted dropout: multiplies by an externally sampled Bernoulli(1-p)/(1-p) mask.
Tensor dropout(const Tensor& a, std::vector<double> mask);

/// Samples the mask consumed by dropout.
std::vector<double> sample_dropout_mask(std::size_t count, double p, std::mt19937_64& rng);

/// Named trainable leaves in insertion order.
///
/// Weights are drawn from Uniform(+-sqrt(6 / (fan_in + fan_out))) out of a
/// seed-derived stream consumed in insertion order; biases start at zero.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : rng_(seed) {}

  Tensor add_weight(const std::string& name, std::size_t fan_in, std::size_t fan_out);
  Tensor add_bias(const std::string& name, std::size_t width);
  Tensor add(const std::string& name, std::size_t rows, std::size_t cols, std::vector<double> values);

  const Tensor& get(const std::string& name) const;
  const Tensor* find(const std::string& name) const;
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t num_scalars() const;

  /// Copies every value from another store with identical names and shapes.
  void copy_values_from(const ParamStore& other);

 private:
  Tensor insert(const std::string& name, Tensor t);

  std::vector<std::pair<std::string, Tensor>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  std::mt19937_64 rng_;
};

/// Max over parameter entries of |analytic - central_fd| / max(1, |analytic|, |central_fd|).
double grad_check(const std::function<Tensor(const ParamStore&)>& f, ParamStore& params, double eps = 1e-6);

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t t = 0;
};

/// Bias-corrected Adam update over every parameter. Throws MissingGrad.
void adam_step(ParamStore& params, const Gradients& grads, AdamState& state, const AdamHyper& hyper);

}  // namespace dgrl::ad
