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

#include "dgrl/nn.hpp"

#include <algorithm>

#include "dgrl/error.hpp"

namespace dgrl::nn {

ad::Tensor ForwardContext::apply_dropout(const ad::Tensor& x) const {
  if (!training || dropout <= 0.0) return x;
  if (!rng) fail(ErrorCode::kShapeMismatch, "dropout in training mode needs an rng");
  return ad::dropout(x, ad::sample_dropout_mask(x.size(), dropout, *rng));
}

Linear::Linear(ad::ParamStore& store, const std::string& name, std::size_t in, std::size_t out, bool bias)
    : in_(in), out_(out) {
  weight_ = store.add_weight(name + ".weight", in, out);
  if (bias) bias_ = store.add_bias(name + ".bias", out);
}

ad::Tensor Linear::operator()(const ad::Tensor& x) const {
  ad::Tensor y = ad::matmul(x, weight_);
  return bias_.defined() ? ad::add(y, bias_) : y;
}

Mlp::Mlp(ad::ParamStore& store, const std::string& name, const std::vector<std::size_t>& dims, bool bias) {
  if (dims.size() < 2) fail(ErrorCode::kShapeMismatch, "mlp '" + name + "' needs at least one layer");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    layers_.emplace_back(store, name + "." + std::to_string(i), dims[i], dims[i + 1], bias);
  }
}

ad::Tensor Mlp::forward(const ad::Tensor& x, const ForwardContext& ctx) const {
  ad::Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i](h);
    if (i + 1 < layers_.size()) h = ctx.apply_dropout(ad::relu(h));
  }
  return h;
}

void assign(ad::Tensor param, const std::vector<double>& values) {
  auto& v = param.mutable_values();
  if (v.size() != values.size()) fail(ErrorCode::kShapeMismatch, "assign: size mismatch");
  v = values;
}

void assign_identity(ad::Tensor param) {
  auto& v = param.mutable_values();
  std::fill(v.begin(), v.end(), 0.0);
  for (std::size_t i = 0; i < std::min(param.rows(), param.cols()); ++i) v[i * param.cols() + i] = 1.0;
}

void assign_zero(ad::Tensor param) {
  auto& v = param.mutable_values();
  std::fill(v.begin(), v.end(), 0.0);
}

}  // namespace dgrl::nn
