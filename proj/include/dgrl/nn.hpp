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
#include <random>
#include <string>
#include <vector>

#include "dgrl/autodiff.hpp"

namespace dgrl::nn {

/// Dropout switch threaded through every forward pass. In eval mode, or when
/// rate is 0, dropout is the identity and no randomness is consumed.
struct ForwardContext {
  bool training = false;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;

  ad::Tensor apply_dropout(const ad::Tensor& x) const;
};

/// y = x W + b with W [in x out] and b [1 x out].
class Linear {
 public:
  Linear() = default;
  Linear(ad::ParamStore& store, const std::string& name, std::size_t in, std::size_t out, bool bias = true);

  ad::Tensor operator()(const ad::Tensor& x) const;

  ad::Tensor weight() const { return weight_; }
  ad::Tensor bias() const { return bias_; }
  bool has_bias() const { return bias_.defined(); }
  std::size_t in_dim() const { return in_; }
  std::size_t out_dim() const { return out_; }

 private:
  ad::Tensor weight_;
  ad::Tensor bias_;
  std::size_t in_ = 0;
  std::size_t out_ = 0;
};

/// Linear layers with relu (then dropout) between consecutive layers.
class Mlp {
 public:
  Mlp() = default;
  Mlp(ad::ParamStore& store, const std::string& name, const std::vector<std::size_t>& dims, bool bias = true);

  ad::Tensor forward(const ad::Tensor& x, const ForwardContext& ctx) const;

  const std::vector<Linear>& layers() const { return layers_; }
  std::size_t in_dim() const { return layers_.front().in_dim(); }
  std::size_t out_dim() const { return layers_.back().out_dim(); }

 private:
  std::vector<Linear> layers_;
};

/// Overwrites a parameter's values in place (tests and constrained setups).
void assign(ad::Tensor param, const std::vector<double>& values);
void assign_identity(ad::Tensor param);
void assign_zero(ad::Tensor param);

}  // namespace dgrl::nn
