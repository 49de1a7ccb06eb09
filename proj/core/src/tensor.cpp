// Copyright 2026 The RaggedShard Authors. All rights reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "raggedshard/tensor.hpp"

#include <numeric>

#include "raggedshard/error.hpp"

namespace raggedshard {

Index gcd(Index a, Index b) { return std::gcd(a, b); }

Index lcm(Index a, Index b) {
  if (a == 0 || b == 0) return 0;
  Index out = 0;
  if (__builtin_mul_overflow(a / gcd(a, b), b, &out)) {
    throw Error(ErrorCode::LimitExceeded, "lcm overflow");
  }
  return out;
}

Index ceil_div(Index a, Index b) { return (a + b - 1) / b; }

Index round_up(Index a, Index multiple) {
  return ceil_div(a, multiple) * multiple;
}

Index TensorSpec::numel() const {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

Index TensorSpec::stride(std::size_t dim) const {
  Index s = 1;
  for (std::size_t d = dim + 1; d < shape.size(); ++d) s *= shape[d];
  return s;
}

void check_shape(const TensorSpec& t) {
  if (t.shape.empty()) {
    throw Error(ErrorCode::ShapeMismatch, t.name + ": empty shape");
  }
  for (Index d : t.shape) {
    if (d < 1) {
      throw Error(ErrorCode::ShapeMismatch,
                  t.name + ": non-positive dimension");
    }
  }
}

Index resolve_granularity(const TensorSpec& t) {
  check_shape(t);
  const Granularity& g = t.granularity;
  switch (g.kind()) {
    case Granularity::Kind::Element:
      return 1;
    case Granularity::Kind::Rows: {
      if (g.rows() < 1 || t.shape[0] % g.rows() != 0) {
        throw Error(ErrorCode::NonDividingGranularity,
                    t.name + ": " + std::to_string(g.rows()) +
                        " rows do not divide dim 0 of size " +
                        std::to_string(t.shape[0]));
      }
      return g.rows() * t.stride(0);
    }
    case Granularity::Kind::Block: {
      const auto& bs = g.block_shape();
      if (bs.size() != t.shape.size()) {
        throw Error(ErrorCode::NonDividingGranularity,
                    t.name + ": block rank differs from tensor rank");
      }
      Index n = 1;
      for (std::size_t d = 0; d < bs.size(); ++d) {
        if (bs[d] < 1 || t.shape[d] % bs[d] != 0) {
          throw Error(ErrorCode::NonDividingGranularity,
                      t.name + ": block dim " + std::to_string(d) +
                          " does not divide the tensor");
        }
        n *= bs[d];
      }
      return n;
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown granularity kind");
}

Index block_count(const TensorSpec& t) {
  return t.numel() / resolve_granularity(t);
}

Index compose_with_shard(const TensorSpec& t, std::size_t dim,
                         Index user_granularity) {
  check_shape(t);
  if (dim == 0 || dim >= t.rank()) {
    throw Error(ErrorCode::InvalidArgument,
                "compose_with_shard needs 0 < dim < rank; Shard(0) uses "
                "make_strided");
  }
  if (user_granularity < 1) {
    throw Error(ErrorCode::InvalidArgument, "granularity must be positive");
  }
  const Index g = lcm(t.stride(dim), user_granularity);
  if (t.numel() % g != 0) {
    throw Error(ErrorCode::NonDividingGranularity,
                t.name + ": composed granularity " + std::to_string(g) +
                    " does not divide " + std::to_string(t.numel()));
  }
  return g;
}

}  // namespace raggedshard
