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

#include "raggedshard/quant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "raggedshard/error.hpp"
#include "raggedshard/placement.hpp"

namespace raggedshard {

namespace {

struct MatrixView {
  Index rows = 1;
  Index cols = 1;
};

MatrixView matrix_view(std::span<const Index> shape) {
  if (shape.empty()) throw Error(ErrorCode::ShapeMismatch, "scalar tensors are not quantized");
  MatrixView v;
  if (shape.size() == 1) {
    v.cols = shape[0];
    return v;
  }
  v.rows = shape[0];
  v.cols = 1;
  for (std::size_t d = 1; d < shape.size(); ++d) v.cols *= shape[d];
  return v;
}

void check_spec(const QuantBlockSpec& spec) {
  if (spec.rows < 1 || spec.cols < 1) {
    throw Error(ErrorCode::InvalidArgument, "quantization tile must be non-empty");
  }
}

// Tiles fully inside [begin, end) in row-major tile order, with their
// element extents. Throws if a tile is cut by either end.
struct Tile {
  Index r0, r1, c0, c1;
};

std::vector<Tile> tiles_in(MatrixView mv, Index begin, Index end, const QuantBlockSpec& spec) {
  if (begin < 0 || end > mv.rows * mv.cols || begin > end) {
    throw Error(ErrorCode::ShapeMismatch, "shard outside the tensor");
  }
  std::vector<Tile> out;
  if (begin == end) return out;
  const Index tile_cols = ceil_div(mv.cols, spec.cols);
  const Index first_tile_row = (begin / mv.cols) / spec.rows;
  const Index last_tile_row = ((end - 1) / mv.cols) / spec.rows;
  for (Index tr = first_tile_row; tr <= last_tile_row; ++tr) {
    for (Index tc = 0; tc < tile_cols; ++tc) {
      Tile t{tr * spec.rows, std::min(mv.rows, (tr + 1) * spec.rows), tc * spec.cols,
             std::min(mv.cols, (tc + 1) * spec.cols)};
      const Index lo = t.r0 * mv.cols + t.c0;
      const Index hi = (t.r1 - 1) * mv.cols + t.c1 - 1;
      if (hi < begin || lo >= end) continue;
      if (lo < begin || hi >= end) {
        throw Error(ErrorCode::MisalignedShard,
                    "tile (" + std::to_string(tr) + "," + std::to_string(tc) +
                        ") crosses the shard boundary");
      }
      out.push_back(t);
    }
  }
  return out;
}

}  // namespace

QuantizedShard blockwise_quantize(std::span<const float> shard, std::span<const Index> shape,
                                  Index begin, const QuantBlockSpec& spec) {
  check_spec(spec);
  const MatrixView mv = matrix_view(shape);
  const Index end = begin + static_cast<Index>(shard.size());
  const auto tiles = tiles_in(mv, begin, end, spec);
  QuantizedShard q;
  q.codes.assign(shard.size(), 0);
  q.scales.reserve(tiles.size());
  for (const Tile& t : tiles) {
    float absmax = 0.0f;
    for (Index r = t.r0; r < t.r1; ++r) {
      for (Index c = t.c0; c < t.c1; ++c) {
        absmax = std::max(absmax, std::fabs(shard[static_cast<std::size_t>(r * mv.cols + c - begin)]));
      }
    }
    const float scale = absmax / 127.0f;
    q.scales.push_back(scale);
    if (scale == 0.0f) continue;
    for (Index r = t.r0; r < t.r1; ++r) {
      for (Index c = t.c0; c < t.c1; ++c) {
        const auto i = static_cast<std::size_t>(r * mv.cols + c - begin);
        const double code = std::round(static_cast<double>(shard[i]) / scale);
        q.codes[i] = static_cast<std::int8_t>(std::clamp(code, -127.0, 127.0));
      }
    }
  }
  return q;
}

std::vector<float> blockwise_dequantize(const QuantizedShard& q, std::span<const Index> shape,
                                        Index begin, const QuantBlockSpec& spec) {
  check_spec(spec);
  const MatrixView mv = matrix_view(shape);
  const Index end = begin + static_cast<Index>(q.codes.size());
  const auto tiles = tiles_in(mv, begin, end, spec);
  if (tiles.size() != q.scales.size()) {
    throw Error(ErrorCode::ShapeMismatch, "scale count does not match the shard's tiles");
  }
  std::vector<float> out(q.codes.size(), 0.0f);
  for (std::size_t k = 0; k < tiles.size(); ++k) {
    const Tile& t = tiles[k];
    for (Index r = t.r0; r < t.r1; ++r) {
      for (Index c = t.c0; c < t.c1; ++c) {
        const auto i = static_cast<std::size_t>(r * mv.cols + c - begin);
        out[i] = static_cast<float>(q.codes[i]) * q.scales[k];
      }
    }
  }
  return out;
}

QuantError quantization_error(std::span<const float> shard, const QuantizedShard& q,
                              std::span<const Index> shape, Index begin,
                              const QuantBlockSpec& spec) {
  check_spec(spec);
  const MatrixView mv = matrix_view(shape);
  if (shard.size() != q.codes.size()) {
    throw Error(ErrorCode::ShapeMismatch, "codes do not cover the shard");
  }
  const auto tiles = tiles_in(mv, begin, begin + static_cast<Index>(shard.size()), spec);
  if (tiles.size() != q.scales.size()) {
    throw Error(ErrorCode::ShapeMismatch, "scale count does not match the shard's tiles");
  }
  QuantError e;
  for (std::size_t k = 0; k < tiles.size(); ++k) {
    const Tile& t = tiles[k];
    const double scale = q.scales[k];
    e.bound = std::max(e.bound, scale / 2);
    for (Index r = t.r0; r < t.r1; ++r) {
      for (Index c = t.c0; c < t.c1; ++c) {
        const auto i = static_cast<std::size_t>(r * mv.cols + c - begin);
        const double err = std::fabs(static_cast<double>(shard[i]) - q.codes[i] * scale);
        e.max_error = std::max(e.max_error, err);
        if (err > scale / 2) e.within = false;
      }
    }
  }
  return e;
}

ContainmentReport containment_check(const LayoutPlan& plan,
                                    const std::map<std::string, QuantBlockSpec>& specs) {
  ContainmentReport report;
  const Index S = plan.shard_size;
  for (const PlacedTensor& p : plan.tensors) {
    auto it = specs.find(p.name);
    if (it == specs.end()) continue;
    const QuantBlockSpec& spec = it->second;
    check_spec(spec);
    const MatrixView mv = matrix_view(p.shape);
    const Index tile_rows = ceil_div(mv.rows, spec.rows);
    const Index tile_cols = ceil_div(mv.cols, spec.cols);
    const auto tile_of = [&](Index logical) {
      const Index r = logical / mv.cols;
      const Index c = logical % mv.cols;
      return (r / spec.rows) * tile_cols + c / spec.cols;
    };

    // Lowest and highest buffer offset touched by each tile.
    std::vector<Index> lo(static_cast<std::size_t>(tile_rows * tile_cols),
                          std::numeric_limits<Index>::max());
    std::vector<Index> hi(lo.size(), -1);
    TensorSpec t{p.name, p.shape, plan.elem_bytes, p.granularity, p.order_index};
    const BlockPermutation layout = block_layout(t);
    if (layout.is_trivial()) {
      for (Index tr = 0; tr < tile_rows; ++tr) {
        for (Index tc = 0; tc < tile_cols; ++tc) {
          const Index r0 = tr * spec.rows;
          const Index r1 = std::min(mv.rows, r0 + spec.rows);
          const Index c0 = tc * spec.cols;
          const Index c1 = std::min(mv.cols, c0 + spec.cols);
          const auto k = static_cast<std::size_t>(tr * tile_cols + tc);
          lo[k] = r0 * mv.cols + c0;
          hi[k] = (r1 - 1) * mv.cols + c1 - 1;
        }
      }
    } else {
      for (Index c = 0; c < layout.numel(); ++c) {
        const auto k = static_cast<std::size_t>(tile_of(layout.logical_offset(c)));
        lo[k] = std::min(lo[k], c);
        hi[k] = std::max(hi[k], c);
      }
    }
    for (Index tr = 0; tr < tile_rows; ++tr) {
      for (Index tc = 0; tc < tile_cols; ++tc) {
        const auto k = static_cast<std::size_t>(tr * tile_cols + tc);
        const Index first = (p.interval.begin + lo[k]) / S;
        const Index last = (p.interval.begin + hi[k]) / S;
        if (first != last) {
          report.contained = false;
          report.offending.push_back({p.name, tr, tc, first + 1});
        }
      }
    }
  }
  return report;
}

}  // namespace raggedshard
