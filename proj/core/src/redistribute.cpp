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

#include "raggedshard/redistribute.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "raggedshard/error.hpp"

namespace raggedshard {

namespace {

bool is_sharding(const Placement& p) {
  return std::holds_alternative<Shard>(p) || std::holds_alternative<RaggedShard>(p) ||
         std::holds_alternative<StridedRaggedShard>(p);
}

struct Range {
  Index begin = 0;
  Index end = 0;
  Index size() const { return end - begin; }
};

// Range of chunk `j` out of `n` along `dim` (ceil-sized chunks).
Range chunk_range(const TensorSpec& spec, std::size_t dim, int n, int j) {
  const Index extent = spec.shape[dim];
  const Index chunk = ceil_div(extent, n);
  const Index lo = std::min(extent, chunk * j);
  const Index hi = std::min(extent, chunk * (j + 1));
  return {lo, hi};
}

Index chunk_numel(const TensorSpec& spec, std::size_t dim, int n, int j) {
  const Range r = chunk_range(spec, dim, n, j);
  return spec.numel() / spec.shape[dim] * r.size();
}

std::vector<float> shard_chunk(const TensorSpec& spec, std::span<const float> full,
                               std::size_t dim, int n, int j) {
  const Range r = chunk_range(spec, dim, n, j);
  Index outer = 1;
  for (std::size_t d = 0; d < dim; ++d) outer *= spec.shape[d];
  const Index inner = spec.stride(dim);
  const Index extent = spec.shape[dim];
  std::vector<float> out;
  out.reserve(static_cast<std::size_t>(outer * r.size() * inner));
  for (Index o = 0; o < outer; ++o) {
    const auto* base = full.data() + (o * extent + r.begin) * inner;
    out.insert(out.end(), base, base + r.size() * inner);
  }
  return out;
}

// Element offsets of every rank's ragged slice of the communication layout.
std::vector<Index> ragged_offsets(const std::vector<Index>& counts, Index block) {
  std::vector<Index> off(counts.size() + 1, 0);
  for (std::size_t r = 0; r < counts.size(); ++r) off[r + 1] = off[r] + counts[r] * block;
  return off;
}

void check_counts(const TensorSpec& spec, const Placement& p, int group_size) {
  check_placement(spec, p);
  if (const auto* c = ragged_counts(p)) {
    if (static_cast<int>(c->size()) != group_size) {
      throw Error(ErrorCode::ShapeMismatch,
                  spec.name + ": " + std::to_string(c->size()) +
                      " ragged counts on a mesh dim of " + std::to_string(group_size));
    }
  }
}

std::vector<float> fold(const std::vector<std::vector<float>>& parts) {
  std::vector<float> out = parts.front();
  for (std::size_t j = 1; j < parts.size(); ++j) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += parts[j][i];
  }
  return out;
}

std::vector<float> concat(const std::vector<std::vector<float>>& parts) {
  std::vector<float> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

}  // namespace

std::vector<Index> local_sizes(const TensorSpec& spec,
                               std::span<const Placement> placements,
                               const SimMesh& mesh) {
  if (static_cast<int>(placements.size()) != mesh.ndim()) {
    throw Error(ErrorCode::MeshMismatch, spec.name + ": one placement per mesh dim");
  }
  int shard_dim = -1;
  for (int d = 0; d < mesh.ndim(); ++d) {
    const Placement& p = placements[static_cast<std::size_t>(d)];
    if (std::holds_alternative<StridedRaggedShard>(p)) {
      throw Error(ErrorCode::UnsupportedConversion,
                  "StridedRaggedShard payloads live in DBuffer views");
    }
    check_counts(spec, p, mesh.dim(d).size);
    if (is_sharding(p)) {
      if (shard_dim >= 0) {
        throw Error(ErrorCode::UnsupportedConversion,
                    "more than one sharded mesh dim");
      }
      shard_dim = d;
    }
  }
  std::vector<Index> sizes(static_cast<std::size_t>(mesh.size()), spec.numel());
  if (shard_dim < 0) return sizes;
  const Placement& p = placements[static_cast<std::size_t>(shard_dim)];
  const Index block = resolve_granularity(spec);
  for (int r = 0; r < mesh.size(); ++r) {
    const int j = mesh.coords(r)[static_cast<std::size_t>(shard_dim)];
    if (const auto* s = std::get_if<Shard>(&p)) {
      sizes[static_cast<std::size_t>(r)] =
          chunk_numel(spec, s->dim, mesh.dim(shard_dim).size, j);
    } else {
      sizes[static_cast<std::size_t>(r)] =
          (*ragged_counts(p))[static_cast<std::size_t>(j)] * block;
    }
  }
  return sizes;
}

void check_dist_tensor(const DistTensor& x, const SimMesh& mesh) {
  const auto sizes = local_sizes(x.spec, x.placements, mesh);
  if (static_cast<int>(x.locals.size()) != mesh.size()) {
    throw Error(ErrorCode::MeshMismatch, x.spec.name + ": one payload per rank");
  }
  for (std::size_t r = 0; r < sizes.size(); ++r) {
    if (static_cast<Index>(x.locals[r].size()) != sizes[r]) {
      throw Error(ErrorCode::ShapeMismatch,
                  x.spec.name + ": rank " + std::to_string(r) + " holds " +
                      std::to_string(x.locals[r].size()) + " elements, placement implies " +
                      std::to_string(sizes[r]));
    }
  }
}

DistTensor distribute(const TensorSpec& spec, std::span<const float> global,
                      std::vector<Placement> placements, const SimMesh& mesh) {
  if (static_cast<Index>(global.size()) != spec.numel()) {
    throw Error(ErrorCode::ShapeMismatch, spec.name + ": global size differs from shape");
  }
  local_sizes(spec, placements, mesh);
  const BlockPermutation layout = block_layout(spec);
  const std::vector<float> comm = layout.to_comm(global);
  DistTensor x{spec, std::move(placements), {}};
  x.locals.resize(static_cast<std::size_t>(mesh.size()));
  for (int r = 0; r < mesh.size(); ++r) {
    const auto coords = mesh.coords(r);
    std::vector<float> local(global.begin(), global.end());
    for (int d = 0; d < mesh.ndim(); ++d) {
      const Placement& p = x.placements[static_cast<std::size_t>(d)];
      const int j = coords[static_cast<std::size_t>(d)];
      if (std::holds_alternative<Partial>(p) && j != 0) {
        std::fill(local.begin(), local.end(), 0.0f);
      } else if (const auto* s = std::get_if<Shard>(&p)) {
        local = shard_chunk(spec, global, s->dim, mesh.dim(d).size, j);
      } else if (const auto* c = ragged_counts(p)) {
        const auto off = ragged_offsets(*c, layout.block_elements());
        local.assign(comm.begin() + off[static_cast<std::size_t>(j)],
                     comm.begin() + off[static_cast<std::size_t>(j) + 1]);
      }
    }
    x.locals[static_cast<std::size_t>(r)] = std::move(local);
  }
  return x;
}

DistTensor redistribute(const DistTensor& x, const std::vector<Placement>& target,
                        const SimMesh& mesh) {
  check_dist_tensor(x, mesh);
  local_sizes(x.spec, target, mesh);

  std::vector<int> changed;
  for (int d = 0; d < mesh.ndim(); ++d) {
    if (!(x.placements[static_cast<std::size_t>(d)] == target[static_cast<std::size_t>(d)])) {
      changed.push_back(d);
    }
  }
  if (changed.empty()) return x;
  if (changed.size() > 1) {
    throw Error(ErrorCode::UnsupportedConversion,
                "redistribute changes one mesh dim at a time");
  }
  const int dim = changed.front();
  for (int d = 0; d < mesh.ndim(); ++d) {
    if (d != dim && !std::holds_alternative<Replicate>(x.placements[static_cast<std::size_t>(d)])) {
      throw Error(ErrorCode::UnsupportedConversion,
                  "other mesh dims must be Replicate while converting");
    }
  }
  const Placement& src = x.placements[static_cast<std::size_t>(dim)];
  const Placement& dst = target[static_cast<std::size_t>(dim)];
  const bool src_ragged = std::holds_alternative<RaggedShard>(src);
  const bool dst_ragged = std::holds_alternative<RaggedShard>(dst);
  const bool src_rep = std::holds_alternative<Replicate>(src);
  const bool dst_rep = std::holds_alternative<Replicate>(dst);
  const bool src_partial = std::holds_alternative<Partial>(src);
  const bool supported = (src_ragged && (dst_rep || dst_ragged)) ||
                         (src_rep && dst_ragged) || (src_partial && (dst_ragged || dst_rep));
  if (!supported) {
    throw Error(ErrorCode::UnsupportedConversion,
                to_string(src) + " -> " + to_string(dst) + " for " + x.spec.name);
  }

  const BlockPermutation layout = block_layout(x.spec);
  const Index block = layout.block_elements();
  const std::string tag = "redistribute:" + x.spec.name;
  DistTensor out{x.spec, target, {}};
  out.locals.resize(x.locals.size());

  mesh.run([&](Communicator& comm) {
    const std::size_t me = static_cast<std::size_t>(comm.rank());
    const int j = comm.group_index(dim);
    const auto& local = x.locals[me];
    std::vector<float> result;
    if (src_ragged) {
      const std::vector<float> gathered = concat(comm.all_gather(dim, local, tag));
      if (dst_rep) {
        result = layout.to_logical<float>(gathered);
      } else {
        const auto off = ragged_offsets(std::get<RaggedShard>(dst).counts, block);
        result.assign(gathered.begin() + off[static_cast<std::size_t>(j)],
                      gathered.begin() + off[static_cast<std::size_t>(j) + 1]);
      }
    } else if (src_rep) {
      const std::vector<float> c = layout.to_comm<float>(local);
      const auto off = ragged_offsets(std::get<RaggedShard>(dst).counts, block);
      result.assign(c.begin() + off[static_cast<std::size_t>(j)],
                    c.begin() + off[static_cast<std::size_t>(j) + 1]);
    } else if (dst_rep) {
      result = fold(comm.all_gather(dim, local, tag));
    } else {
      // Reduce-scatter: every peer receives its ragged slice of my
      // contribution, then folds the slices in group order.
      const std::vector<float> c = layout.to_comm<float>(local);
      const auto off = ragged_offsets(std::get<RaggedShard>(dst).counts, block);
      std::vector<std::vector<float>> send(off.size() - 1);
      for (std::size_t p = 0; p + 1 < off.size(); ++p) {
        send[p].assign(c.begin() + off[p], c.begin() + off[p + 1]);
      }
      result = fold(comm.all_to_all(dim, std::move(send), tag));
    }
    out.locals[me] = std::move(result);
  });
  return out;
}

std::vector<float> full_tensor(const DistTensor& x, const SimMesh& mesh) {
  std::vector<Placement> rep(static_cast<std::size_t>(mesh.ndim()), Replicate{});
  DistTensor cur = x;
  for (int d = 0; d < mesh.ndim(); ++d) {
    std::vector<Placement> step = cur.placements;
    step[static_cast<std::size_t>(d)] = Replicate{};
    cur = redistribute(cur, step, mesh);
  }
  return cur.locals.front();
}

DistTensor reduce_partial_2d(const DistTensor& x, const SimMesh& mesh,
                             ReductionPath path) {
  if (mesh.ndim() != 2) {
    throw Error(ErrorCode::UnsupportedConversion, "reduce_partial_2d needs a 2D mesh");
  }
  if (x.placements.size() != 2 || !std::holds_alternative<Partial>(x.placements[0]) ||
      !std::holds_alternative<Partial>(x.placements[1])) {
    throw Error(ErrorCode::UnsupportedConversion, "input must be (Partial, Partial)");
  }
  check_dist_tensor(x, mesh);
  const int outer = mesh.dim(0).size;
  const int inner = mesh.dim(1).size;
  const std::string tag = "reduce2d:" + x.spec.name;

  DistTensor out{x.spec, {Replicate{}, Shard{0}}, {}};
  out.locals.resize(x.locals.size());

  mesh.run([&](Communicator& comm) {
    const std::size_t me = static_cast<std::size_t>(comm.rank());
    const int i = comm.group_index(1);
    const Index len = chunk_numel(x.spec, 0, inner, i);
    // contrib[o][p]: my chunk of the payload held by global rank (o, p).
    std::vector<std::vector<std::vector<float>>> contrib(
        static_cast<std::size_t>(outer), std::vector<std::vector<float>>(static_cast<std::size_t>(inner)));
    if (path == ReductionPath::InnerFirst) {
      std::vector<std::vector<float>> send;
      for (int p = 0; p < inner; ++p) send.push_back(shard_chunk(x.spec, x.locals[me], 0, inner, p));
      const auto mine = comm.all_to_all(1, std::move(send), tag + ":rs");
      const auto rows = comm.all_gather(0, concat(mine), tag + ":ar");
      for (int o = 0; o < outer; ++o) {
        for (int p = 0; p < inner; ++p) {
          const auto* base = rows[static_cast<std::size_t>(o)].data() + p * len;
          contrib[static_cast<std::size_t>(o)][static_cast<std::size_t>(p)].assign(base, base + len);
        }
      }
    } else {
      const auto column = comm.all_gather(0, x.locals[me], tag + ":ag");
      std::vector<std::vector<float>> send;
      for (int p = 0; p < inner; ++p) {
        std::vector<float> buf;
        for (int o = 0; o < outer; ++o) {
          const auto piece = shard_chunk(x.spec, column[static_cast<std::size_t>(o)], 0, inner, p);
          buf.insert(buf.end(), piece.begin(), piece.end());
        }
        send.push_back(std::move(buf));
      }
      const auto mine = comm.all_to_all(1, std::move(send), tag + ":rs");
      for (int p = 0; p < inner; ++p) {
        for (int o = 0; o < outer; ++o) {
          const auto* base = mine[static_cast<std::size_t>(p)].data() + o * len;
          contrib[static_cast<std::size_t>(o)][static_cast<std::size_t>(p)].assign(base, base + len);
        }
      }
    }
    std::vector<std::vector<float>> ordered;
    for (auto& row : contrib) {
      for (auto& c : row) ordered.push_back(std::move(c));
    }
    out.locals[me] = fold(ordered);
  });
  return out;
}

}  // namespace raggedshard
