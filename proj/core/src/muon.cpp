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

#include "raggedshard/muon.hpp"

#include <algorithm>
#include <cmath>

#include "raggedshard/error.hpp"

namespace raggedshard {

namespace {

using Mat = std::vector<double>;

// c = a * b^T for a (n x k), b (p x k).
Mat mul_abt(const Mat& a, const Mat& b, Index n, Index k, Index p) {
  Mat c(static_cast<std::size_t>(n * p), 0.0);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) {
      double s = 0.0;
      for (Index t = 0; t < k; ++t) s += a[i * k + t] * b[j * k + t];
      c[i * p + j] = s;
    }
  }
  return c;
}

// c = a * b for a (n x n), b (n x k).
Mat mul_ab(const Mat& a, const Mat& b, Index n, Index k) {
  Mat c(static_cast<std::size_t>(n * k), 0.0);
  for (Index i = 0; i < n; ++i) {
    for (Index t = 0; t < n; ++t) {
      const double v = a[i * n + t];
      if (v == 0.0) continue;
      for (Index j = 0; j < k; ++j) c[i * k + j] += v * b[t * k + j];
    }
  }
  return c;
}

int ragged_dim(const DistTensor& x) {
  int dim = -1;
  for (std::size_t d = 0; d < x.placements.size(); ++d) {
    if (std::holds_alternative<RaggedShard>(x.placements[d])) {
      dim = static_cast<int>(d);
    } else if (!std::holds_alternative<Replicate>(x.placements[d])) {
      throw Error(ErrorCode::PlacementMismatch,
                  x.spec.name + ": Muon expects RaggedShard with Replicate elsewhere, got " +
                      to_string(x.placements[d]));
    }
  }
  return dim;
}

}  // namespace

std::vector<float> newton_schulz(std::span<const float> m, Index rows, Index cols,
                                 int steps) {
  if (rows < 1 || cols < 1 || static_cast<Index>(m.size()) != rows * cols) {
    throw Error(ErrorCode::ShapeMismatch, "newton_schulz: size does not match shape");
  }
  // Iterate on the wide orientation so X X^T is the smaller Gram matrix.
  const bool tall = rows > cols;
  const Index n = tall ? cols : rows;
  const Index k = tall ? rows : cols;
  Mat x(m.size());
  double norm = 0.0;
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      const double v = m[static_cast<std::size_t>(i * cols + j)];
      x[tall ? j * rows + i : i * cols + j] = v;
      norm += v * v;
    }
  }
  norm = std::sqrt(norm);
  if (norm == 0.0) throw Error(ErrorCode::ZeroMatrix, "newton_schulz of a zero matrix");
  for (double& v : x) v /= norm;

  for (int s = 0; s < steps; ++s) {
    const Mat gram = mul_abt(x, x, n, k, n);
    const Mat gx = mul_ab(gram, x, n, k);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 1.5 * x[i] - 0.5 * gx[i];
  }

  std::vector<float> out(m.size());
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      out[static_cast<std::size_t>(i * cols + j)] =
          static_cast<float>(x[tall ? j * rows + i : i * cols + j]);
    }
  }
  return out;
}

DistTensor momentum_update(const DistTensor& g, MuonState& state) {
  auto it = state.momentum.find(g.spec.name);
  if (it == state.momentum.end()) {
    DistTensor zero = g;
    for (auto& local : zero.locals) std::fill(local.begin(), local.end(), 0.0f);
    it = state.momentum.emplace(g.spec.name, std::move(zero)).first;
  }
  DistTensor& m = it->second;
  if (m.placements != g.placements || m.spec.shape != g.spec.shape) {
    throw Error(ErrorCode::PlacementMismatch,
                g.spec.name + ": momentum and gradient placements differ");
  }
  const float beta = state.config.beta;
  DistTensor u = g;
  for (std::size_t r = 0; r < g.locals.size(); ++r) {
    auto& mr = m.locals[r];
    const auto& gr = g.locals[r];
    for (std::size_t i = 0; i < gr.size(); ++i) {
      mr[i] = beta * mr[i] + gr[i];
      u.locals[r][i] = state.config.nesterov ? gr[i] + beta * mr[i] : mr[i];
    }
  }
  return u;
}

int select_root(std::vector<Index>& ledger, Index param_size) {
  if (ledger.empty()) throw Error(ErrorCode::InvalidArgument, "empty root ledger");
  const auto it = std::min_element(ledger.begin(), ledger.end());
  *it += param_size;
  return static_cast<int>(it - ledger.begin());
}

DistTensor muon_step(const DistTensor& w, const DistTensor& g, MuonState& state,
                     const SimMesh& mesh) {
  if (w.spec.rank() != 2) {
    throw Error(ErrorCode::NotMatrix, w.spec.name + " is not a 2D parameter");
  }
  if (g.placements != w.placements || g.spec.shape != w.spec.shape) {
    throw Error(ErrorCode::PlacementMismatch, w.spec.name + ": gradient placed differently");
  }
  check_dist_tensor(w, mesh);
  check_dist_tensor(g, mesh);
  const int dim = ragged_dim(w);

  const DistTensor u = momentum_update(g, state);
  const std::vector<Placement> p = w.placements;  // current placement

  const int group = dim < 0 ? 1 : mesh.dim(dim).size;
  if (static_cast<int>(state.ledger.size()) != group) state.ledger.assign(group, 0);
  const int root = select_root(state.ledger, w.spec.numel());

  DistTensor o = u;
  if (dim >= 0) {
    std::vector<Placement> to_root = p;
    to_root[static_cast<std::size_t>(dim)] =
        all_on_root(block_count(w.spec), group, root);
    o = redistribute(u, to_root, mesh);
  }
  // Only the root of each replica group holds a payload, so the other ranks
  // skip the orthogonalization.
  // A gathered root holds the tensor in communication order, which is
  // tile-major for 2D block granularity. Replicated payloads are row-major.
  const BlockPermutation layout =
      dim >= 0 ? block_layout(w.spec) : BlockPermutation::identity(w.spec.shape, w.spec.shape);
  for (auto& local : o.locals) {
    if (local.empty()) continue;
    const std::vector<float> full = layout.to_logical<float>(local);
    const std::vector<float> ns =
        newton_schulz(full, w.spec.shape[0], w.spec.shape[1], state.config.ns_steps);
    local = layout.to_comm<float>(ns);
  }
  if (dim >= 0) o = redistribute(o, p, mesh);

  DistTensor out = w;
  for (std::size_t r = 0; r < out.locals.size(); ++r) {
    auto& wr = out.locals[r];
    for (std::size_t i = 0; i < wr.size(); ++i) wr[i] -= state.config.lr * o.locals[r][i];
  }
  return out;
}

DistTensor momentum_sgd_step(const DistTensor& w, const DistTensor& g, MuonState& state) {
  if (g.placements != w.placements || g.spec.shape != w.spec.shape) {
    throw Error(ErrorCode::PlacementMismatch, w.spec.name + ": gradient placed differently");
  }
  const DistTensor u = momentum_update(g, state);
  DistTensor out = w;
  for (std::size_t r = 0; r < out.locals.size(); ++r) {
    auto& wr = out.locals[r];
    for (std::size_t i = 0; i < wr.size(); ++i) wr[i] -= state.config.lr * u.locals[r][i];
  }
  return out;
}

std::vector<float> LocalMuon::momentum(const std::string& name, std::span<const float> g) {
  auto& m = momentum_[name];
  if (m.empty()) m.assign(g.size(), 0.0f);
  if (m.size() != g.size()) {
    throw Error(ErrorCode::ShapeMismatch, name + ": gradient size changed");
  }
  std::vector<float> u(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    m[i] = config_.beta * m[i] + g[i];
    u[i] = config_.nesterov ? g[i] + config_.beta * m[i] : m[i];
  }
  return u;
}

std::vector<float> LocalMuon::step(const std::string& name, std::span<const Index> shape,
                                   std::vector<float>& w, std::span<const float> g) {
  if (shape.size() != 2) throw Error(ErrorCode::NotMatrix, name + " is not a 2D parameter");
  const std::vector<float> u = momentum(name, g);
  std::vector<float> o = newton_schulz(u, shape[0], shape[1], config_.ns_steps);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= config_.lr * o[i];
  return o;
}

void LocalMuon::sgd_step(const std::string& name, std::vector<float>& w,
                         std::span<const float> g) {
  const std::vector<float> u = momentum(name, g);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= config_.lr * u[i];
}

}  // namespace raggedshard
