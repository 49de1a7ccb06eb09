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

#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "raggedshard/dbuffer.hpp"
#include "raggedshard/redistribute.hpp"

namespace rs = raggedshard;

namespace {

rs::TensorSpec matrix(rs::Index rows, rs::Index cols) {
  rs::TensorSpec t;
  t.name = "w";
  t.shape = {rows, cols};
  t.granularity = rs::Granularity::rows(1);
  return t;
}

std::vector<rs::Index> even_counts(rs::Index blocks, int ranks) {
  std::vector<rs::Index> c(static_cast<std::size_t>(ranks), blocks / ranks);
  for (rs::Index i = 0; i < blocks % ranks; ++i) ++c[static_cast<std::size_t>(i)];
  return c;
}

void BM_RaggedToReplicate(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const rs::SimMesh mesh = rs::SimMesh::line(m);
  const auto t = matrix(state.range(1), 256);
  std::vector<float> global(static_cast<std::size_t>(t.numel()));
  std::iota(global.begin(), global.end(), 0.0f);
  const auto x = rs::distribute(t, global, {rs::RaggedShard{even_counts(t.shape[0], m)}}, mesh);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rs::redistribute(x, {rs::Replicate{}}, mesh));
  }
  state.SetBytesProcessed(state.iterations() * t.numel() * 4);
}

void BM_GatherToRoot(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const rs::SimMesh mesh = rs::SimMesh::line(m);
  const auto t = matrix(256, 256);
  std::vector<float> global(static_cast<std::size_t>(t.numel()), 1.0f);
  const auto x = rs::distribute(t, global, {rs::RaggedShard{even_counts(256, m)}}, mesh);
  const std::vector<rs::Placement> root{rs::all_on_root(256, m, m - 1)};
  for (auto _ : state) {
    benchmark::DoNotOptimize(rs::redistribute(x, root, mesh));
  }
}

void BM_PartialToRagged(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const rs::SimMesh mesh = rs::SimMesh::line(m);
  const auto t = matrix(128, 128);
  rs::DistTensor x{t, {rs::Partial{}}, {}};
  for (int r = 0; r < m; ++r) x.locals.emplace_back(static_cast<std::size_t>(t.numel()), 0.5f);
  const std::vector<rs::Placement> target{rs::RaggedShard{even_counts(128, m)}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(rs::redistribute(x, target, mesh));
  }
}

// Fused one-pass-per-region scale against the per-tensor reference.
void BM_GroupedScale(benchmark::State& state) {
  const bool fused = state.range(0) != 0;
  rs::PlanProblem p;
  p.devices = 8;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 64; ++i) {
    auto t = matrix(std::uniform_int_distribution<rs::Index>(1, 64)(rng), 64);
    t.name = "t" + std::to_string(i);
    t.order_index = static_cast<std::size_t>(i);
    p.tensors.push_back(t);
  }
  const auto plan = rs::Planner().plan(p).plan;
  rs::DBuffer buf(plan, rs::SimMesh::line(8));
  for (auto _ : state) {
    if (fused) {
      buf.apply(rs::ScaleOp{1.0001f});
    } else {
      rs::apply_sequential(buf, rs::ScaleOp{1.0001f});
    }
    benchmark::ClobberMemory();
  }
}

}  // namespace

BENCHMARK(BM_RaggedToReplicate)->ArgsProduct({{2, 4, 8}, {64, 1024}})->UseRealTime();
BENCHMARK(BM_GatherToRoot)->Arg(2)->Arg(4)->Arg(8)->UseRealTime();
BENCHMARK(BM_PartialToRagged)->Arg(2)->Arg(4)->Arg(8)->UseRealTime();
BENCHMARK(BM_GroupedScale)->Arg(0)->Arg(1);

BENCHMARK_MAIN();
