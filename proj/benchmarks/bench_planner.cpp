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

#include <map>
#include <string>

#include "cli/model_config.hpp"
#include "raggedshard/planner.hpp"

namespace rs = raggedshard;

namespace {

const rs::cli::ModelConfig& model(const std::string& file) {
  static std::map<std::string, rs::cli::ModelConfig> cache;
  auto it = cache.find(file);
  if (it == cache.end()) {
    it = cache.emplace(file, rs::cli::load_model_config(std::string(RAGGEDSHARD_CONFIG_DIR) + "/" + file))
             .first;
  }
  return it->second;
}

// Largest group of the model, the one that bounds per-group planning time.
rs::PlanProblem largest_group(const std::string& file, rs::Index m, rs::Index rows) {
  rs::PlanProblem best;
  std::size_t most = 0;
  for (auto& p : rs::cli::group_problems(model(file), {m, 16, rs::Ordering::Default, rows})) {
    if (p.tensors.size() > most) {
      most = p.tensors.size();
      best = std::move(p);
    }
  }
  return best;
}

void BM_PlanGroup(benchmark::State& state, const char* file) {
  const auto p = largest_group(file, state.range(0), state.range(1));
  const rs::Planner planner;
  for (auto _ : state) {
    benchmark::DoNotOptimize(planner.plan(p));
  }
  state.counters["tensors"] = static_cast<double>(p.tensors.size());
}

void BM_CheckValidShard(benchmark::State& state) {
  const auto p = largest_group("deepseek_v3_671b.json", state.range(0), 128);
  const rs::Index s = rs::min_shard_size(p);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rs::check_valid_shard(p, s));
  }
}

void BM_MinShardSize(benchmark::State& state) {
  const auto p = largest_group("gpt_oss_120b.json", state.range(0), state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(rs::min_shard_size(p));
  }
}

}  // namespace

BENCHMARK_CAPTURE(BM_PlanGroup, gpt_oss, "gpt_oss_120b.json")
    ->ArgsProduct({{8, 64, 512}, {1, 16, 128}})
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_PlanGroup, deepseek_v3, "deepseek_v3_671b.json")
    ->ArgsProduct({{8, 64, 512}, {1, 16, 128}})
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CheckValidShard)->Arg(8)->Arg(128)->Arg(512)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_MinShardSize)->ArgsProduct({{64, 512}, {16, 128}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
