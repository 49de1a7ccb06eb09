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

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "raggedshard/error.hpp"
#include "raggedshard/plan_json.hpp"
#include "raggedshard/planner.hpp"

namespace raggedshard {
namespace {

using testing::brute_min_shard;
using testing::plan_defects;
using testing::problem;
using testing::random_problem;

std::vector<Index> starts_of(const LayoutPlan& plan) {
  std::vector<Index> out;
  for (const auto& t : plan.tensors) out.push_back(t.interval.begin);
  return out;
}

LayoutPlan plan_at(const PlanProblem& p, Index S) {
  const Feasibility f = check_valid_shard(p, S);
  EXPECT_TRUE(f.feasible);
  return build_plan(p, S, f.state);
}

// Tensor (in buffer order) whose interval fully covers some device shard.
bool covers_a_shard(Index begin, Index numel, Index S) {
  const Index first = (begin + S - 1) / S * S;
  return first + S <= begin + numel;
}

TEST(CheckValidShard, ExactFit) {
  const auto p = problem({{4, 4}, {4, 4}}, 2);
  const auto f = check_valid_shard(p, 4);
  ASSERT_TRUE(f.feasible);
  EXPECT_EQ(f.state.starts, (std::vector<Index>{0, 4}));
}

TEST(CheckValidShard, CapacityBound) {
  EXPECT_FALSE(check_valid_shard(problem({{6, 3}, {4, 2}}, 2), 4).feasible);
}

TEST(CheckValidShard, BoundaryOnBlockEdge) {
  // With e=4 for the second tensor, S=5 leaves no slack and t1 would have to
  // start at 0; the two-element variant has the witness t1[2,8), t2[8,10).
  EXPECT_FALSE(check_valid_shard(problem({{6, 3}, {4, 2}}, 2), 5).feasible);
  const auto f = check_valid_shard(problem({{6, 3}, {2, 2}}, 2), 5);
  ASSERT_TRUE(f.feasible);
  EXPECT_EQ(f.state.starts, (std::vector<Index>{2, 8}));
}

TEST(CheckValidShard, RejectsMisalignedShardSize) {
  EXPECT_THROW(check_valid_shard(problem({{8, 1}}, 2, 4), 6), Error);
  EXPECT_THROW(check_valid_shard(problem({{8, 1}}, 2, 1), 0), Error);
}

TEST(MinShardSize, SixForTheFourElementPair) {
  const auto p = problem({{6, 3}, {4, 2}}, 2);
  EXPECT_EQ(min_shard_size(p), 6);
  EXPECT_EQ(oracle_min_shard(p), 6);
  EXPECT_EQ(brute_min_shard(p), 6);
}

TEST(MinShardSize, EmptyPrefixFindsFive) {
  const auto p = problem({{6, 3}, {2, 2}}, 2);
  EXPECT_EQ(min_shard_size(p), 5);
  EXPECT_EQ(oracle_min_shard(p), 5);
  EXPECT_EQ(brute_min_shard(p), 5);
}

TEST(MinShardSize, PrefixOnlySearchGivesSix) {
  const auto p = problem({{6, 3}, {2, 2}}, 2);
  SearchOptions opts;
  opts.search_empty_prefix = false;
  SearchTrace trace;
  EXPECT_EQ(min_shard_size(p, opts, &trace), 6);
  EXPECT_EQ(trace.units, (std::vector<Index>{2, 6}));
  // Ratio 1.2, within the factor two of the order-fixed optimum.
  EXPECT_LE(6, 2 * oracle_min_shard(p));
}

TEST(MinShardSize, EvenSplit) {
  const auto p = problem({{8, 1}}, 2);
  EXPECT_EQ(min_shard_size(p), 4);
  const auto r = Planner().plan(p);
  EXPECT_EQ(r.padding.padding_elements, 0);
}

TEST(MinShardSize, ZeroTensors) {
  PlanProblem p;
  p.devices = 3;
  EXPECT_EQ(min_shard_size(p), 0);
  const auto r = Planner().plan(p);
  EXPECT_EQ(r.plan.shard_size, 0);
  EXPECT_TRUE(r.plan.tensors.empty());
  EXPECT_TRUE(r.violations.empty());
}

TEST(BuildPlan, ExactFit) {
  const auto plan = plan_at(problem({{4, 4}, {4, 4}}, 2), 4);
  EXPECT_EQ(starts_of(plan), (std::vector<Index>{0, 4}));
  EXPECT_TRUE(plan.padding.empty());
}

TEST(BuildPlan, LeftmostWitnessAtSix) {
  const auto p = problem({{6, 3}, {4, 2}}, 2);
  const auto plan = plan_at(p, 6);
  EXPECT_EQ(plan.tensors[0].interval, (Interval{0, 6}));
  EXPECT_EQ(plan.tensors[1].interval, (Interval{6, 10}));
  EXPECT_EQ(plan.padding, (std::vector<Interval>{{10, 12}}));
  EXPECT_DOUBLE_EQ(padding_report(plan).ratio, 0.2);
  EXPECT_TRUE(validate_plan(plan, p).empty());
}

TEST(BuildPlan, SingleTensorEndsOnBoundary) {
  const auto p = problem({{10, 5}}, 3);
  const auto plan = plan_at(p, 5);
  EXPECT_EQ(plan.tensors[0].interval, (Interval{0, 10}));
  EXPECT_EQ(plan.padding, (std::vector<Interval>{{10, 15}}));
  EXPECT_EQ(plan.tensors[0].owners.size(), 2u);
}

TEST(BuildPlan, InconsistentStateIsReported) {
  const auto p = problem({{6, 3}, {4, 2}}, 2);
  auto f = check_valid_shard(p, 5);
  f.state.starts[0] = 1;
  try {
    build_plan(p, 5, f.state);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InternalInconsistency);
  }
}

TEST(ValidatePlan, CutBlockNamesBoundary) {
  const auto p = problem({{6, 3}}, 2);
  const std::vector<std::size_t> order{0};
  const std::vector<Index> starts{0};
  const auto v = validate_plan(assemble_plan(p, 4, order, starts), p);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, Violation::Kind::NonShardedBlock);
  EXPECT_EQ(v[0].tensor, "t1");
  EXPECT_EQ(v[0].boundary, 1);
}

TEST(ValidatePlan, Overlap) {
  const auto p = problem({{4, 1}, {4, 1}}, 2);
  const std::vector<std::size_t> order{0, 1};
  const std::vector<Index> starts{0, 2};
  const auto v = validate_plan(assemble_plan(p, 4, order, starts), p);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, Violation::Kind::Overlap);
  EXPECT_EQ(v[0].tensor, "t1");
  EXPECT_EQ(v[0].other, "t2");
}

TEST(ValidatePlan, OrderAndMissing) {
  const auto p = problem({{4, 1}, {4, 1}}, 2);
  const std::vector<std::size_t> swapped{1, 0};
  const std::vector<Index> starts{0, 4};
  auto v = validate_plan(assemble_plan(p, 4, swapped, starts), p);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, Violation::Kind::Order);

  const std::vector<std::size_t> one{0};
  const std::vector<Index> start{0};
  v = validate_plan(assemble_plan(p, 4, one, start), p);
  ASSERT_FALSE(v.empty());
  EXPECT_EQ(v[0].kind, Violation::Kind::MissingTensor);
}

TEST(ValidatePlan, OutOfBoundsAndAlignment) {
  const auto p = problem({{4, 1}, {4, 1}}, 2, 2);
  const std::vector<std::size_t> order{0, 1};
  const std::vector<Index> starts{0, 6};
  auto v = validate_plan(assemble_plan(p, 4, order, starts), p);
  ASSERT_FALSE(v.empty());
  EXPECT_EQ(v[0].kind, Violation::Kind::OutOfBounds);
  const std::vector<Index> fits{0, 3};
  v = validate_plan(assemble_plan(p, 3, order, fits), p);
  ASSERT_FALSE(v.empty());
  EXPECT_EQ(v[0].kind, Violation::Kind::Alignment);
}

TEST(ValidatePlan, AgreesWithIndependentChecker) {
  std::mt19937_64 rng(17);
  int broken = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const PlanProblem p = random_problem(rng);
    LayoutPlan plan = Planner().plan(p).plan;
    // Nudge one tensor; both checkers must agree on whether it still holds.
    auto& t = plan.tensors[static_cast<std::size_t>(trial) % plan.tensors.size()];
    const Index shift = std::uniform_int_distribution<Index>(-2, 2)(rng);
    t.interval.begin += shift;
    t.interval.end += shift;
    std::vector<std::size_t> order;
    std::vector<Index> starts;
    for (const auto& x : plan.tensors) {
      order.push_back(x.tensor_index);
      starts.push_back(x.interval.begin);
    }
    if (starts.front() < 0) continue;
    const LayoutPlan moved = assemble_plan(p, plan.shard_size, order, starts);
    const bool ours = validate_plan(moved, p).empty();
    const bool theirs = plan_defects(moved, p).empty();
    ASSERT_EQ(ours, theirs) << "trial " << trial;
    broken += ours ? 0 : 1;
  }
  EXPECT_GT(broken, 50);
}

TEST(Oracle, Examples) {
  EXPECT_EQ(oracle_min_shard(problem({{8, 1}}, 2)), 4);
  EXPECT_EQ(oracle_min_shard(problem({{9, 9}}, 2)), 9);
  EXPECT_THROW(oracle_min_shard(problem({{300, 1}}, 2)), Error);
}

TEST(Oracle, MatchesTestSideEnumeration) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 300; ++trial) {
    const PlanProblem p = random_problem(rng);
    ASSERT_EQ(oracle_min_shard(p), brute_min_shard(p)) << "trial " << trial;
  }
}

TEST(MinShardSize, WithinTwiceTheOracle) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 300; ++trial) {
    const PlanProblem p = random_problem(rng);
    const Index best = brute_min_shard(p);
    const Index s = min_shard_size(p);
    ASSERT_TRUE(check_valid_shard(p, s).feasible);
    ASSERT_GE(s, best);
    ASSERT_LE(s, 2 * best);
  }
}

TEST(MinShardSize, LowerBoundAndUnitBlockEquality) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    PlanProblem p = random_problem(rng);
    Index total = 0;
    for (const auto& t : p.tensors) total += t.numel();
    const Index lower = round_up(ceil_div(total, p.devices), p.g_coll);
    ASSERT_GE(min_shard_size(p), lower);
    for (auto& t : p.tensors) t.granularity = Granularity::element();
    ASSERT_EQ(min_shard_size(p), lower);
  }
}

TEST(Feasibility, MonotoneWithoutShardCoveringTensors) {
  std::mt19937_64 rng(37);
  int used = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const PlanProblem p = random_problem(rng);
    Index total = 0;
    for (const auto& t : p.tensors) total += t.numel();
    for (Index S = p.g_coll; S <= round_up(total, p.g_coll); S += p.g_coll) {
      const auto f = check_valid_shard(p, S);
      if (!f.feasible) continue;
      bool covering = false;
      for (std::size_t i = 0; i < f.state.order.size(); ++i) {
        covering = covering ||
                   covers_a_shard(f.state.starts[i], p.tensors[f.state.order[i]].numel(), S);
      }
      if (covering) continue;
      ++used;
      ASSERT_TRUE(check_valid_shard(p, S + p.g_coll).feasible) << "trial " << trial << " S " << S;
    }
  }
  EXPECT_GT(used, 100);
}

TEST(Feasibility, MonotoneOverUnitMultiples) {
  std::mt19937_64 rng(41);
  int used = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const PlanProblem p = random_problem(rng);
    SearchTrace trace;
    min_shard_size(p, {}, &trace);
    Index total = 0;
    for (const auto& t : p.tensors) total += t.numel();
    for (Index g : trace.units) {
      for (Index S = g; S <= round_up(total, g); S += g) {
        const auto f = check_valid_shard(p, S);
        if (!f.feasible) continue;
        // Tensors covering a whole shard must have blocks dividing the unit.
        bool applies = true;
        for (std::size_t i = 0; i < f.state.order.size(); ++i) {
          const auto& t = p.tensors[f.state.order[i]];
          if (covers_a_shard(f.state.starts[i], t.numel(), S) &&
              g % resolve_granularity(t) != 0) {
            applies = false;
          }
        }
        if (!applies) continue;
        ++used;
        ASSERT_TRUE(check_valid_shard(p, S + g).feasible)
            << "trial " << trial << " unit " << g << " S " << S;
      }
    }
  }
  EXPECT_GT(used, 100);
}

TEST(DpState, SegmentsAreMonotoneAndCoverBlocks) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 300; ++trial) {
    const PlanProblem p = random_problem(rng);
    const Index S = min_shard_size(p);
    const auto f = check_valid_shard(p, S);
    ASSERT_TRUE(f.feasible);
    Index last = 0;
    for (std::size_t i = 0; i < f.state.segments.size(); ++i) {
      const auto& t = p.tensors[f.state.order[i]];
      const auto& segs = f.state.segments[i];
      Index next_block = 0;
      std::set<Index> values;
      for (const auto& s : segs) {
        ASSERT_EQ(s.first_block, next_block);
        ASSERT_LE(s.first_block, s.last_block);
        ASSERT_GE(s.shards, last);
        last = s.shards;
        values.insert(s.shards);
        next_block = s.last_block + 1;
      }
      ASSERT_EQ(next_block, block_count(t));
      ASSERT_LE(static_cast<Index>(values.size()), p.devices);
    }
  }
}

TEST(Planner, EveryPlanIsValid) {
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 500; ++trial) {
    PlanProblem p = random_problem(rng);
    p.ordering = static_cast<Ordering>(trial % 3);
    const auto r = Planner().plan(p);
    ASSERT_TRUE(r.violations.empty()) << to_string(r.violations.front());
    const auto defects = plan_defects(r.plan, p);
    ASSERT_TRUE(defects.empty()) << defects.front();
  }
}

TEST(Planner, Deterministic) {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 100; ++trial) {
    const PlanProblem p = random_problem(rng);
    const auto a = Planner().plan(p);
    const auto b = Planner().plan(p);
    ASSERT_EQ(a.plan, b.plan);
    ASSERT_EQ(to_json(PlanDocument{"g", a.plan, a.violations}),
              to_json(PlanDocument{"g", b.plan, b.violations}));
  }
}

TEST(Planner, AllOrderingsNeverWorse) {
  std::mt19937_64 rng(59);
  PlannerOptions all;
  all.try_all_orderings = true;
  for (int trial = 0; trial < 200; ++trial) {
    const PlanProblem p = random_problem(rng);
    const auto best = Planner(all).plan(p);
    ASSERT_TRUE(best.violations.empty());
    for (Ordering o : {Ordering::Default, Ordering::ByBlockSize, Ordering::ByShape}) {
      PlanProblem q = p;
      q.ordering = o;
      ASSERT_LE(best.plan.shard_size, Planner().plan(q).plan.shard_size);
    }
  }
}

TEST(Ordering, BlockSizeDescendingStable) {
  auto p = problem({{4, 1}, {8, 4}, {6, 2}, {8, 4}}, 2);
  p.ordering = Ordering::ByBlockSize;
  EXPECT_EQ(layout_order(p), (std::vector<std::size_t>{1, 3, 2, 0}));
  p.ordering = Ordering::Default;
  EXPECT_EQ(layout_order(p), (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(Ordering, ShapeGroupsEqualShapes) {
  auto p = problem({{4, 1}, {8, 1}, {4, 1}, {6, 1}}, 2);
  p.ordering = Ordering::ByShape;
  EXPECT_EQ(layout_order(p), (std::vector<std::size_t>{1, 3, 0, 2}));
  EXPECT_EQ(parse_ordering("block"), Ordering::ByBlockSize);
  EXPECT_FALSE(parse_ordering("size").has_value());
}

TEST(Problem, MixedWidthsAndDuplicatesRejected) {
  auto p = problem({{4, 1}, {4, 1}}, 2);
  p.tensors[1].elem_bytes = 2;
  try {
    check_problem(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MixedDtype);
  }
  p.tensors[1].elem_bytes = 4;
  p.tensors[1].name = "t1";
  EXPECT_THROW(check_problem(p), Error);
  EXPECT_EQ(default_g_coll(2), 8);
  EXPECT_EQ(default_g_coll(4), 4);
  EXPECT_EQ(default_g_coll(8), 2);
}

TEST(ProblemOf, RecoversTheProblem) {
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 100; ++trial) {
    const PlanProblem p = random_problem(rng);
    const auto plan = Planner().plan(p).plan;
    const PlanProblem q = problem_of(plan);
    EXPECT_TRUE(validate_plan(plan, q).empty());
    EXPECT_EQ(q.devices, p.devices);
    EXPECT_EQ(q.g_coll, p.g_coll);
  }
}

}  // namespace
}  // namespace raggedshard
