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

#include "oracles.hpp"
#include "raggedshard/error.hpp"
#include "raggedshard/plan_json.hpp"

namespace raggedshard {
namespace {

TEST(PlanJson, RoundTripReproducesPlans) {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 200; ++trial) {
    PlanProblem p = testing::random_problem(rng);
    p.ordering = static_cast<Ordering>(trial % 3);
    const auto r = Planner().plan(p);
    PlanSet set{"m", {{"g0", r.plan, r.violations}, {"g1", r.plan, {}}}};
    const std::string text = to_json(set);
    const PlanSet back = plan_set_from_json(text);
    ASSERT_EQ(back.model, "m");
    ASSERT_EQ(back.groups.size(), 2u);
    ASSERT_EQ(back.groups[0].plan, r.plan);
    ASSERT_EQ(back.groups[1].group, "g1");
    ASSERT_EQ(to_json(back), text);
  }
}

TEST(PlanJson, SingleDocumentAccepted) {
  const auto p = testing::problem({{6, 3}, {4, 2}}, 2);
  const auto r = Planner().plan(p);
  const std::string text = to_json(PlanDocument{"toy", r.plan, {}});
  const PlanSet back = plan_set_from_json(text);
  ASSERT_EQ(back.groups.size(), 1u);
  EXPECT_EQ(back.groups[0].plan, r.plan);
  EXPECT_NE(text.find("\"format\": \"raggedshard.plan/v1\""), std::string::npos);
}

TEST(PlanJson, FieldOrderIsStable) {
  const auto p = testing::problem({{4, 4}, {4, 4}}, 2);
  const auto r = Planner().plan(p);
  const std::string text = to_json(PlanDocument{"g", r.plan, {}}, -1);
  const std::string prefix =
      R"({"format":"raggedshard.plan/v1","group":"g","devices":2,"shard_size":4,"g_coll":)";
  EXPECT_EQ(text.substr(0, prefix.size()), prefix);
}

TEST(PlanJson, MalformedInputIsConfigError) {
  for (const char* bad : {"{", "[]", R"({"format":"other"})", R"({"format":"raggedshard.plan/v1"})"}) {
    try {
      plan_set_from_json(bad);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::ConfigError) << bad;
    }
  }
}

}  // namespace
}  // namespace raggedshard
