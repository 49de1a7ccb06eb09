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

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "raggedshard/planner.hpp"

namespace raggedshard {

/// One planned communication group as written to disk.
struct PlanDocument {
  std::string group;
  LayoutPlan plan;
  std::vector<Violation> violations;
};

/// All groups of one model.
struct PlanSet {
  std::string model;
  std::vector<PlanDocument> groups;
};

inline constexpr std::string_view kPlanFormat = "raggedshard.plan/v1";

/// Stable field order and integer-exact offsets; byte-identical for
/// identical inputs.
std::string to_json(const PlanDocument& doc, int indent = 2);
std::string to_json(const PlanSet& set, int indent = 2);

/// Accepts either a single plan document or a plan set. Throws
/// Error(ConfigError) for malformed input.
PlanSet plan_set_from_json(std::string_view text);

}  // namespace raggedshard
