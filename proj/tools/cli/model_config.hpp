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

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "raggedshard/planner.hpp"

namespace raggedshard::cli {

struct TensorEntry {
  TensorSpec spec;
  /// Row granularity of this tensor follows --granularity when set.
  bool sweep = false;
};

struct GroupConfig {
  std::string name;
  /// Indices into ModelConfig::tensors, declaration order.
  std::vector<std::size_t> members;
};

/// Model description read from JSON. Entries of "tensors" and "groups" are
/// either plain objects or loops {"for": var, "range": [lo, hi], "body": [...]}
/// whose bodies substitute "{var}" in every string. A group selects tensors by
/// "prefix" or by an explicit "tensors" list; without groups every tensor
/// goes into one group named after the model.
struct ModelConfig {
  std::string name;
  std::string source;
  std::vector<TensorEntry> tensors;
  std::vector<GroupConfig> groups;
};

/// Throws Error(ConfigError) for malformed documents and tensors that belong
/// to no group or to several.
ModelConfig parse_model_config(std::string_view text);
ModelConfig load_model_config(const std::string& path);

struct ProblemOptions {
  Index devices = 1;
  int gcoll_bytes = 16;
  Ordering ordering = Ordering::Default;
  std::optional<Index> sweep_rows;
};

/// One planning problem per group, tensors in declaration order.
std::vector<PlanProblem> group_problems(const ModelConfig& config,
                                        const ProblemOptions& options);

}  // namespace raggedshard::cli
