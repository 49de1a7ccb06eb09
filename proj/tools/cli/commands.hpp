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

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "raggedshard/planner.hpp"
#include "raggedshard/quant.hpp"

namespace raggedshard::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitConfig = 3;

struct PlanCommand {
  std::string config;
  Index devices = 8;
  int gcoll_bytes = 16;
  Ordering ordering = Ordering::Default;
  bool all_orderings = false;
  std::optional<Index> granularity;
  std::string out;
};

struct ValidateCommand {
  std::string plan;
  /// When set, the plan is checked against the problems of this config.
  std::string config;
  int gcoll_bytes = 16;
  std::optional<Index> granularity;
  std::string out;
};

struct SweepCommand {
  std::string config;
  std::vector<Index> devices{8, 16, 32, 64, 128, 256, 512};
  std::vector<Index> granularities{1, 16, 128};
  int gcoll_bytes = 16;
  Ordering ordering = Ordering::Default;
  std::string out;
};

struct SimulateCommand {
  std::string config;
  std::string demo = "muon";
  Index devices = 4;
  int gcoll_bytes = 16;
  int steps = 50;
  float lr = 0.02f;
  QuantBlockSpec block;
  std::uint64_t seed = 0;
  std::string out;
};

/// Each command writes its report (JSON or CSV) to `out`, or to the file
/// named by the command's `out` field, and human-readable notes to `err`.
/// Errors are caught and mapped to exit codes.
int cmd_plan(const PlanCommand& c, std::ostream& out, std::ostream& err);
int cmd_validate(const ValidateCommand& c, std::ostream& out, std::ostream& err);
int cmd_sweep(const SweepCommand& c, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimulateCommand& c, std::ostream& out, std::ostream& err);

}  // namespace raggedshard::cli
