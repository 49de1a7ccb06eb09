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

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "cli/commands.hpp"

namespace {

using namespace raggedshard;
using namespace raggedshard::cli;

Ordering ordering_flag(const std::string& s) {
  if (auto o = parse_ordering(s)) return *o;
  throw CLI::ValidationError("--ordering", "expected default, block or shape");
}

QuantBlockSpec block_flag(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    return {std::stoll(s.substr(0, x)), std::stoll(s.substr(x + 1))};
  } catch (const std::exception&) {
    throw CLI::ValidationError("--block", "expected ROWSxCOLS, e.g. 32x32");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RaggedShard layout planner and simulated-mesh driver"};
  app.require_subcommand(1);
  int code = kExitOk;

  PlanCommand plan;
  std::string plan_ordering = "default";
  Index plan_granularity = 0;
  auto* p = app.add_subcommand("plan", "Plan every group of a model config and emit plan JSON");
  p->add_option("config", plan.config, "Model config JSON")->required()->check(CLI::ExistingFile);
  p->add_option("--devices,-m", plan.devices, "Devices per group")->check(CLI::PositiveNumber);
  p->add_option("--gcoll-bytes", plan.gcoll_bytes, "Collective alignment in bytes")
      ->check(CLI::PositiveNumber);
  p->add_option("--ordering", plan_ordering, "default, block or shape");
  p->add_flag("--all-orderings", plan.all_orderings, "Keep the best of all three orderings");
  p->add_option("--granularity", plan_granularity, "Row granularity of sweep tensors")
      ->check(CLI::PositiveNumber);
  p->add_option("--out,-o", plan.out, "Output file (default stdout)");
  p->callback([&] {
    plan.ordering = ordering_flag(plan_ordering);
    if (plan_granularity > 0) plan.granularity = plan_granularity;
    code = cmd_plan(plan, std::cout, std::cerr);
  });

  ValidateCommand validate;
  Index validate_granularity = 0;
  auto* v = app.add_subcommand("validate", "Check a plan JSON against the layout constraints");
  v->add_option("plan", validate.plan, "Plan JSON")->required()->check(CLI::ExistingFile);
  v->add_option("--config", validate.config, "Model config the plan should match")
      ->check(CLI::ExistingFile);
  v->add_option("--gcoll-bytes", validate.gcoll_bytes, "Collective alignment in bytes")
      ->check(CLI::PositiveNumber);
  v->add_option("--granularity", validate_granularity, "Row granularity of sweep tensors")
      ->check(CLI::PositiveNumber);
  v->add_option("--out,-o", validate.out, "Output file (default stdout)");
  v->callback([&] {
    if (validate_granularity > 0) validate.granularity = validate_granularity;
    code = cmd_validate(validate, std::cout, std::cerr);
  });

  SweepCommand sweep;
  std::string sweep_ordering = "default";
  auto* s = app.add_subcommand("sweep", "Padding ratio over device counts and granularities (CSV)");
  s->add_option("config", sweep.config, "Model config JSON")->required()->check(CLI::ExistingFile);
  s->add_option("--devices,-m", sweep.devices, "Device counts")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  s->add_option("--granularity", sweep.granularities, "Row granularities of sweep tensors")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  s->add_option("--gcoll-bytes", sweep.gcoll_bytes, "Collective alignment in bytes")
      ->check(CLI::PositiveNumber);
  s->add_option("--ordering", sweep_ordering, "default, block or shape");
  s->add_option("--out,-o", sweep.out, "Output file (default stdout)");
  s->callback([&] {
    sweep.ordering = ordering_flag(sweep_ordering);
    code = cmd_sweep(sweep, std::cout, std::cerr);
  });

  SimulateCommand sim;
  std::string sim_block = "32x32";
  auto* d = app.add_subcommand("simulate", "Run the Muon or quantization demo on a simulated mesh");
  d->add_option("config", sim.config, "Model config JSON")->required()->check(CLI::ExistingFile);
  d->add_option("--demo", sim.demo, "muon or quant")->check(CLI::IsMember({"muon", "quant"}));
  d->add_option("--devices,-m", sim.devices, "Mesh size")->check(CLI::PositiveNumber);
  d->add_option("--gcoll-bytes", sim.gcoll_bytes, "Collective alignment in bytes")
      ->check(CLI::PositiveNumber);
  d->add_option("--steps", sim.steps, "Muon steps")->check(CLI::PositiveNumber);
  d->add_option("--lr", sim.lr, "Muon learning rate");
  d->add_option("--block", sim_block, "Quantization tile, ROWSxCOLS");
  d->add_option("--seed", sim.seed, "RNG seed for synthetic data");
  d->add_option("--out,-o", sim.out, "Output file (default stdout)");
  d->callback([&] {
    sim.block = block_flag(sim_block);
    code = cmd_simulate(sim, std::cout, std::cerr);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }
  return code;
}
