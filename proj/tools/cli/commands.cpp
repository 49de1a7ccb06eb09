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

#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "model_config.hpp"
#include "raggedshard/error.hpp"
#include "raggedshard/muon.hpp"
#include "raggedshard/plan_json.hpp"
#include "raggedshard/redistribute.hpp"

namespace raggedshard::cli {

namespace {

using Json = nlohmann::ordered_json;

std::string format(const char* fmt, ...) {
  va_list args;
  va_start(args, fmt);
  char buf[512];
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  return buf;
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::ConfigError, "cannot write " + path);
  f << text;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::NonDividingGranularity:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::MixedDtype:
    case ErrorCode::NotMatrix:
    case ErrorCode::LimitExceeded:
      return kExitConfig;
    default:
      return kExitFailure;
  }
}

// Runs `body`; errors become an {"error": ...} document on `out`.
int guarded(std::ostream& out, std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const Error& e) {
    Json j;
    j["error"]["code"] = std::string(to_string(e.code()));
    j["error"]["message"] = e.what();
    out << j.dump(2) << "\n";
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

Json violations_json(const std::vector<Violation>& vs) {
  Json arr = Json::array();
  for (const auto& v : vs) {
    Json jv;
    jv["constraint"] = std::string(to_string(v.kind));
    jv["tensor"] = v.tensor;
    if (!v.other.empty()) jv["other"] = v.other;
    if (v.boundary >= 0) jv["boundary"] = v.boundary;
    jv["detail"] = v.detail;
    arr.push_back(std::move(jv));
  }
  return arr;
}

// Problem fingerprint without tensor names, for sweep memoization.
std::string signature(const PlanProblem& p) {
  std::ostringstream s;
  s << p.devices << '/' << p.g_coll << '/' << static_cast<int>(p.ordering);
  for (const auto& t : p.tensors) {
    s << '|' << t.elem_bytes << ':' << static_cast<int>(t.granularity.kind()) << ':'
      << t.granularity.rows();
    for (Index b : t.granularity.block_shape()) s << 'b' << b;
    for (Index d : t.shape) s << 'x' << d;
  }
  return s.str();
}

struct ShardedModel {
  std::vector<PlanResult> plans;
  // Every planned tensor with the TensorSpec it was planned from.
  std::vector<std::pair<const PlacedTensor*, TensorSpec>> params;
};

ShardedModel shard_model(const ModelConfig& config, Index devices, int gcoll_bytes) {
  ShardedModel model;
  ProblemOptions opts;
  opts.devices = devices;
  opts.gcoll_bytes = gcoll_bytes;
  const auto problems = group_problems(config, opts);
  model.plans.reserve(problems.size());
  const Planner planner;
  for (const auto& p : problems) {
    model.plans.push_back(planner.plan(p));
    if (!model.plans.back().violations.empty()) {
      throw Error(ErrorCode::InternalInconsistency,
                  "planner produced an invalid plan: " +
                      to_string(model.plans.back().violations.front()));
    }
  }
  for (std::size_t g = 0; g < problems.size(); ++g) {
    for (const PlacedTensor& t : model.plans[g].plan.tensors) {
      model.params.emplace_back(&t, problems[g].tensors[t.tensor_index]);
    }
  }
  return model;
}

double max_rel_error(const std::vector<float>& a, const std::vector<float>& b) {
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::fabs(static_cast<double>(a[i]) - b[i]));
    scale = std::max(scale, std::fabs(static_cast<double>(b[i])));
  }
  return diff / std::max(scale, 1e-30);
}

int simulate_muon(const SimulateCommand& c, const ModelConfig& config, std::ostream& out,
                  std::ostream& err) {
  const ShardedModel model = shard_model(config, c.devices, c.gcoll_bytes);
  const SimMesh mesh = SimMesh::line(static_cast<int>(c.devices));
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);

  MuonConfig mc;
  mc.lr = c.lr;
  MuonState state{mc, {}, {}};
  LocalMuon local(mc);

  struct Param {
    TensorSpec spec;
    std::vector<Placement> placement;
    std::vector<float> w_local, target;
    DistTensor w, target_dist;
  };
  std::vector<Param> params;
  for (const auto& [placed, spec] : model.params) {
    Param p;
    p.spec = spec;
    p.placement = {RaggedShard{ragged_counts_of(*placed, c.devices)}};
    p.w_local.resize(static_cast<std::size_t>(spec.numel()));
    p.target.resize(p.w_local.size());
    for (auto& v : p.w_local) v = normal(rng);
    for (auto& v : p.target) v = normal(rng);
    p.w = distribute(spec, p.w_local, p.placement, mesh);
    p.target_dist = distribute(spec, p.target, p.placement, mesh);
    params.push_back(std::move(p));
  }

  std::ostringstream csv;
  csv << "step,loss,update_norm,max_rel_error\n";
  double worst = 0.0;
  for (int step = 0; step < c.steps; ++step) {
    double loss = 0.0;
    double update_sq = 0.0;
    double step_err = 0.0;
    for (Param& p : params) {
      // Synthetic objective 0.5 |W - W*|^2, gradient W - W*.
      std::vector<float> g(p.w_local.size());
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = p.w_local[i] - p.target[i];
        loss += 0.5 * static_cast<double>(g[i]) * g[i];
      }
      DistTensor gd = p.w;
      for (std::size_t r = 0; r < gd.locals.size(); ++r) {
        for (std::size_t i = 0; i < gd.locals[r].size(); ++i) {
          gd.locals[r][i] = p.w.locals[r][i] - p.target_dist.locals[r][i];
        }
      }
      const std::vector<float> before = p.w_local;
      if (p.spec.rank() == 2) {
        p.w = muon_step(p.w, gd, state, mesh);
        local.step(p.spec.name, p.spec.shape, p.w_local, g);
      } else {
        p.w = momentum_sgd_step(p.w, gd, state);
        local.sgd_step(p.spec.name, p.w_local, g);
      }
      for (std::size_t i = 0; i < before.size(); ++i) {
        const double d = static_cast<double>(p.w_local[i]) - before[i];
        update_sq += d * d;
      }
      step_err = std::max(step_err, max_rel_error(full_tensor(p.w, mesh), p.w_local));
    }
    worst = std::max(worst, step_err);
    csv << format("%d,%.6e,%.6e,%.6e\n", step + 1, loss, std::sqrt(update_sq), step_err);
  }
  emit(csv.str(), c.out, out);
  err << format("muon: %zu parameters on %lld ranks, %d steps, max relative error %.3e\n",
                params.size(), static_cast<long long>(c.devices), c.steps, worst);
  return worst < 1e-6 ? kExitOk : kExitInvalid;
}

int simulate_quant(const SimulateCommand& c, const ModelConfig& config, std::ostream& out,
                   std::ostream& err) {
  const ShardedModel model = shard_model(config, c.devices, c.gcoll_bytes);
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);

  std::ostringstream csv;
  csv << "tensor,contained,matches_single_rank,max_error,error_bound\n";
  bool ok = true;
  for (const PlanResult& r : model.plans) {
    std::map<std::string, QuantBlockSpec> specs;
    for (const auto& t : r.plan.tensors) specs[t.name] = c.block;
    const ContainmentReport report = containment_check(r.plan, specs);
    for (const auto& b : report.offending) {
      err << format("tile (%lld,%lld) of %s crosses device boundary %lld\n",
                    static_cast<long long>(b.block_row), static_cast<long long>(b.block_col),
                    b.tensor.c_str(), static_cast<long long>(b.boundary));
    }
    for (const PlacedTensor& t : r.plan.tensors) {
      const bool contained =
          std::none_of(report.offending.begin(), report.offending.end(),
                       [&](const OffendingBlock& b) { return b.tensor == t.name; });
      std::vector<float> x(static_cast<std::size_t>(t.numel()));
      for (auto& v : x) v = normal(rng);
      if (!contained) {
        ok = false;
        csv << t.name << ",false,,,\n";
        continue;
      }
      const QuantizedShard whole = blockwise_quantize(x, t.shape, 0, c.block);
      const std::vector<float> reference = blockwise_dequantize(whole, t.shape, 0, c.block);
      const QuantError e = quantization_error(x, whole, t.shape, 0, c.block);

      // Shard-local round trip; only meaningful when buffer order is row-major.
      bool matches = true;
      const bool row_major =
          block_layout({t.name, t.shape, r.plan.elem_bytes, t.granularity, t.order_index})
              .is_trivial();
      if (row_major) {
        for (const DeviceSlice& o : t.owners) {
          const Index begin = o.device * r.plan.shard_size + o.local.begin - t.interval.begin;
          const std::span<const float> shard(x.data() + begin,
                                             static_cast<std::size_t>(o.local.size()));
          const auto q = blockwise_quantize(shard, t.shape, begin, c.block);
          const auto deq = blockwise_dequantize(q, t.shape, begin, c.block);
          matches = matches && std::equal(deq.begin(), deq.end(), reference.begin() + begin);
        }
      }
      ok = ok && matches && e.within;
      csv << t.name << ",true," << (matches ? "true" : "false")
          << format(",%.6e,%.6e\n", e.max_error, e.bound);
    }
  }
  emit(csv.str(), c.out, out);
  err << format("quant: %s on %lld devices with %lldx%lld tiles\n",
                ok ? "contained" : "NOT contained", static_cast<long long>(c.devices),
                static_cast<long long>(c.block.rows), static_cast<long long>(c.block.cols));
  return ok ? kExitOk : kExitInvalid;
}

}  // namespace

int cmd_plan(const PlanCommand& c, std::ostream& out, std::ostream& err) {
  return guarded(out, err, [&] {
    const ModelConfig config = load_model_config(c.config);
    ProblemOptions opts{c.devices, c.gcoll_bytes, c.ordering, c.granularity};
    const auto problems = group_problems(config, opts);
    PlannerOptions po;
    po.try_all_orderings = c.all_orderings;
    const Planner planner(po);

    PlanSet set{config.name, {}};
    bool valid = true;
    double total = 0.0;
    double slowest = 0.0;
    Index padding = 0;
    Index elements = 0;
    for (std::size_t g = 0; g < problems.size(); ++g) {
      PlanResult r = planner.plan(problems[g]);
      valid = valid && r.violations.empty();
      total += r.seconds;
      slowest = std::max(slowest, r.seconds);
      padding += r.padding.padding_elements;
      elements += r.padding.tensor_elements;
      err << format("%-28s S=%-12lld padding=%-10lld %8.4f%%  %7.3f ms%s\n",
                    config.groups[g].name.c_str(), static_cast<long long>(r.plan.shard_size),
                    static_cast<long long>(r.padding.padding_elements), 100.0 * r.padding.ratio,
                    1e3 * r.seconds, r.violations.empty() ? "" : "  INVALID");
      for (const auto& v : r.violations) err << "  " << to_string(v) << "\n";
      set.groups.push_back({config.groups[g].name, std::move(r.plan), std::move(r.violations)});
    }
    emit(to_json(set) + "\n", c.out, out);
    err << format("%s: %zu groups, m=%lld, padding %.4f%%, planning %.3f ms total, %.3f ms max\n",
                  config.name.c_str(), problems.size(), static_cast<long long>(c.devices),
                  elements == 0 ? 0.0 : 100.0 * static_cast<double>(padding) / elements,
                  1e3 * total, 1e3 * slowest);
    return valid ? kExitOk : kExitInvalid;
  });
}

int cmd_validate(const ValidateCommand& c, std::ostream& out, std::ostream& err) {
  return guarded(out, err, [&] {
    const PlanSet set = plan_set_from_json(read_file(c.plan));
    std::map<std::string, PlanProblem> expected;
    if (!c.config.empty()) {
      const ModelConfig config = load_model_config(c.config);
      if (set.groups.empty()) throw Error(ErrorCode::ConfigError, "plan has no groups");
      ProblemOptions opts{set.groups.front().plan.devices, c.gcoll_bytes, Ordering::Default,
                          c.granularity};
      const auto problems = group_problems(config, opts);
      for (std::size_t g = 0; g < problems.size(); ++g) {
        expected.emplace(config.groups[g].name, problems[g]);
      }
      if (expected.size() != set.groups.size()) {
        throw Error(ErrorCode::ConfigError, "plan and config have different groups");
      }
    }

    Json j;
    j["format"] = "raggedshard.validation/v1";
    Json groups = Json::array();
    bool valid = true;
    for (const PlanDocument& doc : set.groups) {
      PlanProblem problem;
      if (expected.empty()) {
        problem = problem_of(doc.plan);
      } else {
        auto it = expected.find(doc.group);
        if (it == expected.end()) {
          throw Error(ErrorCode::ConfigError, "group '" + doc.group + "' is not in the config");
        }
        problem = it->second;
        problem.ordering = doc.plan.ordering;
      }
      const auto violations = validate_plan(doc.plan, problem);
      valid = valid && violations.empty();
      for (const auto& v : violations) err << doc.group << ": " << to_string(v) << "\n";
      Json jg;
      jg["group"] = doc.group;
      jg["violations"] = violations_json(violations);
      groups.push_back(std::move(jg));
    }
    j["groups"] = std::move(groups);
    j["valid"] = valid;
    emit(j.dump(2) + "\n", c.out, out);
    err << format("%zu groups, %s\n", set.groups.size(), valid ? "valid" : "INVALID");
    return valid ? kExitOk : kExitInvalid;
  });
}

int cmd_sweep(const SweepCommand& c, std::ostream& out, std::ostream& err) {
  return guarded(out, err, [&] {
    const ModelConfig config = load_model_config(c.config);
    struct Outcome {
      Index shard_size;
      Index padding;
      Index elements;
      bool valid;
    };
    std::map<std::string, Outcome> cache;
    const Planner planner;
    std::ostringstream csv;
    csv << "m,granularity,S,padding_elements,padding_ratio\n";
    bool valid = true;
    double slowest = 0.0;
    for (Index g : c.granularities) {
      for (Index m : c.devices) {
        const auto problems =
            group_problems(config, {m, c.gcoll_bytes, c.ordering, std::optional<Index>(g)});
        Index shard = 0;
        Index padding = 0;
        Index elements = 0;
        for (const auto& p : problems) {
          const std::string key = signature(p);
          auto it = cache.find(key);
          if (it == cache.end()) {
            const PlanResult r = planner.plan(p);
            slowest = std::max(slowest, r.seconds);
            it = cache.emplace(key, Outcome{r.plan.shard_size, r.padding.padding_elements,
                                            r.padding.tensor_elements, r.violations.empty()})
                     .first;
          }
          shard += it->second.shard_size;
          padding += it->second.padding;
          elements += it->second.elements;
          valid = valid && it->second.valid;
        }
        csv << format("%lld,%lld,%lld,%lld,%.6f\n", static_cast<long long>(m),
                      static_cast<long long>(g), static_cast<long long>(shard),
                      static_cast<long long>(padding),
                      elements == 0 ? 0.0 : static_cast<double>(padding) / elements);
      }
    }
    emit(csv.str(), c.out, out);
    err << format("%s: %zu points, %zu distinct group plans, slowest %.3f ms%s\n",
                  config.name.c_str(), c.devices.size() * c.granularities.size(), cache.size(),
                  1e3 * slowest, valid ? "" : ", INVALID plans present");
    return valid ? kExitOk : kExitInvalid;
  });
}

int cmd_simulate(const SimulateCommand& c, std::ostream& out, std::ostream& err) {
  return guarded(out, err, [&] {
    const ModelConfig config = load_model_config(c.config);
    if (c.devices < 1) throw Error(ErrorCode::InvalidArgument, "--devices must be positive");
    if (c.demo == "muon") return simulate_muon(c, config, out, err);
    if (c.demo == "quant") return simulate_quant(c, config, out, err);
    throw Error(ErrorCode::ConfigError, "unknown demo '" + c.demo + "'");
  });
}

}  // namespace raggedshard::cli
