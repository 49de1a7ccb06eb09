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

#include "raggedshard/planner.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <numeric>
#include <set>

#include "raggedshard/error.hpp"

namespace raggedshard {

namespace {

struct Item {
  Index numel;
  Index block;
};

std::vector<Item> items_of(const PlanProblem& problem) {
  std::vector<Item> items;
  items.reserve(problem.tensors.size());
  for (const auto& t : problem.tensors) {
    items.push_back({t.numel(), resolve_granularity(t)});
  }
  return items;
}

// Leftmost offset >= lo at which a tensor of `numel` elements with blocks of
// `block` elements can start, or nullopt if none fits below `capacity`.
//
// Only the first boundary b after the start and the tensor head b - start
// matter: later boundaries sit at head + j*S, which are block aligned iff
// S % block == 0 or the tensor ends before the second one.
std::optional<Index> leftmost_start(Index lo, Index numel, Index block,
                                    Index shard, Index capacity) {
  Index p = lo;
  for (;;) {
    if (p + numel > capacity) return std::nullopt;
    const Index device = p / shard;
    const Index boundary = (device + 1) * shard;
    if (p + numel <= boundary) return p;
    const Index head = ((boundary - p) / block) * block;
    if (head > 0 && (shard % block == 0 || head + shard >= numel)) {
      const Index start = boundary - head;
      if (start + numel > capacity) return std::nullopt;
      return start;
    }
    // Windows that begin on a boundary all look alike.
    if (p == device * shard) return std::nullopt;
    p = boundary;
  }
}

}  // namespace

std::string_view to_string(Ordering o) {
  switch (o) {
    case Ordering::Default: return "default";
    case Ordering::ByBlockSize: return "block";
    case Ordering::ByShape: return "shape";
  }
  return "default";
}

std::optional<Ordering> parse_ordering(std::string_view s) {
  if (s == "default") return Ordering::Default;
  if (s == "block") return Ordering::ByBlockSize;
  if (s == "shape") return Ordering::ByShape;
  return std::nullopt;
}

Index default_g_coll(int elem_bytes, int alignment_bytes) {
  if (elem_bytes < 1 || alignment_bytes < 1) {
    throw Error(ErrorCode::InvalidArgument, "byte widths must be positive");
  }
  return ceil_div(alignment_bytes, elem_bytes);
}

void check_problem(const PlanProblem& problem) {
  if (problem.devices < 1) {
    throw Error(ErrorCode::InvalidArgument, "device count must be >= 1");
  }
  if (problem.g_coll < 1) {
    throw Error(ErrorCode::InvalidArgument, "g_coll must be >= 1");
  }
  std::set<std::string_view> names;
  for (const auto& t : problem.tensors) {
    resolve_granularity(t);
    if (t.elem_bytes != problem.tensors.front().elem_bytes) {
      throw Error(ErrorCode::MixedDtype,
                  t.name + " has " + std::to_string(t.elem_bytes) +
                      "-byte elements, group uses " +
                      std::to_string(problem.tensors.front().elem_bytes));
    }
    if (!names.insert(t.name).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate tensor " + t.name);
    }
  }
}

std::vector<std::size_t> layout_order(const PlanProblem& problem) {
  const auto& ts = problem.tensors;
  std::vector<std::size_t> order(ts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ts[a].order_index < ts[b].order_index;
  });
  switch (problem.ordering) {
    case Ordering::Default:
      break;
    case Ordering::ByBlockSize:
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) {
                         return resolve_granularity(ts[a]) >
                                resolve_granularity(ts[b]);
                       });
      break;
    case Ordering::ByShape:
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) {
                         return ts[a].shape > ts[b].shape;
                       });
      break;
  }
  return order;
}

Feasibility check_valid_shard(const PlanProblem& problem, Index shard_size) {
  if (shard_size < 1 || shard_size % problem.g_coll != 0) {
    throw Error(ErrorCode::InvalidArgument,
                "shard size " + std::to_string(shard_size) +
                    " is not a positive multiple of g_coll " +
                    std::to_string(problem.g_coll));
  }
  const std::vector<Item> items = items_of(problem);
  const Index capacity = problem.devices * shard_size;

  Feasibility out;
  DpState& state = out.state;
  state.shard_size = shard_size;
  state.order = layout_order(problem);

  Index cursor = 0;
  for (std::size_t idx : state.order) {
    const Item& item = items[idx];
    const auto start =
        leftmost_start(cursor, item.numel, item.block, shard_size, capacity);
    if (!start) {
      state.shards_used = problem.devices + 1;
      return out;
    }
    const Index blocks = item.numel / item.block;
    std::vector<DpSegment> segs;
    Index l = 0;
    while (l < blocks) {
      // dp is constant while blocks stay on the same shard.
      const Index shard = (*start + l * item.block) / shard_size;
      const Index room = (shard + 1) * shard_size - *start;
      const Index r = std::min(blocks - 1, room / item.block - 1);
      segs.push_back({l, r, shard + 1});
      l = r + 1;
    }
    state.starts.push_back(*start);
    state.segments.push_back(std::move(segs));
    cursor = *start + item.numel;
  }
  state.shards_used = cursor == 0 ? 0 : ceil_div(cursor, shard_size);
  out.feasible = state.shards_used <= problem.devices;
  return out;
}

Index min_shard_size(const PlanProblem& problem, const SearchOptions& options,
                     SearchTrace* trace) {
  check_problem(problem);
  if (problem.tensors.empty()) return 0;

  const std::vector<Item> items = items_of(problem);
  Index total = 0;
  Index upper_elems = 0;
  for (const Item& it : items) {
    total += it.numel;
    upper_elems += it.numel + it.block;
  }
  const Index lower_elems = ceil_div(total, problem.devices);

  std::vector<std::size_t> by_size(items.size());
  std::iota(by_size.begin(), by_size.end(), std::size_t{0});
  std::stable_sort(by_size.begin(), by_size.end(),
                   [&](std::size_t a, std::size_t b) {
                     return items[a].numel < items[b].numel;
                   });

  std::vector<Index> units;
  if (options.search_empty_prefix) units.push_back(problem.g_coll);
  Index unit = problem.g_coll;
  for (std::size_t idx : by_size) {
    Index next = 0;
    try {
      next = lcm(unit, items[idx].block);
    } catch (const Error&) {
      break;
    }
    // Multiples of a unit beyond the always-feasible bound cannot win.
    if (next > round_up(upper_elems, problem.g_coll)) break;
    unit = next;
    if (units.empty() || units.back() != unit) units.push_back(unit);
  }
  if (units.empty()) units.push_back(problem.g_coll);

  Index checks = 0;
  auto feasible = [&](Index s) {
    ++checks;
    return check_valid_shard(problem, s).feasible;
  };

  Index best = std::numeric_limits<Index>::max();
  for (Index u : units) {
    if (u > best) {
      if (trace) {
        trace->units.push_back(u);
        trace->best_per_unit.push_back(-1);
      }
      continue;
    }
    Index lo = std::max<Index>(1, ceil_div(lower_elems, u));
    Index hi = std::max(lo, ceil_div(upper_elems, u));
    if (!feasible(hi * u)) {
      throw Error(ErrorCode::InternalInconsistency,
                  "no feasible shard size below search bound " +
                      std::to_string(hi * u));
    }
    while (lo < hi) {
      const Index mid = lo + (hi - lo) / 2;
      if (feasible(mid * u)) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    best = std::min(best, hi * u);
    if (trace) {
      trace->units.push_back(u);
      trace->best_per_unit.push_back(hi * u);
    }
  }
  if (trace) trace->feasibility_checks += checks;
  return best;
}

const PlacedTensor* LayoutPlan::find(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

namespace {

std::vector<DeviceSlice> split_by_device(Interval iv, Index shard) {
  std::vector<DeviceSlice> owners;
  if (iv.size() <= 0 || shard <= 0) return owners;
  for (Index d = iv.begin / shard; d * shard < iv.end; ++d) {
    const Index lo = std::max(iv.begin, d * shard);
    const Index hi = std::min(iv.end, (d + 1) * shard);
    owners.push_back({d, {lo - d * shard, hi - d * shard}});
  }
  return owners;
}

std::vector<Interval> complement(std::vector<Interval> used, Index size) {
  std::sort(used.begin(), used.end(),
            [](const Interval& a, const Interval& b) { return a.begin < b.begin; });
  std::vector<Interval> gaps;
  Index cursor = 0;
  for (const auto& iv : used) {
    if (iv.begin > cursor) gaps.push_back({cursor, iv.begin});
    cursor = std::max(cursor, iv.end);
  }
  if (cursor < size) gaps.push_back({cursor, size});
  return gaps;
}

}  // namespace

LayoutPlan assemble_plan(const PlanProblem& problem, Index shard_size,
                         std::span<const std::size_t> order,
                         std::span<const Index> starts) {
  if (order.size() != starts.size()) {
    throw Error(ErrorCode::InvalidArgument, "order/starts length differ");
  }
  LayoutPlan plan;
  plan.devices = problem.devices;
  plan.shard_size = shard_size;
  plan.g_coll = problem.g_coll;
  plan.ordering = problem.ordering;
  plan.elem_bytes =
      problem.tensors.empty() ? 0 : problem.tensors.front().elem_bytes;
  std::vector<Interval> used;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const TensorSpec& t = problem.tensors.at(order[i]);
    PlacedTensor p;
    p.tensor_index = order[i];
    p.order_index = t.order_index;
    p.name = t.name;
    p.shape = t.shape;
    p.granularity = t.granularity;
    p.block_elements = resolve_granularity(t);
    p.interval = {starts[i], starts[i] + t.numel()};
    p.owners = split_by_device(p.interval, shard_size);
    used.push_back(p.interval);
    plan.tensors.push_back(std::move(p));
  }
  plan.padding = complement(std::move(used), plan.buffer_size());
  return plan;
}

LayoutPlan build_plan(const PlanProblem& problem, Index shard_size,
                      const DpState& state) {
  check_problem(problem);
  auto fail = [](const std::string& why) {
    throw Error(ErrorCode::InternalInconsistency, why);
  };
  if (problem.tensors.empty()) {
    return assemble_plan(problem, shard_size, {}, {});
  }
  if (state.shard_size != shard_size ||
      state.order.size() != problem.tensors.size() ||
      state.starts.size() != state.order.size() ||
      state.segments.size() != state.order.size()) {
    fail("dp state does not describe a complete layout for this shard size");
  }
  Index cursor = 0;
  for (std::size_t i = 0; i < state.order.size(); ++i) {
    const TensorSpec& t = problem.tensors.at(state.order[i]);
    const Index block = resolve_granularity(t);
    const Index blocks = t.numel() / block;
    const Index start = state.starts[i];
    if (start < cursor) fail(t.name + " overlaps its predecessor");
    Index expect = 0;
    for (const DpSegment& seg : state.segments[i]) {
      if (seg.first_block != expect || seg.last_block < seg.first_block) {
        fail(t.name + ": segments do not cover the blocks in order");
      }
      const Index lo = start + seg.first_block * block;
      const Index hi = start + (seg.last_block + 1) * block;
      if (lo < (seg.shards - 1) * shard_size || hi > seg.shards * shard_size) {
        fail(t.name + ": segment " + std::to_string(seg.first_block) + ".." +
             std::to_string(seg.last_block) + " does not fit shard " +
             std::to_string(seg.shards));
      }
      expect = seg.last_block + 1;
    }
    if (expect != blocks) fail(t.name + ": segments miss trailing blocks");
    cursor = start + t.numel();
  }
  if (cursor > problem.devices * shard_size) fail("layout exceeds buffer");
  return assemble_plan(problem, shard_size, state.order, state.starts);
}

std::string_view to_string(Violation::Kind k) {
  using K = Violation::Kind;
  switch (k) {
    case K::NonShardedBlock: return "NonShardedBlock";
    case K::Overlap: return "Overlap";
    case K::Contiguity: return "Contiguity";
    case K::OutOfBounds: return "OutOfBounds";
    case K::Balance: return "Balance";
    case K::Alignment: return "Alignment";
    case K::Order: return "Order";
    case K::MissingTensor: return "MissingTensor";
    case K::UnknownTensor: return "UnknownTensor";
    case K::OwnerMismatch: return "OwnerMismatch";
    case K::PaddingMismatch: return "PaddingMismatch";
  }
  return "Unknown";
}

std::string to_string(const Violation& v) {
  std::string s(to_string(v.kind));
  s += "(" + v.tensor;
  if (!v.other.empty()) s += ", " + v.other;
  if (v.boundary >= 0) s += ", k=" + std::to_string(v.boundary);
  s += ")";
  if (!v.detail.empty()) s += ": " + v.detail;
  return s;
}

std::vector<Violation> validate_plan(const LayoutPlan& plan,
                                     const PlanProblem& problem) {
  using K = Violation::Kind;
  std::vector<Violation> out;
  const Index S = plan.shard_size;
  const Index m = plan.devices;

  if (m != problem.devices) {
    out.push_back({K::Balance, "", "", -1,
                   "plan has " + std::to_string(m) + " devices, problem " +
                       std::to_string(problem.devices)});
  }
  if (!plan.tensors.empty() && S <= 0) {
    out.push_back({K::Balance, "", "", -1, "non-positive shard size"});
    return out;
  }
  if (S > 0 && S % problem.g_coll != 0) {
    out.push_back({K::Alignment, "", "", -1,
                   "shard size " + std::to_string(S) +
                       " is not a multiple of g_coll " +
                       std::to_string(problem.g_coll)});
  }

  std::vector<const TensorSpec*> spec_of(plan.tensors.size(), nullptr);
  std::vector<int> seen(problem.tensors.size(), 0);
  for (std::size_t i = 0; i < plan.tensors.size(); ++i) {
    const PlacedTensor& p = plan.tensors[i];
    for (std::size_t j = 0; j < problem.tensors.size(); ++j) {
      if (problem.tensors[j].name == p.name) {
        spec_of[i] = &problem.tensors[j];
        ++seen[j];
        break;
      }
    }
    if (!spec_of[i]) {
      out.push_back({K::UnknownTensor, p.name, "", -1, "not in the problem"});
    }
  }
  for (std::size_t j = 0; j < problem.tensors.size(); ++j) {
    if (seen[j] == 0) {
      out.push_back(
          {K::MissingTensor, problem.tensors[j].name, "", -1, "not placed"});
    } else if (seen[j] > 1) {
      out.push_back({K::Overlap, problem.tensors[j].name,
                     problem.tensors[j].name, -1, "placed more than once"});
    }
  }

  for (std::size_t i = 0; i < plan.tensors.size(); ++i) {
    const PlacedTensor& p = plan.tensors[i];
    const Interval iv = p.interval;
    if (iv.begin < 0 || iv.end > m * S) {
      out.push_back({K::OutOfBounds, p.name, "", -1,
                     "[" + std::to_string(iv.begin) + "," +
                         std::to_string(iv.end) + ") outside [0," +
                         std::to_string(m * S) + ")"});
    }
    if (spec_of[i]) {
      const Index e = spec_of[i]->numel();
      const Index g = resolve_granularity(*spec_of[i]);
      if (iv.size() != e) {
        out.push_back({K::Contiguity, p.name, "", -1,
                       "interval holds " + std::to_string(iv.size()) +
                           " elements, tensor has " + std::to_string(e)});
      }
      if (S > 0) {
        for (Index k = std::max<Index>(1, iv.begin / S + 1);
             k <= m && k * S < iv.end; ++k) {
          if (k * S > iv.begin && (k * S - iv.begin) % g != 0) {
            out.push_back({K::NonShardedBlock, p.name, "", k,
                           "boundary " + std::to_string(k * S) +
                               " is at offset " +
                               std::to_string(k * S - iv.begin) +
                               ", block size " + std::to_string(g)});
          }
        }
      }
    }
    if (p.owners != split_by_device(iv, S)) {
      out.push_back({K::OwnerMismatch, p.name, "", -1,
                     "device slices differ from [(k-1)S, kS) ownership"});
    }
  }

  std::vector<std::size_t> by_begin(plan.tensors.size());
  std::iota(by_begin.begin(), by_begin.end(), std::size_t{0});
  std::stable_sort(by_begin.begin(), by_begin.end(),
                   [&](std::size_t a, std::size_t b) {
                     return plan.tensors[a].interval.begin <
                            plan.tensors[b].interval.begin;
                   });
  for (std::size_t a = 0; a < by_begin.size(); ++a) {
    const auto& ta = plan.tensors[by_begin[a]];
    for (std::size_t b = a + 1; b < by_begin.size(); ++b) {
      const auto& tb = plan.tensors[by_begin[b]];
      if (tb.interval.begin >= ta.interval.end) break;
      if (ta.interval.size() > 0 && tb.interval.size() > 0) {
        out.push_back({K::Overlap, ta.name, tb.name, -1, ""});
      }
    }
  }

  const std::vector<std::size_t> expected = layout_order(problem);
  if (out.empty() && by_begin.size() == expected.size()) {
    for (std::size_t i = 0; i < expected.size(); ++i) {
      const auto& placed = plan.tensors[by_begin[i]];
      if (placed.name != problem.tensors[expected[i]].name) {
        out.push_back({K::Order, placed.name,
                       problem.tensors[expected[i]].name, -1,
                       "buffer position " + std::to_string(i) +
                           " expected " + problem.tensors[expected[i]].name});
        break;
      }
    }
  }

  std::vector<Interval> used;
  for (const auto& p : plan.tensors) used.push_back(p.interval);
  if (out.empty() && plan.padding != complement(std::move(used), m * S)) {
    out.push_back({K::PaddingMismatch, "", "", -1,
                   "padding is not the complement of the tensor intervals"});
  }
  return out;
}

PaddingReport padding_report(const LayoutPlan& plan) {
  PaddingReport r;
  for (const auto& t : plan.tensors) r.tensor_elements += t.numel();
  r.padding_elements = plan.buffer_size() - r.tensor_elements;
  r.ratio = r.tensor_elements == 0
                ? 0.0
                : static_cast<double>(r.padding_elements) /
                      static_cast<double>(r.tensor_elements);
  return r;
}

PlanResult Planner::plan(const PlanProblem& problem) const {
  const auto t0 = std::chrono::steady_clock::now();
  check_problem(problem);

  std::vector<Ordering> orderings{problem.ordering};
  if (options_.try_all_orderings) {
    for (Ordering o :
         {Ordering::Default, Ordering::ByBlockSize, Ordering::ByShape}) {
      if (o != problem.ordering) orderings.push_back(o);
    }
  }

  std::optional<LayoutPlan> best;
  for (Ordering o : orderings) {
    PlanProblem p = problem;
    p.ordering = o;
    const Index s = min_shard_size(p, options_.search);
    LayoutPlan plan;
    if (s == 0) {
      plan = assemble_plan(p, 0, {}, {});
    } else {
      Feasibility f = check_valid_shard(p, s);
      if (!f.feasible) {
        throw Error(ErrorCode::InternalInconsistency,
                    "search returned an infeasible shard size");
      }
      plan = build_plan(p, s, f.state);
    }
    if (!best || plan.shard_size < best->shard_size) best = std::move(plan);
  }

  PlanResult result;
  result.plan = std::move(*best);
  PlanProblem chosen = problem;
  chosen.ordering = result.plan.ordering;
  result.violations = validate_plan(result.plan, chosen);
  result.padding = padding_report(result.plan);
  result.seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
  return result;
}

PlanProblem problem_of(const LayoutPlan& plan) {
  PlanProblem problem;
  problem.devices = plan.devices;
  problem.g_coll = plan.g_coll;
  problem.ordering = plan.ordering;
  std::vector<const PlacedTensor*> by_index;
  for (const auto& t : plan.tensors) by_index.push_back(&t);
  std::stable_sort(by_index.begin(), by_index.end(),
                   [](const PlacedTensor* a, const PlacedTensor* b) {
                     return a->tensor_index < b->tensor_index;
                   });
  for (const PlacedTensor* t : by_index) {
    problem.tensors.push_back(
        {t->name, t->shape, plan.elem_bytes, t->granularity, t->order_index});
  }
  return problem;
}

std::vector<Index> ragged_counts_of(const PlacedTensor& t, Index devices) {
  std::vector<Index> counts(static_cast<std::size_t>(devices), 0);
  for (const auto& o : t.owners) {
    counts.at(static_cast<std::size_t>(o.device)) +=
        o.local.size() / t.block_elements;
  }
  return counts;
}

}  // namespace raggedshard
