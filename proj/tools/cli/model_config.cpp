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

#include "model_config.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "raggedshard/error.hpp"

namespace raggedshard::cli {

namespace {

using Json = nlohmann::json;
using Bindings = std::map<std::string, Index>;

[[noreturn]] void fail(const std::string& what) {
  throw Error(ErrorCode::ConfigError, what);
}

std::string substitute(std::string s, const Bindings& vars) {
  for (const auto& [var, value] : vars) {
    const std::string key = "{" + var + "}";
    for (auto pos = s.find(key); pos != std::string::npos; pos = s.find(key, pos)) {
      const std::string v = std::to_string(value);
      s.replace(pos, key.size(), v);
      pos += v.size();
    }
  }
  return s;
}

// Calls `leaf` for every non-loop object reachable from `entries`.
template <class F>
void expand(const Json& entries, Bindings vars, const F& leaf) {
  if (!entries.is_array()) fail("expected an array of entries");
  for (const auto& e : entries) {
    if (!e.is_object()) fail("entries must be objects");
    if (!e.contains("for")) {
      leaf(e, vars);
      continue;
    }
    const auto var = e.at("for").get<std::string>();
    const auto range = e.at("range").get<std::vector<Index>>();
    if (range.size() != 2 || range[0] > range[1]) fail("loop range must be [lo, hi]");
    for (Index i = range[0]; i < range[1]; ++i) {
      Bindings inner = vars;
      inner[var] = i;
      expand(e.at("body"), inner, leaf);
    }
  }
}

Granularity parse_granularity(const Json& j) {
  if (!j.is_object()) fail("granularity must be an object");
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "element") return Granularity::element();
  if (kind == "rows") return Granularity::rows(j.value("value", Index{1}));
  if (kind == "block") return Granularity::block(j.at("value").get<std::vector<Index>>());
  fail("unknown granularity kind '" + kind + "'");
}

}  // namespace

ModelConfig parse_model_config(std::string_view text) {
  ModelConfig config;
  try {
    const Json j = Json::parse(text);
    config.name = j.value("name", std::string("model"));
    config.source = j.value("source", std::string{});
    const int default_bytes = j.value("dtype_bytes", 4);

    std::map<std::string, std::size_t> index;
    expand(j.at("tensors"), {}, [&](const Json& e, const Bindings& vars) {
      TensorEntry t;
      t.spec.name = substitute(e.at("name").get<std::string>(), vars);
      t.spec.shape = e.at("shape").get<std::vector<Index>>();
      t.spec.elem_bytes = e.value("dtype_bytes", default_bytes);
      if (e.contains("granularity")) t.spec.granularity = parse_granularity(e.at("granularity"));
      t.sweep = e.value("sweep", false);
      if (!index.emplace(t.spec.name, config.tensors.size()).second) {
        fail("duplicate tensor '" + t.spec.name + "'");
      }
      config.tensors.push_back(std::move(t));
    });

    std::vector<int> owner(config.tensors.size(), -1);
    const auto claim = [&](std::size_t t, GroupConfig& g) {
      if (owner[t] >= 0) {
        fail("tensor '" + config.tensors[t].spec.name + "' is in groups '" +
             config.groups[static_cast<std::size_t>(owner[t])].name + "' and '" + g.name + "'");
      }
      owner[t] = static_cast<int>(config.groups.size());
      g.members.push_back(t);
    };
    if (j.contains("groups")) {
      expand(j.at("groups"), {}, [&](const Json& e, const Bindings& vars) {
        GroupConfig g;
        g.name = substitute(e.at("name").get<std::string>(), vars);
        if (e.contains("prefix")) {
          const std::string prefix = substitute(e.at("prefix").get<std::string>(), vars);
          for (std::size_t t = 0; t < config.tensors.size(); ++t) {
            if (config.tensors[t].spec.name.rfind(prefix, 0) == 0) claim(t, g);
          }
        }
        if (e.contains("tensors")) {
          for (const auto& n : e.at("tensors")) {
            const std::string name = substitute(n.get<std::string>(), vars);
            auto it = index.find(name);
            if (it == index.end()) fail("group '" + g.name + "' names unknown tensor '" + name + "'");
            claim(it->second, g);
          }
        }
        if (g.members.empty()) fail("group '" + g.name + "' is empty");
        std::sort(g.members.begin(), g.members.end());
        config.groups.push_back(std::move(g));
      });
      for (std::size_t t = 0; t < owner.size(); ++t) {
        if (owner[t] < 0) fail("tensor '" + config.tensors[t].spec.name + "' is in no group");
      }
    } else {
      GroupConfig g{config.name, {}};
      for (std::size_t t = 0; t < config.tensors.size(); ++t) g.members.push_back(t);
      config.groups.push_back(std::move(g));
    }
  } catch (const Json::exception& e) {
    fail(std::string("malformed model config: ") + e.what());
  }
  return config;
}

ModelConfig load_model_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot read " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_model_config(text.str());
}

std::vector<PlanProblem> group_problems(const ModelConfig& config,
                                        const ProblemOptions& options) {
  std::vector<PlanProblem> out;
  for (const GroupConfig& g : config.groups) {
    PlanProblem p;
    p.devices = options.devices;
    p.ordering = options.ordering;
    for (std::size_t k = 0; k < g.members.size(); ++k) {
      const TensorEntry& e = config.tensors[g.members[k]];
      TensorSpec t = e.spec;
      t.order_index = k;
      if (e.sweep && options.sweep_rows) t.granularity = Granularity::rows(*options.sweep_rows);
      p.tensors.push_back(std::move(t));
    }
    p.g_coll = default_g_coll(p.tensors.front().elem_bytes, options.gcoll_bytes);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace raggedshard::cli
