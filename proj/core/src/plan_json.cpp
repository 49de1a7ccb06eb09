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

#include "raggedshard/plan_json.hpp"

#include <nlohmann/json.hpp>
#include "raggedshard/error.hpp"

namespace raggedshard {

namespace {

using Json = nlohmann::ordered_json;

Json granularity_json(const Granularity& g) {
  Json j;
  switch (g.kind()) {
    case Granularity::Kind::Element:
      j["kind"] = "element";
      break;
    case Granularity::Kind::Rows:
      j["kind"] = "rows";
      j["value"] = g.rows();
      break;
    case Granularity::Kind::Block:
      j["kind"] = "block";
      j["value"] = g.block_shape();
      break;
  }
  return j;
}

Granularity granularity_from(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "element") return Granularity::element();
  if (kind == "rows") return Granularity::rows(j.at("value").get<Index>());
  if (kind == "block") {
    return Granularity::block(j.at("value").get<std::vector<Index>>());
  }
  throw Error(ErrorCode::ConfigError, "unknown granularity kind " + kind);
}

Json interval_json(const Interval& iv) {
  Json j;
  j["begin"] = iv.begin;
  j["end"] = iv.end;
  return j;
}

Interval interval_from(const Json& j) {
  return {j.at("begin").get<Index>(), j.at("end").get<Index>()};
}

Json document_json(const PlanDocument& doc) {
  const LayoutPlan& plan = doc.plan;
  const PaddingReport pad = padding_report(plan);
  Json j;
  j["format"] = kPlanFormat;
  j["group"] = doc.group;
  j["devices"] = plan.devices;
  j["shard_size"] = plan.shard_size;
  j["g_coll"] = plan.g_coll;
  j["elem_bytes"] = plan.elem_bytes;
  j["ordering"] = std::string(to_string(plan.ordering));
  Json tensors = Json::array();
  for (const auto& t : plan.tensors) {
    Json jt;
    jt["name"] = t.name;
    jt["tensor_index"] = t.tensor_index;
    jt["order_index"] = t.order_index;
    jt["shape"] = t.shape;
    jt["granularity"] = granularity_json(t.granularity);
    jt["block_elements"] = t.block_elements;
    jt["begin"] = t.interval.begin;
    jt["end"] = t.interval.end;
    Json owners = Json::array();
    for (const auto& o : t.owners) {
      Json jo;
      jo["device"] = o.device;
      jo["begin"] = o.local.begin;
      jo["end"] = o.local.end;
      owners.push_back(std::move(jo));
    }
    jt["owners"] = std::move(owners);
    tensors.push_back(std::move(jt));
  }
  j["tensors"] = std::move(tensors);
  Json padding = Json::array();
  for (const auto& iv : plan.padding) padding.push_back(interval_json(iv));
  j["padding"] = std::move(padding);
  j["padding_elements"] = pad.padding_elements;
  j["tensor_elements"] = pad.tensor_elements;
  j["padding_ratio"] = pad.ratio;
  Json violations = Json::array();
  for (const auto& v : doc.violations) {
    Json jv;
    jv["constraint"] = std::string(to_string(v.kind));
    jv["tensor"] = v.tensor;
    if (!v.other.empty()) jv["other"] = v.other;
    if (v.boundary >= 0) jv["boundary"] = v.boundary;
    jv["detail"] = v.detail;
    violations.push_back(std::move(jv));
  }
  j["violations"] = std::move(violations);
  return j;
}

PlanDocument document_from(const Json& j) {
  if (j.at("format").get<std::string>() != kPlanFormat) {
    throw Error(ErrorCode::ConfigError, "unsupported plan format");
  }
  PlanDocument doc;
  doc.group = j.value("group", std::string{});
  LayoutPlan& plan = doc.plan;
  plan.devices = j.at("devices").get<Index>();
  plan.shard_size = j.at("shard_size").get<Index>();
  plan.g_coll = j.at("g_coll").get<Index>();
  plan.elem_bytes = j.at("elem_bytes").get<int>();
  const auto ordering = parse_ordering(j.at("ordering").get<std::string>());
  if (!ordering) throw Error(ErrorCode::ConfigError, "unknown ordering");
  plan.ordering = *ordering;
  for (const auto& jt : j.at("tensors")) {
    PlacedTensor t;
    t.name = jt.at("name").get<std::string>();
    t.tensor_index = jt.at("tensor_index").get<std::size_t>();
    t.order_index = jt.at("order_index").get<std::size_t>();
    t.shape = jt.at("shape").get<std::vector<Index>>();
    t.granularity = granularity_from(jt.at("granularity"));
    t.block_elements = jt.at("block_elements").get<Index>();
    t.interval = {jt.at("begin").get<Index>(), jt.at("end").get<Index>()};
    for (const auto& jo : jt.at("owners")) {
      t.owners.push_back({jo.at("device").get<Index>(),
                          {jo.at("begin").get<Index>(),
                           jo.at("end").get<Index>()}});
    }
    plan.tensors.push_back(std::move(t));
  }
  for (const auto& jp : j.at("padding")) plan.padding.push_back(interval_from(jp));
  return doc;
}

}  // namespace

std::string to_json(const PlanDocument& doc, int indent) {
  return document_json(doc).dump(indent);
}

std::string to_json(const PlanSet& set, int indent) {
  Json j;
  j["format"] = "raggedshard.planset/v1";
  j["model"] = set.model;
  Json groups = Json::array();
  Index padding = 0;
  Index elements = 0;
  bool valid = true;
  for (const auto& g : set.groups) {
    const PaddingReport r = padding_report(g.plan);
    padding += r.padding_elements;
    elements += r.tensor_elements;
    valid = valid && g.violations.empty();
    groups.push_back(document_json(g));
  }
  j["groups"] = std::move(groups);
  Json summary;
  summary["groups"] = set.groups.size();
  summary["padding_elements"] = padding;
  summary["tensor_elements"] = elements;
  summary["padding_ratio"] =
      elements == 0 ? 0.0
                    : static_cast<double>(padding) / static_cast<double>(elements);
  summary["valid"] = valid;
  j["summary"] = std::move(summary);
  return j.dump(indent);
}

PlanSet plan_set_from_json(std::string_view text) {
  try {
    const Json j = Json::parse(text);
    PlanSet set;
    if (j.contains("groups")) {
      set.model = j.value("model", std::string{});
      for (const auto& g : j.at("groups")) set.groups.push_back(document_from(g));
    } else {
      set.groups.push_back(document_from(j));
    }
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("malformed plan: ") + e.what());
  }
}

}  // namespace raggedshard
