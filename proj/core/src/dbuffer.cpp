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

#include "raggedshard/dbuffer.hpp"

#include <algorithm>

#include "raggedshard/error.hpp"

namespace raggedshard {

const Segment& TensorView::locate(Index i) const {
  if (i < 0 || i >= size()) {
    throw Error(ErrorCode::InvalidArgument,
                name() + ": element " + std::to_string(i) + " out of range");
  }
  const auto& segs = *segments_;
  auto it = std::upper_bound(segs.begin(), segs.end(), i,
                             [](Index v, const Segment& s) { return v < s.tensor_offset; });
  return *(it - 1);
}

float TensorView::get(Index i) const {
  const Segment& s = locate(i);
  return buf_->region(s.device)[static_cast<std::size_t>(s.local_offset + i - s.tensor_offset)];
}

void TensorView::set(Index i, float v) {
  const Segment& s = locate(i);
  buf_->region(s.device)[static_cast<std::size_t>(s.local_offset + i - s.tensor_offset)] = v;
}

std::span<float> TensorView::segment_span(std::size_t k) const {
  const Segment& s = segments_->at(k);
  return buf_->region(s.device).subspan(static_cast<std::size_t>(s.local_offset),
                                        static_cast<std::size_t>(s.length));
}

std::vector<float> TensorView::read() const {
  std::vector<float> out;
  out.reserve(static_cast<std::size_t>(size()));
  for (std::size_t k = 0; k < segments_->size(); ++k) {
    const auto span = segment_span(k);
    out.insert(out.end(), span.begin(), span.end());
  }
  return out;
}

void TensorView::write(std::span<const float> values) {
  if (static_cast<Index>(values.size()) != size()) {
    throw Error(ErrorCode::ShapeMismatch, name() + ": write of wrong length");
  }
  for (std::size_t k = 0; k < segments_->size(); ++k) {
    const Segment& s = (*segments_)[k];
    const auto span = segment_span(k);
    std::copy_n(values.begin() + s.tensor_offset, s.length, span.begin());
  }
}

DBuffer::DBuffer(LayoutPlan plan, const SimMesh& mesh) : plan_(std::move(plan)) {
  if (plan_.devices != mesh.size()) {
    throw Error(ErrorCode::MeshMismatch,
                "plan has " + std::to_string(plan_.devices) + " devices, mesh has " +
                    std::to_string(mesh.size()) + " ranks");
  }
  for (const auto& d : mesh.dims()) mesh_shape_.push_back(d.size);
  const Index S = plan_.shard_size;
  storage_.assign(static_cast<std::size_t>(plan_.devices),
                  std::vector<float>(static_cast<std::size_t>(S), 0.0f));
  owned_.resize(static_cast<std::size_t>(plan_.devices));

  for (std::size_t t = 0; t < plan_.tensors.size(); ++t) {
    const PlacedTensor& p = plan_.tensors[t];
    if (p.interval.begin < 0 || p.interval.end > plan_.buffer_size() ||
        p.interval.end < p.interval.begin) {
      throw Error(ErrorCode::InvalidArgument, p.name + ": interval outside the buffer");
    }
    std::vector<Segment> segs;
    Index pos = p.interval.begin;
    while (pos < p.interval.end) {
      const Index device = pos / S;
      const Index stop = std::min(p.interval.end, (device + 1) * S);
      segs.push_back({device, pos - device * S, stop - pos, pos - p.interval.begin});
      owned_[static_cast<std::size_t>(device)].push_back({pos - device * S, stop - device * S});
      pos = stop;
    }
    views_.push_back(std::move(segs));
    if (!by_name_.emplace(p.name, t).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate tensor " + p.name);
    }
  }
  for (auto& runs : owned_) {
    std::sort(runs.begin(), runs.end());
    std::vector<std::pair<Index, Index>> merged;
    for (const auto& r : runs) {
      if (!merged.empty() && r.first < merged.back().second) {
        throw Error(ErrorCode::InvalidArgument, "overlapping tensors in plan");
      }
      if (!merged.empty() && merged.back().second == r.first) {
        merged.back().second = r.second;
      } else {
        merged.push_back(r);
      }
    }
    runs = std::move(merged);
  }
}

std::span<float> DBuffer::region(Index device) {
  return storage_.at(static_cast<std::size_t>(device));
}

std::span<const float> DBuffer::region(Index device) const {
  return storage_.at(static_cast<std::size_t>(device));
}

std::size_t DBuffer::index_of(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) {
    throw Error(ErrorCode::InvalidArgument, "no tensor " + std::string(name) + " in buffer");
  }
  return it->second;
}

TensorView DBuffer::view(std::string_view name) {
  const std::size_t t = index_of(name);
  return TensorView(this, &plan_.tensors[t], &views_[t]);
}

const std::vector<Segment>& DBuffer::segments(std::string_view name) const {
  return views_[index_of(name)];
}

std::vector<float> DBuffer::read(std::string_view name) const {
  std::vector<float> out;
  for (const Segment& s : views_[index_of(name)]) {
    const auto& region = storage_[static_cast<std::size_t>(s.device)];
    out.insert(out.end(), region.begin() + s.local_offset,
               region.begin() + s.local_offset + s.length);
  }
  return out;
}

const std::vector<std::pair<Index, Index>>& DBuffer::owned_runs(Index device) const {
  return owned_.at(static_cast<std::size_t>(device));
}

void DBuffer::apply(const GroupedOp& op) {
  const DBuffer* other = nullptr;
  if (const auto* add = std::get_if<AddFromOp>(&op)) {
    other = add->other;
    if (other == nullptr || other->plan_.devices != plan_.devices ||
        other->plan_.shard_size != plan_.shard_size || other->owned_ != owned_) {
      throw Error(ErrorCode::ShapeMismatch, "AddFrom needs an identically planned buffer");
    }
  }
  for (std::size_t d = 0; d < storage_.size(); ++d) {
    float* base = storage_[d].data();
    const float* src = other ? other->storage_[d].data() : nullptr;
    for (const auto& [b, e] : owned_[d]) {
      if (std::holds_alternative<ZeroOp>(op)) {
        std::fill(base + b, base + e, 0.0f);
      } else if (const auto* s = std::get_if<ScaleOp>(&op)) {
        for (Index i = b; i < e; ++i) base[i] *= s->c;
      } else {
        for (Index i = b; i < e; ++i) base[i] += src[i];
      }
    }
  }
}

std::vector<std::vector<float>> DBuffer::stage_gather(const SimMesh& mesh) const {
  if (mesh.size() != plan_.devices) {
    throw Error(ErrorCode::MeshMismatch, "stage_gather on a different mesh");
  }
  // Flattened rank space: ranks of all mesh dims gather in rank order.
  const SimMesh flat = SimMesh::line(mesh.size());
  std::vector<std::vector<float>> staged(storage_.size());
  flat.run([&](Communicator& comm) {
    const auto me = static_cast<std::size_t>(comm.rank());
    const auto parts = comm.all_gather(0, storage_[me], "dbuffer.stage_gather");
    std::vector<float> full;
    full.reserve(static_cast<std::size_t>(plan_.buffer_size()));
    for (const auto& p : parts) full.insert(full.end(), p.begin(), p.end());
    staged[me] = std::move(full);
  });
  return staged;
}

std::vector<float> DBuffer::materialize(std::string_view name,
                                        std::span<const float> gathered,
                                        const std::optional<BlockPermutation>& reshuffle) const {
  if (static_cast<Index>(gathered.size()) != plan_.buffer_size()) {
    throw Error(ErrorCode::ShapeMismatch, "gathered buffer has the wrong length");
  }
  const PlacedTensor& p = plan_.tensors[index_of(name)];
  const auto slice = gathered.subspan(static_cast<std::size_t>(p.interval.begin),
                                      static_cast<std::size_t>(p.interval.size()));
  if (reshuffle) {
    if (reshuffle->numel() != p.interval.size()) {
      throw Error(ErrorCode::ShapeMismatch, p.name + ": permutation does not cover the tensor");
    }
    return reshuffle->to_logical(slice);
  }
  TensorSpec spec{p.name, p.shape, plan_.elem_bytes, p.granularity, p.order_index};
  return block_layout(spec).to_logical(slice);
}

void apply_sequential(DBuffer& buf, const GroupedOp& op) {
  const DBuffer* other = nullptr;
  if (const auto* add = std::get_if<AddFromOp>(&op)) {
    other = add->other;
    if (other == nullptr || !(other->plan() == buf.plan())) {
      throw Error(ErrorCode::ShapeMismatch, "AddFrom needs an identically planned buffer");
    }
  }
  for (const PlacedTensor& p : buf.plan().tensors) {
    TensorView v = buf.view(p.name);
    std::vector<float> src;
    if (other) src = other->read(p.name);
    for (Index i = 0; i < v.size(); ++i) {
      if (std::holds_alternative<ZeroOp>(op)) {
        v.set(i, 0.0f);
      } else if (const auto* s = std::get_if<ScaleOp>(&op)) {
        v.set(i, v.get(i) * s->c);
      } else {
        v.set(i, v.get(i) + src[static_cast<std::size_t>(i)]);
      }
    }
  }
}

}  // namespace raggedshard
