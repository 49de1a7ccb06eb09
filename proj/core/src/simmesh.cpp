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

#include "raggedshard/simmesh.hpp"

#include <chrono>
#include <condition_variable>
#include <exception>
#include <map>
#include <mutex>
#include <thread>
#include <tuple>

#include "raggedshard/error.hpp"

namespace raggedshard {

namespace detail {

// Thrown into ranks that are unwound because another rank failed.
struct Aborted {};

struct Entry {
  std::string signature;
  std::vector<int> members;
  std::vector<std::optional<std::vector<std::vector<float>>>> payloads;
  int arrived = 0;
  int readers = 0;
};

class World {
 public:
  explicit World(int ranks) : finished(static_cast<std::size_t>(ranks), false) {}

  std::mutex mu;
  std::condition_variable cv;
  std::map<std::tuple<int, int, std::uint64_t>, Entry> entries;
  std::vector<bool> finished;
  bool aborted = false;
};

}  // namespace detail

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

SimMesh::SimMesh(std::vector<MeshDim> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) throw Error(ErrorCode::InvalidArgument, "mesh needs a dimension");
  size_ = 1;
  for (const auto& d : dims_) {
    if (d.size < 1) throw Error(ErrorCode::InvalidArgument, "mesh dim size < 1");
    size_ *= d.size;
  }
}

SimMesh SimMesh::line(int ranks, std::string name) {
  return SimMesh({MeshDim{std::move(name), ranks}});
}

std::vector<int> SimMesh::coords(int rank) const {
  std::vector<int> c(dims_.size());
  for (std::size_t d = dims_.size(); d-- > 0;) {
    c[d] = rank % dims_[d].size;
    rank /= dims_[d].size;
  }
  return c;
}

int SimMesh::rank_of(std::span<const int> coords) const {
  int r = 0;
  for (std::size_t d = 0; d < dims_.size(); ++d) r = r * dims_[d].size + coords[d];
  return r;
}

std::vector<int> SimMesh::group(int rank, int dim) const {
  std::vector<int> c = coords(rank);
  std::vector<int> out;
  for (int v = 0; v < this->dim(dim).size; ++v) {
    c[static_cast<std::size_t>(dim)] = v;
    out.push_back(rank_of(c));
  }
  return out;
}

void SimMesh::run(const std::function<void(Communicator&)>& program) const {
  detail::World world(size_);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(size_));
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(size_));
  for (int r = 0; r < size_; ++r) {
    threads.emplace_back([&, r] {
      Communicator comm(*this, world, r, jitter_seed_);
      try {
        program(comm);
      } catch (const detail::Aborted&) {
      } catch (...) {
        errors[static_cast<std::size_t>(r)] = std::current_exception();
        std::lock_guard lk(world.mu);
        world.aborted = true;
      }
      {
        std::lock_guard lk(world.mu);
        world.finished[static_cast<std::size_t>(r)] = true;
      }
      world.cv.notify_all();
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Communicator::Communicator(const SimMesh& mesh, detail::World& world, int rank,
                           std::optional<std::uint64_t> jitter_seed)
    : mesh_(&mesh),
      world_(&world),
      rank_(rank),
      sequence_(static_cast<std::size_t>(mesh.ndim()), 0) {
  if (jitter_seed) {
    jitter_state_ = *jitter_seed ^ (0x5851f42d4c957f2dULL * (rank + 1));
  }
}

std::vector<int> Communicator::group(int dim) const {
  return mesh_->group(rank_, dim);
}

int Communicator::group_index(int dim) const {
  return mesh_->coords(rank_)[static_cast<std::size_t>(dim)];
}

std::vector<std::vector<float>> Communicator::exchange(
    int dim, std::string op, std::string meta,
    std::vector<std::vector<float>> payload, bool personalized) {
  if (dim < 0 || dim >= mesh_->ndim()) {
    throw Error(ErrorCode::InvalidArgument, "collective on missing mesh dim");
  }
  if (jitter_state_) {
    const auto us = splitmix64(*jitter_state_) % 200;
    std::this_thread::sleep_for(std::chrono::microseconds(us));
  }
  const std::vector<int> members = group(dim);
  const int me = group_index(dim);
  const int n = static_cast<int>(members.size());
  const auto key = std::make_tuple(dim, members.front(),
                                   sequence_[static_cast<std::size_t>(dim)]++);
  const std::string signature = op + "|" + meta;

  detail::World& w = *world_;
  std::unique_lock lk(w.mu);
  if (w.aborted) throw detail::Aborted{};
  detail::Entry& e = w.entries[key];
  if (e.members.empty()) {
    e.members = members;
    e.payloads.resize(members.size());
    e.signature = signature;
  } else if (e.signature != signature) {
    w.aborted = true;
    w.cv.notify_all();
    throw Error(ErrorCode::CollectiveMismatch,
                "rank " + std::to_string(rank_) + " entered '" + signature +
                    "' while its group entered '" + e.signature + "'");
  }
  e.payloads[static_cast<std::size_t>(me)] = std::move(payload);
  ++e.arrived;
  w.cv.notify_all();

  auto exited_member = [&]() -> int {
    for (int j = 0; j < n; ++j) {
      if (!e.payloads[static_cast<std::size_t>(j)] &&
          w.finished[static_cast<std::size_t>(e.members[static_cast<std::size_t>(j)])]) {
        return e.members[static_cast<std::size_t>(j)];
      }
    }
    return -1;
  };
  w.cv.wait(lk, [&] { return w.aborted || e.arrived == n || exited_member() >= 0; });
  if (w.aborted) throw detail::Aborted{};
  if (e.arrived != n) {
    const int gone = exited_member();
    w.aborted = true;
    w.cv.notify_all();
    throw Error(ErrorCode::CollectiveMismatch,
                "rank " + std::to_string(gone) +
                    " finished without entering '" + signature + "'");
  }

  std::vector<std::vector<float>> result(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const auto& from = *e.payloads[static_cast<std::size_t>(j)];
    result[static_cast<std::size_t>(j)] =
        personalized ? from[static_cast<std::size_t>(me)] : from.front();
  }
  if (++e.readers == n) w.entries.erase(key);
  return result;
}

std::vector<std::vector<float>> Communicator::all_gather(
    int dim, std::span<const float> local, std::string_view tag) {
  std::vector<std::vector<float>> payload{{local.begin(), local.end()}};
  return exchange(dim, "all_gather", std::string(tag), std::move(payload), false);
}

std::vector<std::vector<float>> Communicator::all_to_all(
    int dim, std::vector<std::vector<float>> send, std::string_view tag) {
  if (static_cast<int>(send.size()) != mesh_->dim(dim).size) {
    throw Error(ErrorCode::ShapeMismatch, "all_to_all needs one buffer per peer");
  }
  return exchange(dim, "all_to_all", std::string(tag), std::move(send), true);
}

std::vector<float> Communicator::all_reduce(int dim, std::span<const float> local,
                                            std::string_view tag) {
  std::vector<std::vector<float>> payload{{local.begin(), local.end()}};
  auto parts = exchange(dim, "all_reduce",
                        std::string(tag) + "|" + std::to_string(local.size()),
                        std::move(payload), false);
  std::vector<float> out = std::move(parts.front());
  for (std::size_t j = 1; j < parts.size(); ++j) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += parts[j][i];
  }
  return out;
}

void Communicator::barrier(int dim, std::string_view tag) {
  exchange(dim, "barrier", std::string(tag), {{}}, false);
}

}  // namespace raggedshard
