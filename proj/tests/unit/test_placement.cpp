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

#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "raggedshard/error.hpp"
#include "raggedshard/placement.hpp"

namespace raggedshard {
namespace {

TensorSpec spec(std::vector<Index> shape, Granularity g = Granularity::element()) {
  TensorSpec t;
  t.name = "t";
  t.shape = std::move(shape);
  t.granularity = std::move(g);
  return t;
}

std::vector<float> iota_tensor(Index n) {
  std::vector<float> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), 0.0f);
  return v;
}

TEST(BlockLayout, RowsIsIdentity) {
  const auto p = block_layout(spec({6, 4}, Granularity::rows(2)));
  EXPECT_TRUE(p.is_trivial());
  EXPECT_EQ(p.num_blocks(), 3);
  EXPECT_EQ(p.block_elements(), 8);
}

TEST(BlockLayout, TwoByTwoTilesAreBlockMajor) {
  const auto p = block_layout(spec({4, 4}, Granularity::block({2, 2})));
  EXPECT_EQ(p.num_blocks(), 4);
  EXPECT_FALSE(p.is_trivial());
  // Block k of the communication order is tile k of the row-major tile grid.
  EXPECT_EQ(p.perm(), (std::vector<Index>{0, 1, 2, 3}));
  const std::vector<float> logical = iota_tensor(16);
  const std::vector<float> comm = p.to_comm<float>(logical);
  EXPECT_EQ(comm, (std::vector<float>{0, 1, 4, 5, 2, 3, 6, 7, 8, 9, 12, 13, 10, 11, 14, 15}));
  EXPECT_EQ(p.to_logical<float>(comm), logical);
}

TEST(BlockLayout, SingleTileIsIdentity) {
  const auto p = block_layout(spec({2, 2}, Granularity::block({2, 2})));
  EXPECT_EQ(p.num_blocks(), 1);
  EXPECT_TRUE(p.is_trivial());
}

TEST(BlockPermutation, RejectsNonBijection) {
  EXPECT_THROW(BlockPermutation({4, 2}, {1, 2}, {0, 1, 1, 3}), Error);
  EXPECT_THROW(BlockPermutation({4, 2}, {1, 2}, {0, 1, 2}), Error);
  EXPECT_THROW(BlockPermutation({4, 2}, {3, 2}, {0}), Error);
}

TEST(BlockPermutation, RandomRoundTrips) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<Index> d(1, 4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::vector<Index> block{d(rng), d(rng)};
    const std::vector<Index> shape{block[0] * d(rng), block[1] * d(rng)};
    const Index n = (shape[0] / block[0]) * (shape[1] / block[1]);
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const BlockPermutation p(shape, block, perm);
    const auto inv = p.inverse();
    for (Index k = 0; k < n; ++k) ASSERT_EQ(inv[p.logical_block(k)], k);
    const auto x = iota_tensor(shape[0] * shape[1]);
    ASSERT_EQ(p.to_logical<float>(p.to_comm<float>(x)), x);
    ASSERT_EQ(p.to_comm<float>(p.to_logical<float>(x)), x);
  }
}

TEST(Strided, TwoWayShardZeroInterleavesRows) {
  const auto s = make_strided(spec({4, 2}, Granularity::rows(1)), 2, std::vector<Index>{1, 1});
  EXPECT_EQ(s.reshuffle.perm(), (std::vector<Index>{0, 2, 1, 3}));
  // Gathered buffer: inner rank 0 holds row 0 of each outer shard, etc.
  const std::vector<float> gathered{0, 1, 4, 5, 2, 3, 6, 7};
  EXPECT_EQ(s.reshuffle.to_logical<float>(gathered), iota_tensor(8));
}

TEST(Strided, OuterOneIsIdentity) {
  const auto s = make_strided(spec({4, 2}, Granularity::rows(1)), 1, std::vector<Index>{3, 1});
  EXPECT_TRUE(s.reshuffle.is_trivial());
}

TEST(Strided, CountsMustCoverLocalBlocks) {
  try {
    make_strided(spec({4, 2}, Granularity::rows(1)), 2, std::vector<Index>{1, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}

TEST(Strided, MaterializationRestoresRandomTensors) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<Index> d(1, 4);
  for (int trial = 0; trial < 200; ++trial) {
    const Index outer = d(rng);
    const Index rows_local = d(rng) * 2;
    const Index cols = d(rng);
    TensorSpec t = spec({outer * rows_local, cols}, Granularity::rows(2));
    const Index blocks = rows_local / 2;
    const Index inner = d(rng);
    std::vector<Index> counts(static_cast<std::size_t>(inner), 0);
    for (Index b = 0; b < blocks; ++b) {
      ++counts[std::uniform_int_distribution<std::size_t>(0, counts.size() - 1)(rng)];
    }
    const auto s = make_strided(t, outer, counts);
    const std::vector<float> global = iota_tensor(t.numel());
    // Simulate the gather: inner rank j contributes its range of every outer
    // shard, outer shards in order.
    const Index block = 2 * cols;
    std::vector<float> gathered;
    Index start = 0;
    for (Index c : counts) {
      for (Index o = 0; o < outer; ++o) {
        const Index base = (o * blocks + start) * block;
        gathered.insert(gathered.end(), global.begin() + base, global.begin() + base + c * block);
      }
      start += c;
    }
    ASSERT_EQ(s.reshuffle.to_logical<float>(gathered), global);
    ASSERT_EQ(s.reshuffle.to_comm<float>(s.reshuffle.to_logical<float>(gathered)), gathered);
  }
}

TEST(Placement, RaggedCountsMustSumToBlocks) {
  const TensorSpec t = spec({3, 2}, Granularity::rows(1));
  EXPECT_NO_THROW(check_placement(t, RaggedShard{{1, 2}}));
  EXPECT_THROW(check_placement(t, RaggedShard{{1, 1}}), Error);
  EXPECT_THROW(check_placement(t, RaggedShard{{4, -1}}), Error);
  EXPECT_THROW(check_placement(t, Shard{2}), Error);
  EXPECT_NO_THROW(check_placement(t, Shard{1}));
}

TEST(Placement, AllOnRoot) {
  const RaggedShard r = all_on_root(3, 4, 3);
  EXPECT_EQ(r.counts, (std::vector<Index>{0, 0, 0, 3}));
  EXPECT_EQ(to_string(Placement{r}), "RaggedShard(0,0,0,3)");
  EXPECT_EQ(to_string(Placement{Replicate{}}), "Replicate");
}

}  // namespace
}  // namespace raggedshard
