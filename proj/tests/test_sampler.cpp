#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "affect/sampler.hpp"
#include "support.hpp"

using namespace affect;
using affect::test::code_of;

namespace {

TaskPartition make_partition(const SetSizes& sizes, std::size_t total_batch) {
  TaskPartition p;
  std::size_t next = 0;
  for (std::size_t k = 0; k < kTaskSets; ++k)
    for (std::size_t i = 0; i < sizes[k]; ++i) p.ids[k].push_back(next++);
  p.batch = aligned_batch_sizes(sizes, total_batch);
  return p;
}

}  // namespace

TEST(AlignedBatchSizes, Examples) {
  EXPECT_EQ(aligned_batch_sizes({401000, 247000, 103000}, 751), (SetSizes{401, 247, 103}));
  EXPECT_EQ(aligned_batch_sizes({10, 10, 10}, 6), (SetSizes{2, 2, 2}));
  const SetSizes b = aligned_batch_sizes({10, 5, 5}, 4);
  EXPECT_EQ(b, (SetSizes{2, 1, 1}));
  EXPECT_EQ(make_partition({10, 5, 5}, 4).epoch_length(), 5u);
  EXPECT_EQ(code_of([] { aligned_batch_sizes({10, 5, 5}, 2); }), ErrorCode::Infeasible);
  EXPECT_EQ(code_of([] { aligned_batch_sizes({0, 0, 0}, 5); }), ErrorCode::Infeasible);
}

TEST(AlignedBatchSizes, EmptySlotDegradesGracefully) {
  EXPECT_EQ(aligned_batch_sizes({0, 30, 10}, 8), (SetSizes{0, 6, 2}));
  EXPECT_EQ(aligned_batch_sizes({0, 0, 7}, 3), (SetSizes{0, 0, 3}));
  EXPECT_EQ(aligned_batch_sizes({0, 5, 5}, 2), (SetSizes{0, 1, 1}));
}

TEST(AlignedBatchSizes, SumsFloorAndProportion) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> size(1, 5000), batch(3, 400);
  for (int trial = 0; trial < 500; ++trial) {
    const SetSizes s{size(rng), size(rng), size(rng)};
    const std::size_t total = batch(rng);
    const SetSizes b = aligned_batch_sizes(s, total);
    EXPECT_EQ(b[0] + b[1] + b[2], total);
    const double n = static_cast<double>(s[0] + s[1] + s[2]);
    // Each floor-of-1 lift takes one slot from the donor, so allow one extra unit per lift.
    int lifts = 0;
    for (std::size_t k = 0; k < 3; ++k)
      if (static_cast<double>(total) * static_cast<double>(s[k]) / n < 1.0 && b[k] == 1) ++lifts;
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_GE(b[k], 1u);
      const double quota = static_cast<double>(total) * static_cast<double>(s[k]) / n;
      EXPECT_LT(std::abs(static_cast<double>(b[k]) - quota), 1.0 + lifts + 1e-9) << trial;
    }
  }
}

TEST(AlignedBatchSizes, ScaleInvariant) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> size(1, 2000), batch(3, 300), factor(2, 1000);
  for (int trial = 0; trial < 300; ++trial) {
    const SetSizes s{size(rng), size(rng), size(rng)};
    const std::size_t c = factor(rng), total = batch(rng);
    EXPECT_EQ(aligned_batch_sizes(s, total), aligned_batch_sizes({c * s[0], c * s[1], c * s[2]}, total));
  }
}

TEST(AlignedBatchSizes, EqualEpochLengthWhenProportional) {
  for (std::size_t scale : {1u, 3u, 10u, 100u}) {
    const SetSizes s{401 * scale, 247 * scale, 103 * scale};
    const SetSizes b = aligned_batch_sizes(s, 751);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ((s[k] + b[k] - 1) / b[k], scale);
  }
}

TEST(PlanEpoch, ExactlyOnceCoverageOnRandomPartitions) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> size(1, 300), batch(3, 60);
  for (int trial = 0; trial < 20; ++trial) {
    const SetSizes s{size(rng), size(rng), size(rng)};
    const TaskPartition p = make_partition(s, batch(rng));
    const auto plan = plan_epoch(p, 77, static_cast<std::uint64_t>(trial));
    EXPECT_EQ(plan.size(), p.epoch_length());
    for (std::size_t k = 0; k < 3; ++k) {
      std::vector<std::size_t> seen;
      for (const auto& b : plan) seen.insert(seen.end(), b.ids[k].begin(), b.ids[k].end());
      std::sort(seen.begin(), seen.end());
      EXPECT_EQ(seen, p.ids[k]) << "trial " << trial << " set " << k;
      if (p.ids[k].size() >= plan.size()) {
        for (const auto& b : plan) EXPECT_GE(b.ids[k].size(), 1u);
      }
    }
  }
}

TEST(PlanEpoch, WorkedExampleShape) {
  const TaskPartition p = make_partition({10, 5, 5}, 4);
  const auto plan = plan_epoch(p, 1, 0);
  ASSERT_EQ(plan.size(), 5u);
  for (const auto& b : plan) {
    EXPECT_EQ(b.ids[0].size(), 2u);
    EXPECT_EQ(b.ids[1].size(), 1u);
    EXPECT_EQ(b.ids[2].size(), 1u);
  }
}

TEST(PlanEpoch, DeterministicBySeedAndEpoch) {
  const TaskPartition p = make_partition({100, 100, 100}, 30);
  const auto a = plan_epoch(p, 5, 0), b = plan_epoch(p, 5, 0);
  const auto other_seed = plan_epoch(p, 6, 0), other_epoch = plan_epoch(p, 5, 1);
  auto flat = [](const std::vector<AlignedBatch>& plan) {
    std::vector<std::size_t> out;
    for (const auto& batch : plan)
      for (const auto& ids : batch.ids) out.insert(out.end(), ids.begin(), ids.end());
    return out;
  };
  EXPECT_EQ(flat(a), flat(b));
  EXPECT_NE(flat(a), flat(other_seed));
  EXPECT_NE(flat(a), flat(other_epoch));
  const auto ordered = plan_epoch(p, 5, 0, false);
  EXPECT_EQ(ordered.front().ids[0].front(), 0u);
}

TEST(PlanEpoch, RejectsOverlappingSets) {
  TaskPartition p;
  p.ids[0] = {0, 1};
  p.ids[1] = {1, 2};
  p.batch = {1, 1, 0};
  EXPECT_EQ(code_of([&] { plan_epoch(p, 0, 0); }), ErrorCode::InvalidSpec);
}

TEST(EpochIterator, WalksEpochs) {
  EpochIterator it(make_partition({10, 5, 5}, 4), 9);
  std::vector<std::size_t> first;
  int batches = 0;
  while (auto b = it.next()) {
    ++batches;
    for (const auto& ids : b->ids) first.insert(first.end(), ids.begin(), ids.end());
  }
  EXPECT_EQ(batches, 5);
  std::vector<std::size_t> sorted = first;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> all(20);
  std::iota(all.begin(), all.end(), 0);
  EXPECT_EQ(sorted, all);
  EXPECT_EQ(it.epoch(), 1u);
  std::vector<std::size_t> second;
  while (auto b = it.next())
    for (const auto& ids : b->ids) second.insert(second.end(), ids.begin(), ids.end());
  EXPECT_NE(first, second);
}
