// SPDX-License-Identifier: Apache-2.0
#include "affect/sampler.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "affect/error.hpp"

namespace affect {

SetSizes aligned_batch_sizes(const SetSizes& set_sizes, std::size_t total_batch) {
  const std::size_t nonempty =
      static_cast<std::size_t>(std::count_if(set_sizes.begin(), set_sizes.end(), [](std::size_t s) { return s > 0; }));
  require(nonempty > 0, ErrorCode::Infeasible, "all task sets are empty");
  require(total_batch >= nonempty, ErrorCode::Infeasible, "total batch " + std::to_string(total_batch) + " cannot cover every set");

  __extension__ typedef unsigned __int128 Wide;
  const Wide sum = std::accumulate(set_sizes.begin(), set_sizes.end(), Wide{0});
  SetSizes out{};
  std::array<Wide, kTaskSets> remainder{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < kTaskSets; ++k) {
    const Wide scaled = static_cast<Wide>(total_batch) * set_sizes[k];
    out[k] = static_cast<std::size_t>(scaled / sum);
    remainder[k] = scaled % sum;
    assigned += out[k];
  }
  // Largest remainders first; stable on ties so lower slots win.
  std::array<std::size_t, kTaskSets> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < total_batch; ++i, ++assigned) ++out[order[i % kTaskSets]];

  for (std::size_t k = 0; k < kTaskSets; ++k) {
    if (set_sizes[k] == 0 || out[k] > 0) continue;
    const auto donor = static_cast<std::size_t>(std::max_element(out.begin(), out.end()) - out.begin());
    --out[donor];
    out[k] = 1;
  }
  return out;
}

void TaskPartition::validate() const {
  std::set<std::size_t> seen;
  for (std::size_t k = 0; k < kTaskSets; ++k) {
    require(ids[k].empty() || batch[k] >= 1, ErrorCode::InvalidSpec, "non-empty set with batch size 0");
    for (std::size_t id : ids[k]) require(seen.insert(id).second, ErrorCode::InvalidSpec, "task sets must be disjoint");
  }
  require(!seen.empty(), ErrorCode::InvalidSpec, "partition has no samples");
}

std::size_t TaskPartition::epoch_length() const {
  std::size_t length = 0;
  for (std::size_t k = 0; k < kTaskSets; ++k)
    if (!ids[k].empty()) length = std::max(length, (ids[k].size() + batch[k] - 1) / batch[k]);
  return length;
}

std::vector<AlignedBatch> plan_epoch(const TaskPartition& partition, std::uint64_t seed, std::uint64_t epoch,
                                     bool shuffle) {
  partition.validate();
  const std::size_t length = partition.epoch_length();
  std::vector<AlignedBatch> plan(length);
  for (std::size_t k = 0; k < kTaskSets; ++k) {
    std::vector<std::size_t> order = partition.ids[k];
    if (order.empty()) continue;
    if (shuffle) {
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32),
                        static_cast<std::uint32_t>(k)};
      std::mt19937_64 rng(seq);
      std::shuffle(order.begin(), order.end(), rng);
    }
    const std::size_t n = order.size();
    const std::size_t b = partition.batch[k];
    std::size_t pos = 0;
    for (std::size_t it = 0; it < length; ++it) {
      std::size_t take = 0;
      if ((n + b - 1) / b == length) {
        take = std::min(b, n - pos);
      } else {
        take = n / length + (it < n % length ? 1 : 0);
      }
      plan[it].ids[k].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                             order.begin() + static_cast<std::ptrdiff_t>(pos + take));
      pos += take;
    }
  }
  return plan;
}

EpochIterator::EpochIterator(TaskPartition partition, std::uint64_t seed, bool shuffle)
    : partition_(std::move(partition)), seed_(seed), shuffle_(shuffle) {
  partition_.validate();
}

std::optional<AlignedBatch> EpochIterator::next() {
  if (!started_) {
    plan_ = plan_epoch(partition_, seed_, epoch_, shuffle_);
    cursor_ = 0;
    started_ = true;
  }
  if (cursor_ == plan_.size()) {
    started_ = false;
    ++epoch_;
    return std::nullopt;
  }
  return plan_[cursor_++];
}

}  // namespace affect
