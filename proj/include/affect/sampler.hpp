// SPDX-License-Identifier: Apache-2.0
//
// Multi-source batch alignment: each iteration concatenates one batch from
// the VA, AU and EXPR sets, with batch sizes chosen so that all three sets
// are exhausted after the same number of iterations.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace affect {

/// Slot order used throughout: VA, AU, EXPR.
inline constexpr std::size_t kTaskSets = 3;
using SetSizes = std::array<std::size_t, kTaskSets>;

/// Splits total_batch across the sets in proportion to their sizes using
/// largest-remainder rounding (ties to the lower slot), then lifts every
/// non-empty set to at least 1 by taking from the largest batch. Empty sets
/// get 0. Throws Infeasible when total_batch is smaller than the number of
/// non-empty sets (or below 3 when all are non-empty).
SetSizes aligned_batch_sizes(const SetSizes& set_sizes, std::size_t total_batch);

struct TaskPartition {
  /// Sample indices per set; must be pairwise disjoint.
  std::array<std::vector<std::size_t>, kTaskSets> ids;
  SetSizes batch{};

  void validate() const;
  /// Iterations per epoch: max over non-empty sets of ceil(size / batch).
  [[nodiscard]] std::size_t epoch_length() const;
};

struct AlignedBatch {
  std::array<std::vector<std::size_t>, kTaskSets> ids;

  [[nodiscard]] std::size_t size() const { return ids[0].size() + ids[1].size() + ids[2].size(); }
};

/// All batches of one epoch. Every id of every set appears exactly once; a
/// set whose own epoch would be shorter than the common length is spread
/// evenly over all iterations instead of being cut into fixed-size chunks.
/// The shuffle is a pure function of (seed, epoch).
std::vector<AlignedBatch> plan_epoch(const TaskPartition& partition, std::uint64_t seed, std::uint64_t epoch,
                                     bool shuffle = true);

/// Single-consumer stream of aligned batches across epochs.
class EpochIterator {
 public:
  EpochIterator(TaskPartition partition, std::uint64_t seed, bool shuffle = true);

  /// Next batch of the current epoch, or nullopt once it is exhausted; the
  /// following call starts the next epoch.
  std::optional<AlignedBatch> next();
  [[nodiscard]] std::uint64_t epoch() const noexcept { return epoch_; }

 private:
  TaskPartition partition_;
  std::uint64_t seed_;
  bool shuffle_;
  std::uint64_t epoch_ = 0;
  std::vector<AlignedBatch> plan_;
  std::size_t cursor_ = 0;
  bool started_ = false;
};

}  // namespace affect
