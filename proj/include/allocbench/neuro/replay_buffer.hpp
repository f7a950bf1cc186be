#pragma once

#include "allocbench/error.hpp"

#include <cstddef>
#include <random>
#include <string>
#include <vector>

namespace allocbench::neuro {

/// Fixed-capacity FIFO ring; once full, each push overwrites the oldest item.
template <typename T>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    require(capacity_ >= 1, ErrorKind::Validation, "replay buffer capacity must be at least 1");
    storage_.reserve(capacity_ < 4096 ? capacity_ : 4096);
  }

  void push(T item) {
    if (storage_.size() < capacity_) {
      storage_.push_back(std::move(item));
    } else {
      storage_[cursor_] = std::move(item);
    }
    cursor_ = (cursor_ + 1) % capacity_;
  }

  /// Uniform sample with replacement from the filled region.
  std::vector<T> sample(std::size_t batch, std::mt19937_64& rng) const {
    if (storage_.size() < batch || storage_.empty()) {
      fail(ErrorKind::InsufficientData, "replay buffer holds " + std::to_string(storage_.size()) +
                                            " items, cannot sample " + std::to_string(batch));
    }
    std::uniform_int_distribution<std::size_t> pick(0, storage_.size() - 1);
    std::vector<T> out;
    out.reserve(batch);
    for (std::size_t k = 0; k < batch; ++k) out.push_back(storage_[pick(rng)]);
    return out;
  }

  std::size_t size() const noexcept { return storage_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t cursor() const noexcept { return cursor_; }
  /// Items in insertion order, oldest first.
  std::vector<T> contents() const {
    std::vector<T> out;
    out.reserve(storage_.size());
    const std::size_t start = storage_.size() < capacity_ ? 0 : cursor_;
    for (std::size_t k = 0; k < storage_.size(); ++k) out.push_back(storage_[(start + k) % storage_.size()]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::vector<T> storage_;
};

}  // namespace allocbench::neuro
