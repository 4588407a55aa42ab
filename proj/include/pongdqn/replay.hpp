#pragma once

#include <cstdint>
#include <vector>

#include "pongdqn/env.hpp"
#include "pongdqn/rng.hpp"
#include "pongdqn/tensor.hpp"

namespace pongdqn {

// Stack of recent binary frames, bit-packed (a 4x32x32 stack costs 512 bytes
// instead of 16 KB, which is what makes a 50k-transition replay buffer fit in
// memory). Frames are ordered oldest to newest.
class ObsStack {
 public:
  ObsStack() = default;
  ObsStack(int frames, int height, int width)
      : frames_(frames), h_(height), w_(width),
        words_per_frame_((static_cast<std::size_t>(height) * width + 63) / 64),
        bits_(static_cast<std::size_t>(frames) * words_per_frame_, 0) {
    if (frames < 1 || height < 1 || width < 1)
      throw ConfigError("observation stack dimensions must be positive");
  }

  int frames() const { return frames_; }
  int height() const { return h_; }
  int width() const { return w_; }

  // Drops the oldest frame and appends `obs` as the newest.
  void push_frame(const Observation& obs) {
    if (obs.height != h_ || obs.width != w_)
      throw DimensionError("frame is " + std::to_string(obs.height) + "x" +
                           std::to_string(obs.width) + ", stack expects " +
                           std::to_string(h_) + "x" + std::to_string(w_));
    std::move(bits_.begin() + static_cast<std::ptrdiff_t>(words_per_frame_), bits_.end(),
              bits_.begin());
    std::uint64_t* last = bits_.data() + (static_cast<std::size_t>(frames_) - 1) * words_per_frame_;
    std::fill(last, last + words_per_frame_, 0);
    const std::size_t n = static_cast<std::size_t>(h_) * w_;
    for (std::size_t i = 0; i < n; ++i)
      if (obs.px[i] != 0.0f) last[i >> 6] |= std::uint64_t{1} << (i & 63);
  }

  // Unpacks into row-major [frames, height, width] floats at `dst`.
  void write_into(float* dst) const {
    const std::size_t n = static_cast<std::size_t>(h_) * w_;
    for (int f = 0; f < frames_; ++f) {
      const std::uint64_t* src = bits_.data() + static_cast<std::size_t>(f) * words_per_frame_;
      float* out = dst + static_cast<std::size_t>(f) * n;
      for (std::size_t i = 0; i < n; ++i)
        out[i] = (src[i >> 6] >> (i & 63)) & 1 ? 1.0f : 0.0f;
    }
  }

  Tensor<float> to_tensor() const {
    Tensor<float> t({static_cast<std::size_t>(frames_), static_cast<std::size_t>(h_),
                     static_cast<std::size_t>(w_)});
    write_into(t.data());
    return t;
  }

  bool operator==(const ObsStack&) const = default;

 private:
  int frames_ = 0, h_ = 0, w_ = 0;
  std::size_t words_per_frame_ = 0;
  std::vector<std::uint64_t> bits_;
};

struct Transition {
  ObsStack obs;
  AgentAction action = AgentAction::Still;
  float reward = 0;
  ObsStack next_obs;
  bool terminal = false;

  bool operator==(const Transition&) const = default;
};

// Fixed-capacity ring of transitions, oldest evicted first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity < 1) throw ConfigError("replay capacity must be positive");
  }

  void store(Transition t) {
    if (!(t.reward >= -1.0f && t.reward <= 1.0f))
      throw ContractViolation("transition reward " + std::to_string(t.reward) +
                              " outside [-1, 1]");
    if (t.obs.frames() != t.next_obs.frames() || t.obs.height() != t.next_obs.height() ||
        t.obs.width() != t.next_obs.width())
      throw DimensionError("transition stacks differ in shape");
    if (storage_.size() < capacity_) {
      storage_.push_back(std::move(t));
    } else {
      storage_[insert_count_ % capacity_] = std::move(t);
    }
    ++insert_count_;
  }

  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t insert_count() const { return insert_count_; }

  const Transition& at(std::size_t i) const { return storage_[i]; }

  // Uniform over the current contents.
  std::size_t sample_index(Rng& rng) const {
    return static_cast<std::size_t>(rng.uniform_int(storage_.size()));
  }
  const Transition& sample(Rng& rng) const { return storage_[sample_index(rng)]; }

 private:
  std::size_t capacity_;
  std::uint64_t insert_count_ = 0;
  std::vector<Transition> storage_;
};

}  // namespace pongdqn
