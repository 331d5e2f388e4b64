#pragma once

#include <cstddef>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "sparta/autograd.hpp"
#include "sparta/error.hpp"

namespace sparta {

inline std::size_t slot_dimension(const std::vector<double>& v) { return v.size(); }
inline std::size_t slot_dimension(const Tensor& t) { return t.size(); }
inline std::size_t slot_dimension(const ad::Var& v) { return v.size(); }

/// Sliding window over the last `capacity` utterance representations,
/// oldest first. Pushing beyond capacity evicts exactly the oldest slot.
template <class Slot>
class MemoryWindow {
 public:
  MemoryWindow(std::size_t capacity, std::size_t dim) : capacity_(capacity), dim_(dim) {
    if (capacity == 0) throw ConfigError("memory window capacity must be positive");
  }

  void push(Slot s) {
    if (slot_dimension(s) != dim_)
      throw ShapeError("memory window: slot dimension " + std::to_string(slot_dimension(s)) +
                       ", expected " + std::to_string(dim_));
    if (slots_.size() == capacity_) slots_.pop_front();
    slots_.push_back(std::move(s));
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return slots_.size(); }
  bool empty() const { return slots_.empty(); }
  void clear() { slots_.clear(); }
  const Slot& operator[](std::size_t i) const { return slots_[i]; }
  std::vector<Slot> slots() const { return {slots_.begin(), slots_.end()}; }

 private:
  std::size_t capacity_;
  std::size_t dim_;
  std::deque<Slot> slots_;
};

/// Decay vector D_i = 1/i for i = 1 (oldest) .. n (newest).
std::vector<double> decay_vector(std::size_t n);

struct AttentionParams {
  ParamId pool_w, pool_b;  // query-side pooler
  ParamId w_query, w_key, w_value, w_output;
};

AttentionParams add_attention_params(ParameterStore& store, const std::string& prefix,
                                     std::size_t dim, Rng& rng, bool trainable = true);
AttentionParams find_attention_params(const ParameterStore& store, const std::string& prefix);

struct TimeAwareOptions {
  /// Divide logits by D (i.e. multiply slot i's logit by i). Off reproduces
  /// plain single-head dot-product attention without any divisor.
  bool apply_decay = true;
  /// Clamp raw logits at zero before rescaling.
  bool clamp_nonnegative_logits = false;
};

/// Optional outputs for inspection; weights has one row per head.
struct AttentionTrace {
  std::vector<std::vector<double>> weights;
  std::vector<double> raw_logits;  // head 0, before any scaling
};

/// Query-side projection q = tanh(h W_p + b_p) W_q.
ad::Var attention_query(ad::Graph& g, const AttentionParams& p, ad::Var h_t);

/// softmax(q K^T / D) V projected by W_o. Zero vector for an empty window.
ad::Var time_aware_attention(ad::Graph& g, const AttentionParams& p, ad::Var h_t,
                             std::span<const ad::Var> slots, const TimeAwareOptions& opts = {},
                             AttentionTrace* trace = nullptr);

/// Standard multi-head dot-product attention with divisor sqrt(d/h) (or none
/// when `scale_logits` is false). Zero vector for an empty window.
ad::Var multi_head_attention(ad::Graph& g, const AttentionParams& p, ad::Var h_t,
                             std::span<const ad::Var> slots, std::size_t heads,
                             bool scale_logits = true, AttentionTrace* trace = nullptr);

}  // namespace sparta
