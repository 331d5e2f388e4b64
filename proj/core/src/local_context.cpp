#include "sparta/local_context.hpp"

#include <cmath>

#include "sparta/encoder.hpp"

namespace sparta {

std::vector<double> decay_vector(std::size_t n) {
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = 1.0 / static_cast<double>(i + 1);
  return d;
}

AttentionParams add_attention_params(ParameterStore& store, const std::string& prefix,
                                     std::size_t dim, Rng& rng, bool trainable) {
  auto w = [&](const char* name) {
    return store.add(prefix + "." + name, uniform_init({dim, dim}, dim, rng), trainable);
  };
  auto b = [&](const char* name) { return store.add(prefix + "." + name, Tensor({dim}), trainable); };
  AttentionParams p;
  p.pool_w = w("pool_w");
  p.pool_b = b("pool_b");
  p.w_query = w("w_query");
  p.w_key = w("w_key");
  p.w_value = w("w_value");
  p.w_output = w("w_output");
  return p;
}

AttentionParams find_attention_params(const ParameterStore& store, const std::string& prefix) {
  auto f = [&](const char* name) { return store.find(prefix + "." + name); };
  return {f("pool_w"), f("pool_b"), f("w_query"), f("w_key"), f("w_value"), f("w_output")};
}

namespace {

void check_dims(ad::Var h_t, std::span<const ad::Var> slots) {
  if (h_t.value().rank() != 1) throw ShapeError("attention query must be a vector");
  for (ad::Var s : slots)
    if (s.size() != h_t.size())
      throw ShapeError("attention: slot dimension " + std::to_string(s.size()) +
                       " does not match query dimension " + std::to_string(h_t.size()));
}

ad::Var affine(ad::Graph& g, ad::Var x, ParamId w, ParamId b) {
  return ad::add_bias(ad::matmul(x, g.param(w)), g.param(b));
}

ad::Var project_output(ad::Graph& g, const AttentionParams& p, ad::Var context) {
  return ad::matmul(context, g.param(p.w_output));
}

}  // namespace

ad::Var attention_query(ad::Graph& g, const AttentionParams& p, ad::Var h_t) {
  return ad::matmul(ad::tanh(affine(g, h_t, p.pool_w, p.pool_b)), g.param(p.w_query));
}

ad::Var time_aware_attention(ad::Graph& g, const AttentionParams& p, ad::Var h_t,
                             std::span<const ad::Var> slots, const TimeAwareOptions& opts,
                             AttentionTrace* trace) {
  using namespace ad;
  check_dims(h_t, slots);
  if (slots.empty()) {
    if (trace) *trace = {};
    return g.constant(Tensor({h_t.size()}));
  }
  Var memory = stack_rows(slots);
  Var q = attention_query(g, p, h_t);
  Var keys = ad::matmul(memory, g.param(p.w_key));
  Var values = ad::matmul(memory, g.param(p.w_value));
  Var logits = matmul(keys, q);
  if (trace) trace->raw_logits = logits.value().data();
  if (opts.clamp_nonnegative_logits) logits = leaky_relu(logits, 0.0);
  if (opts.apply_decay) {
    // Dividing by D_i = 1/i: the newest slot gets the largest factor.
    Tensor factors({slots.size()});
    for (std::size_t i = 0; i < slots.size(); ++i) factors[i] = static_cast<double>(i + 1);
    logits = mul(logits, g.constant(std::move(factors)));
  }
  Var weights = softmax(logits, 0);
  if (trace) trace->weights = {weights.value().data()};
  return project_output(g, p, matmul(weights, values));
}

ad::Var multi_head_attention(ad::Graph& g, const AttentionParams& p, ad::Var h_t,
                             std::span<const ad::Var> slots, std::size_t heads,
                             bool scale_logits, AttentionTrace* trace) {
  using namespace ad;
  check_dims(h_t, slots);
  const std::size_t d = h_t.size();
  if (heads == 0 || d % heads != 0)
    throw ConfigError("multi-head attention: dim " + std::to_string(d) +
                      " is not divisible by " + std::to_string(heads) + " heads");
  if (slots.empty()) {
    if (trace) *trace = {};
    return g.constant(Tensor({d}));
  }
  const std::size_t dh = d / heads;
  Var memory = stack_rows(slots);
  Var q = attention_query(g, p, h_t);
  Var keys = ad::matmul(memory, g.param(p.w_key));
  Var values = ad::matmul(memory, g.param(p.w_value));
  if (trace) *trace = {};
  std::vector<Var> outs;
  for (std::size_t h = 0; h < heads; ++h) {
    Var logits = matmul(slice(keys, h * dh, dh), slice(q, h * dh, dh));
    if (trace && h == 0) trace->raw_logits = logits.value().data();
    if (scale_logits) logits = scale(logits, 1.0 / std::sqrt(static_cast<double>(dh)));
    Var weights = softmax(logits, 0);
    if (trace) trace->weights.push_back(weights.value().data());
    outs.push_back(matmul(weights, slice(values, h * dh, dh)));
  }
  Var context = heads == 1 ? outs[0] : concat(outs, 0);
  return project_output(g, p, context);
}

}  // namespace sparta
