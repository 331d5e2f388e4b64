#include "sparta/global_context.hpp"

#include "sparta/encoder.hpp"
#include "sparta/error.hpp"

namespace sparta {

GruParams add_gru_params(ParameterStore& store, const std::string& prefix, std::size_t dim,
                         Rng& rng, bool trainable) {
  auto w = [&](const char* name) {
    return store.add(prefix + "." + name, uniform_init({dim, dim}, dim, rng), trainable);
  };
  auto b = [&](const char* name) { return store.add(prefix + "." + name, Tensor({dim}), trainable); };
  GruParams p;
  p.w_z = w("w_z");
  p.w_r = w("w_r");
  p.w_n = w("w_n");
  p.u_z = w("u_z");
  p.u_r = w("u_r");
  p.u_n = w("u_n");
  p.b_z = b("b_z");
  p.b_r = b("b_r");
  p.b_n = b("b_n");
  return p;
}

GruParams find_gru_params(const ParameterStore& store, const std::string& prefix) {
  auto f = [&](const char* name) { return store.find(prefix + "." + name); };
  return {f("w_z"), f("w_r"), f("w_n"), f("u_z"), f("u_r"), f("u_n"), f("b_z"), f("b_r"), f("b_n")};
}

ad::Var gru_cell(ad::Graph& g, const GruParams& p, ad::Var input, ad::Var state) {
  using namespace ad;
  if (input.value().rank() != 1 || state.value().rank() != 1 || input.size() != state.size())
    throw ShapeError("gru_cell: input " + shape_string(input.shape()) + " vs state " +
                     shape_string(state.shape()));
  auto gate = [&](ParamId w, ParamId u, ParamId b, Var recurrent) {
    return add_bias(add(matmul(input, g.param(w)), matmul(recurrent, g.param(u))), g.param(b));
  };
  Var z = sigmoid(gate(p.w_z, p.u_z, p.b_z, state));
  Var r = sigmoid(gate(p.w_r, p.u_r, p.b_r, state));
  Var n = tanh(gate(p.w_n, p.u_n, p.b_n, mul(r, state)));
  Var ones = g.constant(Tensor(state.shape(), 1.0));
  return add(mul(sub(ones, z), n), mul(z, state));
}

std::vector<ad::Var> run_global_context(ad::Graph& g, const GruParams& p,
                                        std::span<const ad::Var> inputs) {
  if (inputs.empty()) throw Error("run_global_context: empty sequence");
  std::vector<ad::Var> states;
  states.reserve(inputs.size());
  ad::Var state = g.constant(Tensor({inputs[0].size()}));
  for (ad::Var h : inputs) {
    state = gru_cell(g, p, h, state);
    states.push_back(state);
  }
  return states;
}

}  // namespace sparta
