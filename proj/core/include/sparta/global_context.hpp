#pragma once

#include <span>
#include <string>
#include <vector>

#include "sparta/autograd.hpp"

namespace sparta {

/// Single-layer GRU; row-vector convention, input and recurrent matrices d x d.
struct GruParams {
  ParamId w_z, w_r, w_n;
  ParamId u_z, u_r, u_n;
  ParamId b_z, b_r, b_n;
};

GruParams add_gru_params(ParameterStore& store, const std::string& prefix, std::size_t dim,
                         Rng& rng, bool trainable = true);
GruParams find_gru_params(const ParameterStore& store, const std::string& prefix);

/// z = sigmoid(h W_z + g U_z + b_z), r = sigmoid(h W_r + g U_r + b_r),
/// n = tanh(h W_n + (r * g) U_n + b_n), g' = (1 - z) * n + z * g.
ad::Var gru_cell(ad::Graph& g, const GruParams& p, ad::Var input, ad::Var state);

/// States G_1..G_m from a zero initial state; G_t depends on inputs 1..t only.
std::vector<ad::Var> run_global_context(ad::Graph& g, const GruParams& p,
                                        std::span<const ad::Var> inputs);

}  // namespace sparta
