#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "sparta/error.hpp"
#include "sparta/global_context.hpp"
#include "sparta/gradcheck.hpp"
#include "support.hpp"

using namespace sparta;

namespace {

Tensor random_vector(std::size_t d, Rng& rng) {
  Tensor t(Shape{d});
  for (auto& v : t.values()) v = uniform(rng, -1.0, 1.0);
  return t;
}

Eigen::MatrixXd mat(const Tensor& t) {
  Eigen::MatrixXd m(t.rows(), t.cols());
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m(r, c) = t[r * t.cols() + c];
  return m;
}

Eigen::RowVectorXd row(const Tensor& t) { return mat(t).row(0); }

Eigen::RowVectorXd sigmoid(const Eigen::RowVectorXd& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

/// The three gate equations evaluated by hand.
Eigen::RowVectorXd hand_cell(const ParameterStore& s, const GruParams& p, const Eigen::RowVectorXd& h,
                             const Eigen::RowVectorXd& g) {
  auto W = [&](ParamId id) { return mat(s[id].tensor); };
  auto b = [&](ParamId id) { return row(s[id].tensor); };
  const Eigen::RowVectorXd z = sigmoid(h * W(p.w_z) + g * W(p.u_z) + b(p.b_z));
  const Eigen::RowVectorXd r = sigmoid(h * W(p.w_r) + g * W(p.u_r) + b(p.b_r));
  const Eigen::RowVectorXd n =
      (h * W(p.w_n) + r.cwiseProduct(g) * W(p.u_n) + b(p.b_n)).array().tanh().matrix();
  return (1.0 - z.array()).matrix().cwiseProduct(n) + z.cwiseProduct(g);
}

struct Fixture {
  ParameterStore store;
  GruParams p;
  Fixture(std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    p = add_gru_params(store, "gru", d, rng);
    for (ParamId b : {p.b_z, p.b_r, p.b_n}) store[b].tensor = random_vector(d, rng);
  }
};

}  // namespace

TEST_SUITE("global_context") {

TEST_CASE("zero parameters and zero state stay at zero") {
  Fixture f(5, 1);
  for (std::size_t i = 0; i < f.store.size(); ++i) f.store.at(i).tensor.fill(0.0);
  Rng rng(2);
  ad::Graph g(&f.store);
  std::vector<ad::Var> inputs;
  for (int i = 0; i < 6; ++i) inputs.push_back(g.constant(random_vector(5, rng)));
  for (const auto& s : run_global_context(g, f.p, inputs))
    for (double x : s.value().values()) CHECK(x == 0.0);
}

TEST_CASE("saturated update gate passes the state through") {
  Fixture f(4, 3);
  f.store[f.p.b_z].tensor.fill(50.0);
  Rng rng(4);
  ad::Graph g(&f.store);
  const Tensor state = random_vector(4, rng);
  const Tensor out = gru_cell(g, f.p, g.constant(random_vector(4, rng)), g.constant(state)).value();
  for (std::size_t j = 0; j < 4; ++j) CHECK(out[j] == doctest::Approx(state[j]).epsilon(1e-12));
}

TEST_CASE("cell matches the hand-unrolled gate equations") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Fixture f(4, seed);
    Rng rng(seed + 100);
    const Tensor h = random_vector(4, rng), state = random_vector(4, rng);
    ad::Graph g(&f.store);
    const Tensor got = gru_cell(g, f.p, g.constant(h), g.constant(state)).value();
    const Eigen::RowVectorXd ref = hand_cell(f.store, f.p, row(h), row(state));
    for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(got[j] - ref(j)) < 1e-12);
  }
}

TEST_CASE("sequence equals chained cells from a zero state") {
  Fixture f(4, 5);
  Rng rng(6);
  std::vector<Tensor> xs;
  for (int i = 0; i < 3; ++i) xs.push_back(random_vector(4, rng));
  ad::Graph g(&f.store);
  std::vector<ad::Var> inputs;
  for (const auto& x : xs) inputs.push_back(g.constant(x));
  const auto states = run_global_context(g, f.p, inputs);
  REQUIRE(states.size() == 3);
  Eigen::RowVectorXd s = Eigen::RowVectorXd::Zero(4);
  for (int t = 0; t < 3; ++t) {
    s = hand_cell(f.store, f.p, row(xs[t]), s);
    for (int j = 0; j < 4; ++j) CHECK(std::abs(states[t].value()[j] - s(j)) < 1e-12);
  }
  const auto single = run_global_context(g, f.p, std::span<const ad::Var>(inputs.data(), 1));
  CHECK(single[0].value() == gru_cell(g, f.p, inputs[0], g.constant(Tensor(Shape{4}))).value());
}

TEST_CASE("causality: editing a later input leaves earlier states bitwise unchanged") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    Fixture f(3, rng());
    const std::size_t m = 2 + uniform_index(rng, 8);
    std::vector<Tensor> xs;
    for (std::size_t i = 0; i < m; ++i) xs.push_back(random_vector(3, rng));
    const std::size_t t = uniform_index(rng, m - 1);
    auto run = [&](const std::vector<Tensor>& in) {
      ad::Graph g(&f.store);
      std::vector<ad::Var> vars;
      for (const auto& x : in) vars.push_back(g.constant(x));
      std::vector<Tensor> out;
      for (const auto& s : run_global_context(g, f.p, vars)) out.push_back(s.value());
      return out;
    };
    const auto base = run(xs);
    auto edited = xs;
    edited[t + 1] = random_vector(3, rng);
    const auto after = run(edited);
    for (std::size_t i = 0; i <= t; ++i) CHECK(base[i] == after[i]);
    for (const auto& s : base)
      for (double x : s.values()) {
        CHECK(x > -1.0);
        CHECK(x < 1.0);
      }
  }
}

TEST_CASE("errors: empty sequence and dimension mismatch") {
  Fixture f(3, 8);
  ad::Graph g(&f.store);
  CHECK_THROWS_AS(run_global_context(g, f.p, {}), Error);
  CHECK_THROWS_AS(gru_cell(g, f.p, g.constant(Tensor(Shape{4})), g.constant(Tensor(Shape{3}))), ShapeError);
}

TEST_CASE("backpropagation through time passes the checker") {
  Rng rng(9);
  for (std::size_t len : {1, 3, 10}) {
    Fixture f(4, rng());
    std::vector<ParamId> xs;
    for (std::size_t i = 0; i < len; ++i) xs.push_back(f.store.add("x" + std::to_string(i), random_vector(4, rng)));
    const Tensor w = random_vector(4, rng);
    const auto report = finite_difference_check(f.store, [&](ad::Graph& g) {
      std::vector<ad::Var> inputs;
      for (auto id : xs) inputs.push_back(g.param(id));
      const auto states = run_global_context(g, f.p, inputs);
      return ad::sum(ad::mul(states.back(), g.constant(w)));
    });
    CHECK(report.max_rel_error < 1e-4);
  }
}

}  // TEST_SUITE
