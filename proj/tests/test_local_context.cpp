#include <Eigen/Dense>
#include <cmath>
#include <deque>

#include "doctest.h"
#include "sparta/error.hpp"
#include "sparta/gradcheck.hpp"
#include "sparta/local_context.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace sparta;
using namespace testing;

namespace {

struct Fixture {
  ParameterStore store;
  AttentionParams p;
  Fixture(std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    p = add_attention_params(store, "att", d, rng);
    store[p.pool_b].tensor = random_vector(d, rng, 0.5);
  }
};

std::vector<ad::Var> as_vars(ad::Graph& g, const std::vector<Tensor>& slots) {
  std::vector<ad::Var> out;
  for (const auto& s : slots) out.push_back(g.constant(s));
  return out;
}

}  // namespace

TEST_SUITE("local_context") {

TEST_CASE("memory window: FIFO examples") {
  MemoryWindow<std::vector<double>> w(2, 1);
  CHECK(w.empty());
  w.push({1.0});
  CHECK(w.slots() == std::vector<std::vector<double>>{{1.0}});
  w.push({2.0});
  w.push({3.0});
  CHECK(w.slots() == std::vector<std::vector<double>>{{2.0}, {3.0}});
  CHECK_THROWS_AS(w.push({1.0, 2.0}), ShapeError);
  CHECK_THROWS_AS(MemoryWindow<std::vector<double>>(0, 1), ConfigError);
}

TEST_CASE("memory window: tail of the full history") {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 1 + trial % 8;
    MemoryWindow<std::vector<double>> w(k, 2);
    std::vector<std::vector<double>> history;
    const std::size_t n = uniform_index(rng, 50);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> v = {uniform01(rng), static_cast<double>(i)};
      history.push_back(v);
      w.push(v);
      const std::size_t keep = std::min(k, history.size());
      CHECK(w.size() == keep);
    }
    const std::size_t keep = std::min(k, history.size());
    CHECK(w.slots() == std::vector<std::vector<double>>(history.end() - keep, history.end()));
  }
}

TEST_CASE("decay vector") {
  const auto d = decay_vector(6);
  REQUIRE(d.size() == 6);
  CHECK(d[0] == 1.0);
  CHECK(d[5] == doctest::Approx(1.0 / 6));
  for (std::size_t i = 1; i < 6; ++i) CHECK(d[i] < d[i - 1]);
}

TEST_CASE("empty window yields the zero vector") {
  Fixture f(4, 1);
  Rng rng(2);
  ad::Graph g(&f.store);
  const auto h = g.constant(random_vector(4, rng));
  for (double x : time_aware_attention(g, f.p, h, {}).value().values()) CHECK(x == 0.0);
  for (double x : multi_head_attention(g, f.p, h, {}, 2).value().values()) CHECK(x == 0.0);
}

TEST_CASE("TAA: equal raw logits ln 2 over two slots weigh 1/3 and 2/3") {
  ParameterStore store;
  Rng rng(3);
  const AttentionParams p = add_attention_params(store, "att", 1, rng);
  store[p.pool_w].tensor.fill(0.0);
  store[p.pool_b].tensor.fill(std::atanh(0.5));
  store[p.w_query].tensor.fill(1.0);
  store[p.w_key].tensor.fill(1.0);
  ad::Graph g(&store);
  const std::vector<Tensor> slots(2, Tensor::vector({2.0 * std::log(2.0)}));
  AttentionTrace trace;
  time_aware_attention(g, p, g.constant(Tensor::vector({0.3})), as_vars(g, slots), {}, &trace);
  REQUIRE(trace.weights.size() == 1);
  CHECK(trace.raw_logits[0] == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(trace.raw_logits[1] == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(trace.weights[0][0] == doctest::Approx(1.0 / 3).epsilon(1e-14));
  CHECK(trace.weights[0][1] == doctest::Approx(2.0 / 3).epsilon(1e-14));
}

TEST_CASE("TAA: zero query gives uniform weights and the projected mean value") {
  Fixture f(4, 4);
  f.store[f.p.w_query].tensor.fill(0.0);
  Rng rng(5);
  std::vector<Tensor> slots;
  for (int i = 0; i < 3; ++i) slots.push_back(random_vector(4, rng));
  ad::Graph g(&f.store);
  AttentionTrace trace;
  const Tensor out =
      time_aware_attention(g, f.p, g.constant(random_vector(4, rng)), as_vars(g, slots), {}, &trace).value();
  for (double w : trace.weights[0]) CHECK(w == doctest::Approx(1.0 / 3).epsilon(1e-14));
  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(4);
  for (const auto& s : slots) mean += row(s) * mat(f.store[f.p.w_value].tensor) / 3.0;
  const Eigen::RowVectorXd ref = mean * mat(f.store[f.p.w_output].tensor);
  for (int j = 0; j < 4; ++j) CHECK(out[j] == doctest::Approx(ref(j)).epsilon(1e-12));
}

TEST_CASE("TAA: recency monotonicity on equal logits") {
  Rng rng(6);
  std::size_t positive = 0, negative = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d = 2 + uniform_index(rng, 6), n = 1 + uniform_index(rng, 8);
    Fixture f(d, rng());
    const std::vector<Tensor> slots(n, random_vector(d, rng));
    ad::Graph g(&f.store);
    AttentionTrace trace;
    time_aware_attention(g, f.p, g.constant(random_vector(d, rng)), as_vars(g, slots), {}, &trace);
    const double c = trace.raw_logits[0];
    for (double r : trace.raw_logits) CHECK(r == c);
    const auto& w = trace.weights[0];
    double sum = 0.0;
    for (double x : w) sum += x;
    CHECK(std::abs(sum - 1.0) < 1e-9);
    for (std::size_t i = 1; i < n; ++i) {
      if (c > 0) CHECK(w[i] > w[i - 1]);
      if (c < 0) CHECK(w[i] < w[i - 1]);
    }
    (c > 0 ? positive : negative)++;
  }
  CHECK(positive > 100);
  CHECK(negative > 100);
}

TEST_CASE("TAA: clamping removes the reversal for negative logits") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    Fixture f(4, rng());
    const std::vector<Tensor> slots(4, random_vector(4, rng));
    ad::Graph g(&f.store);
    AttentionTrace trace;
    TimeAwareOptions opts;
    opts.clamp_nonnegative_logits = true;
    time_aware_attention(g, f.p, g.constant(random_vector(4, rng)), as_vars(g, slots), opts, &trace);
    const auto& w = trace.weights[0];
    for (std::size_t i = 1; i < w.size(); ++i) {
      if (trace.raw_logits[0] > 0) CHECK(w[i] > w[i - 1]);
      else CHECK(w[i] == doctest::Approx(w[0]).epsilon(1e-14));
    }
  }
}

TEST_CASE("attention weights are distributions on random windows") {
  Rng rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d = 4, n = 1 + uniform_index(rng, 8);
    Fixture f(d, rng());
    std::vector<Tensor> slots;
    for (std::size_t i = 0; i < n; ++i) slots.push_back(random_vector(d, rng, 3.0));
    ad::Graph g(&f.store);
    const auto h = g.constant(random_vector(d, rng, 3.0));
    AttentionTrace taa, mha;
    time_aware_attention(g, f.p, h, as_vars(g, slots), {}, &taa);
    multi_head_attention(g, f.p, h, as_vars(g, slots), 2, true, &mha);
    for (const auto* tr : {&taa, &mha})
      for (const auto& w : tr->weights) {
        double sum = 0.0;
        for (double x : w) {
          CHECK(x >= 0.0);
          sum += x;
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
      }
  }
}

TEST_CASE("MHA matches the naive per-head loop") {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t heads = trial % 2 ? 2 : 4, d = 8, n = 1 + uniform_index(rng, 6);
    Fixture f(d, rng());
    std::vector<Tensor> slots;
    for (std::size_t i = 0; i < n; ++i) slots.push_back(random_vector(d, rng));
    const Tensor h = random_vector(d, rng);
    ad::Graph g(&f.store);
    const Tensor got = multi_head_attention(g, f.p, g.constant(h), as_vars(g, slots), heads).value();
    const Eigen::RowVectorXd ref = naive_mha(f.store, f.p, h, slots, heads);
    for (std::size_t j = 0; j < d; ++j) CHECK(std::abs(got[j] - ref(j)) < 1e-10);
  }
}

TEST_CASE("MHA with one head and no divisor equals TAA without decay") {
  Rng rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    Fixture f(6, rng());
    std::vector<Tensor> slots;
    for (std::size_t i = 0; i < 1 + uniform_index(rng, 5); ++i) slots.push_back(random_vector(6, rng));
    ad::Graph g(&f.store);
    const auto h = g.constant(random_vector(6, rng));
    TimeAwareOptions plain;
    plain.apply_decay = false;
    const Tensor a = time_aware_attention(g, f.p, h, as_vars(g, slots), plain).value();
    const Tensor b = multi_head_attention(g, f.p, h, as_vars(g, slots), 1, false).value();
    CHECK(a == b);
  }
}

TEST_CASE("MHA: zero query is uniform per head; bad head count is an error") {
  Fixture f(8, 11);
  f.store[f.p.w_query].tensor.fill(0.0);
  Rng rng(12);
  std::vector<Tensor> slots;
  for (int i = 0; i < 4; ++i) slots.push_back(random_vector(8, rng));
  ad::Graph g(&f.store);
  AttentionTrace trace;
  const auto h = g.constant(random_vector(8, rng));
  multi_head_attention(g, f.p, h, as_vars(g, slots), 4, true, &trace);
  REQUIRE(trace.weights.size() == 4);
  for (const auto& w : trace.weights)
    for (double x : w) CHECK(x == doctest::Approx(0.25).epsilon(1e-14));
  CHECK_THROWS_AS(multi_head_attention(g, f.p, h, as_vars(g, slots), 3), ConfigError);
}

TEST_CASE("dimension mismatches are reported") {
  Fixture f(4, 13);
  Rng rng(14);
  ad::Graph g(&f.store);
  const std::vector<Tensor> slots = {random_vector(3, rng)};
  CHECK_THROWS_AS(time_aware_attention(g, f.p, g.constant(random_vector(4, rng)), as_vars(g, slots)), ShapeError);
}

TEST_CASE("gradients through both attention paths pass the checker") {
  Rng rng(15);
  for (int trial = 0; trial < 4; ++trial) {
    Fixture f(4, rng());
    ParameterStore& s = f.store;
    std::vector<ParamId> slot_ids;
    for (int i = 0; i < 3; ++i) slot_ids.push_back(s.add("slot" + std::to_string(i), random_vector(4, rng)));
    const ParamId h = s.add("h", random_vector(4, rng));
    const Tensor w = random_vector(4, rng);
    for (int variant = 0; variant < 3; ++variant) {
      const auto report = finite_difference_check(s, [&](ad::Graph& g) {
        std::vector<ad::Var> slots;
        for (auto id : slot_ids) slots.push_back(g.param(id));
        ad::Var out;
        if (variant == 0) out = time_aware_attention(g, f.p, g.param(h), slots);
        else if (variant == 1) out = multi_head_attention(g, f.p, g.param(h), slots, 2);
        else out = multi_head_attention(g, f.p, g.param(h), slots, 1);
        return ad::sum(ad::mul(out, g.constant(w)));
      });
      CHECK(report.max_rel_error < 1e-4);
    }
  }
}

}  // TEST_SUITE
