#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ptsearch/gradcheck.hpp"
#include "ptsearch/graph.hpp"
#include "ptsearch/matrix.hpp"
#include "ptsearch/optim.hpp"
#include "ptsearch/rng.hpp"
#include "ptsearch/tape.hpp"

using namespace ptsearch;

namespace {

Matrix random_matrix(int rows, int cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (real& v : m.data) v = real(rng.uniform(lo, hi));
  return m;
}

}  // namespace

TEST_CASE("matrix shape checks") {
  Matrix a(2, 3), b(2, 3);
  CHECK_THROWS_AS((void)matmul(a, b), std::invalid_argument);
  CHECK_NOTHROW((void)matmul(a, transpose(b)));
  CHECK_THROWS_AS(Matrix(2, 2, {1, 2, 3}), std::invalid_argument);
}

TEST_CASE("affine forward") {
  Tape tape;
  ParamStore params;

  SUBCASE("identity weights pass input through") {
    ValueId x = tape.constant(Matrix(1, 2, {1, 2}));
    ValueId w = tape.constant(Matrix(2, 2, {1, 0, 0, 1}));
    ValueId b = tape.constant(Matrix(1, 2, {0, 0}));
    ValueId y = tape.affine(x, w, b);
    CHECK(tape.value(y).at(0, 0) == doctest::Approx(1));
    CHECK(tape.value(y).at(0, 1) == doctest::Approx(2));
  }

  SUBCASE("1x2 times 2x1 plus bias") {
    ValueId x = tape.constant(Matrix(1, 2, {1, 2}));
    ValueId w = tape.constant(Matrix(2, 1, {3, 4}));
    ValueId b = tape.constant(Matrix(1, 1, {1}));
    ValueId y = tape.affine(x, w, b);
    CHECK(tape.value(y).at(0, 0) == doctest::Approx(12));
  }

  SUBCASE("gradient of sum w.r.t. bias is all ones") {
    params.create("w", Matrix(2, 2, {0.3, -0.2, 0.5, 0.1}));
    params.create("b", Matrix(1, 2, {0.1, -0.1}));
    ValueId x = tape.constant(Matrix(3, 2, {1, 2, 3, 4, 5, 6}));
    ValueId y = tape.affine(x, tape.param(params, "w"), tape.param(params, "b"));
    ValueId loss = tape.sum_all(y);
    tape.backward(loss);
    for (real g : params.grad("b").data) CHECK(double(g) == doctest::Approx(3.0));
  }

  SUBCASE("bias shape is validated") {
    ValueId x = tape.constant(Matrix(1, 2, {1, 2}));
    ValueId w = tape.constant(Matrix(2, 2, {1, 0, 0, 1}));
    ValueId bad = tape.constant(Matrix(1, 3, {0, 0, 0}));
    CHECK_THROWS_AS(tape.affine(x, w, bad), std::invalid_argument);
  }
}

TEST_CASE("activations") {
  Tape tape;

  SUBCASE("leaky_relu definition") {
    ValueId x = tape.constant(Matrix(1, 3, {-1, 0, 2}));
    ValueId y = tape.leaky_relu(x, real(0.01));
    CHECK(tape.value(y).at(0, 0) == doctest::Approx(-0.01));
    CHECK(tape.value(y).at(0, 1) == doctest::Approx(0));
    CHECK(tape.value(y).at(0, 2) == doctest::Approx(2));
  }

  SUBCASE("leaky_relu slope domain") {
    ValueId x = tape.constant(Matrix(1, 1, {1}));
    CHECK_THROWS_AS(tape.leaky_relu(x, real(0)), std::invalid_argument);
    CHECK_THROWS_AS(tape.leaky_relu(x, real(1)), std::invalid_argument);
  }

  SUBCASE("sigmoid at zero") {
    ValueId x = tape.constant(Matrix(1, 1, {0}));
    CHECK(tape.value(tape.sigmoid(x)).at(0, 0) == doctest::Approx(0.5));
  }

  SUBCASE("sigmoid symmetry") {
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
      const double x = rng.uniform(-30, 30);
      CHECK(std::abs(double(sigmoid_scalar(real(x))) + double(sigmoid_scalar(real(-x))) - 1.0) < 1e-12);
    }
  }

  SUBCASE("sigmoid stays finite at extremes") {
    ValueId x = tape.constant(Matrix(1, 2, {-5000, 5000}));
    CHECK(all_finite(tape.value(tape.sigmoid(x))));
  }
}

TEST_CASE("softmax_vec") {
  SUBCASE("constant input is uniform") {
    const auto out = softmax_vec({3.5, 3.5, 3.5, 3.5});
    for (real v : out) CHECK(double(v) == doctest::Approx(0.25));
  }

  SUBCASE("two-component value") {
    const auto out = softmax_vec({real(0.9), real(0.1)});
    CHECK(double(out[0]) == doctest::Approx(0.68997).epsilon(1e-4));
    CHECK(double(out[1]) == doctest::Approx(0.31003).epsilon(1e-4));
  }

  SUBCASE("singleton normalizes to one") {
    const auto out = softmax_vec({real(-123.0)});
    CHECK(double(out[0]) == doctest::Approx(1.0));
  }

  SUBCASE("sums to one for any finite input") {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<real> a(1 + rng.uniform_int(0, 7));
      for (real& v : a) v = real(rng.uniform(-700, 700));
      double sum = 0;
      for (real v : softmax_vec(a)) sum += double(v);
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
  }

  SUBCASE("components stay positive while exp(spread) is representable") {
    Rng rng(12);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<real> a(1 + rng.uniform_int(0, 7));
      for (real& v : a) v = real(rng.uniform(-350, 350));
      for (real v : softmax_vec(a)) CHECK(double(v) > 0);
    }
  }
}

TEST_CASE("dropout") {
  Tape tape;
  Rng rng(7);

  SUBCASE("rate zero is the identity") {
    ValueId x = tape.constant(Matrix(2, 2, {1, 2, 3, 4}));
    CHECK(tape.dropout(x, real(0), true, &rng) == x);
  }

  SUBCASE("inference mode is the identity at any rate") {
    ValueId x = tape.constant(Matrix(2, 2, {1, 2, 3, 4}));
    CHECK(tape.dropout(x, real(0.8), false, nullptr) == x);
  }

  SUBCASE("rate must be below one") {
    ValueId x = tape.constant(Matrix(1, 1, {1}));
    CHECK_THROWS_AS(tape.dropout(x, real(1.0), true, &rng), std::invalid_argument);
  }

  SUBCASE("survivors are scaled, casualties zeroed") {
    ValueId x = tape.constant(Matrix::full(10, 10, real(3)));
    ValueId y = tape.dropout(x, real(0.5), true, &rng);
    for (real v : tape.value(y).data) CHECK((v == real(0) || v == real(6)));
  }

  SUBCASE("expectation is preserved at a million entries") {
    ValueId x = tape.constant(Matrix::full(1000, 1000, real(1)));
    ValueId y = tape.dropout(x, real(0.5), true, &rng);
    double mean = 0;
    for (real v : tape.value(y).data) mean += double(v);
    mean /= 1e6;
    CHECK(std::abs(mean - 1.0) < 0.02);
  }
}

TEST_CASE("cross_entropy") {
  Tape tape;

  SUBCASE("uniform logits give ln 2") {
    ValueId logits = tape.constant(Matrix(1, 2, {0, 0}));
    ValueId loss = tape.cross_entropy(logits, {0}, {0});
    CHECK(double(tape.value(loss).data[0]) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  }

  SUBCASE("saturated correct prediction has near-zero loss") {
    ValueId logits = tape.constant(Matrix(1, 2, {20, -20}));
    ValueId loss = tape.cross_entropy(logits, {0}, {0});
    CHECK(double(tape.value(loss).data[0]) < 1e-8);
  }

  SUBCASE("confidently wrong prediction costs the logit gap") {
    ValueId logits = tape.constant(Matrix(1, 2, {-20, 20}));
    ValueId loss = tape.cross_entropy(logits, {0}, {0});
    CHECK(double(tape.value(loss).data[0]) == doctest::Approx(40.0).epsilon(1e-6));
  }

  SUBCASE("empty mask is rejected") {
    ValueId logits = tape.constant(Matrix(1, 2, {0, 0}));
    CHECK_THROWS_AS(tape.cross_entropy(logits, {0}, {}), std::invalid_argument);
  }
}

TEST_CASE("backward mechanics") {
  SUBCASE("affine + cross_entropy matches finite differences") {
    for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
      Rng rng(seed);
      ParamStore params;
      params.create("w", random_matrix(4, 2, rng));
      params.create("b", random_matrix(1, 2, rng));
      const Matrix x = random_matrix(3, 4, rng);
      const std::vector<int> labels = {0, 1, 0};
      auto build = [&](Tape& t) {
        ValueId logits = t.affine(t.constant(x), t.param(params, "w"), t.param(params, "b"));
        return t.cross_entropy(logits, labels, {0, 1, 2});
      };
      const auto report = grad_check(params, build);
      CHECK(report.max_rel_error < 1e-4);
    }
  }

  SUBCASE("unused parameter has exactly zero gradient") {
    ParamStore params;
    params.create("used", Matrix(2, 2, {1, 2, 3, 4}));
    params.create("unused", Matrix(2, 2, {5, 6, 7, 8}));
    Tape tape;
    ValueId x = tape.constant(Matrix(1, 2, {1, 1}));
    ValueId y = tape.matmul(x, tape.param(params, "used"));
    params.zero_grad();
    tape.backward(tape.sum_all(y));
    for (real g : params.grad("unused").data) CHECK(g == real(0));
    CHECK(params.grad("used").data[0] != real(0));
  }

  SUBCASE("shared parameter accumulates both branch gradients") {
    ParamStore params;
    params.create("w", Matrix(2, 2, {0.5, -0.3, 0.2, 0.8}));
    const Matrix xa(1, 2, {1, 2});
    const Matrix xb(1, 2, {-3, 4});

    auto grad_for = [&](bool use_a, bool use_b) {
      Tape tape;
      ValueId w = tape.param(params, "w");
      ValueId total = -1;
      if (use_a) total = tape.sum_all(tape.matmul(tape.constant(xa), w));
      if (use_b) {
        ValueId t = tape.sum_all(tape.matmul(tape.constant(xb), w));
        total = total < 0 ? t : tape.add(total, t);
      }
      params.zero_grad();
      tape.backward(total);
      return params.grad("w");
    };

    const Matrix ga = grad_for(true, false);
    const Matrix gb = grad_for(false, true);
    const Matrix gboth = grad_for(true, true);
    for (std::size_t i = 0; i < gboth.data.size(); ++i)
      CHECK(double(gboth.data[i]) == doctest::Approx(double(ga.data[i]) + double(gb.data[i])));
  }

  SUBCASE("backward requires the loss to be the last op") {
    Tape tape;
    ValueId x = tape.constant(Matrix(1, 1, {2}));
    ValueId loss = tape.sum_all(x);
    tape.sum_all(x);  // a later op invalidates `loss` as a backward root
    CHECK_THROWS_AS(tape.backward(loss), std::logic_error);
    Tape empty;
    CHECK_THROWS_AS(empty.backward(0), std::logic_error);
  }

  SUBCASE("two identical runs produce bit-identical gradients") {
    auto run = [](std::vector<real>& grads) {
      Rng rng(99);
      ParamStore params;
      params.create("w", random_matrix(3, 2, rng));
      Tape tape;
      ValueId x = tape.constant(random_matrix(4, 3, rng));
      ValueId y = tape.leaky_relu(tape.matmul(x, tape.param(params, "w")), real(0.01));
      ValueId masked = tape.dropout(y, real(0.3), true, &rng);
      params.zero_grad();
      tape.backward(tape.sum_all(masked));
      grads = params.grad("w").data;
    };
    std::vector<real> a, b;
    run(a);
    run(b);
    CHECK(a == b);
  }
}

TEST_CASE("per-op gradient checks over five seeds") {
  // every differentiable op embedded in a small scalar-loss fragment
  const HeteroGraph graph = HeteroGraph::build(
      4, {"fwd", "rev"},
      {{{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 2}}, {{1, 0}, {2, 1}, {3, 2}, {0, 3}}});

  int seeds_checked = 0;
  for (std::uint64_t seed = 1; seeds_checked < 5 && seed <= 50; ++seed) {
    Rng rng(seed);
    ParamStore params;
    params.create("w1", random_matrix(3, 3, rng));
    params.create("w2", random_matrix(3, 3, rng));
    params.create("b", random_matrix(1, 3, rng));
    params.create("s", random_matrix(3, 1, rng));
    const Matrix x = random_matrix(4, 3, rng);
    const Matrix proj = random_matrix(6, 2, rng);
    const std::vector<int> labels = {1, 0, 1, 0};

    auto build = [&](Tape& t) {
      ValueId in = t.constant(x);
      ValueId a = t.affine(in, t.param(params, "w1"), t.param(params, "b"));
      ValueId act = t.leaky_relu(a, real(0.01));
      ValueId agg = t.add(t.neighbor_mean(act, graph, 0), t.neighbor_mean(act, graph, 1));
      ValueId mm = t.matmul(agg, t.param(params, "w2"));
      ValueId sg = t.sigmoid(mm);
      // gate-shaped tail: per-node scores, row softmax, mixture
      ValueId score_a = t.sigmoid(t.matmul(sg, t.param(params, "s")));
      ValueId score_b = t.sigmoid(t.matmul(agg, t.param(params, "s")));
      ValueId weights = t.softmax_rows(t.concat_cols({score_a, score_b}));
      ValueId mixed = t.mix_rows({sg, agg}, weights);
      ValueId wider = t.concat_cols({mixed, sg});
      ValueId logits = t.matmul(wider, t.constant(proj));
      return t.cross_entropy(logits, labels, {0, 1, 2, 3});
    };

    const auto report = grad_check(params, build);
    if (report.kink_margin < 1e-4) continue;  // too close to the activation kink for FD
    ++seeds_checked;
    INFO("seed ", seed, " worst ", report.worst_param);
    CHECK(report.max_rel_error < 1e-4);
  }
  CHECK(seeds_checked == 5);
}

TEST_CASE("dropout vector-Jacobian product against reseeded finite differences") {
  ParamStore params;
  Rng init(5);
  params.create("w", random_matrix(3, 3, init));
  const Matrix x = random_matrix(2, 3, init);
  auto build = [&](Tape& t) {
    Rng rng(1234);  // identical mask on every evaluation
    ValueId y = t.matmul(t.constant(x), t.param(params, "w"));
    ValueId dropped = t.dropout(y, real(0.4), true, &rng);
    return t.sum_all(dropped);
  };
  const auto report = grad_check(params, build);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("adam") {
  SUBCASE("first step moves each entry by about lr") {
    ParamStore params;
    params.create("w", Matrix::full(2, 2, real(1)));
    for (real& g : params.grad("w").data) g = real(0.37);  // constant nonzero gradient
    adam_step(params, AdamConfig{0.01, 0.9, 0.999, 1e-8, 0.0});
    for (real v : params.value("w").data)
      CHECK(double(v) == doctest::Approx(1.0 - 0.01).epsilon(1e-4));
  }

  SUBCASE("zero gradient and zero decay leave parameters unchanged") {
    ParamStore params;
    params.create("w", Matrix(1, 2, {2, -3}));
    adam_step(params, AdamConfig{0.5, 0.9, 0.999, 1e-8, 0.0});
    CHECK(params.value("w").data[0] == real(2));
    CHECK(params.value("w").data[1] == real(-3));
  }

  SUBCASE("weight decay pulls parameters toward zero") {
    ParamStore params;
    params.create("w", Matrix(1, 1, {1}));
    adam_step(params, AdamConfig{0.01, 0.9, 0.999, 1e-8, 2e-4});
    CHECK(double(params.value("w").data[0]) < 1.0);
    CHECK(double(params.value("w").data[0]) > 0.0);
  }

  SUBCASE("zero_grad clears gradients but not moments") {
    ParamStore params;
    params.create("w", Matrix(1, 1, {1}));
    params.grad("w").data[0] = real(2);
    adam_step(params, AdamConfig{0.1, 0.9, 0.999, 1e-8, 0.0});
    params.zero_grad();
    CHECK(params.grad("w").data[0] == real(0));
    CHECK(params.entry("w").m.data[0] != real(0));
    CHECK(params.step_count() == 1);
  }
}
