#include <doctest.h>

#include <cmath>

#include "latformer/errors.hpp"
#include "latformer/rng.hpp"
#include "latformer/smoothing.hpp"

using namespace latformer;

TEST_CASE("group graphs") {
  SUBCASE("rotation family is a 4-cycle") {
    auto g = group_graph_rotation();
    CHECK(g.size() == 4);
    for (int i = 0; i < 4; ++i) CHECK(g.degree(i) == 2);
  }
  SUBCASE("translation on 3x3 is a 9-node torus of degree 4") {
    auto g = group_graph_translation(LatticeShape({3, 3}));
    CHECK(g.size() == 9);
    for (int i = 0; i < 9; ++i) CHECK(g.degree(i) == 4);
  }
  SUBCASE("reflection in 2-D is a 4-cycle over the flip group") {
    auto g = group_graph_reflection(2);
    CHECK(g.size() == 4);
    for (int i = 0; i < 4; ++i) CHECK(g.degree(i) == 2);
  }
  SUBCASE("scale factors 1..4 form a path with 3 edges") {
    auto g = group_graph_scale({1, 2, 3, 4});
    CHECK(g.size() == 4);
    int edges = 0;
    for (int i = 0; i < g.size(); ++i) edges += g.degree(i);
    CHECK(edges / 2 == 3);
    CHECK(g.degree(0) == 1);
    CHECK(g.degree(1) == 2);
  }
}

TEST_CASE("heat diffusion") {
  auto c4 = group_graph_rotation();
  SUBCASE("uniform weights are a fixed point") {
    std::vector<double> w(4, 0.25);
    auto out = heat_smooth(c4, w, 7);
    for (double v : out) CHECK(v == doctest::Approx(0.25));
  }
  SUBCASE("one step from a point mass on the 4-cycle") {
    auto out = heat_smooth(c4, {1.0, 0.0, 0.0, 0.0}, 1);
    CHECK(out[0] == doctest::Approx(0.5));
    CHECK(out[1] == doctest::Approx(0.25));
    CHECK(out[2] == doctest::Approx(0.0));
    CHECK(out[3] == doctest::Approx(0.25));
  }
  SUBCASE("point mass converges to uniform within 1e-4 after 20 steps") {
    auto out = heat_smooth(c4, {0.0, 1.0, 0.0, 0.0}, 20);
    for (double v : out) CHECK(std::fabs(v - 0.25) < 1e-4);
  }
  SUBCASE("mass is conserved and stays nonnegative on every graph") {
    SplitMix64 rng(2);
    for (const auto& g :
         {group_graph_rotation(), group_graph_scale({1, 2, 3, 4, 5}),
          group_graph_translation(LatticeShape({4, 5})),
          group_graph_reflection(2)}) {
      std::vector<double> w(g.size());
      double sum = 0.0;
      for (double& v : w) {
        v = rng.next_double();
        sum += v;
      }
      for (double& v : w) v /= sum;
      for (int step = 0; step < 5; ++step) {
        w = heat_step(g, w, 0.5);
        double total = 0.0;
        for (double v : w) {
          CHECK(v >= 0.0);
          total += v;
        }
        CHECK(std::fabs(total - 1.0) < 1e-12);
      }
    }
  }
  SUBCASE("transpose step is the adjoint of the forward step") {
    auto g = group_graph_scale({1, 2, 3, 4});
    SplitMix64 rng(9);
    std::vector<double> a(4), b(4);
    for (double& v : a) v = rng.next_gaussian();
    for (double& v : b) v = rng.next_gaussian();
    auto sa = heat_step(g, a, 0.5);
    auto stb = heat_step_transpose(g, b, 0.5);
    double lhs = 0.0, rhs = 0.0;
    for (int i = 0; i < 4; ++i) {
      lhs += sa[i] * b[i];
      rhs += a[i] * stb[i];
    }
    CHECK(lhs == doctest::Approx(rhs));
  }
}

TEST_CASE("dual loss") {
  SUBCASE("equal heads double the single loss") {
    Matrix logits(3, 4);
    logits(0, 1) = 2.0;
    logits(1, 0) = -1.0;
    logits(2, 3) = 0.5;
    std::vector<int> targets = {1, 2, 3};
    double single = cross_entropy_mean(logits, targets);
    CHECK(dual_loss(logits, logits, targets) == doctest::Approx(2.0 * single));
  }
  SUBCASE("confident correct logits drive the loss to zero") {
    Matrix logits(2, 3);
    logits(0, 0) = 50.0;
    logits(1, 2) = 50.0;
    std::vector<int> targets = {0, 2};
    CHECK(dual_loss(logits, logits, targets) == doctest::Approx(0.0));
  }
  SUBCASE("matches a per-cell recomputation on random logits") {
    SplitMix64 rng(31);
    Matrix logits(5, 7);
    for (double& v : logits.raw()) v = rng.next_gaussian();
    std::vector<int> targets;
    for (int i = 0; i < 5; ++i)
      targets.push_back(static_cast<int>(rng.next_below(7)));
    double manual = 0.0;
    for (int r = 0; r < 5; ++r) {
      double denom = 0.0;
      for (int c = 0; c < 7; ++c) denom += std::exp(logits(r, c));
      manual += -std::log(std::exp(logits(r, targets[r])) / denom);
    }
    manual /= 5.0;
    CHECK(std::fabs(cross_entropy_mean(logits, targets) - manual) < 1e-9);
  }
  SUBCASE("shape mismatch is rejected") {
    CHECK_THROWS_AS(dual_loss(Matrix(2, 3), Matrix(3, 3), {0, 1}), InvalidShape);
  }
}
