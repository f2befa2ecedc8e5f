#include <doctest.h>

#include <vector>

#include "latformer/attention.hpp"
#include "latformer/errors.hpp"
#include "latformer/masks.hpp"
#include "latformer/rng.hpp"

using namespace latformer;

namespace {

Matrix random_matrix(int rows, int cols, SplitMix64& rng) {
  Matrix m(rows, cols);
  for (double& x : m.raw()) x = rng.next_gaussian();
  return m;
}

// Applies the action to every feature column of x through the brute-force
// index oracle.
Matrix oracle_apply(const LatticeAction& a, const LatticeShape& shape,
                    const Matrix& x) {
  auto map = action_index_map(a, shape);
  Matrix out(x.rows(), x.cols());
  for (int r = 0; r < x.rows(); ++r)
    for (int c = 0; c < x.cols(); ++c) out(r, c) = x(map[r], c);
  return out;
}

}  // namespace

TEST_CASE("shift vector follows the offset table") {
  SUBCASE("translation by 1 on n=5") {
    auto o = shift_vector(LatticeAction::translate({1}), LatticeShape({5}));
    CHECK(o == std::vector<int>{-1, -1, -1, -1, -1});
  }
  SUBCASE("identity on n=4") {
    auto o = shift_vector(LatticeAction::identity(), LatticeShape({4}));
    CHECK(o == std::vector<int>{0, 0, 0, 0});
  }
  SUBCASE("rotation on 2x2, derived by brute force") {
    LatticeShape shape({2, 2});
    auto o = shift_vector(LatticeAction::rotate90(1), shape);
    CHECK(o == std::vector<int>{1, 2, 2, 3});
    // brute force: rotate the grid, read each row's attended column; the
    // formula's offsets agree modulo n
    auto map = action_index_map(LatticeAction::rotate90(1), shape);
    for (int k = 0; k < 4; ++k) {
      int col_1based = map[k] + 1;
      CHECK(((k + 1 + o[k] - 1) % 4 + 4) % 4 + 1 == col_1based);
    }
  }
  SUBCASE("reflection offsets decrease by 2") {
    auto o = shift_vector(LatticeAction::reflect({true}), LatticeShape({6}));
    CHECK(o.front() == 5);
    for (size_t k = 1; k < o.size(); ++k) CHECK(o[k] == o[k - 1] - 2);
  }
  SUBCASE("invalid shapes and factors") {
    CHECK_THROWS_AS(
        shift_vector(LatticeAction::rotate90(1), LatticeShape({2, 3})),
        InvalidShape);
    CHECK_THROWS_AS(shift_vector(LatticeAction::scale({1}, ScaleDirection::Up),
                                 LatticeShape({4})),
                    InvalidFactor);
  }
}

TEST_CASE("mask_from_shift places one 1 per row") {
  SUBCASE("translation circulant on n=3") {
    Matrix m = mask_from_shift({-1, -1, -1}, 3);
    Matrix want(3, 3);
    want(0, 2) = want(1, 0) = want(2, 1) = 1.0;
    CHECK(max_abs_diff(m, want) == 0.0);
  }
  SUBCASE("zero offsets give the identity") {
    CHECK(max_abs_diff(mask_from_shift({0, 0, 0, 0}, 4), Matrix::identity(4)) ==
          0.0);
  }
  SUBCASE("reflection is the anti-diagonal") {
    auto o = shift_vector(LatticeAction::reflect({true}), LatticeShape({3}));
    Matrix m = mask_from_shift(o, 3);
    for (int k = 0; k < 3; ++k) CHECK(m(k, 2 - k) == 1.0);
    CHECK(is_one_hot_per_row(m));
  }
}

TEST_CASE("fourier route equals the direct route") {
  SUBCASE("translation n=4") {
    std::vector<int> o(4, -1);
    CHECK(max_abs_diff(mask_via_fourier(o, 4), mask_from_shift(o, 4)) == 0.0);
  }
  SUBCASE("all-zero offsets give the identity") {
    std::vector<int> o(5, 0);
    CHECK(max_abs_diff(mask_via_fourier(o, 5), Matrix::identity(5)) == 0.0);
  }
  SUBCASE("reflection n=8 is anti-diagonal") {
    auto o = shift_vector(LatticeAction::reflect({true}), LatticeShape({8}));
    Matrix m = mask_via_fourier(o, 8);
    CHECK(max_abs_diff(m, mask_from_shift(o, 8)) == 0.0);
    for (int k = 0; k < 8; ++k) CHECK(m(k, 7 - k) == 1.0);
  }
}

TEST_CASE("kronecker lifting") {
  SUBCASE("identity times identity") {
    CHECK(max_abs_diff(kronecker_mask(Matrix::identity(2), Matrix::identity(3)),
                       Matrix::identity(6)) == 0.0);
  }
  SUBCASE("translation on both axes of a 2x2 grid") {
    LatticeShape line({2});
    Matrix t =
        mask_from_shift(shift_vector(LatticeAction::translate({1}), line), 2);
    Matrix m = kronecker_mask(t, t);
    LatticeShape shape({2, 2});
    for (int trial = 0; trial < 4; ++trial) {
      Matrix x(4, 1);
      x(trial, 0) = 1.0;  // basis tensors
      Matrix want = oracle_apply(LatticeAction::translate({1, 1}), shape, x);
      CHECK(max_abs_diff(matmul(m, x), want) == 0.0);
    }
  }
  SUBCASE("identity times reflection reflects the second dimension only") {
    LatticeShape line({2});
    Matrix f =
        mask_from_shift(shift_vector(LatticeAction::reflect({true}), line), 2);
    Matrix m = kronecker_mask(Matrix::identity(2), f);
    LatticeShape shape({2, 2});
    SplitMix64 rng(12);
    Matrix x = random_matrix(4, 3, rng);
    Matrix want = oracle_apply(LatticeAction::reflect({false, true}), shape, x);
    CHECK(max_abs_diff(matmul(m, x), want) == 0.0);
  }
  SUBCASE("size limit") {
    CHECK_THROWS_AS(kronecker_mask(Matrix::identity(70), Matrix::identity(70)),
                    SizeOverflow);
  }
}

TEST_CASE("mask composition is matrix multiplication") {
  LatticeShape shape({2, 2});
  Matrix r = action_mask(LatticeAction::rotate90(1), shape);
  SUBCASE("two quarter turns make a half turn") {
    Matrix twice = compose_masks(r, r);
    CHECK(max_abs_diff(twice, action_mask(LatticeAction::rotate90(2), shape)) ==
          0.0);
    SplitMix64 rng(5);
    Matrix x = random_matrix(4, 2, rng);
    Matrix want = oracle_apply(
        LatticeAction::compose(
            {LatticeAction::rotate90(1), LatticeAction::rotate90(1)}),
        shape, x);
    CHECK(max_abs_diff(matmul(twice, x), want) == 0.0);
  }
  SUBCASE("identity is neutral") {
    CHECK(max_abs_diff(compose_masks(r, Matrix::identity(4)), r) == 0.0);
  }
  SUBCASE("reflection is an involution") {
    Matrix f = action_mask(LatticeAction::reflect({true, false}), shape);
    CHECK(max_abs_diff(compose_masks(f, f), Matrix::identity(4)) == 0.0);
  }
}

TEST_CASE("apply_action oracle on small grids") {
  SUBCASE("counterclockwise quarter turn") {
    LatticeShape shape({2, 2});
    std::vector<double> grid = {1, 2, 3, 4};  // (a,b; c,d)
    auto out = apply_action(LatticeAction::rotate90(1), shape, grid);
    CHECK(out == std::vector<double>{2, 4, 1, 3});  // (b,d; a,c)
  }
  SUBCASE("cyclic translation on both axes") {
    LatticeShape shape({2, 2});
    std::vector<double> grid = {1, 2, 3, 4};
    auto out = apply_action(LatticeAction::translate({1, 1}), shape, grid);
    CHECK(out == std::vector<double>{4, 3, 2, 1});  // (d,c; b,a)
  }
  SUBCASE("up-scaling replicates leading cells") {
    LatticeShape line({4});
    std::vector<double> x = {7, 9, 3, 5};
    auto out =
        apply_action(LatticeAction::scale({2}, ScaleDirection::Up), line, x);
    CHECK(out == std::vector<double>{7, 7, 9, 9});
  }
  SUBCASE("up then down is the identity on retained cells") {
    for (int h : {2, 3}) {
      LatticeShape line({6});
      Matrix u =
          action_mask(LatticeAction::scale({h}, ScaleDirection::Up), line);
      Matrix d =
          action_mask(LatticeAction::scale({h}, ScaleDirection::Down), line);
      Matrix round_trip = compose_masks(d, u);
      for (int k = 0; k < 6 / h; ++k)
        for (int c = 0; c < 6; ++c)
          CHECK(round_trip(k, c) == (k == c ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("convolution kernels reproduce masks from identity columns") {
  SUBCASE("translation kernel is a cyclic impulse in every column") {
    Matrix k = conv_kernel_translation_level(0, 5);
    for (int i = 0; i < 5; ++i)
      for (int t = 0; t < 5; ++t) CHECK(k(t, i) == (t == 1 ? 1.0 : 0.0));
  }
  SUBCASE("identity kernel is a delta") {
    Matrix k = conv_kernels(std::vector<int>(6, 0), 6);
    for (int i = 0; i < 6; ++i)
      for (int t = 0; t < 6; ++t) CHECK(k(t, i) == (t == 0 ? 1.0 : 0.0));
  }
  SUBCASE("reflection kernels rebuild the reflection mask, n=8") {
    auto o = shift_vector(LatticeAction::reflect({true}), LatticeShape({8}));
    Matrix rebuilt = mask_from_kernels(conv_kernels(o, 8));
    CHECK(max_abs_diff(rebuilt, mask_from_shift(o, 8)) == 0.0);
  }
}

TEST_CASE("masked self-attention realizes actions exactly") {
  SplitMix64 rng(99);
  auto check_action = [&](const LatticeAction& a, const LatticeShape& shape) {
    Matrix m = action_mask(a, shape);
    CHECK(is_one_hot_per_row(m));
    for (int trial = 0; trial < 5; ++trial) {
      Matrix x = random_matrix(shape.size(), 3, rng);
      Matrix got = masked_self_attention(x, m);
      Matrix want = oracle_apply(a, shape, x);
      CHECK(max_abs_diff(got, want) < 1e-6);
    }
  };
  check_action(LatticeAction::translate({3}), LatticeShape({7}));
  check_action(LatticeAction::reflect({true}), LatticeShape({9}));
  check_action(LatticeAction::rotate90(3), LatticeShape({4, 4}));
  check_action(LatticeAction::reflect_diagonal(), LatticeShape({5, 5}));
  check_action(LatticeAction::scale({2, 3}, ScaleDirection::Up),
               LatticeShape({5, 6}));
  check_action(LatticeAction::scale({3}, ScaleDirection::Down),
               LatticeShape({8}));
  check_action(LatticeAction::compose({LatticeAction::rotate90(1),
                                       LatticeAction::reflect({false, true})}),
               LatticeShape({3, 3}));
}

TEST_CASE("group laws of exact masks") {
  SUBCASE("translations commute") {
    LatticeShape shape({5});
    Matrix a = action_mask(LatticeAction::translate({2}), shape);
    Matrix b = action_mask(LatticeAction::translate({4}), shape);
    CHECK(max_abs_diff(compose_masks(a, b), compose_masks(b, a)) == 0.0);
  }
  SUBCASE("rotation has order four") {
    LatticeShape shape({3, 3});
    Matrix r = action_mask(LatticeAction::rotate90(1), shape);
    Matrix acc = Matrix::identity(9);
    for (int i = 0; i < 4; ++i) acc = compose_masks(acc, r);
    CHECK(max_abs_diff(acc, Matrix::identity(9)) == 0.0);
  }
  SUBCASE("diagonal reflection is an involution") {
    LatticeShape shape({4, 4});
    Matrix f = action_mask(LatticeAction::reflect_diagonal(), shape);
    CHECK(max_abs_diff(compose_masks(f, f), Matrix::identity(16)) == 0.0);
  }
}

TEST_CASE("action text round-trips through the parser") {
  for (const char* text :
       {"identity", "translate:3,4", "rotate90:2", "reflect:diag", "reflect:0",
        "scale:down:2,5", "rotate90:1;reflect:1"}) {
    auto once = LatticeAction::parse(text).to_string();
    CHECK(LatticeAction::parse(once).to_string() == once);
  }
  CHECK_THROWS_AS(LatticeAction::parse("spin:3"), ParseError);
}
