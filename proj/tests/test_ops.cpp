// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "dsraseg/errors.hpp"
#include "dsraseg/ops.hpp"
#include "dsraseg/rng.hpp"
#include "oracles/reference_ops.hpp"
#include "test_util.hpp"

using namespace dsraseg;
using testing::bitwise_equal;
using testing::max_abs_diff;
using testing::rand_tensor;

TEST_CASE("elementwise arithmetic") {
  Tensor a = Tensor::from_data({2, 2}, {1.0, 2.0, 3.0, 4.0});
  Tensor b = Tensor::from_data({2, 2}, {0.5, -1.0, 2.0, 0.0});
  CHECK(add(a, b).data()[1] == 1.0);
  CHECK(sub(a, b).data()[0] == 0.5);
  CHECK(mul(a, b).data()[2] == 6.0);
  CHECK(scale(a, -2.0).data()[3] == -8.0);
  CHECK(add_scalar(a, 10.0).data()[0] == 11.0);
  CHECK_THROWS_AS(add(a, Tensor::zeros({4})), ConfigError);
  CHECK_THROWS_AS(mul(a, Tensor::zeros({2, 3})), ConfigError);
}

TEST_CASE("relu and sigmoid") {
  Tensor x = Tensor::from_data({5}, {-2.0, -0.0, 0.0, 3.0, 1e3});
  Tensor r = relu(x);
  CHECK(r.data()[0] == 0.0);
  CHECK(r.data()[3] == 3.0);

  Tensor s = sigmoid(Tensor::from_data({3}, {0.0, 1000.0, -1000.0}));
  CHECK(s.data()[0] == 0.5);
  // Saturated inputs stay finite and inside [0, 1].
  CHECK(s.data()[1] == 1.0);
  CHECK(s.data()[2] == 0.0);
  CHECK(s.all_finite());
}

TEST_CASE("concat_channels preserves block layout") {
  Tensor a = Tensor::from_data({1, 1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
  Tensor b = Tensor::from_data({1, 2, 2, 2}, {5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0});
  Tensor c = concat_channels({a, b});
  CHECK(c.shape() == Shape{1, 3, 2, 2});
  CHECK(c.at(0, 0, 1, 1) == 4.0);
  CHECK(c.at(0, 1, 0, 0) == 5.0);
  CHECK(c.at(0, 2, 1, 0) == 11.0);
  CHECK_THROWS_AS(concat_channels({a, Tensor::zeros({1, 1, 3, 2})}), ConfigError);
  CHECK_THROWS_AS(concat_channels({}), ConfigError);
}

TEST_CASE("conv2d of an all-ones image by an all-ones 3x3 kernel") {
  Tensor img = Tensor::full({1, 1, 4, 4}, 1.0);
  Tensor w = Tensor::full({1, 1, 3, 3}, 1.0);
  Tensor b = Tensor::zeros({1});
  Tensor y = conv2d(img, w, b, 1, 1);
  CHECK(y.shape() == Shape{1, 1, 4, 4});
  // Interior taps see the full 3x3 window; corners see 2x2, edges 2x3.
  CHECK(y.at(0, 0, 1, 1) == 9.0);
  CHECK(y.at(0, 0, 0, 0) == 4.0);
  CHECK(y.at(0, 0, 0, 1) == 6.0);
}

TEST_CASE("conv2d identity kernel reproduces the input") {
  Rng rng(11);
  Tensor img = rand_tensor({2, 1, 5, 6}, rng);
  Tensor w = Tensor::zeros({1, 1, 3, 3});
  w.at(0, 0, 1, 1) = 1.0;
  Tensor y = conv2d(img, w, Tensor::zeros({1}), 1, 1);
  CHECK(bitwise_equal(y, img));
}

TEST_CASE("conv2d matches the reference kernel") {
  Rng rng(12);
  SUBCASE("stride 1, padding 1") {
    Tensor img = rand_tensor({1, 2, 4, 4}, rng);
    Tensor w = rand_tensor({3, 2, 3, 3}, rng);
    Tensor b = rand_tensor({3}, rng);
    Tensor got = conv2d(img, w, b, 1, 1);
    Tensor want = testing::ref_conv2d(img, w, b, 1, 1);
    CHECK(got.shape() == want.shape());
    CHECK(max_abs_diff(got, want) <= 1e-12);
  }
  SUBCASE("stride 2 halves the grid") {
    Tensor img = rand_tensor({2, 3, 8, 6}, rng);
    Tensor w = rand_tensor({4, 3, 3, 3}, rng);
    Tensor b = rand_tensor({4}, rng);
    Tensor got = conv2d(img, w, b, 2, 1);
    CHECK(got.shape() == Shape{2, 4, 4, 3});
    CHECK(max_abs_diff(got, testing::ref_conv2d(img, w, b, 2, 1)) <= 1e-12);
  }
  SUBCASE("1x1 kernel, no padding") {
    Tensor img = rand_tensor({1, 4, 3, 3}, rng);
    Tensor w = rand_tensor({2, 4, 1, 1}, rng);
    Tensor b = rand_tensor({2}, rng);
    CHECK(max_abs_diff(conv2d(img, w, b, 1, 0), testing::ref_conv2d(img, w, b, 1, 0)) <= 1e-12);
  }
}

TEST_CASE("conv2d rejects inconsistent shapes") {
  Tensor img = Tensor::zeros({1, 2, 4, 4});
  CHECK_THROWS_AS(conv2d(img, Tensor::zeros({1, 3, 3, 3}), Tensor::zeros({1}), 1, 1),
                  ConfigError);
  CHECK_THROWS_AS(conv2d(img, Tensor::zeros({2, 2, 3, 3}), Tensor::zeros({1}), 1, 1),
                  ConfigError);
  // 5x5 kernel on a 4x4 image without padding has no valid output extent.
  CHECK_THROWS_AS(conv2d(img, Tensor::zeros({1, 2, 5, 5}), Tensor::zeros({1}), 1, 0),
                  ConfigError);
}

TEST_CASE("bilinear identity resize is bitwise exact") {
  Rng rng(13);
  Tensor img = rand_tensor({1, 2, 5, 7}, rng);
  CHECK(bitwise_equal(bilinear_resize(img, 5, 7), img));
}

TEST_CASE("bilinear resize of a constant map stays exactly constant") {
  Tensor img = Tensor::full({1, 1, 3, 3}, 0.37);
  Tensor up = bilinear_resize(img, 8, 8);
  for (int64_t i = 0; i < up.numel(); ++i) CHECK(up.data()[i] == 0.37);
  Tensor down = bilinear_resize(img, 2, 2);
  for (int64_t i = 0; i < down.numel(); ++i) CHECK(down.data()[i] == 0.37);
}

TEST_CASE("bilinear upsample of a 2x2 checker matches the reference") {
  Tensor img = Tensor::from_data({1, 1, 2, 2}, {0.0, 1.0, 1.0, 0.0});
  Tensor got = bilinear_resize(img, 4, 4);
  Tensor want = testing::ref_bilinear(img, 4, 4);
  CHECK(max_abs_diff(got, want) <= 1e-12);
  // Half-pixel alignment: border columns clamp, interior blends 1/4 : 3/4.
  CHECK(got.at(0, 0, 0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(got.at(0, 0, 0, 1) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(got.at(0, 0, 0, 2) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(got.at(0, 0, 0, 3) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("bilinear up and down resizes match the reference") {
  Rng rng(14);
  Tensor img = rand_tensor({2, 3, 6, 5}, rng);
  for (auto [oh, ow] : {std::pair{12, 10}, {3, 2}, {7, 11}, {1, 1}}) {
    Tensor got = bilinear_resize(img, oh, ow);
    Tensor want = testing::ref_bilinear(img, oh, ow);
    CHECK(got.shape() == Shape{2, 3, oh, ow});
    CHECK(max_abs_diff(got, want) <= 1e-12);
  }
  CHECK_THROWS_AS(bilinear_resize(img, 0, 4), ConfigError);
}

TEST_CASE("softmax over channels") {
  SUBCASE("equal logits split mass evenly") {
    Tensor x = Tensor::zeros({1, 3, 1, 1});
    Tensor p = softmax_channels(x);
    for (int c = 0; c < 3; ++c) CHECK(p.at(0, c, 0, 0) == 1.0 / 3.0);
  }
  SUBCASE("two-channel logits (2, 0)") {
    Tensor x = Tensor::from_data({1, 2, 1, 1}, {2.0, 0.0});
    Tensor p = softmax_channels(x);
    CHECK(p.at(0, 0, 0, 0) == doctest::Approx(0.8808).epsilon(1e-4));
    CHECK(p.at(0, 1, 0, 0) == doctest::Approx(0.1192).epsilon(1e-4));
  }
  SUBCASE("channel sums are 1 and shifts cancel") {
    Rng rng(15);
    Tensor x = rand_tensor({2, 4, 3, 3}, rng, -3.0, 3.0);
    Tensor p = softmax_channels(x);
    for (int n = 0; n < 2; ++n)
      for (int y = 0; y < 3; ++y)
        for (int xx = 0; xx < 3; ++xx) {
          double s = 0.0;
          for (int c = 0; c < 4; ++c) s += p.at(n, c, y, xx);
          CHECK(std::abs(s - 1.0) <= 1e-12);
        }
    Tensor shifted = softmax_channels(add_scalar(x, 8.0));
    CHECK(max_abs_diff(p, shifted) <= 1e-12);
  }
  SUBCASE("extreme logits stay finite") {
    Tensor x = Tensor::from_data({1, 2, 1, 1}, {1000.0, -1000.0});
    Tensor p = softmax_channels(x);
    CHECK(p.all_finite());
    CHECK(p.at(0, 0, 0, 0) == 1.0);
  }
  SUBCASE("matches the reference") {
    Rng rng(16);
    Tensor x = rand_tensor({2, 5, 4, 3}, rng, -4.0, 4.0);
    CHECK(max_abs_diff(softmax_channels(x), testing::ref_softmax_channels(x)) <= 1e-12);
  }
}

TEST_CASE("softmax over space") {
  Rng rng(17);
  Tensor x = rand_tensor({2, 3, 4, 5}, rng, -4.0, 4.0);
  Tensor p = softmax_spatial(x);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c) {
      double s = 0.0;
      for (int y = 0; y < 4; ++y)
        for (int xx = 0; xx < 5; ++xx) s += p.at(n, c, y, xx);
      CHECK(std::abs(s - 1.0) <= 1e-12);
    }
  CHECK(max_abs_diff(p, testing::ref_softmax_spatial(x)) <= 1e-12);
}

TEST_CASE("reductions") {
  Tensor x = Tensor::from_data({2, 2}, {1.0, 2.0, 3.0, 4.0});
  CHECK(sum(x).item() == 10.0);
  CHECK(mean(x).item() == 2.5);
}

TEST_CASE("assert_finite flags NaN and Inf") {
  Tensor ok = Tensor::full({2}, 1.0);
  CHECK_NOTHROW(assert_finite(ok, "ok"));
  Tensor bad = Tensor::from_data({2}, {1.0, std::nan("")});
  CHECK_THROWS_AS(assert_finite(bad, "bad"), NumericError);
  Tensor inf = Tensor::from_data({1}, {1e308 * 10.0});
  CHECK_THROWS_AS(assert_finite(inf, "inf"), NumericError);
}
