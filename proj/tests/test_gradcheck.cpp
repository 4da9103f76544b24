// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <vector>

#include "dsraseg/errors.hpp"
#include "dsraseg/gradcheck.hpp"
#include "dsraseg/ops.hpp"
#include "dsraseg/rng.hpp"
#include "test_util.hpp"

using namespace dsraseg;
using testing::rand_tensor;

namespace {

// Shifts every element at least `margin` away from zero, keeping its sign.
Tensor away_from_zero(Tensor t, double margin) {
  double* v = t.data();
  for (int64_t i = 0; i < t.numel(); ++i) v[i] += v[i] < 0.0 ? -margin : margin;
  return t;
}

}  // namespace

TEST_CASE("gradcheck elementwise ops") {
  Rng rng(21);
  Tensor a = rand_tensor({2, 3}, rng);
  Tensor b = rand_tensor({2, 3}, rng);
  SUBCASE("add") {
    auto rep = gradcheck([](const std::vector<Tensor>& x) { return add(x[0], x[1]); },
                         {{"a", a}, {"b", b}});
    CHECK(rep.pass(1e-6));
    CHECK(rep.elements == 12);
    CHECK(rep.per_input.size() == 2);
  }
  SUBCASE("sub") {
    auto rep = gradcheck([](const std::vector<Tensor>& x) { return sub(x[0], x[1]); },
                         {{"a", a}, {"b", b}});
    CHECK(rep.pass(1e-6));
  }
  SUBCASE("mul") {
    auto rep = gradcheck([](const std::vector<Tensor>& x) { return mul(x[0], x[1]); },
                         {{"a", a}, {"b", b}});
    CHECK(rep.pass(1e-6));
  }
  SUBCASE("scale and add_scalar") {
    auto rep = gradcheck(
        [](const std::vector<Tensor>& x) { return add_scalar(scale(x[0], -1.7), 0.3); },
        {{"a", a}});
    CHECK(rep.pass(1e-6));
  }
  SUBCASE("squared use of one input") {
    auto rep = gradcheck([](const std::vector<Tensor>& x) { return mul(x[0], x[0]); }, {{"a", a}});
    CHECK(rep.pass(1e-6));
  }
}

TEST_CASE("gradcheck activations") {
  Rng rng(22);
  SUBCASE("relu away from its kink") {
    Tensor a = away_from_zero(rand_tensor({3, 4}, rng), 0.1);
    auto rep =
        gradcheck([](const std::vector<Tensor>& x) { return relu(x[0]); }, {{"a", a}}, 1e-5);
    CHECK(rep.pass(1e-6));
  }
  SUBCASE("sigmoid") {
    Tensor a = rand_tensor({3, 4}, rng, -3.0, 3.0);
    auto rep = gradcheck([](const std::vector<Tensor>& x) { return sigmoid(x[0]); }, {{"a", a}});
    CHECK(rep.pass(1e-6));
  }
}

TEST_CASE("gradcheck conv2d in all three inputs") {
  Rng rng(23);
  Tensor img = rand_tensor({1, 2, 5, 5}, rng);
  Tensor w = rand_tensor({3, 2, 3, 3}, rng, -0.5, 0.5);
  Tensor b = rand_tensor({3}, rng);
  auto rep = gradcheck(
      [](const std::vector<Tensor>& x) { return conv2d(x[0], x[1], x[2], 1, 1); },
      {{"image", img}, {"weight", w}, {"bias", b}});
  CHECK(rep.pass(1e-4));
  CHECK(rep.per_input.size() == 3);

  auto strided = gradcheck(
      [](const std::vector<Tensor>& x) { return conv2d(x[0], x[1], x[2], 2, 1); },
      {{"image", img}, {"weight", w}, {"bias", b}});
  CHECK(strided.pass(1e-4));
}

TEST_CASE("gradcheck softmax composed with conv2d") {
  Rng rng(24);
  Tensor img = rand_tensor({1, 2, 5, 5}, rng);
  Tensor w = rand_tensor({4, 2, 3, 3}, rng, -0.5, 0.5);
  Tensor b = rand_tensor({4}, rng);
  auto rep = gradcheck(
      [](const std::vector<Tensor>& x) {
        return softmax_channels(conv2d(x[0], x[1], x[2], 1, 1));
      },
      {{"image", img}, {"weight", w}, {"bias", b}});
  CHECK(rep.pass(1e-4));
}

TEST_CASE("gradcheck bilinear resize both directions") {
  Rng rng(25);
  Tensor small = rand_tensor({1, 2, 3, 3}, rng);
  auto up = gradcheck(
      [](const std::vector<Tensor>& x) { return bilinear_resize(x[0], 7, 7); }, {{"x", small}});
  CHECK(up.pass(1e-6));

  Tensor big = rand_tensor({1, 2, 7, 7}, rng);
  auto down = gradcheck(
      [](const std::vector<Tensor>& x) { return bilinear_resize(x[0], 3, 3); }, {{"x", big}});
  CHECK(down.pass(1e-6));
}

TEST_CASE("gradcheck softmax_spatial, concat, reductions") {
  Rng rng(26);
  Tensor a = rand_tensor({1, 2, 3, 4}, rng, -2.0, 2.0);
  Tensor b = rand_tensor({1, 3, 3, 4}, rng, -2.0, 2.0);
  auto sp = gradcheck(
      [](const std::vector<Tensor>& x) { return softmax_spatial(x[0]); }, {{"a", a}});
  CHECK(sp.pass(1e-6));

  auto cat = gradcheck(
      [](const std::vector<Tensor>& x) { return concat_channels({x[0], x[1]}); },
      {{"a", a}, {"b", b}});
  CHECK(cat.pass(1e-6));

  auto red = gradcheck(
      [](const std::vector<Tensor>& x) { return mean(mul(x[0], x[0])); }, {{"a", a}});
  CHECK(red.pass(1e-6));
  auto s = gradcheck([](const std::vector<Tensor>& x) { return sum(sigmoid(x[0])); }, {{"a", a}});
  CHECK(s.pass(1e-6));
}

TEST_CASE("gradcheck restores input values bitwise") {
  Rng rng(27);
  Tensor a = rand_tensor({4, 4}, rng);
  Tensor before = a.clone();
  gradcheck([](const std::vector<Tensor>& x) { return mul(x[0], x[0]); }, {{"a", a}});
  CHECK(testing::bitwise_equal(a, before));
  CHECK_FALSE(a.requires_grad());  // flag restored too
}

TEST_CASE("gradcheck rejects a non-deterministic function") {
  Tensor a = Tensor::full({2}, 1.0);
  int calls = 0;
  auto f = [&calls](const std::vector<Tensor>& x) {
    ++calls;
    return scale(x[0], 1.0 + 0.5 * calls);
  };
  CHECK_THROWS_AS(gradcheck(f, {{"a", a}}), NumericError);
}

TEST_CASE("gradcheck rejects empty input lists and non-finite outputs") {
  CHECK_THROWS_AS(gradcheck([](const std::vector<Tensor>& x) { return x[0]; }, {}), ConfigError);
  Tensor a = Tensor::full({2}, 1e308);
  CHECK_THROWS_AS(gradcheck([](const std::vector<Tensor>& x) { return mul(x[0], x[0]); },
                            {{"a", a}}),
                  NumericError);
}
