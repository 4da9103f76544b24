// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <vector>

#include "dsraseg/errors.hpp"
#include "dsraseg/ops.hpp"
#include "dsraseg/tensor.hpp"

using namespace dsraseg;

TEST_CASE("tensor factories and element access") {
  Tensor z = Tensor::zeros({2, 3});
  CHECK(z.numel() == 6);
  CHECK(z.shape() == Shape{2, 3});
  for (int64_t i = 0; i < z.numel(); ++i) CHECK(z.data()[i] == 0.0);

  Tensor f = Tensor::full({1, 2, 2, 2}, 1.5);
  CHECK(f.at(0, 1, 1, 1) == 1.5);
  f.at(0, 0, 0, 1) = -2.0;
  CHECK(f.data()[1] == -2.0);

  Tensor s = Tensor::scalar(4.25);
  CHECK(s.numel() == 1);
  CHECK(s.item() == 4.25);

  Tensor d = Tensor::from_data({2, 2}, {1.0, 2.0, 3.0, 4.0});
  CHECK(d.data()[3] == 4.0);

  CHECK_THROWS_AS(Tensor::zeros({}), ConfigError);
  CHECK_THROWS_AS(Tensor::zeros({2, 0}), ConfigError);
  CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1.0}), ConfigError);
  CHECK_THROWS_AS(d.item(), ConfigError);
  CHECK_THROWS_AS(d.at(0, 0, 0, 0), ConfigError);
  CHECK_THROWS_AS(Tensor().numel(), ConfigError);
}

TEST_CASE("copies share storage, clone detaches") {
  Tensor a = Tensor::from_data({3}, {1.0, 2.0, 3.0}, true);
  Tensor b = a;  // handle copy
  b.data()[0] = 9.0;
  CHECK(a.data()[0] == 9.0);

  Tensor c = a.clone();
  c.data()[1] = -1.0;
  CHECK(a.data()[1] == 2.0);
  CHECK_FALSE(c.requires_grad());
}

TEST_CASE("gradient buffers allocate lazily") {
  Tensor a = Tensor::zeros({4}, true);
  CHECK_FALSE(a.has_grad());
  CHECK(static_cast<const Tensor&>(a).grad() == nullptr);
  a.zero_grad();  // no-op without a buffer
  CHECK_FALSE(a.has_grad());
  a.grad()[2] = 5.0;
  CHECK(a.has_grad());
  a.zero_grad();
  CHECK(a.grad()[2] == 0.0);
}

TEST_CASE("tape replays closures in reverse order") {
  Tape tape;
  std::vector<int> log;
  tape.record([&] { log.push_back(1); });
  tape.record([&] { log.push_back(2); });
  tape.record([&] { log.push_back(3); });
  tape.backward(Tensor::scalar(0.0));
  CHECK(log == std::vector<int>{3, 2, 1});
  CHECK(tape.consumed());
}

TEST_CASE("tape misuse is rejected") {
  SUBCASE("backward twice") {
    Tape tape;
    tape.backward(Tensor::scalar(0.0));
    CHECK_THROWS_AS(tape.backward(Tensor::scalar(0.0)), NumericError);
  }
  SUBCASE("record after backward") {
    Tape tape;
    tape.backward(Tensor::scalar(0.0));
    CHECK_THROWS_AS(tape.record([] {}), NumericError);
  }
  SUBCASE("non-scalar root") {
    Tape tape;
    CHECK_THROWS_AS(tape.backward(Tensor::zeros({2})), NumericError);
  }
  SUBCASE("two active tapes on one thread") {
    Tape tape;
    CHECK_THROWS_AS(Tape(), NumericError);
  }
}

TEST_CASE("sum gradient is ones, quadratic gradient is 2x") {
  Tensor x = Tensor::from_data({2, 2}, {1.0, -2.0, 3.0, 0.5}, true);
  {
    Tape tape;
    Tensor loss = sum(x);
    tape.backward(loss);
  }
  for (int64_t i = 0; i < x.numel(); ++i) CHECK(x.grad()[i] == 1.0);

  x.zero_grad();
  {
    Tape tape;
    Tensor loss = sum(mul(x, x));
    tape.backward(loss);
  }
  for (int64_t i = 0; i < x.numel(); ++i) CHECK(x.grad()[i] == 2.0 * x.data()[i]);
}

TEST_CASE("gradients accumulate across uses of the same tensor") {
  Tensor x = Tensor::from_data({3}, {1.0, 2.0, 3.0}, true);
  Tape tape;
  Tensor loss = sum(add(x, x));
  tape.backward(loss);
  for (int64_t i = 0; i < 3; ++i) CHECK(x.grad()[i] == 2.0);
}

TEST_CASE("NoGradGuard suspends recording") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
  Tape tape;
  {
    NoGradGuard guard;
    Tensor y = mul(x, x);
    CHECK(tape.size() == 0);
  }
  Tensor z = mul(x, x);
  CHECK(tape.size() > 0);
  tape.backward(sum(z));
  CHECK(x.grad()[1] == 4.0);
}

TEST_CASE("intermediates from a dead tape are constants") {
  Tensor x = Tensor::from_data({2}, {3.0, 4.0}, true);
  Tensor y;
  {
    Tape first;
    y = mul(x, x);  // on the first tape's grad path
  }                 // first tape destroyed without backward
  Tape second;
  Tensor loss = sum(y);
  second.backward(loss);
  // y is stale on the second tape: nothing flows back to x.
  CHECK_FALSE(x.has_grad());
}

TEST_CASE("grad does not flow into non-grad leaves") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
  Tensor c = Tensor::from_data({2}, {5.0, 6.0});  // constant
  Tape tape;
  Tensor loss = sum(mul(x, c));
  tape.backward(loss);
  CHECK(x.grad()[0] == 5.0);
  CHECK(x.grad()[1] == 6.0);
  CHECK_FALSE(c.has_grad());
}
