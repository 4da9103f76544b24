// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "dsraseg/archive.hpp"
#include "dsraseg/errors.hpp"
#include "dsraseg/rng.hpp"
#include "test_util.hpp"

using namespace dsraseg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const char* tag) {
    path = fs::temp_directory_path() / (std::string("dsraseg_test_") + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("archive round-trip is bitwise exact") {
  TempDir tmp("archive_rt");
  Rng rng(31);
  NamedTensors tensors;
  tensors.emplace_back("enc.w", testing::rand_tensor({2, 3, 3, 3}, rng));
  tensors.emplace_back("enc.b", testing::rand_tensor({2}, rng));
  // Values that stress the binary format: signed zero, denormal, huge.
  tensors.emplace_back("edge", Tensor::from_data({4}, {-0.0, 5e-324, -1.7976931348623157e308,
                                                       0.1 + 0.2}));
  save_archive(tmp.path.string(), tensors);

  NamedTensors loaded = load_archive(tmp.path.string());
  REQUIRE(loaded.size() == tensors.size());
  for (size_t i = 0; i < tensors.size(); ++i) {
    CHECK(loaded[i].first == tensors[i].first);
    CHECK(loaded[i].second.shape() == tensors[i].second.shape());
    const double* a = tensors[i].second.data();
    const double* b = loaded[i].second.data();
    for (int64_t k = 0; k < loaded[i].second.numel(); ++k) {
      // Bitwise comparison, not value comparison: -0.0 must stay -0.0.
      CHECK(std::memcmp(&a[k], &b[k], sizeof(double)) == 0);
    }
  }
}

TEST_CASE("archive preserves save order") {
  TempDir tmp("archive_order");
  NamedTensors tensors;
  tensors.emplace_back("zz", Tensor::scalar(1.0));
  tensors.emplace_back("aa", Tensor::scalar(2.0));
  tensors.emplace_back("mm", Tensor::scalar(3.0));
  save_archive(tmp.path.string(), tensors);
  NamedTensors loaded = load_archive(tmp.path.string());
  REQUIRE(loaded.size() == 3);
  CHECK(loaded[0].first == "zz");
  CHECK(loaded[1].first == "aa");
  CHECK(loaded[2].first == "mm");
}

TEST_CASE("archive load failures raise DataError") {
  SUBCASE("missing directory") {
    CHECK_THROWS_AS(load_archive("/nonexistent/archive/dir"), DataError);
  }
  SUBCASE("missing tensor file") {
    TempDir tmp("archive_missing");
    NamedTensors tensors;
    tensors.emplace_back("w", Tensor::scalar(1.0));
    save_archive(tmp.path.string(), tensors);
    fs::remove(tmp.path / "w.bin");
    CHECK_THROWS_AS(load_archive(tmp.path.string()), DataError);
  }
  SUBCASE("truncated tensor file") {
    TempDir tmp("archive_trunc");
    NamedTensors tensors;
    tensors.emplace_back("w", Tensor::full({8}, 1.25));
    save_archive(tmp.path.string(), tensors);
    fs::resize_file(tmp.path / "w.bin", 8 * sizeof(double) - 3);
    CHECK_THROWS_AS(load_archive(tmp.path.string()), DataError);
  }
  SUBCASE("oversized tensor file") {
    TempDir tmp("archive_grow");
    NamedTensors tensors;
    tensors.emplace_back("w", Tensor::full({2}, 0.5));
    save_archive(tmp.path.string(), tensors);
    std::ofstream app(tmp.path / "w.bin", std::ios::binary | std::ios::app);
    app << "xtra";
    app.close();
    CHECK_THROWS_AS(load_archive(tmp.path.string()), DataError);
  }
  SUBCASE("malformed manifest") {
    TempDir tmp("archive_badjson");
    std::ofstream mf(tmp.path / "manifest.json");
    mf << "{ not json";
    mf.close();
    CHECK_THROWS_AS(load_archive(tmp.path.string()), DataError);
  }
  SUBCASE("wrong format tag") {
    TempDir tmp("archive_badfmt");
    std::ofstream mf(tmp.path / "manifest.json");
    mf << R"({"format": "something-else", "tensors": {}})";
    mf.close();
    CHECK_THROWS_AS(load_archive(tmp.path.string()), DataError);
  }
}
