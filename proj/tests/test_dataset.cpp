#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "hvi/common.hpp"
#include "hvi/dataset.hpp"

using hvi::Dataset;
using hvi::Mat;
using hvi::Vec;

namespace {
std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}
}  // namespace

TEST_CASE("dataset caches the row mean and sum of squares") {
  hvi::SplitMix64 rng(7);
  Mat rows(23, 4);
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    for (Eigen::Index j = 0; j < rows.cols(); ++j)
      rows(i, j) = hvi::normal(rng) * 3.0;
  Dataset data(rows);
  const double n = static_cast<double>(data.n());
  for (Eigen::Index j = 0; j < 4; ++j) {
    double mean = 0.0, ss = 0.0;
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
      mean += rows(i, j);
      ss += rows(i, j) * rows(i, j);
    }
    mean /= n;
    CHECK(std::abs(data.mean()[j] - mean) <= 1e-12 * n);
    CHECK(data.sum_sq()[j] == doctest::Approx(ss).epsilon(1e-13));
  }
}

TEST_CASE("dataset rejects empty input") {
  CHECK_THROWS_AS(Dataset(Mat(0, 3)), hvi::ConfigError);
}

TEST_CASE("csv round trip") {
  Mat rows(3, 2);
  rows << 1.5, -2.25, 0.0, 1e-7, 3.25e4, -0.125;
  Dataset data(rows);
  const std::string path = temp_path("hvi_test_dataset.csv");
  data.save_csv(path);
  const Dataset back = Dataset::load_csv(path);
  CHECK(back.n() == 3);
  CHECK(back.dim() == 2);
  CHECK((back.rows() - rows).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("binary round trip preserves bits") {
  hvi::SplitMix64 rng(11);
  Mat rows(17, 5);
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    for (Eigen::Index j = 0; j < rows.cols(); ++j) rows(i, j) = hvi::normal(rng);
  Dataset data(rows);
  const std::string path = temp_path("hvi_test_dataset.bin");
  data.save_binary(path);
  const Dataset back = Dataset::load_binary(path);
  CHECK(back.n() == 17);
  CHECK(back.dim() == 5);
  CHECK((back.rows() - rows).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("binary loader rejects wrong magic") {
  const std::string path = temp_path("hvi_test_bad.bin");
  {
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    std::fputs("NOPE1234", fp);
    std::fclose(fp);
  }
  CHECK_THROWS_AS(Dataset::load_binary(path), hvi::IoError);
  std::remove(path.c_str());
}

TEST_CASE("csv loader rejects ragged rows") {
  const std::string path = temp_path("hvi_test_ragged.csv");
  {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    std::fputs("1,2\n3\n", fp);
    std::fclose(fp);
  }
  CHECK_THROWS_AS(Dataset::load_csv(path), hvi::IoError);
  std::remove(path.c_str());
}
