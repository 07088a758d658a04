#pragma once

#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "evkp/keypoint.hpp"
#include "evkp/rng.hpp"

namespace evkp::test {

inline std::filesystem::path data_dir() { return EVKP_TEST_DATA_DIR; }

/// Fresh scratch directory per test, removed afterwards.
class TempDirTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = std::filesystem::temp_directory_path() / "evkp_tests" /
           (std::string(info->test_suite_name()) + "." + info->name());
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

/// K keypoints inside width x height with random unit descriptors.
inline KeypointSet random_keypoints(Rng& rng, std::size_t count, int dim, std::uint64_t tau = 0,
                                    float width = 640.0f, float height = 480.0f) {
  KeypointSet set;
  set.tau_us = tau;
  set.descriptors.resize(static_cast<Eigen::Index>(count), dim);
  for (std::size_t k = 0; k < count; ++k) {
    set.keypoints.push_back({static_cast<float>(uniform_real(rng, 0.0, width)),
                             static_cast<float>(uniform_real(rng, 0.0, height)),
                             static_cast<float>(uniform_unit(rng))});
    for (int d = 0; d < dim; ++d)
      set.descriptors(static_cast<Eigen::Index>(k), d) = static_cast<float>(standard_normal(rng));
    set.descriptors.row(static_cast<Eigen::Index>(k)).normalize();
  }
  return set;
}

}  // namespace evkp::test
