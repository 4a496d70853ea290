// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "rankdist/error.hpp"
#include "rankdist/imaging.hpp"
#include "rankdist/rng.hpp"

// Asserts that `stmt` throws rankdist::Error with the given code.
#define EXPECT_ERROR_CODE(stmt, expected_code)                                  \
  do {                                                                          \
    try {                                                                       \
      stmt;                                                                     \
      ADD_FAILURE() << "expected " << ::rankdist::to_string(expected_code);     \
    } catch (const ::rankdist::Error& e_) {                                     \
      EXPECT_EQ(e_.code(), expected_code) << e_.what();                         \
    }                                                                           \
  } while (0)

namespace rankdist::test {

inline ImageRGB random_image(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  ImageRGB img(w, h);
  for (double& v : img.samples()) v = rng.uniform();
  return img;
}

// Samples on the 8-bit grid, so codecs round-trip them exactly.
inline ImageRGB random_quantized_image(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  ImageRGB img(w, h);
  for (double& v : img.samples()) v = static_cast<double>(rng.index(256)) / 255.0;
  return img;
}

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    path_ = std::filesystem::temp_directory_path() /
            ("rankdist_" + name + "_" + std::to_string(fnv1a64(name) ^ reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace rankdist::test
