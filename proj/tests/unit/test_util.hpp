#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

#include "latfuse/core/image.hpp"
#include "latfuse/core/random.hpp"

namespace testutil {

inline latfuse::ImageBuffer random_image(int h, int w, int c, latfuse::Rng& rng) {
  latfuse::ImageBuffer img(h, w, c);
  for (float& v : img.values()) v = static_cast<float>(rng.uniform());
  return img;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("latfuse_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

}  // namespace testutil
