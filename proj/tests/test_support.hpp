#pragma once

#include <filesystem>
#include <random>
#include <string>

namespace dhnplan::testing {

inline std::filesystem::path fixtures() { return DHNPLAN_FIXTURES; }

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "dhnplan") {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / (tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path copy_fixture(const std::string& name, const TempDir& into) {
  auto dst = into.path() / name;
  std::filesystem::copy(fixtures() / name, dst, std::filesystem::copy_options::recursive);
  return dst;
}

}  // namespace dhnplan::testing
