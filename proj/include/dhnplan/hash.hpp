#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace dhnplan {

// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

// Hash over every regular file below `dir`, in path order, covering relative
// paths and contents.
std::string sha256_tree(const std::filesystem::path& dir);

}  // namespace dhnplan
