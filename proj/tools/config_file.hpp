#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace ecanet::cli {

/// Flat `key = value` lines; '#' starts a comment. Keys keep file order.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path);

}  // namespace ecanet::cli
