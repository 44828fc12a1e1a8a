#pragma once

// SHA-256 digests of strings, files and output trees.

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>

namespace braintools::hash {

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

// Relative path (generic form) -> digest for every regular file under `root`,
// skipping relative paths listed in `exclude`.
std::map<std::string, std::string> hash_tree(const std::filesystem::path& root,
                                             const std::set<std::string>& exclude = {});

// Digest of the "path  digest\n" lines of a tree listing.
std::string tree_digest(const std::map<std::string, std::string>& tree);

}  // namespace braintools::hash
