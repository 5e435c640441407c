#ifndef POPCACHE_ATOMIC_FILE_HPP
#define POPCACHE_ATOMIC_FILE_HPP

#include <string>
#include <string_view>

namespace popcache {

/// Writes `content` to a temporary sibling of `path` and renames it into
/// place, so readers never observe a partially written file.
void write_file_atomically(const std::string& path, std::string_view content);

}  // namespace popcache

#endif  // POPCACHE_ATOMIC_FILE_HPP
