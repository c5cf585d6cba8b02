// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <vector>

namespace volnet {

struct ManifestEntry {
    std::string path;  // as written; doubles as the sample id
    int label = 0;     // 1 = covid, 0 = non-covid
};

/// CSV `path,label` with an optional header line. Relative paths resolve
/// against `base_dir` (the manifest's directory when loaded from a file).
struct Manifest {
    std::vector<ManifestEntry> entries;
    std::filesystem::path base_dir;

    std::filesystem::path resolve(const ManifestEntry& entry) const;
    std::size_t size() const { return entries.size(); }
};

/// Throws ParseError (with 1-based line number) for malformed rows or labels
/// outside {0,1}, DataError for a duplicated path.
Manifest parse_manifest(std::istream& in, const std::string& source_name);
Manifest load_manifest(const std::filesystem::path& path);

/// Splits one CSV line at commas and trims surrounding whitespace/CR.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace volnet
