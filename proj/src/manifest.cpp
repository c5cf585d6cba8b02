// SPDX-License-Identifier: Apache-2.0
#include "volnet/manifest.hpp"

#include <fstream>
#include <unordered_set>

#include "volnet/errors.hpp"

namespace volnet {

namespace fs = std::filesystem;

fs::path Manifest::resolve(const ManifestEntry& entry) const {
    const fs::path p(entry.path);
    return p.is_absolute() ? p : base_dir / p;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    auto flush = [&] {
        const auto b = cur.find_first_not_of(" \t\r");
        const auto e = cur.find_last_not_of(" \t\r");
        fields.push_back(b == std::string::npos ? std::string() : cur.substr(b, e - b + 1));
        cur.clear();
    };
    for (char c : line) {
        if (c == ',') {
            flush();
        } else {
            cur.push_back(c);
        }
    }
    flush();
    return fields;
}

Manifest parse_manifest(std::istream& in, const std::string& source_name) {
    Manifest m;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    bool first_content = true;
    while (std::getline(in, line)) {
        ++line_no;
        const auto fields = split_csv_line(line);
        if (fields.size() == 1 && fields[0].empty()) {
            continue;
        }
        const std::string where = source_name + ":" + std::to_string(line_no) + ": ";
        if (first_content) {
            first_content = false;
            if (fields.size() >= 2 && fields[0] == "path" && fields[1] == "label") {
                continue;
            }
        }
        if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
            throw ParseError(where + "expected 'path,label'");
        }
        if (fields[1] != "0" && fields[1] != "1") {
            throw ParseError(where + "label must be 0 or 1, got '" + fields[1] + "'");
        }
        if (!seen.insert(fields[0]).second) {
            throw DataError(where + "duplicate path '" + fields[0] + "'");
        }
        m.entries.push_back({fields[0], fields[1] == "1" ? 1 : 0});
    }
    return m;
}

Manifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open manifest " + path.string());
    }
    Manifest m = parse_manifest(in, path.string());
    m.base_dir = path.parent_path();
    return m;
}

}  // namespace volnet
