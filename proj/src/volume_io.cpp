// SPDX-License-Identifier: Apache-2.0
#include "volnet/volume_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "volnet/errors.hpp"

namespace volnet {

namespace fs = std::filesystem;

namespace {

// Next whitespace-delimited token of a PNM header, skipping '#' comments.
std::string pnm_token(std::istream& in, const fs::path& path) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) {
                return tok;
            }
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    if (tok.empty()) {
        throw ParseError(path.string() + ": truncated PGM header");
    }
    return tok;
}

std::size_t parse_header_number(const std::string& tok, const fs::path& path) {
    if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char ch) { return std::isdigit(ch); })) {
        throw ParseError(path.string() + ": bad PGM header field '" + tok + "'");
    }
    return std::stoul(tok);
}

}  // namespace

GrayImage read_pgm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    if (pnm_token(in, path) != "P5") {
        throw ParseError(path.string() + ": not a binary PGM (P5)");
    }
    GrayImage img;
    img.width = parse_header_number(pnm_token(in, path), path);
    img.height = parse_header_number(pnm_token(in, path), path);
    const std::size_t maxval = parse_header_number(pnm_token(in, path), path);
    // pnm_token consumed exactly one whitespace byte after maxval.
    if (img.width == 0 || img.height == 0 || maxval == 0 || maxval > 65535) {
        throw ParseError(path.string() + ": invalid PGM dimensions or maxval");
    }
    img.maxval = static_cast<std::uint32_t>(maxval);
    const std::size_t n = img.width * img.height;
    const std::size_t bytes_per = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(n * bytes_per);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
        throw DataError(path.string() + ": truncated PGM pixel data");
    }
    img.pixels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        img.pixels[i] = bytes_per == 1 ? raw[i] : static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
    }
    return img;
}

void write_pgm(const fs::path& path, const GrayImage& image) {
    if (image.pixels.size() != image.width * image.height || image.maxval == 0 || image.maxval > 65535) {
        throw ArgumentError("write_pgm: inconsistent image");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << "P5\n" << image.width << ' ' << image.height << '\n' << image.maxval << '\n';
    const bool wide = image.maxval > 255;
    std::vector<unsigned char> raw;
    raw.reserve(image.pixels.size() * (wide ? 2 : 1));
    for (std::uint16_t p : image.pixels) {
        if (wide) {
            raw.push_back(static_cast<unsigned char>(p >> 8));
        }
        raw.push_back(static_cast<unsigned char>(p & 0xFF));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

bool natural_less(const std::string& a, const std::string& b) {
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() && j < b.size()) {
        const bool da = std::isdigit(static_cast<unsigned char>(a[i]));
        const bool db = std::isdigit(static_cast<unsigned char>(b[j]));
        if (da && db) {
            std::size_t ie = i;
            std::size_t je = j;
            while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
            while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
            std::size_t is = i;
            std::size_t js = j;
            while (is + 1 < ie && a[is] == '0') ++is;
            while (js + 1 < je && b[js] == '0') ++js;
            const std::string_view na(a.data() + is, ie - is);
            const std::string_view nb(b.data() + js, je - js);
            if (na.size() != nb.size()) {
                return na.size() < nb.size();
            }
            if (na != nb) {
                return na < nb;
            }
            i = ie;
            j = je;
        } else {
            if (a[i] != b[j]) {
                return a[i] < b[j];
            }
            ++i;
            ++j;
        }
    }
    if ((a.size() - i) != (b.size() - j)) {
        return (a.size() - i) < (b.size() - j);
    }
    return a < b;  // equal under natural order (e.g. leading zeros): fall back to bytes
}

Volume stack_slices(const fs::path& directory) {
    if (!fs::is_directory(directory)) {
        throw DataError(directory.string() + " is not a directory");
    }
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(directory)) {
        if (!entry.is_regular_file()) {
            continue;
        }
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".pgm") {
            names.push_back(entry.path().filename().string());
        }
    }
    if (names.size() < 2) {
        throw DataError(directory.string() + ": need at least 2 slices, found " + std::to_string(names.size()));
    }
    std::sort(names.begin(), names.end(), natural_less);

    Volume vol;
    vol.source_id = directory.string();
    for (std::size_t d = 0; d < names.size(); ++d) {
        const GrayImage img = read_pgm(directory / names[d]);
        if (d == 0) {
            vol.height = img.height;
            vol.width = img.width;
            vol.voxels.reserve(names.size() * img.height * img.width);
        } else if (img.height != vol.height || img.width != vol.width) {
            throw DataError(directory.string() + ": slice " + names[d] + " is " + std::to_string(img.width) + "x" +
                            std::to_string(img.height) + ", expected " + std::to_string(vol.width) + "x" +
                            std::to_string(vol.height));
        }
        const double divisor = img.maxval > 255 ? 65535.0 : 255.0;
        for (std::uint16_t p : img.pixels) {
            vol.voxels.push_back(static_cast<float>(p / divisor));
        }
    }
    vol.depth = names.size();
    return vol;
}

Volume read_vol1(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::string header;
    if (!std::getline(in, header)) {
        throw ParseError(path.string() + ": empty file");
    }
    std::istringstream hs(header);
    std::string magic;
    std::size_t d = 0, h = 0, w = 0;
    if (!(hs >> magic >> d >> h >> w) || magic != "VOL1") {
        throw ParseError(path.string() + ": expected header 'VOL1 D H W'");
    }
    if (d == 0 || h == 0 || w == 0) {
        throw ParseError(path.string() + ": zero extent in VOL1 header");
    }
    Volume vol(d, h, w);
    vol.source_id = path.string();
    std::vector<unsigned char> raw(vol.size() * 4);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
        throw DataError(path.string() + ": truncated VOL1 payload");
    }
    for (std::size_t i = 0; i < vol.size(); ++i) {
        const std::uint32_t bits = static_cast<std::uint32_t>(raw[4 * i]) |
                                   (static_cast<std::uint32_t>(raw[4 * i + 1]) << 8) |
                                   (static_cast<std::uint32_t>(raw[4 * i + 2]) << 16) |
                                   (static_cast<std::uint32_t>(raw[4 * i + 3]) << 24);
        const float v = std::bit_cast<float>(bits);
        if (!std::isfinite(v)) {
            throw DataError(path.string() + ": non-finite voxel at index " + std::to_string(i));
        }
        vol.voxels[i] = v;
    }
    return vol;
}

void write_vol1(const fs::path& path, const Volume& vol) {
    if (vol.voxels.size() != vol.depth * vol.height * vol.width) {
        throw ArgumentError("write_vol1: inconsistent volume");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << "VOL1 " << vol.depth << ' ' << vol.height << ' ' << vol.width << '\n';
    std::vector<unsigned char> raw(vol.size() * 4);
    for (std::size_t i = 0; i < vol.size(); ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(vol.voxels[i]);
        for (std::size_t b = 0; b < 4; ++b) {
            raw[4 * i + b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xFF);
        }
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

Volume load_volume(const fs::path& path) {
    if (fs::is_directory(path)) {
        return stack_slices(path);
    }
    return read_vol1(path);
}

}  // namespace volnet
