// Copyright 2026 EFGN Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "efgn/tensor.hpp"

namespace efgn {

namespace detail {

inline std::uint32_t crc32_bytes(const unsigned char* data, std::size_t n,
                                 std::uint32_t crc = 0xFFFFFFFFu) {
    static const std::array<std::uint32_t, 256> table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    for (std::size_t i = 0; i < n; ++i) {
        crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
    }
    return crc;
}

inline std::uint32_t adler32_bytes(const unsigned char* data, std::size_t n) {
    std::uint32_t a = 1, b = 0;
    for (std::size_t i = 0; i < n; ++i) {
        a = (a + data[i]) % 65521u;
        b = (b + a) % 65521u;
    }
    return (b << 16) | a;
}

inline void push_u32_be(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v >> 24));
    out.push_back(static_cast<unsigned char>(v >> 16));
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v));
}

inline void push_chunk(std::vector<unsigned char>& out, const char type[4],
                       const std::vector<unsigned char>& payload) {
    push_u32_be(out, static_cast<std::uint32_t>(payload.size()));
    std::vector<unsigned char> body;
    body.reserve(4 + payload.size());
    for (int i = 0; i < 4; ++i) body.push_back(static_cast<unsigned char>(type[i]));
    body.insert(body.end(), payload.begin(), payload.end());
    out.insert(out.end(), body.begin(), body.end());
    push_u32_be(out, crc32_bytes(body.data(), body.size()) ^ 0xFFFFFFFFu);
}

// zlib stream holding only stored (uncompressed) deflate blocks, so output
// bytes are a pure function of the pixel data.
inline std::vector<unsigned char> zlib_stored(const std::vector<unsigned char>& raw) {
    std::vector<unsigned char> out;
    out.push_back(0x78);
    out.push_back(0x01);
    std::size_t pos = 0;
    do {
        const std::size_t len = std::min<std::size_t>(raw.size() - pos, 65535);
        const bool final_block = pos + len == raw.size();
        out.push_back(final_block ? 1 : 0);
        out.push_back(static_cast<unsigned char>(len & 0xFFu));
        out.push_back(static_cast<unsigned char>(len >> 8));
        out.push_back(static_cast<unsigned char>(~len & 0xFFu));
        out.push_back(static_cast<unsigned char>((~len >> 8) & 0xFFu));
        out.insert(out.end(), raw.begin() + static_cast<std::ptrdiff_t>(pos),
                   raw.begin() + static_cast<std::ptrdiff_t>(pos + len));
        pos += len;
    } while (pos < raw.size());
    push_u32_be(out, adler32_bytes(raw.data(), raw.size()));
    return out;
}

}  // namespace detail

/// Writes an 8-bit RGB PNG. rgb is row-major, 3 bytes per pixel.
inline void write_png_rgb8(const std::string& path, int width, int height,
                           const std::vector<unsigned char>& rgb) {
    require(width >= 1 && height >= 1, "image dimensions must be positive");
    require(rgb.size() == static_cast<std::size_t>(width) * height * 3,
            "pixel buffer size mismatch");

    std::vector<unsigned char> raw;
    raw.reserve(static_cast<std::size_t>(height) * (1 + static_cast<std::size_t>(width) * 3));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);  // filter: none
        const std::size_t off = static_cast<std::size_t>(y) * width * 3;
        raw.insert(raw.end(), rgb.begin() + static_cast<std::ptrdiff_t>(off),
                   rgb.begin() + static_cast<std::ptrdiff_t>(off + static_cast<std::size_t>(width) * 3));
    }

    std::vector<unsigned char> file = {137, 80, 78, 71, 13, 10, 26, 10};
    std::vector<unsigned char> ihdr;
    detail::push_u32_be(ihdr, static_cast<std::uint32_t>(width));
    detail::push_u32_be(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // color type: truecolor
    ihdr.push_back(0);  // compression
    ihdr.push_back(0);  // filter
    ihdr.push_back(0);  // interlace
    detail::push_chunk(file, "IHDR", ihdr);
    detail::push_chunk(file, "IDAT", detail::zlib_stored(raw));
    detail::push_chunk(file, "IEND", {});

    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot open file for writing: " + path);
    out.write(reinterpret_cast<const char*>(file.data()),
              static_cast<std::streamsize>(file.size()));
    require(out.good(), "write failed: " + path);
}

}  // namespace efgn
