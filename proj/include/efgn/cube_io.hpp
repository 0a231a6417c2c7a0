// Copyright 2026 EFGN Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "efgn/core_types.hpp"
#include "json.hpp"

namespace efgn {

static_assert(std::endian::native == std::endian::little,
              "cube files are little-endian; big-endian hosts are unsupported");

/// Cube file layout: one line of UTF-8 JSON
/// {"bands":..,"height":..,"width":..,"dtype":"f32"|"f64","value_range":[lo,hi],
///  "wavelengths":[..]?}
/// terminated by '\n', followed by the raw band-sequential row-major payload.

inline void save_cube(const HSICube& cube, const std::string& path,
                      const std::string& dtype = "f32") {
    require(dtype == "f32" || dtype == "f64", "dtype must be f32 or f64");
    nlohmann::json header;
    header["bands"] = cube.bands();
    header["height"] = cube.height();
    header["width"] = cube.width();
    header["dtype"] = dtype;
    header["value_range"] = {cube.value_lo, cube.value_hi};
    if (!cube.wavelength_nm.empty()) header["wavelengths"] = cube.wavelength_nm;

    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot open file for writing: " + path);
    const std::string htext = header.dump();
    out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    out.put('\n');
    if (dtype == "f32") {
        std::vector<float> buf(cube.data.data.size());
        for (std::size_t i = 0; i < buf.size(); ++i) {
            buf[i] = static_cast<float>(cube.data.data[i]);
        }
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
    } else {
        out.write(reinterpret_cast<const char*>(cube.data.data.data()),
                  static_cast<std::streamsize>(cube.data.data.size() * sizeof(double)));
    }
    require(out.good(), "write failed: " + path);
}

inline HSICube load_cube(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open file: " + path);
    std::string htext;
    std::getline(in, htext);
    require(in.good(), "malformed header: missing newline terminator in " + path);

    nlohmann::json header = nlohmann::json::parse(htext, nullptr, false);
    require(!header.is_discarded() && header.is_object(), "malformed header in " + path);
    require(header.contains("bands") && header.contains("height") && header.contains("width") &&
                header.contains("dtype"),
            "malformed header: missing required field in " + path);

    const int bands = header["bands"].get<int>();
    const int height = header["height"].get<int>();
    const int width = header["width"].get<int>();
    const std::string dtype = header["dtype"].get<std::string>();
    require(bands >= 1 && height >= 1 && width >= 1, "header dimensions must be positive");
    require(dtype == "f32" || dtype == "f64", "unsupported dtype: " + dtype);

    const std::size_t count = static_cast<std::size_t>(bands) * height * width;
    Tensor<double> data({bands, height, width});
    if (dtype == "f32") {
        std::vector<float> buf(count);
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(count * sizeof(float)));
        require(static_cast<std::size_t>(in.gcount()) == count * sizeof(float),
                "payload length mismatch");
        for (std::size_t i = 0; i < count; ++i) data.data[i] = buf[i];
    } else {
        in.read(reinterpret_cast<char*>(data.data.data()),
                static_cast<std::streamsize>(count * sizeof(double)));
        require(static_cast<std::size_t>(in.gcount()) == count * sizeof(double),
                "payload length mismatch");
    }
    in.peek();
    require(in.eof(), "payload length mismatch");

    HSICube cube = make_cube(std::move(data));
    if (header.contains("value_range")) {
        cube.value_lo = header["value_range"][0].get<double>();
        cube.value_hi = header["value_range"][1].get<double>();
    }
    if (header.contains("wavelengths")) {
        cube.wavelength_nm = header["wavelengths"].get<std::vector<double>>();
        require(cube.wavelength_nm.size() == static_cast<std::size_t>(bands),
                "wavelength list length must equal band count");
    }
    return cube;
}

}  // namespace efgn
