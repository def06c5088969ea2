#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "intrakd/tensor.hpp"

namespace intrakd {

// Tensor file: "TNS1", rank (u32 LE), extents (u32 LE each), then raw
// little-endian IEEE-754 doubles.
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);
void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

/// Byte size of the serialized form of `t`.
std::size_t serialized_tensor_size(const Tensor& t);

/// 8-bit grayscale image, row-major.
struct GrayImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;
};

/// Binary P5 PGM, maxval 255.
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_pgm(const std::filesystem::path& path);

/// Class maps are stored as PGM with pixel value = class index.
void write_class_map(const std::filesystem::path& path, const ClassMap& map);
ClassMap read_class_map(const std::filesystem::path& path);

/// Binary P6 PPM from interleaved RGB bytes.
void write_ppm(const std::filesystem::path& path, std::size_t height, std::size_t width,
               std::span<const std::uint8_t> rgb);

/// Colour-coded rendering of a class map (fixed palette).
void write_class_map_ppm(const std::filesystem::path& path, const ClassMap& map);

}  // namespace intrakd
