#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "intrakd/tensor.hpp"

namespace intrakd {

/// One-hot ground truth: h x w x n binary tensor, class 0 is background.
struct LabelMaps {
    std::size_t n = 0;
    Tensor maps;
};

/// Per-class areas of interest.
///
/// `maps` holds the full-resolution masks (classes may overlap), and
/// `feature_maps` the same masks OR-pooled to a feature-map grid.
/// `present[k]` is true iff class k covers at least one feature cell.
struct AoiMasks {
    std::size_t n = 0;
    std::size_t kernel_size = 1;
    Tensor maps;
    Tensor feature_maps;
    std::vector<bool> present;

    std::size_t present_count() const;
};

inline constexpr std::size_t kDefaultAoiKernel = 5;

LabelMaps one_hot(const ClassMap& classes, std::size_t n);
/// Inverse of one_hot (argmax over channels).
ClassMap decode_labels(const LabelMaps& labels);

/// Smooths each class map with a kernel_size x kernel_size averaging filter
/// (zero padding) and keeps pixels where the response is > 0. The result is
/// the binary dilation of the labels by a square footprint.
AoiMasks generate_aoi(const LabelMaps& labels, std::size_t kernel_size = kDefaultAoiKernel);

/// Resolution matching: feature cell (i', j') is set iff any full-resolution
/// pixel (i, j) with floor(i*h_f/h) = i' and floor(j*w_f/w) = j' is set.
AoiMasks downsample_aoi(const AoiMasks& aoi, std::size_t h_f, std::size_t w_f);

/// Writes one PGM per class (`<prefix>_class<k>.pgm`, 0/255) from the
/// full-resolution masks.
void export_aoi_pgm(const AoiMasks& aoi, const std::filesystem::path& dir, const std::string& prefix);

}  // namespace intrakd
