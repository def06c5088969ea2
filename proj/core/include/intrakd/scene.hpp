#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "intrakd/tensor.hpp"

namespace intrakd {

enum class Geometry { SolidLane, DashedLane, CrossingBars };

/// A closed interval [lo, hi] sampled uniformly.
struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

/// How one foreground class is drawn.
///
/// Lanes run from a bottom anchor (x_bottom, bottom row) to a top anchor
/// (x_top, horizon row). Crossing bars are vertical stripes filling a
/// horizontal band between x_bottom and x_top, with vertical extent given by
/// `band_rows`. x coordinates are fractions of the image width, rows are
/// fractions of the height, widths and periods are in pixels.
struct ElementSpec {
    Geometry geometry = Geometry::SolidLane;
    Range x_bottom;
    Range x_top;
    Range width;
    Range band_rows;          // crossing bars: top/bottom row fractions of the band
    double dash_on = 10.0;    // dashed lanes / bar stripe width
    double dash_off = 6.0;    // dashed lanes / bar gap
    std::array<double, 3> color{1.0, 1.0, 1.0};
    double texture = 0.0;     // amplitude of the along-element intensity ripple
};

struct SceneSpec {
    std::size_t h = 64;
    std::size_t w = 64;
    std::size_t n = 4;
    /// elements[k - 1] draws class k; drawn in class order, later classes occlude.
    std::vector<ElementSpec> elements;
    Range horizon{0.15, 0.25};
    double noise = 0.05;
    /// Background intensity rises linearly from `background.lo` at the top to a
    /// per-sample value drawn from [background.lo, background.hi] at the bottom.
    Range background{0.25, 0.45};
    std::array<double, 3> background_tint{1.0, 1.0, 1.0};
};

/// 64 x 64 road scene: background, left lane (solid), right lane (dashed),
/// crossing bars. Both lane classes share nearly the same colour.
SceneSpec default_scene_spec();

void validate_scene_spec(const SceneSpec& spec);

struct SceneSample {
    Tensor image;     // h x w x 3, values roughly in [0, 1]
    ClassMap target;  // h x w class indices
};

/// Pure function of (spec, seed). Draws are retried until every foreground
/// class covers at least one pixel.
SceneSample generate_scene(const SceneSpec& spec, std::uint64_t seed);

/// `count` samples with per-sample seeds `base_seed ^ index`.
std::vector<SceneSample> generate_scenes(const SceneSpec& spec, std::size_t count, std::uint64_t base_seed);

/// Majority vote over each output cell's preimage (pixels with
/// floor(i*h_o/h) = i'). Ties go to the smallest tied foreground class, and
/// to background only when it is the sole winner.
ClassMap downsample_target(const ClassMap& target, std::size_t h_o, std::size_t w_o);

struct Dataset {
    std::size_t n = 0;
    std::vector<SceneSample> samples;
};

// Directory layout: manifest.json, img_%05d.tns (tensor file), gt_%05d.pgm
// (binary P5, pixel value = class index).
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace intrakd
