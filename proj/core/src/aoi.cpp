#include "intrakd/aoi.hpp"

#include <algorithm>

#include "intrakd/errors.hpp"
#include "intrakd/image_io.hpp"

namespace intrakd {

std::size_t AoiMasks::present_count() const {
    return static_cast<std::size_t>(std::count(present.begin(), present.end(), true));
}

LabelMaps one_hot(const ClassMap& classes, std::size_t n) {
    if (n == 0 || n > 256) throw ConfigError("one_hot: class count must be in [1, 256]");
    LabelMaps out{n, Tensor({classes.height(), classes.width(), n})};
    for (std::size_t p = 0; p < classes.size(); ++p) {
        const std::size_t k = classes.labels()[p];
        if (k >= n) throw IndexError("one_hot: class index " + std::to_string(k) + " >= " + std::to_string(n));
        out.maps[p * n + k] = 1.0;
    }
    return out;
}

ClassMap decode_labels(const LabelMaps& labels) {
    const std::size_t h = labels.maps.dim(0), w = labels.maps.dim(1), n = labels.n;
    ClassMap out(h, w);
    for (std::size_t p = 0; p < h * w; ++p) {
        const double* v = labels.maps.raw() + p * n;
        out.labels()[p] = static_cast<std::uint8_t>(std::max_element(v, v + n) - v);
    }
    return out;
}

namespace {

std::vector<bool> presence(const Tensor& masks, std::size_t n) {
    std::vector<bool> present(n, false);
    for (std::size_t p = 0; p < masks.size(); ++p)
        if (masks[p] != 0.0) present[p % n] = true;
    return present;
}

}  // namespace

AoiMasks generate_aoi(const LabelMaps& labels, std::size_t kernel_size) {
    if (kernel_size == 0 || kernel_size % 2 == 0) {
        throw ConfigError("generate_aoi: kernel size must be odd and positive, got " + std::to_string(kernel_size));
    }
    if (labels.maps.rank() != 3 || labels.maps.dim(2) != labels.n) throw ShapeError("generate_aoi: bad label maps");
    const std::size_t h = labels.maps.dim(0), w = labels.maps.dim(1), n = labels.n;
    const auto r = static_cast<std::ptrdiff_t>(kernel_size / 2);
    const auto sh = static_cast<std::ptrdiff_t>(h), sw = static_cast<std::ptrdiff_t>(w);

    AoiMasks aoi{n, kernel_size, Tensor(labels.maps.dims()), Tensor(), {}};
    // Integral image of each class map; the box sum is the unnormalised
    // averaging response, so "> 0" on it is the same test as on the average.
    std::vector<std::size_t> integral((h + 1) * (w + 1));
    for (std::size_t k = 0; k < n; ++k) {
        std::fill(integral.begin(), integral.end(), 0);
        for (std::size_t i = 0; i < h; ++i) {
            std::size_t row = 0;
            for (std::size_t j = 0; j < w; ++j) {
                row += labels.maps.at(i, j, k) > 0.0 ? 1 : 0;
                integral[(i + 1) * (w + 1) + j + 1] = integral[i * (w + 1) + j + 1] + row;
            }
        }
        for (std::ptrdiff_t i = 0; i < sh; ++i) {
            const auto i0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, i - r));
            const auto i1 = static_cast<std::size_t>(std::min<std::ptrdiff_t>(sh, i + r + 1));
            for (std::ptrdiff_t j = 0; j < sw; ++j) {
                const auto j0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, j - r));
                const auto j1 = static_cast<std::size_t>(std::min<std::ptrdiff_t>(sw, j + r + 1));
                const std::size_t box = integral[i1 * (w + 1) + j1] + integral[i0 * (w + 1) + j0] -
                                        integral[i0 * (w + 1) + j1] - integral[i1 * (w + 1) + j0];
                if (box > 0) aoi.maps.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j), k) = 1.0;
            }
        }
    }
    aoi.feature_maps = aoi.maps;
    aoi.present = presence(aoi.feature_maps, n);
    return aoi;
}

AoiMasks downsample_aoi(const AoiMasks& aoi, std::size_t h_f, std::size_t w_f) {
    const std::size_t h = aoi.maps.dim(0), w = aoi.maps.dim(1), n = aoi.n;
    if (h_f == 0 || w_f == 0 || h_f > h || w_f > w) {
        throw ConfigError("downsample_aoi: target " + std::to_string(h_f) + "x" + std::to_string(w_f) +
                          " must be within source " + std::to_string(h) + "x" + std::to_string(w));
    }
    AoiMasks out{n, aoi.kernel_size, aoi.maps, Tensor({h_f, w_f, n}), {}};
    for (std::size_t i = 0; i < h; ++i) {
        const std::size_t ci = i * h_f / h;
        for (std::size_t j = 0; j < w; ++j) {
            const std::size_t cj = j * w_f / w;
            for (std::size_t k = 0; k < n; ++k)
                if (aoi.maps.at(i, j, k) != 0.0) out.feature_maps.at(ci, cj, k) = 1.0;
        }
    }
    out.present = presence(out.feature_maps, n);
    return out;
}

void export_aoi_pgm(const AoiMasks& aoi, const std::filesystem::path& dir, const std::string& prefix) {
    const std::size_t h = aoi.maps.dim(0), w = aoi.maps.dim(1);
    for (std::size_t k = 0; k < aoi.n; ++k) {
        GrayImage img{h, w, std::vector<std::uint8_t>(h * w)};
        for (std::size_t p = 0; p < h * w; ++p) img.pixels[p] = aoi.maps[p * aoi.n + k] != 0.0 ? 255 : 0;
        write_pgm(dir / (prefix + "_class" + std::to_string(k) + ".pgm"), img);
    }
}

}  // namespace intrakd
