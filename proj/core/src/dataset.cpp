#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "intrakd/errors.hpp"
#include "intrakd/image_io.hpp"
#include "intrakd/scene.hpp"

namespace intrakd {

namespace {

std::string numbered(const char* pattern, std::size_t i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, static_cast<unsigned>(i));
    return buf;
}

}  // namespace

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create dataset directory " + dir.string() + ": " + ec.message());

    std::size_t h = 0, w = 0;
    if (!dataset.samples.empty()) {
        h = dataset.samples.front().target.height();
        w = dataset.samples.front().target.width();
    }
    nlohmann::json manifest;
    manifest["format"] = "intrakd-dataset";
    manifest["version"] = 1;
    manifest["n"] = dataset.n;
    manifest["height"] = h;
    manifest["width"] = w;
    manifest["count"] = dataset.samples.size();
    nlohmann::json entries = nlohmann::json::array();
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const auto& s = dataset.samples[i];
        if (s.target.height() != h || s.target.width() != w || s.image.dim(0) != h || s.image.dim(1) != w) {
            throw ShapeError("write_dataset: sample " + std::to_string(i) + " has different extents");
        }
        const auto img = numbered("img_%05u.tns", i);
        const auto gt = numbered("gt_%05u.pgm", i);
        save_tensor(dir / img, s.image);
        write_class_map(dir / gt, s.target);
        entries.push_back({{"image", img}, {"target", gt}});
    }
    manifest["samples"] = std::move(entries);
    std::ofstream os(dir / "manifest.json");
    if (!os) throw IoError("cannot write manifest in " + dir.string());
    os << manifest.dump(1) << '\n';
}

Dataset read_dataset(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    std::ifstream is(manifest_path);
    if (!is) throw IoError("cannot open " + manifest_path.string());
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(manifest_path.string() + ": " + e.what());
    }

    Dataset out;
    try {
        if (manifest.at("format").get<std::string>() != "intrakd-dataset") {
            throw FormatError(manifest_path.string() + ": unexpected format tag");
        }
        out.n = manifest.at("n").get<std::size_t>();
        const auto h = manifest.at("height").get<std::size_t>();
        const auto w = manifest.at("width").get<std::size_t>();
        const auto& entries = manifest.at("samples");
        if (entries.size() != manifest.at("count").get<std::size_t>()) {
            throw FormatError(manifest_path.string() + ": count does not match sample list");
        }
        for (const auto& entry : entries) {
            const auto img_path = dir / entry.at("image").get<std::string>();
            const auto gt_path = dir / entry.at("target").get<std::string>();
            SceneSample s{load_tensor(img_path), read_class_map(gt_path)};
            if (s.image.rank() != 3 || s.image.dim(0) != h || s.image.dim(1) != w || s.image.dim(2) != 3) {
                throw FormatError(img_path.string() + ": image extents " + s.image.shape_string() +
                                  " disagree with manifest");
            }
            if (s.target.height() != h || s.target.width() != w) {
                throw FormatError(gt_path.string() + ": target extents disagree with manifest");
            }
            if (s.target.max_label() >= out.n) {
                throw FormatError(gt_path.string() + ": label " + std::to_string(s.target.max_label()) +
                                  " inconsistent with manifest n = " + std::to_string(out.n));
            }
            out.samples.push_back(std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(manifest_path.string() + ": " + e.what());
    }
    return out;
}

}  // namespace intrakd
