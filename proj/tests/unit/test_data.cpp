#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "intrakd/errors.hpp"
#include "intrakd/experiment.hpp"
#include "intrakd/image_io.hpp"
#include "intrakd/scene.hpp"
#include "oracles.hpp"

using namespace intrakd;
using namespace intrakd::testing;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("intrakd_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::set<int> labels_of(const ClassMap& m) {
    std::set<int> s;
    for (auto v : m.labels()) s.insert(v);
    return s;
}

// Majority vote, ties to the smallest foreground class, background only as a sole winner.
std::uint8_t vote(const std::map<int, int>& counts) {
    int best = -1, best_count = 0;
    for (auto [k, c] : counts)
        if (c > best_count) best_count = c;
    std::vector<int> tied;
    for (auto [k, c] : counts)
        if (c == best_count) tied.push_back(k);
    for (int k : tied)
        if (k != 0) return static_cast<std::uint8_t>(k);
    return static_cast<std::uint8_t>(best == -1 ? tied.front() : tied.front());
}

}  // namespace

TEST(Scene, Deterministic) {
    const SceneSpec spec = default_scene_spec();
    const SceneSample a = generate_scene(spec, 42), b = generate_scene(spec, 42);
    EXPECT_EQ(a.image, b.image);
    EXPECT_EQ(a.target, b.target);
    EXPECT_FALSE(generate_scene(spec, 43).image == a.image);
}

TEST(Scene, TwoLaneClasses) {
    SceneSpec spec = default_scene_spec();
    spec.n = 3;
    spec.elements.resize(2);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto l = labels_of(generate_scene(spec, seed).target);
        EXPECT_TRUE(l.count(1) && l.count(2));
        EXPECT_LE(*l.rbegin(), 2);
    }
}

TEST(Scene, DegenerateBackgroundIsConstant) {
    SceneSpec spec = default_scene_spec();
    spec.noise = 0.0;
    spec.background = {0.3, 0.3};
    const SceneSample s = generate_scene(spec, 5);
    for (std::size_t i = 0; i < spec.h; ++i)
        for (std::size_t j = 0; j < spec.w; ++j)
            if (s.target.at(i, j) == 0) EXPECT_DOUBLE_EQ(s.image.at(i, j, 0), 0.3);
}

TEST(Scene, ClassBalanceOverSeeds) {
    const SceneSpec spec = default_scene_spec();
    std::vector<int> seen(spec.n, 0);
    for (std::uint64_t seed = 0; seed < 100; ++seed)
        for (int k : labels_of(generate_scene(spec, seed).target)) ++seen[k];
    for (std::size_t k = 1; k < spec.n; ++k) EXPECT_GE(seen[k], 95) << "class " << k;
}

TEST(Scene, LanesAreThin) {
    for (const auto& e : default_scene_spec().elements)
        if (e.geometry != Geometry::CrossingBars) EXPECT_LE(e.width.hi, 4.0);
}

TEST(Scene, InvalidSpecs) {
    SceneSpec spec = default_scene_spec();
    spec.n = 1;
    EXPECT_THROW(validate_scene_spec(spec), ConfigError);
    spec = default_scene_spec();
    spec.elements[0].x_bottom = {0.5, 1.7};
    EXPECT_THROW(generate_scene(spec, 1), ConfigError);
    spec = default_scene_spec();
    spec.elements[1].width = {3.0, 2.0};
    EXPECT_THROW(validate_scene_spec(spec), ConfigError);
}

TEST(RoadSceneSpec, ClassCounts) {
    for (std::size_t n = 2; n <= 8; ++n) {
        const SceneSpec spec = road_scene_spec(n);
        EXPECT_EQ(spec.elements.size(), n - 1);
        const auto l = labels_of(generate_scene(spec, n).target);
        EXPECT_EQ(l.size(), n);
    }
    EXPECT_THROW(road_scene_spec(9), ConfigError);
}

TEST(DownsampleTarget, Identity) {
    Rng rng(1);
    const ClassMap m = random_class_map(rng, 7, 5, 4);
    EXPECT_EQ(downsample_target(m, 7, 5), m);
}

TEST(DownsampleTarget, MajorityAndTie) {
    EXPECT_EQ(downsample_target(ClassMap(2, 2, std::vector<std::uint8_t>{0, 0, 0, 1}), 1, 1).at(0, 0), 0);
    EXPECT_EQ(downsample_target(ClassMap(2, 2, std::vector<std::uint8_t>{2, 1, 1, 2}), 1, 1).at(0, 0), 1);
    EXPECT_EQ(downsample_target(ClassMap(2, 2, std::vector<std::uint8_t>{0, 0, 3, 3}), 1, 1).at(0, 0), 3);
}

TEST(DownsampleTarget, MatchesVoteEnumeration) {
    Rng rng(2);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t h = 2 + rng.integer(0, 20), w = 2 + rng.integer(0, 20);
        const std::size_t ho = 1 + rng.integer(0, static_cast<std::int64_t>(h) - 1);
        const std::size_t wo = 1 + rng.integer(0, static_cast<std::int64_t>(w) - 1);
        const ClassMap m = random_class_map(rng, h, w, 4);
        std::vector<std::map<int, int>> cells(ho * wo);
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) ++cells[(i * ho / h) * wo + j * wo / w][m.at(i, j)];
        const ClassMap d = downsample_target(m, ho, wo);
        for (std::size_t i = 0; i < ho; ++i)
            for (std::size_t j = 0; j < wo; ++j) EXPECT_EQ(d.at(i, j), vote(cells[i * wo + j]));
    }
}

TEST(Dataset, Roundtrip) {
    const fs::path dir = temp_dir("dataset");
    Dataset d{4, generate_scenes(default_scene_spec(), 10, 99)};
    write_dataset(d, dir);
    const Dataset back = read_dataset(dir);
    ASSERT_EQ(back.samples.size(), 10u);
    EXPECT_EQ(back.n, 4u);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_EQ(back.samples[i].image, d.samples[i].image);
        EXPECT_EQ(back.samples[i].target, d.samples[i].target);
    }
    EXPECT_TRUE(fs::exists(dir / "img_00003.tns"));
    EXPECT_TRUE(fs::exists(dir / "gt_00009.pgm"));
}

TEST(Dataset, Empty) {
    const fs::path dir = temp_dir("dataset_empty");
    write_dataset(Dataset{3, {}}, dir);
    EXPECT_TRUE(fs::exists(dir / "manifest.json"));
    const Dataset back = read_dataset(dir);
    EXPECT_EQ(back.n, 3u);
    EXPECT_TRUE(back.samples.empty());
}

TEST(Dataset, InconsistentLabelCount) {
    const fs::path dir = temp_dir("dataset_bad");
    Dataset d{4, generate_scenes(default_scene_spec(), 2, 5)};
    write_dataset(d, dir);
    // Claim n = 2 in the manifest while the targets still hold labels up to 3.
    std::ifstream in(dir / "manifest.json");
    std::string text((std::istreambuf_iterator<char>(in)), {});
    in.close();
    const auto pos = text.find("\"n\": 4");
    ASSERT_NE(pos, std::string::npos) << text;
    text.replace(pos, 6, "\"n\": 2");
    std::ofstream(dir / "manifest.json") << text;
    try {
        read_dataset(dir);
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("gt_0000"), std::string::npos) << e.what();
    }
    std::ofstream(dir / "manifest.json") << "{ not json";
    EXPECT_THROW(read_dataset(dir), FormatError);
}

TEST(TensorFile, Roundtrip) {
    const fs::path dir = temp_dir("tns");
    Rng rng(3);
    for (const auto& dims : std::vector<std::vector<std::size_t>>{{5}, {3, 4}, {2, 3, 4}, {2, 2, 3, 5}}) {
        Tensor t = random_tensor(rng, dims, -1e300, 1e300);
        t[0] = 5e-324;
        save_tensor(dir / "t.tns", t);
        EXPECT_EQ(load_tensor(dir / "t.tns"), t);
        EXPECT_EQ(fs::file_size(dir / "t.tns"), serialized_tensor_size(t));
    }
    std::ofstream(dir / "bad.tns", std::ios::binary) << "TNS2";
    EXPECT_THROW(load_tensor(dir / "bad.tns"), FormatError);
}

TEST(TensorFile, LayoutIsLittleEndian) {
    const fs::path dir = temp_dir("tns_layout");
    save_tensor(dir / "t.tns", Tensor({2}, std::vector<double>{1.0, -2.0}));
    std::ifstream in(dir / "t.tns", std::ios::binary);
    std::string b((std::istreambuf_iterator<char>(in)), {});
    ASSERT_EQ(b.size(), 4u + 4u + 4u + 16u);
    EXPECT_EQ(b.substr(0, 4), "TNS1");
    EXPECT_EQ(b[4], 1);
    EXPECT_EQ(b[8], 2);
    EXPECT_EQ(static_cast<unsigned char>(b[12 + 7]), 0x3f);
    EXPECT_EQ(static_cast<unsigned char>(b[12 + 6]), 0xf0);
    EXPECT_EQ(static_cast<unsigned char>(b[20 + 7]), 0xc0);
}

TEST(Pgm, Roundtrip) {
    const fs::path dir = temp_dir("pgm");
    Rng rng(4);
    const ClassMap m = random_class_map(rng, 13, 7, 6);
    write_class_map(dir / "m.pgm", m);
    EXPECT_EQ(read_class_map(dir / "m.pgm"), m);
    std::ofstream(dir / "c.pgm", std::ios::binary) << "P5\n# comment\n2 1\n255\n" << '\x01' << '\x03';
    const ClassMap c = read_class_map(dir / "c.pgm");
    EXPECT_EQ(c.at(0, 1), 3);
    std::ofstream(dir / "bad.pgm", std::ios::binary) << "P2\n2 1\n255\n1 3";
    EXPECT_THROW(read_class_map(dir / "bad.pgm"), FormatError);
}
