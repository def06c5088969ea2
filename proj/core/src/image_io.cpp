#include "intrakd/image_io.hpp"

#include <array>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "intrakd/errors.hpp"

namespace intrakd {

namespace {

constexpr std::array<char, 4> kTensorMagic{'T', 'N', 'S', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
    const std::array<char, 4> b{static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                                static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
    os.write(b.data(), b.size());
}

std::uint32_t get_u32(std::istream& is) {
    std::array<unsigned char, 4> b{};
    if (!is.read(reinterpret_cast<char*>(b.data()), b.size())) throw FormatError("tensor file truncated");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& os, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    std::array<char, 8> b{};
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    os.write(b.data(), b.size());
}

double get_f64(std::istream& is) {
    std::array<unsigned char, 8> b{};
    if (!is.read(reinterpret_cast<char*>(b.data()), b.size())) throw FormatError("tensor file truncated");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

// Reads one whitespace-delimited PNM header token, skipping '#' comments.
std::string pnm_token(std::istream& is) {
    std::string tok;
    int ch;
    while ((ch = is.get()) != EOF) {
        if (ch == '#') {
            while ((ch = is.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    return tok;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    return is;
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
    os.write(kTensorMagic.data(), kTensorMagic.size());
    put_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.dims()) put_u32(os, static_cast<std::uint32_t>(d));
    for (double v : t.data()) put_f64(os, v);
}

Tensor read_tensor(std::istream& is) {
    std::array<char, 4> magic{};
    if (!is.read(magic.data(), magic.size()) || magic != kTensorMagic) throw FormatError("bad tensor magic");
    const auto rank = get_u32(is);
    if (rank == 0 || rank > Tensor::kMaxRank) throw FormatError("bad tensor rank " + std::to_string(rank));
    std::vector<std::size_t> dims(rank);
    std::size_t volume = 1;
    for (auto& d : dims) {
        d = get_u32(is);
        if (d == 0) throw FormatError("zero tensor extent");
        volume *= d;
    }
    std::vector<double> data(volume);
    for (auto& v : data) v = get_f64(is);
    return Tensor(std::move(dims), std::move(data));
}

std::size_t serialized_tensor_size(const Tensor& t) { return 4 + 4 + 4 * t.rank() + 8 * t.size(); }

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
    auto os = open_out(path);
    write_tensor(os, t);
    if (!os) throw IoError("write failed: " + path.string());
}

Tensor load_tensor(const std::filesystem::path& path) {
    auto is = open_in(path);
    try {
        return read_tensor(is);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
    if (image.pixels.size() != image.height * image.width) throw ShapeError("write_pgm: pixel count mismatch");
    auto os = open_out(path);
    os << "P5\n" << image.width << ' ' << image.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
    if (!os) throw IoError("write failed: " + path.string());
}

GrayImage read_pgm(const std::filesystem::path& path) {
    auto is = open_in(path);
    if (pnm_token(is) != "P5") throw FormatError(path.string() + ": not a binary PGM (P5)");
    GrayImage img;
    try {
        img.width = std::stoul(pnm_token(is));
        img.height = std::stoul(pnm_token(is));
        if (std::stoul(pnm_token(is)) != 255) throw FormatError(path.string() + ": maxval must be 255");
    } catch (const std::logic_error&) {
        throw FormatError(path.string() + ": malformed PGM header");
    }
    img.pixels.resize(img.width * img.height);
    if (!is.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()))) {
        throw FormatError(path.string() + ": PGM pixel data truncated");
    }
    return img;
}

void write_class_map(const std::filesystem::path& path, const ClassMap& map) {
    write_pgm(path, GrayImage{map.height(), map.width(), {map.labels().begin(), map.labels().end()}});
}

ClassMap read_class_map(const std::filesystem::path& path) {
    auto img = read_pgm(path);
    return ClassMap(img.height, img.width, std::move(img.pixels));
}

void write_ppm(const std::filesystem::path& path, std::size_t height, std::size_t width,
               std::span<const std::uint8_t> rgb) {
    if (rgb.size() != height * width * 3) throw ShapeError("write_ppm: expected 3 bytes per pixel");
    auto os = open_out(path);
    os << "P6\n" << width << ' ' << height << "\n255\n";
    os.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
    if (!os) throw IoError("write failed: " + path.string());
}

void write_class_map_ppm(const std::filesystem::path& path, const ClassMap& map) {
    static constexpr std::array<std::array<std::uint8_t, 3>, 8> palette{{
        {0, 0, 0}, {230, 25, 75}, {60, 180, 75}, {255, 225, 25},
        {0, 130, 200}, {245, 130, 48}, {145, 30, 180}, {70, 240, 240},
    }};
    std::vector<std::uint8_t> rgb;
    rgb.reserve(map.size() * 3);
    for (auto label : map.labels()) {
        const auto& c = palette[label % palette.size()];
        rgb.insert(rgb.end(), c.begin(), c.end());
    }
    write_ppm(path, map.height(), map.width(), rgb);
}

}  // namespace intrakd
