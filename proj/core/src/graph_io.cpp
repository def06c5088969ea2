#include "intrakd/graph_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "intrakd/errors.hpp"
#include "intrakd/image_io.hpp"

namespace intrakd {

namespace {

constexpr const char* kGraphFormat = "intrakd-affinity-graph";

}  // namespace

std::string export_graph_json(const AffinityGraph& graph, int indent) {
    const std::size_t n = graph.n, c = graph.nodes.c;
    nlohmann::json doc;
    doc["format"] = kGraphFormat;
    doc["version"] = 1;
    doc["n"] = n;
    doc["channels"] = c;
    doc["present"] = std::vector<bool>(graph.nodes.present.begin(), graph.nodes.present.end());
    doc["edges"] = std::vector<double>(graph.edges.data().begin(), graph.edges.data().end());
    nlohmann::json nodes = nlohmann::json::object();
    for (std::size_t r = 0; r < kMomentOrders; ++r) {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t k = 0; k < n; ++k) {
            const double* row = graph.nodes.mu[r].raw() + k * c;
            rows.push_back(std::vector<double>(row, row + c));
        }
        nodes["mu" + std::to_string(r + 1)] = std::move(rows);
    }
    doc["nodes"] = std::move(nodes);
    return doc.dump(indent);
}

AffinityGraph import_graph_json(const std::string& document) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(document);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("graph JSON: ") + e.what());
    }
    try {
        if (doc.at("format").get<std::string>() != kGraphFormat) throw ParseError("graph JSON: unexpected format tag");
        const auto n = doc.at("n").get<std::size_t>();
        const auto c = doc.at("channels").get<std::size_t>();
        if (n == 0 || c == 0) throw ParseError("graph JSON: n and channels must be positive");
        const auto present = doc.at("present").get<std::vector<bool>>();
        auto edges = doc.at("edges").get<std::vector<double>>();
        if (present.size() != n) throw ParseError("graph JSON: present has wrong length");
        if (edges.size() != affinity_target_size(n)) throw ParseError("graph JSON: expected 3*n*n edge values");

        AffinityGraph g;
        g.n = n;
        g.edges = Tensor({n, n, kMomentOrders}, std::move(edges));
        g.nodes.n = n;
        g.nodes.c = c;
        g.nodes.present = present;
        const auto& nodes = doc.at("nodes");
        for (std::size_t r = 0; r < kMomentOrders; ++r) {
            const auto rows = nodes.at("mu" + std::to_string(r + 1)).get<std::vector<std::vector<double>>>();
            if (rows.size() != n) throw ParseError("graph JSON: node moment table has wrong row count");
            std::vector<double> flat;
            flat.reserve(n * c);
            for (const auto& row : rows) {
                if (row.size() != c) throw ParseError("graph JSON: node moment vector has wrong length");
                flat.insert(flat.end(), row.begin(), row.end());
            }
            g.nodes.mu[r] = Tensor({n, c}, std::move(flat));
        }
        return g;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("graph JSON: ") + e.what());
    }
}

void save_graph_json(const std::filesystem::path& path, const AffinityGraph& graph) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << export_graph_json(graph, 1) << '\n';
}

AffinityGraph load_graph_json(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    std::ostringstream buf;
    buf << is.rdbuf();
    return import_graph_json(buf.str());
}

void export_graph_heatmaps(const AffinityGraph& graph, const std::filesystem::path& dir, const std::string& prefix) {
    const std::size_t n = graph.n;
    for (std::size_t r = 0; r < kMomentOrders; ++r) {
        GrayImage img{n, n, std::vector<std::uint8_t>(n * n)};
        for (std::size_t k1 = 0; k1 < n; ++k1) {
            for (std::size_t k2 = 0; k2 < n; ++k2) {
                const double e = std::clamp(graph.edges.at(k1, k2, r), -1.0, 1.0);
                img.pixels[k1 * n + k2] = static_cast<std::uint8_t>(std::lround((e + 1.0) * 127.5));
            }
        }
        write_pgm(dir / (prefix + "_mu" + std::to_string(r + 1) + ".pgm"), img);
    }
}

}  // namespace intrakd
