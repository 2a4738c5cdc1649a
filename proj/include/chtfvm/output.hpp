#pragma once

/// Output writers: legacy VTK structured-points snapshots (ASCII), CSV
/// profiles/probes with shortest-round-trip float formatting, and the
/// machine-readable run manifest with per-file checksums.

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "chtfvm/common.hpp"
#include "chtfvm/grid.hpp"

namespace cht {

namespace fs = std::filesystem;

/// Named cell-centered arrays on one block, written as one VTK dataset.
struct VtkSnapshot {
    const GridBlock* block = nullptr;
    std::vector<std::pair<std::string, const Field*>> scalars;
    // optional vector field (u, v)
    const Field* vec_u = nullptr;
    const Field* vec_v = nullptr;
    std::string vec_name = "velocity";
};

inline std::string vtk_to_string(const std::string& title, const VtkSnapshot& s) {
    const GridBlock& b = *s.block;
    std::ostringstream os;
    os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\n";
    os << "DATASET STRUCTURED_POINTS\n";
    os << "DIMENSIONS " << b.nx + 1 << " " << b.ny + 1 << " 1\n";
    os << "ORIGIN " << format_double(b.x0) << " " << format_double(b.y0) << " 0\n";
    os << "SPACING " << format_double(b.dx) << " " << format_double(b.dy) << " 1\n";
    os << "CELL_DATA " << b.cells() << "\n";
    for (const auto& [name, f] : s.scalars) {
        os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
        for (double v : *f) os << format_double(v) << "\n";
    }
    if (s.vec_u && s.vec_v) {
        os << "VECTORS " << s.vec_name << " double\n";
        for (int c = 0; c < b.cells(); ++c)
            os << format_double((*s.vec_u)[c]) << " " << format_double((*s.vec_v)[c]) << " 0\n";
    }
    return os.str();
}

/// Minimal parser for the files written above (used by the compare command).
struct VtkData {
    int nx = 0, ny = 0;
    std::map<std::string, Field> arrays;  ///< vectors stored as name.x / name.y
};

inline VtkData vtk_from_string(const std::string& text) {
    std::istringstream is(text);
    VtkData d;
    std::string line;
    int ncells = 0;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "DIMENSIONS") {
            int px, py;
            ls >> px >> py;
            d.nx = px - 1;
            d.ny = py - 1;
        } else if (word == "CELL_DATA") {
            ls >> ncells;
        } else if (word == "SCALARS") {
            std::string name;
            ls >> name;
            std::getline(is, line);  // LOOKUP_TABLE
            Field f(ncells);
            for (int i = 0; i < ncells; ++i) is >> f[i];
            std::getline(is, line);
            d.arrays[name] = std::move(f);
        } else if (word == "VECTORS") {
            std::string name;
            ls >> name;
            Field fx(ncells), fy(ncells);
            double z;
            for (int i = 0; i < ncells; ++i) is >> fx[i] >> fy[i] >> z;
            std::getline(is, line);
            d.arrays[name + ".x"] = std::move(fx);
            d.arrays[name + ".y"] = std::move(fy);
        }
    }
    return d;
}

/// CSV with a comment header naming the columns; floats are written with
/// shortest-round-trip formatting so identical runs are byte-identical.
inline std::string csv_to_string(const std::vector<std::string>& columns,
                                 const std::vector<Field>& data,
                                 const std::string& provenance = "") {
    std::ostringstream os;
    if (!provenance.empty()) os << "# " << provenance << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i)
        os << columns[i] << (i + 1 < columns.size() ? "," : "\n");
    if (data.empty()) return os.str();
    for (std::size_t r = 0; r < data[0].size(); ++r)
        for (std::size_t i = 0; i < data.size(); ++i)
            os << format_double(data[i][r]) << (i + 1 < data.size() ? "," : "\n");
    return os.str();
}

struct CsvData {
    std::vector<std::string> columns;
    std::vector<Field> data;
};

inline CsvData csv_from_string(const std::string& text) {
    CsvData d;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string cell;
        if (d.columns.empty()) {
            while (std::getline(ls, cell, ',')) d.columns.push_back(cell);
            d.data.resize(d.columns.size());
            continue;
        }
        std::size_t i = 0;
        while (std::getline(ls, cell, ',') && i < d.data.size()) d.data[i++].push_back(std::stod(cell));
    }
    return d;
}

/// Collects output files for one run, then writes them together with a
/// manifest that lists every file with a content checksum.
class RunWriter {
  public:
    explicit RunWriter(fs::path dir) : dir_(std::move(dir)) {}

    void add_file(const std::string& name, std::string content) {
        files_.emplace_back(name, std::move(content));
    }

    const fs::path& dir() const { return dir_; }

    /// Writes all files plus manifest.json; returns the manifest.
    nlohmann::json write(nlohmann::json manifest_extra) {
        fs::create_directories(dir_);
        nlohmann::json inventory = nlohmann::json::array();
        for (const auto& [name, content] : files_) {
            std::ofstream os(dir_ / name, std::ios::binary);
            if (!os) throw std::runtime_error("cannot write " + (dir_ / name).string());
            os << content;
            inventory.push_back({{"name", name}, {"fnv1a64", fnv1a(content)}});
        }
        nlohmann::json m = std::move(manifest_extra);
        m["files"] = inventory;
        std::ofstream os(dir_ / "manifest.json", std::ios::binary);
        os << m.dump(2) << "\n";
        return m;
    }

  private:
    fs::path dir_;
    std::vector<std::pair<std::string, std::string>> files_;
};

inline std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

}  // namespace cht
