#include "rtplan/sparse_io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <vector>

namespace rtplan {

std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

void write_sparse(std::ostream& os, const SpMat& A) {
    os << A.rows() << " " << A.cols() << " " << A.nonZeros() << "\n";
    for (int k = 0; k < A.outerSize(); ++k)
        for (SpMat::InnerIterator it(A, k); it; ++it)
            os << it.row() << " " << it.col() << " " << format_double(it.value()) << "\n";
}

SpMat read_sparse(std::istream& is) {
    long rows = -1, cols = -1, nnz = -1;
    if (!(is >> rows >> cols >> nnz) || rows < 0 || cols < 0 || nnz < 0)
        throw ConfigError("sparse matrix header must be 'rows cols nnz'");
    std::vector<Triplet> trips;
    trips.reserve(nnz);
    for (long k = 0; k < nnz; ++k) {
        long i, j;
        double v;
        if (!(is >> i >> j >> v))
            throw ConfigError("sparse matrix truncated at entry " + std::to_string(k));
        if (i < 0 || i >= rows || j < 0 || j >= cols)
            throw ConfigError("sparse matrix index out of range at entry " +
                              std::to_string(k));
        trips.emplace_back(static_cast<int>(i), static_cast<int>(j), v);
    }
    SpMat A(rows, cols);
    A.setFromTriplets(trips.begin(), trips.end());
    A.makeCompressed();
    return A;
}

void write_sparse_file(const std::string& path, const SpMat& A) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write '" + path + "'");
    write_sparse(os, A);
}

SpMat read_sparse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read '" + path + "'");
    try {
        return read_sparse(is);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

std::string surface_to_csv(const ValueSurface& surface) {
    std::ostringstream os;
    for (int m = 0; m < surface.modalities; ++m) os << "N" << m + 1 << ",";
    os << "V\n";
    for (const auto& s : surface.samples) {
        for (int m = 0; m < surface.modalities; ++m) os << s.N[m] << ",";
        os << format_double(s.value) << "\n";
    }
    return os.str();
}

ValueSurface surface_from_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("empty value-surface CSV");
    int cols = 1;
    for (char c : line)
        if (c == ',') ++cols;
    ValueSurface surf;
    surf.modalities = cols - 1;
    if (surf.modalities < 1) throw ConfigError("value-surface CSV needs N columns");
    int max_total = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        ValueSurface::Sample s;
        s.N.resize(surf.modalities);
        std::string cell;
        for (int m = 0; m < surf.modalities; ++m) {
            if (!std::getline(ls, cell, ',')) throw ConfigError("short value-surface row");
            s.N[m] = std::stoi(cell);
        }
        if (!std::getline(ls, cell)) throw ConfigError("value-surface row missing V");
        s.value = cell == "inf" ? std::numeric_limits<double>::infinity() : std::stod(cell);
        max_total = std::max(max_total, s.N.sum());
        surf.samples.push_back(std::move(s));
    }
    surf.N_max = max_total;
    return surf;
}

void write_phantom_labels(std::ostream& os, const Phantom& phantom) {
    std::map<std::string, int> ids;
    int next = 1;
    os << "# 0 none\n";
    for (const auto& [name, mask] : phantom.masks) {
        ids[name] = next;
        os << "# " << next << " " << name << "\n";
        ++next;
    }
    std::vector<int> grid(phantom.grid_size(), 0);
    for (const auto& [name, mask] : phantom.masks)
        for (int v : mask) grid[v] = ids[name];
    for (int r = 0; r < phantom.rows; ++r) {
        for (int c = 0; c < phantom.cols; ++c)
            os << (c ? "," : "") << grid[r * phantom.cols + c];
        os << "\n";
    }
}

void write_kv(std::ostream& os, const std::map<std::string, std::string>& kv) {
    for (const auto& [k, v] : kv) os << k << " = " << v << "\n";
}

std::map<std::string, std::string> read_kv(std::istream& is) {
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

}  // namespace rtplan
