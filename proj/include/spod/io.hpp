#pragma once

// Matrix, path and trace files.
//   CSV: one line per row (space), comma separated, 17 significant digits.
//   Binary: "SPOD", u32 rows, u32 cols (little endian), then row-major doubles.

#include "spod/optimize.hpp"
#include "spod/types.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace spod::io {

static_assert(std::endian::native == std::endian::little,
              "binary matrix format assumes a little-endian host");

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p, bool binary = false) {
    std::ofstream out(p, binary ? std::ios::binary : std::ios::out);
    if (!out)
        throw DataError("cannot write " + p.string());
    out.exceptions(std::ios::badbit);
    return out;
}

inline std::ifstream open_in(const std::filesystem::path& p, bool binary = false) {
    std::ifstream in(p, binary ? std::ios::binary : std::ios::in);
    if (!in)
        throw DataError("cannot read " + p.string());
    return in;
}

inline double parse_double(const std::string& s, const std::filesystem::path& p,
                           Index line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        while (used < s.size() && std::isspace(static_cast<unsigned char>(s[used])))
            ++used;
        if (used != s.size())
            throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError(p.string() + ":" + std::to_string(line) + ": bad number '" + s + "'");
    }
}

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, sep))
        cells.push_back(cell);
    if (!line.empty() && line.back() == sep)
        cells.emplace_back();
    return cells;
}

}  // namespace detail

inline void write_csv(const std::filesystem::path& p, const Matrix& a) {
    auto out = detail::open_out(p);
    out << std::setprecision(17);
    for (Index i = 0; i < a.rows(); ++i) {
        for (Index j = 0; j < a.cols(); ++j) {
            if (j)
                out << ',';
            out << a(i, j);
        }
        out << '\n';
    }
}

inline Matrix read_csv(const std::filesystem::path& p) {
    auto in = detail::open_in(p);
    std::vector<std::vector<double>> rows;
    std::string line;
    Index lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        std::vector<double> row;
        for (const auto& cell : detail::split(line))
            row.push_back(detail::parse_double(cell, p, lineno));
        if (!rows.empty() && row.size() != rows.front().size())
            throw DataError(p.string() + ":" + std::to_string(lineno) +
                            ": ragged row (" + std::to_string(row.size()) + " values, expected " +
                            std::to_string(rows.front().size()) + ")");
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw DataError(p.string() + ": empty matrix file");
    Matrix a(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j)
            a(i, j) = rows[i][j];
    return a;
}

inline void write_binary(const std::filesystem::path& p, const Matrix& a) {
    if (a.rows() > std::numeric_limits<std::uint32_t>::max() ||
        a.cols() > std::numeric_limits<std::uint32_t>::max())
        throw DataError("matrix too large for the binary format");
    auto out = detail::open_out(p, true);
    const std::uint32_t dims[2] = {static_cast<std::uint32_t>(a.rows()),
                                   static_cast<std::uint32_t>(a.cols())};
    out.write("SPOD", 4);
    out.write(reinterpret_cast<const char*>(dims), sizeof dims);
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = a;
    out.write(reinterpret_cast<const char*>(rm.data()),
              static_cast<std::streamsize>(sizeof(double) * rm.size()));
}

inline Matrix read_binary(const std::filesystem::path& p) {
    auto in = detail::open_in(p, true);
    char magic[4];
    std::uint32_t dims[2];
    if (!in.read(magic, 4) || std::memcmp(magic, "SPOD", 4) != 0)
        throw DataError(p.string() + ": not a binary matrix file");
    if (!in.read(reinterpret_cast<char*>(dims), sizeof dims))
        throw DataError(p.string() + ": truncated header");
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(dims[0], dims[1]);
    if (!in.read(reinterpret_cast<char*>(rm.data()),
                 static_cast<std::streamsize>(sizeof(double) * rm.size())))
        throw DataError(p.string() + ": truncated data");
    return rm;
}

/// Format chosen by extension: ".bin" binary, anything else CSV.
inline bool is_binary(const std::filesystem::path& p) { return p.extension() == ".bin"; }

inline void write_matrix(const std::filesystem::path& p, const Matrix& a) {
    is_binary(p) ? write_binary(p, a) : write_csv(p, a);
}

inline Matrix read_matrix(const std::filesystem::path& p) {
    return is_binary(p) ? read_binary(p) : read_csv(p);
}

/// Paths as CSV: header of labels, then one line per time step.
inline void write_paths(const std::filesystem::path& p, const std::vector<FramePath>& paths) {
    if (paths.empty())
        throw DataError("no paths to write");
    auto out = detail::open_out(p);
    out << std::setprecision(17);
    for (std::size_t k = 0; k < paths.size(); ++k) {
        const std::string label = paths[k].label.empty() ? "frame" + std::to_string(k) : paths[k].label;
        if (label.find(',') != std::string::npos)
            throw DataError("path label contains a comma: " + label);
        out << (k ? "," : "") << label;
    }
    out << '\n';
    for (Index j = 0; j < paths.front().size(); ++j) {
        for (std::size_t k = 0; k < paths.size(); ++k)
            out << (k ? "," : "") << paths[k].shifts[j];
        out << '\n';
    }
}

inline std::vector<FramePath> read_paths(const std::filesystem::path& p) {
    auto in = detail::open_in(p);
    std::string header;
    if (!std::getline(in, header))
        throw DataError(p.string() + ": empty path file");
    if (!header.empty() && header.back() == '\r')
        header.pop_back();
    std::vector<FramePath> paths;
    for (const auto& label : detail::split(header))
        paths.push_back(FramePath{Vector(), label});
    std::vector<std::vector<double>> cols(paths.size());
    std::string line;
    Index lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        const auto cells = detail::split(line);
        if (cells.size() != paths.size())
            throw DataError(p.string() + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(paths.size()) + " shifts");
        for (std::size_t k = 0; k < cells.size(); ++k)
            cols[k].push_back(detail::parse_double(cells[k], p, lineno));
    }
    for (std::size_t k = 0; k < paths.size(); ++k)
        paths[k].shifts = Eigen::Map<const Vector>(cols[k].data(), static_cast<Index>(cols[k].size()));
    return paths;
}

inline std::string trace_line(const TraceRecord& r) {
    std::ostringstream s;
    s << std::setprecision(17) << "{\"iteration\":" << r.iteration
      << ",\"objective\":" << r.objective << ",\"rel_error\":" << r.rel_error
      << ",\"grad_norm\":" << r.grad_norm
      << ",\"constraint_violation\":" << r.constraint_violation
      << ",\"svd_count\":" << r.svd_count << ",\"wall_time\":" << r.wall_time
      << ",\"stage\":" << r.stage << "}";
    return s.str();
}

/// One JSON object per line.
inline void write_trace(const std::filesystem::path& p, const ConvergenceTrace& t) {
    auto out = detail::open_out(p);
    for (const auto& r : t.records)
        out << trace_line(r) << '\n';
}

}  // namespace spod::io
