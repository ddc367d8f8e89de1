#pragma once

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "treew/common.hpp"

namespace treew {

/** The shared support vectors: one embedding matrix used by every measure. */
class PointCloud {
public:
    PointCloud(std::size_t n_points, std::size_t dim, std::vector<double> coords)
        : n_points_(n_points), dim_(dim), coords_(std::move(coords)) {
        if (n_points_ < 1) throw std::invalid_argument("PointCloud: need at least one point");
        if (dim_ < 1) throw std::invalid_argument("PointCloud: need at least one dimension");
        if (coords_.size() != n_points_ * dim_)
            throw std::invalid_argument("PointCloud: coordinate buffer size mismatch");
        for (double c : coords_)
            if (!std::isfinite(c))
                throw std::invalid_argument("PointCloud: non-finite coordinate");
    }

    std::size_t n_points() const { return n_points_; }
    std::size_t dim() const { return dim_; }

    std::span<const double> point(std::size_t i) const {
        return {coords_.data() + i * dim_, dim_};
    }

private:
    std::size_t n_points_;
    std::size_t dim_;
    std::vector<double> coords_;
};

enum class GroundMetric { euclidean, manhattan };

inline GroundMetric parse_metric(const std::string& name) {
    if (name == "euclidean") return GroundMetric::euclidean;
    if (name == "manhattan") return GroundMetric::manhattan;
    throw std::invalid_argument("unknown metric '" + name + "' (expected euclidean|manhattan)");
}

inline const char* metric_name(GroundMetric m) {
    return m == GroundMetric::euclidean ? "euclidean" : "manhattan";
}

inline double ground_distance(GroundMetric metric, std::span<const double> x,
                              std::span<const double> y) {
    if (x.size() != y.size())
        throw std::invalid_argument("ground_distance: dimension mismatch");
    double acc = 0.0;
    if (metric == GroundMetric::euclidean) {
        for (std::size_t d = 0; d < x.size(); ++d) {
            const double t = x[d] - y[d];
            acc += t * t;
        }
        return std::sqrt(acc);
    }
    for (std::size_t d = 0; d < x.size(); ++d) acc += std::abs(x[d] - y[d]);
    return acc;
}

inline double ground_distance(GroundMetric metric, const PointCloud& cloud, std::size_t i,
                              std::size_t j) {
    return ground_distance(metric, cloud.point(i), cloud.point(j));
}

namespace detail {

inline double parse_double(const std::string& token, std::size_t line_no, const char* what) {
    const char* begin = token.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw std::runtime_error("parse error at line " + std::to_string(line_no) + ": bad " +
                                 what + " '" + token + "'");
    if (!std::isfinite(v))
        throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                                 ": non-finite " + what + " '" + token + "'");
    return v;
}

inline long parse_long(const std::string& token, std::size_t line_no, const char* what) {
    const char* begin = token.c_str();
    char* end = nullptr;
    const long v = std::strtol(begin, &end, 10);
    if (end == begin || *end != '\0')
        throw std::runtime_error("parse error at line " + std::to_string(line_no) + ": bad " +
                                 what + " '" + token + "'");
    return v;
}

inline std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream in(line);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    return in;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    return out;
}

}  // namespace detail

/** Reads a vectors file: line 1 is `N d`, then N lines of d decimals. */
inline PointCloud load_point_cloud(std::istream& in, const std::string& origin = "<stream>") {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line))
        throw std::runtime_error("parse error in '" + origin + "': empty file");
    ++line_no;
    auto header = detail::split_ws(line);
    if (header.size() != 2)
        throw std::runtime_error("parse error at line 1: expected header 'N d'");
    const long n = detail::parse_long(header[0], 1, "point count");
    const long d = detail::parse_long(header[1], 1, "dimension");
    if (n < 1 || d < 1)
        throw std::runtime_error("parse error at line 1: N and d must be positive");

    std::vector<double> coords;
    coords.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(d));
    for (long r = 0; r < n; ++r) {
        if (!std::getline(in, line))
            throw std::runtime_error("parse error at line " + std::to_string(line_no + 1) +
                                     ": expected " + std::to_string(n) + " rows, file ended");
        ++line_no;
        auto toks = detail::split_ws(line);
        if (toks.size() != static_cast<std::size_t>(d))
            throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                                     ": expected " + std::to_string(d) + " values, got " +
                                     std::to_string(toks.size()));
        for (const auto& t : toks) coords.push_back(detail::parse_double(t, line_no, "coordinate"));
    }
    while (std::getline(in, line)) {
        ++line_no;
        if (!detail::split_ws(line).empty())
            throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                                     ": trailing content after " + std::to_string(n) + " rows");
    }
    return PointCloud(static_cast<std::size_t>(n), static_cast<std::size_t>(d), std::move(coords));
}

inline PointCloud load_point_cloud(const std::string& path) {
    auto in = detail::open_input(path);
    return load_point_cloud(in, path);
}

inline void save_point_cloud(std::ostream& out, const PointCloud& cloud) {
    out << cloud.n_points() << ' ' << cloud.dim() << '\n';
    for (std::size_t i = 0; i < cloud.n_points(); ++i) {
        auto p = cloud.point(i);
        for (std::size_t d = 0; d < p.size(); ++d) {
            if (d) out << ' ';
            out << fmt_g17(p[d]);
        }
        out << '\n';
    }
}

inline void save_point_cloud(const std::string& path, const PointCloud& cloud) {
    auto out = detail::open_output(path);
    save_point_cloud(out, cloud);
}

}  // namespace treew
