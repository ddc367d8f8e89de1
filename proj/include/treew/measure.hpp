#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "treew/point_cloud.hpp"

namespace treew {

/** A discrete probability measure over PointCloud indices.
 *
 *  Entries are validated on construction: indices unique and in range,
 *  masses strictly positive, total mass within 1e-6 of one. The masses are
 *  then renormalized so that they sum to exactly 1.0.
 */
class Measure {
public:
    struct Entry {
        std::int32_t index;
        double mass;
        bool operator==(const Entry&) const = default;
    };

    static constexpr double kSumTolerance = 1e-6;

    Measure(std::vector<Entry> entries, std::size_t n_points) : entries_(std::move(entries)) {
        if (entries_.empty()) throw std::invalid_argument("Measure: no entries");
        std::unordered_set<std::int32_t> seen;
        double sum = 0.0;
        for (const auto& e : entries_) {
            if (e.index < 0 || static_cast<std::size_t>(e.index) >= n_points)
                throw std::invalid_argument("Measure: point index " + std::to_string(e.index) +
                                            " out of range [0," + std::to_string(n_points) + ")");
            if (!seen.insert(e.index).second)
                throw std::invalid_argument("Measure: duplicate point index " +
                                            std::to_string(e.index));
            if (!(e.mass > 0.0) || !std::isfinite(e.mass))
                throw std::invalid_argument("Measure: mass must be strictly positive, got " +
                                            fmt_g17(e.mass));
            sum += e.mass;
        }
        if (std::abs(sum - 1.0) > kSumTolerance)
            throw std::invalid_argument("Measure: masses sum to " + fmt_g17(sum) +
                                        ", more than 1e-6 away from 1");
        for (auto& e : entries_) e.mass /= sum;
        // Nudge the largest entry so the renormalized total is exactly 1.0.
        double total = 0.0;
        for (const auto& e : entries_) total += e.mass;
        auto largest = std::max_element(
            entries_.begin(), entries_.end(),
            [](const Entry& a, const Entry& b) { return a.mass < b.mass; });
        largest->mass += 1.0 - total;
    }

    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t support_size() const { return entries_.size(); }

    bool operator==(const Measure&) const = default;

private:
    std::vector<Entry> entries_;
};

/** Reads a measures file: one measure per line, `k idx:mass ...` with k pairs. */
inline std::vector<Measure> load_measures(std::istream& in, const PointCloud& cloud,
                                          const std::string& origin = "<stream>") {
    std::vector<Measure> measures;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto toks = detail::split_ws(line);
        if (toks.empty()) continue;
        const long k = detail::parse_long(toks[0], line_no, "entry count");
        if (k < 1)
            throw std::runtime_error("load error at line " + std::to_string(line_no) +
                                     ": entry count must be positive");
        if (toks.size() != static_cast<std::size_t>(k) + 1)
            throw std::runtime_error("load error at line " + std::to_string(line_no) +
                                     ": expected " + std::to_string(k) + " idx:mass pairs, got " +
                                     std::to_string(toks.size() - 1));
        std::vector<Measure::Entry> entries;
        entries.reserve(static_cast<std::size_t>(k));
        for (long e = 0; e < k; ++e) {
            const std::string& tok = toks[static_cast<std::size_t>(e) + 1];
            const auto colon = tok.find(':');
            if (colon == std::string::npos)
                throw std::runtime_error("load error at line " + std::to_string(line_no) +
                                         ": expected idx:mass, got '" + tok + "'");
            const long idx = detail::parse_long(tok.substr(0, colon), line_no, "point index");
            const double mass = detail::parse_double(tok.substr(colon + 1), line_no, "mass");
            entries.push_back({static_cast<std::int32_t>(idx), mass});
        }
        try {
            measures.emplace_back(std::move(entries), cloud.n_points());
        } catch (const std::invalid_argument& err) {
            throw std::runtime_error("load error at line " + std::to_string(line_no) + " of '" +
                                     origin + "': " + err.what());
        }
    }
    if (measures.empty())
        throw std::runtime_error("load error in '" + origin + "': no measures found");
    return measures;
}

inline std::vector<Measure> load_measures(const std::string& path, const PointCloud& cloud) {
    auto in = detail::open_input(path);
    return load_measures(in, cloud, path);
}

inline void save_measures(std::ostream& out, const std::vector<Measure>& measures) {
    for (const auto& m : measures) {
        out << m.entries().size();
        for (const auto& e : m.entries()) out << ' ' << e.index << ':' << fmt_g17(e.mass);
        out << '\n';
    }
}

inline void save_measures(const std::string& path, const std::vector<Measure>& measures) {
    auto out = detail::open_output(path);
    save_measures(out, measures);
}

}  // namespace treew
