// SPDX-License-Identifier: MIT
/**
 * Snapshot serialisation.
 *
 * CSV: header `position,type,transform_time,transform_position`, one row per
 * retained particle, numbers with 17 significant digits, `nan` for the
 * transform columns of type-1 particles.
 *
 * Binary (all little-endian):
 *   16 bytes  magic "RBBM-SNAPSHOT-01"
 *   f64       horizon
 *   u64       n, the number of records
 *   f64 x n   positions
 *   f64 x n   types (1.0 or 2.0)
 *   f64 x n   transform times (NaN for type 1)
 *   f64 x n   transform positions (NaN for type 1)
 */
#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "bbm_engine.hpp"
#include "errors.hpp"

namespace rbbm {

inline constexpr std::array<char, 16> kSnapshotMagic = {'R', 'B', 'B', 'M', '-', 'S', 'N', 'A',
                                                        'P', 'S', 'H', 'O', 'T', '-', '0', '1'};

/// Shortest text that round-trips a double (17 significant digits).
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void write_snapshot_csv(std::ostream& os, const Snapshot& s) {
    os << "position,type,transform_time,transform_position\n";
    for (std::size_t i = 0; i < s.size(); ++i)
        os << format_double(s.position[i]) << ',' << int(s.type[i]) << ','
           << format_double(s.transform_time[i]) << ',' << format_double(s.transform_pos[i])
           << '\n';
}

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw RuntimeError("truncated snapshot file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
}

inline void put_f64(std::ostream& os, double x) { put_u64(os, std::bit_cast<std::uint64_t>(x)); }
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

} // namespace detail

inline void write_snapshot_binary(std::ostream& os, const Snapshot& s) {
    os.write(kSnapshotMagic.data(), kSnapshotMagic.size());
    detail::put_f64(os, s.horizon);
    detail::put_u64(os, s.size());
    for (double x : s.position) detail::put_f64(os, x);
    for (auto t : s.type) detail::put_f64(os, double(t));
    for (double x : s.transform_time) detail::put_f64(os, x);
    for (double x : s.transform_pos) detail::put_f64(os, x);
    if (!os) throw RuntimeError("failed writing snapshot");
}

/// Reads the particle records back; counters other than the per-type
/// counts and the maximum are not part of the format.
inline Snapshot read_snapshot_binary(std::istream& is) {
    std::array<char, 16> magic{};
    if (!is.read(magic.data(), magic.size()) || magic != kSnapshotMagic)
        throw ValidationError("not a snapshot file (bad magic)");
    Snapshot s;
    s.horizon = detail::get_f64(is);
    const std::uint64_t n = detail::get_u64(is);
    s.position.resize(n);
    s.type.resize(n);
    s.transform_time.resize(n);
    s.transform_pos.resize(n);
    for (auto& x : s.position) x = detail::get_f64(is);
    for (auto& t : s.type) {
        const double v = detail::get_f64(is);
        require(v == 1.0 || v == 2.0, "snapshot type column must hold 1 or 2");
        t = static_cast<std::uint8_t>(v);
    }
    for (auto& x : s.transform_time) x = detail::get_f64(is);
    for (auto& x : s.transform_pos) x = detail::get_f64(is);
    for (std::size_t i = 0; i < n; ++i) {
        (s.type[i] == 1 ? s.count1 : s.count2) += 1;
        s.max = std::max(s.max, s.position[i]);
    }
    return s;
}

} // namespace rbbm
