#pragma once

#include "fkl/random.hpp"
#include "fkl/types.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fkl {

/// Input could not be read at all (missing file, unreadable path).
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Input was read but its content is malformed; the message carries the
/// offending line number.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Dataset {
    Matrix<double> inputs;
    Vector<double> targets;

    Index rows() const { return inputs.rows(); }
    Index input_dim() const { return inputs.cols(); }
};

namespace detail {

inline double parse_double(std::string_view token, std::size_t line_number,
                           const char* what) {
    double value = 0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last)
        throw ParseError("line " + std::to_string(line_number) + ": bad " + what + " '" +
                         std::string(token) + "'");
    return value;
}

inline long parse_index(std::string_view token, std::size_t line_number) {
    long value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || ptr != token.data() + token.size())
        throw ParseError("line " + std::to_string(line_number) + ": bad feature index '" +
                         std::string(token) + "'");
    return value;
}

struct SparseRow {
    double target = 0;
    std::vector<std::pair<long, double>> entries;  // 1-based indices
};

}  // namespace detail

/// Parse the sparse text format: one sample per line,
///   target index:value index:value ...
/// with 1-based feature indices.  Blank lines and lines starting with '#'
/// are skipped.  The input dimension is the largest index seen, or
/// dim_override when positive (indices beyond the override are an error).
/// Duplicate indices within a line are rejected rather than resolved.
inline Dataset parse_dataset(const std::string& path, Index dim_override = 0) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset '" + path + "'");

    std::vector<detail::SparseRow> rows;
    Index max_index = 0;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        std::istringstream tokens(line);
        std::string token;
        if (!(tokens >> token) || token[0] == '#') continue;

        detail::SparseRow row;
        row.target = detail::parse_double(token, line_number, "target");
        while (tokens >> token) {
            const auto colon = token.find(':');
            if (colon == std::string::npos || colon == 0 || colon + 1 == token.size())
                throw ParseError("line " + std::to_string(line_number) +
                                 ": expected index:value, got '" + token + "'");
            const long idx = detail::parse_index(
                std::string_view(token).substr(0, colon), line_number);
            const double value = detail::parse_double(
                std::string_view(token).substr(colon + 1), line_number, "feature value");
            if (idx < 1)
                throw ParseError("line " + std::to_string(line_number) +
                                 ": feature indices are 1-based, got " + std::to_string(idx));
            if (dim_override > 0 && idx > dim_override)
                throw ParseError("line " + std::to_string(line_number) + ": index " +
                                 std::to_string(idx) + " exceeds the declared dimension " +
                                 std::to_string(dim_override));
            for (const auto& e : row.entries)
                if (e.first == idx)
                    throw ParseError("line " + std::to_string(line_number) +
                                     ": duplicate feature index " + std::to_string(idx));
            row.entries.emplace_back(idx, value);
            max_index = std::max<Index>(max_index, idx);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("dataset '" + path + "' has no samples");

    const Index dim = dim_override > 0 ? dim_override : std::max<Index>(max_index, 1);
    Dataset ds;
    ds.inputs = Matrix<double>::Zero(static_cast<Index>(rows.size()), dim);
    ds.targets.resize(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        ds.targets[static_cast<Index>(i)] = rows[i].target;
        for (const auto& [idx, value] : rows[i].entries)
            ds.inputs(static_cast<Index>(i), idx - 1) = value;
    }
    return ds;
}

/// Write the sparse text format with every entry explicit (including
/// zeros), using shortest round-trip decimal, so parse(write(ds))
/// reproduces the dataset bit for bit and without a dimension override.
inline void write_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write dataset '" + path + "'");
    char buf[64];
    auto format = [&buf](double v) {
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
        if (ec != std::errc{}) throw std::runtime_error("write_dataset: format failure");
        return std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    };
    for (Index i = 0; i < ds.rows(); ++i) {
        out << format(ds.targets[i]);
        for (Index j = 0; j < ds.input_dim(); ++j)
            out << ' ' << (j + 1) << ':' << format(ds.inputs(i, j));
        out << '\n';
    }
    if (!out) throw IoError("failed writing dataset '" + path + "'");
}

/// Deterministic shuffled split.  The validation side receives
/// round(fraction * rows), clamped so both sides stay non-empty.  Rows are
/// permuted by a Fisher-Yates pass driven by the explicit engine draws, so
/// the split is identical across platforms for a given seed.
inline std::pair<Dataset, Dataset> split_train_validation(const Dataset& ds, double fraction,
                                                          std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw std::invalid_argument("split_train_validation: fraction must be in (0, 1)");
    const Index n = ds.rows();
    if (n < 2)
        throw std::invalid_argument("split_train_validation: need at least two samples");

    Index n_val = static_cast<Index>(std::llround(fraction * static_cast<double>(n)));
    n_val = std::clamp<Index>(n_val, 1, n - 1);

    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::mt19937_64 engine(seed);
    for (Index i = n - 1; i > 0; --i) {
        const auto j = static_cast<Index>(
            uniform_below(engine, static_cast<std::uint64_t>(i) + 1));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }

    auto take = [&](Index begin, Index count) {
        Dataset part;
        part.inputs.resize(count, ds.input_dim());
        part.targets.resize(count);
        for (Index i = 0; i < count; ++i) {
            const Index src = order[static_cast<std::size_t>(begin + i)];
            part.inputs.row(i) = ds.inputs.row(src);
            part.targets[i] = ds.targets[src];
        }
        return part;
    };
    const Index n_train = n - n_val;
    return {take(0, n_train), take(n_train, n_val)};
}

}  // namespace fkl
