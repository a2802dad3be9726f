// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0
//
// Binary parameter checkpoints.
//
//   magic    5 bytes  "CORA1"
//   version  u32      currently 1
//   count    u32      number of records
//   record:
//     name_len u32, name bytes (UTF-8, no terminator)
//     rank     u32, extents u64 x rank
//     payload  f64 x prod(extents)
//
// All integers and doubles are little-endian.

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cora/error.hpp"
#include "cora/numerics/params.hpp"
#include "cora/numerics/tensor.hpp"

namespace cora::checkpoint {

inline constexpr std::array<char, 5> kMagic{'C', 'O', 'R', 'A', '1'};
inline constexpr std::uint32_t kVersion = 1;

struct Record {
    std::string name;
    Tensor tensor;
};

namespace detail {

template <class T>
void put_le(std::ostream& os, T value) {
    static_assert(std::is_integral_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        os.put(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
    }
}

template <class T>
T get_le(std::istream& is) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        const int c = is.get();
        if (c == std::char_traits<char>::eof()) {
            throw IoError("checkpoint: truncated input");
        }
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return static_cast<T>(v);
}

} // namespace detail

inline void write(std::ostream& os, const std::vector<Record>& records) {
    os.write(kMagic.data(), kMagic.size());
    detail::put_le<std::uint32_t>(os, kVersion);
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(records.size()));
    for (const Record& r : records) {
        detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(r.name.size()));
        os.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
        detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(r.tensor.rank()));
        for (std::size_t e : r.tensor.shape()) {
            detail::put_le<std::uint64_t>(os, e);
        }
        for (double v : r.tensor.values()) {
            detail::put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
        }
    }
    if (!os) {
        throw IoError("checkpoint: write failed");
    }
}

inline std::vector<Record> read(std::istream& is) {
    std::array<char, 5> magic{};
    is.read(magic.data(), magic.size());
    if (!is || magic != kMagic) {
        throw IoError("checkpoint: bad magic");
    }
    const auto version = detail::get_le<std::uint32_t>(is);
    if (version != kVersion) {
        throw IoError("checkpoint: unsupported version " + std::to_string(version));
    }
    const auto count = detail::get_le<std::uint32_t>(is);
    std::vector<Record> records;
    records.reserve(count);
    for (std::uint32_t k = 0; k < count; ++k) {
        Record r;
        const auto len = detail::get_le<std::uint32_t>(is);
        r.name.resize(len);
        is.read(r.name.data(), len);
        const auto rank = detail::get_le<std::uint32_t>(is);
        Shape shape(rank);
        for (auto& e : shape) {
            e = static_cast<std::size_t>(detail::get_le<std::uint64_t>(is));
        }
        std::vector<double> values(shape_size(shape));
        for (double& v : values) {
            v = std::bit_cast<double>(detail::get_le<std::uint64_t>(is));
        }
        r.tensor = Tensor(std::move(shape), std::move(values));
        records.push_back(std::move(r));
    }
    return records;
}

inline std::vector<Record> records_of(const ParameterSet& params) {
    std::vector<Record> out;
    out.reserve(params.size());
    for (const NamedParam& p : params) {
        out.push_back({p.name, p.var.value()});
    }
    return out;
}

inline void save(const std::string& path, const ParameterSet& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw IoError("checkpoint: cannot open '" + path + "' for writing");
    }
    write(os, records_of(params));
}

/// Loads values into an existing parameter set; names and shapes must match.
inline void load_into(const std::vector<Record>& records, ParameterSet& params) {
    if (records.size() != params.size()) {
        throw IoError("checkpoint: " + std::to_string(records.size()) + " records for " +
                      std::to_string(params.size()) + " parameters");
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
        const NamedParam& p = params[i];
        if (records[i].name != p.name) {
            throw IoError("checkpoint: expected '" + p.name + "', found '" + records[i].name + "'");
        }
        if (records[i].tensor.shape() != p.var.shape()) {
            throw IoError("checkpoint: shape mismatch for '" + p.name + "'");
        }
        Var v = p.var;
        v.mutable_value() = records[i].tensor;
    }
}

inline std::vector<Record> load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("checkpoint: cannot open '" + path + "'");
    }
    return read(is);
}

inline void load_into(const std::string& path, ParameterSet& params) { load_into(load(path), params); }

} // namespace cora::checkpoint
