#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "pqscan/codebook.hpp"
#include "pqscan/errors.hpp"
#include "pqscan/index.hpp"
#include "pqscan/layout.hpp"
#include "pqscan/pqspec.hpp"

// All containers are little-endian.
//   QADC: codebook (spec + per-subquantizer centroid matrices)
//   QPKD: packed code lists (spec hash, scheme, per-list blocks)
//   QFLT: flat exhaustive database = QADC + single-list QPKD
//   QIVF: IVF index = QADC + coarse centroids + QPKD + per-list id arrays

namespace pqscan {
namespace io {

namespace detail {

template <class T>
void write_raw(std::ostream& os, const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_raw(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw io_error("unexpected end of file");
    return v;
}

inline void write_bytes(std::ostream& os, const void* p, size_t n) {
    os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void read_bytes(std::istream& is, void* p, size_t n) {
    is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!is) throw io_error("unexpected end of file");
}

inline void write_magic(std::ostream& os, const char m[4]) { write_bytes(os, m, 4); }

inline void expect_magic(std::istream& is, const char m[4], const std::string& what) {
    char buf[4];
    read_bytes(is, buf, 4);
    if (std::memcmp(buf, m, 4) != 0) throw io_error("bad magic: not a " + what + " file");
}

inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const uint8_t*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace detail

// ---------------------------------------------------------------- datasets

struct FloatVectors {
    size_t dim = 0;
    size_t count = 0;
    std::vector<float> data; // count * dim

    std::span<const float> row(size_t i) const { return {data.data() + i * dim, dim}; }
};

struct IntVectors {
    size_t dim = 0;
    size_t count = 0;
    std::vector<int32_t> data;
};

namespace detail {

// fvecs/bvecs/ivecs: per record, a little-endian i32 dimension header followed
// by dim elements. Every header must match and the file size must be exact.
template <class Elem, class Out>
void load_vecs(const std::string& path, size_t elem_size, std::vector<Out>& out, size_t& dim, size_t& count,
               size_t max_records = 0) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open " + path);
    is.seekg(0, std::ios::end);
    const uint64_t file_size = static_cast<uint64_t>(is.tellg());
    is.seekg(0);
    if (file_size == 0) {
        dim = count = 0;
        out.clear();
        return;
    }
    const int32_t d = read_raw<int32_t>(is);
    if (d <= 0) throw io_error(path + ": non-positive dimension header");
    const uint64_t rec = 4 + uint64_t{static_cast<uint32_t>(d)} * elem_size;
    if (file_size % rec != 0)
        throw io_error(path + ": size " + std::to_string(file_size) + " is not a multiple of the record size " +
                       std::to_string(rec));
    count = file_size / rec;
    if (max_records && count > max_records) count = max_records;
    dim = static_cast<size_t>(d);
    out.resize(count * dim);
    is.seekg(0);
    std::vector<Elem> buf(dim);
    for (size_t i = 0; i < count; ++i) {
        const int32_t di = read_raw<int32_t>(is);
        if (di != d) throw io_error(path + ": inconsistent dimension headers");
        read_bytes(is, buf.data(), dim * elem_size);
        for (size_t j = 0; j < dim; ++j) out[i * dim + j] = static_cast<Out>(buf[j]);
    }
}

} // namespace detail

inline FloatVectors load_fvecs(const std::string& path, size_t max_records = 0) {
    FloatVectors v;
    detail::load_vecs<float, float>(path, 4, v.data, v.dim, v.count, max_records);
    return v;
}

inline FloatVectors load_bvecs(const std::string& path, size_t max_records = 0) {
    FloatVectors v;
    detail::load_vecs<uint8_t, float>(path, 1, v.data, v.dim, v.count, max_records);
    return v;
}

// picks by extension: .fvecs or .bvecs
inline FloatVectors load_vectors(const std::string& path, size_t max_records = 0) {
    if (path.size() >= 6 && path.compare(path.size() - 6, 6, ".bvecs") == 0) return load_bvecs(path, max_records);
    return load_fvecs(path, max_records);
}

inline IntVectors load_ivecs(const std::string& path, size_t max_records = 0) {
    IntVectors v;
    detail::load_vecs<int32_t, int32_t>(path, 4, v.data, v.dim, v.count, max_records);
    return v;
}

inline void save_fvecs(const std::string& path, const std::vector<std::vector<float>>& rows) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot write " + path);
    for (const auto& r : rows) {
        detail::write_raw<int32_t>(os, static_cast<int32_t>(r.size()));
        detail::write_bytes(os, r.data(), r.size() * 4);
    }
}

inline void save_ivecs(const std::string& path, const std::vector<std::vector<uint32_t>>& rows) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot write " + path);
    for (const auto& r : rows) {
        detail::write_raw<int32_t>(os, static_cast<int32_t>(r.size()));
        detail::write_bytes(os, r.data(), r.size() * 4);
    }
}

// ---------------------------------------------------------------- codebook

constexpr uint32_t kFormatVersion = 1;

inline void write_spec(std::ostream& os, const PqSpec& spec) {
    detail::write_raw<uint32_t>(os, spec.total_dims());
    detail::write_raw<uint32_t>(os, static_cast<uint32_t>(spec.num_groups()));
    detail::write_raw<uint32_t>(os, static_cast<uint32_t>(spec.group_size()));
    detail::write_bytes(os, spec.group_pattern().data(), spec.group_pattern().size());
    for (size_t j = 0; j < spec.num_subs(); ++j) detail::write_raw<uint32_t>(os, spec.dim_alloc(j));
}

inline PqSpec read_spec(std::istream& is) {
    const uint32_t dims = detail::read_raw<uint32_t>(is);
    const uint32_t ngroups = detail::read_raw<uint32_t>(is);
    const uint32_t g = detail::read_raw<uint32_t>(is);
    if (g == 0 || ngroups == 0 || g > 16) throw corruption_error("spec: bad group structure");
    SpecPattern pat;
    pat.m = ngroups * g;
    pat.widths.resize(g);
    detail::read_bytes(is, pat.widths.data(), g);
    PqSpec spec = allocate_dims(dims, pat);
    for (size_t j = 0; j < spec.num_subs(); ++j) {
        const uint32_t a = detail::read_raw<uint32_t>(is);
        if (a != spec.dim_alloc(j)) throw corruption_error("spec: dimension allocation mismatch");
    }
    return spec;
}

inline uint64_t spec_hash(const PqSpec& spec) {
    std::ostringstream ss;
    write_spec(ss, spec);
    const std::string bytes = ss.str();
    return detail::fnv1a(bytes.data(), bytes.size());
}

inline void save_codebook(std::ostream& os, const Codebook& cb) {
    detail::write_magic(os, "QADC");
    detail::write_raw<uint32_t>(os, kFormatVersion);
    write_spec(os, cb.spec());
    for (size_t j = 0; j < cb.spec().num_subs(); ++j)
        detail::write_bytes(os, cb.sub_table(j).data(), cb.sub_table(j).size() * 4);
}

inline Codebook load_codebook(std::istream& is) {
    detail::expect_magic(is, "QADC", "codebook");
    const uint32_t version = detail::read_raw<uint32_t>(is);
    if (version != kFormatVersion) throw io_error("codebook: unsupported format version");
    PqSpec spec = read_spec(is);
    std::vector<std::vector<float>> tables(spec.num_subs());
    for (size_t j = 0; j < spec.num_subs(); ++j) {
        tables[j].resize(size_t{spec.centroid_count(j)} * spec.dim_alloc(j));
        detail::read_bytes(is, tables[j].data(), tables[j].size() * 4);
    }
    return Codebook(spec, std::move(tables));
}

inline void save_codebook(const std::string& path, const Codebook& cb) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot write " + path);
    save_codebook(os, cb);
}

inline Codebook load_codebook(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open " + path);
    return load_codebook(is);
}

// ------------------------------------------------------------- packed lists

inline void write_packed_section(std::ostream& os, const PqSpec& spec, const PackingScheme& scheme,
                                 std::span<const PackedList> lists) {
    detail::write_magic(os, "QPKD");
    detail::write_raw<uint32_t>(os, kFormatVersion);
    detail::write_raw<uint64_t>(os, spec_hash(spec));
    detail::write_raw<uint32_t>(os, scheme.word_width);
    detail::write_raw<uint32_t>(os, scheme.block_len);
    detail::write_raw<uint32_t>(os, static_cast<uint32_t>(lists.size()));
    for (const auto& list : lists) {
        detail::write_raw<uint64_t>(os, list.count);
        detail::write_bytes(os, list.data.data(), list.data.size());
    }
}

inline std::vector<PackedList> read_packed_section(std::istream& is, const PqSpec& spec,
                                                   const PackingScheme& scheme) {
    detail::expect_magic(is, "QPKD", "packed-codes");
    const uint32_t version = detail::read_raw<uint32_t>(is);
    if (version != kFormatVersion) throw io_error("packed section: unsupported format version");
    if (detail::read_raw<uint64_t>(is) != spec_hash(spec))
        throw corruption_error("packed section: spec hash mismatch (codes were built for another spec)");
    if (detail::read_raw<uint32_t>(is) != scheme.word_width ||
        detail::read_raw<uint32_t>(is) != scheme.block_len)
        throw corruption_error("packed section: packing scheme mismatch");
    const uint32_t nlists = detail::read_raw<uint32_t>(is);
    std::vector<PackedList> lists(nlists);
    for (auto& list : lists) {
        list.count = detail::read_raw<uint64_t>(is);
        list.rows = static_cast<uint32_t>(spec.num_groups());
        list.data.resize(list.block_count(scheme) * list.block_bytes(scheme));
        detail::read_bytes(is, list.data.data(), list.data.size());
    }
    return lists;
}

// ------------------------------------------------------------- whole indexes

inline void save_flat_index(const std::string& path, const FlatIndex& idx) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot write " + path);
    detail::write_magic(os, "QFLT");
    detail::write_raw<uint32_t>(os, kFormatVersion);
    save_codebook(os, idx.codebook());
    const PackedList* list = &idx.list();
    write_packed_section(os, idx.codebook().spec(), idx.scheme(), {list, 1});
}

inline FlatIndex load_flat_index(std::istream& is) {
    detail::expect_magic(is, "QFLT", "flat-index");
    const uint32_t version = detail::read_raw<uint32_t>(is);
    if (version != kFormatVersion) throw io_error("flat index: unsupported format version");
    Codebook cb = load_codebook(is);
    PackingScheme scheme = PackingScheme::for_spec(cb.spec());
    auto lists = read_packed_section(is, cb.spec(), scheme);
    if (lists.size() != 1) throw corruption_error("flat index: expected exactly one list");
    return FlatIndex(std::move(cb), std::move(lists.front()));
}

inline void save_ivf_index(const std::string& path, const IvfIndex& idx) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot write " + path);
    detail::write_magic(os, "QIVF");
    detail::write_raw<uint32_t>(os, kFormatVersion);
    save_codebook(os, idx.codebook());
    detail::write_raw<uint32_t>(os, idx.cells());
    detail::write_bytes(os, idx.coarse_centroids().data(), idx.coarse_centroids().size() * 4);
    write_packed_section(os, idx.codebook().spec(), idx.scheme(), idx.lists());
    for (const auto& ids : idx.list_ids()) detail::write_bytes(os, ids.data(), ids.size() * 4);
}

inline IvfIndex load_ivf_index(std::istream& is) {
    detail::expect_magic(is, "QIVF", "ivf-index");
    const uint32_t version = detail::read_raw<uint32_t>(is);
    if (version != kFormatVersion) throw io_error("ivf index: unsupported format version");
    Codebook cb = load_codebook(is);
    const uint32_t k = detail::read_raw<uint32_t>(is);
    std::vector<float> coarse(size_t{k} * cb.spec().total_dims());
    detail::read_bytes(is, coarse.data(), coarse.size() * 4);
    PackingScheme scheme = PackingScheme::for_spec(cb.spec());
    auto lists = read_packed_section(is, cb.spec(), scheme);
    if (lists.size() != k) throw corruption_error("ivf index: list count does not match K");
    std::vector<std::vector<uint32_t>> ids(k);
    for (uint32_t c = 0; c < k; ++c) {
        ids[c].resize(lists[c].count);
        detail::read_bytes(is, ids[c].data(), ids[c].size() * 4);
    }
    return IvfIndex(std::move(cb), std::move(coarse), std::move(lists), std::move(ids));
}

enum class IndexKind { flat, ivf };

inline IndexKind peek_index_kind(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open " + path);
    char buf[4];
    detail::read_bytes(is, buf, 4);
    if (std::memcmp(buf, "QFLT", 4) == 0) return IndexKind::flat;
    if (std::memcmp(buf, "QIVF", 4) == 0) return IndexKind::ivf;
    throw io_error(path + ": not an index file");
}

inline FlatIndex load_flat_index(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open " + path);
    return load_flat_index(is);
}

inline IvfIndex load_ivf_index(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open " + path);
    return load_ivf_index(is);
}

} // namespace io
} // namespace pqscan
