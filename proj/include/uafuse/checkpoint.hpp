#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "fusion.hpp"
#include "tensor.hpp"

namespace uafuse {

// Flat binary parameter container. Layout:
//   magic "UAF1"
//   u32 count, then per tensor (ascending name order):
//     u32 name_len, name bytes, u32 ndim, u32 dims[ndim], u64 byte offset
//   data section: little-endian float32 payloads at the stated offsets
// An optional optimizer-state appendix follows:
//   magic "UAFO", u32 epoch, u32 stage, u64 step, u64 seed, f32 best_metric,
//   then a moment table in the same (manifest, data) form.

struct TensorBlob {
    std::vector<int> shape;
    std::vector<float> data;
};

using TensorTable = std::map<std::string, TensorBlob>; // ordered: deterministic name order

struct CheckpointAppendix {
    std::uint32_t epoch = 0;
    std::uint32_t stage = 1;
    std::uint64_t step = 0;
    std::uint64_t seed = 0;
    float best_metric = 0.0f;
    TensorTable moments;
};

namespace ckpt_detail {

template <typename V>
inline void put(std::ofstream& f, const V& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
inline V get(std::ifstream& f) {
    V v{};
    f.read(reinterpret_cast<char*>(&v), sizeof(V));
    if (!f) throw std::runtime_error("checkpoint: unexpected end of file");
    return v;
}

inline void write_table(std::ofstream& f, const TensorTable& table) {
    put<std::uint32_t>(f, static_cast<std::uint32_t>(table.size()));
    std::uint64_t offset = 0;
    for (const auto& [name, blob] : table) {
        put<std::uint32_t>(f, static_cast<std::uint32_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<std::uint32_t>(f, static_cast<std::uint32_t>(blob.shape.size()));
        for (int d : blob.shape) put<std::uint32_t>(f, static_cast<std::uint32_t>(d));
        put<std::uint64_t>(f, offset);
        offset += blob.data.size() * sizeof(float);
    }
    for (const auto& [name, blob] : table)
        f.write(reinterpret_cast<const char*>(blob.data.data()),
                static_cast<std::streamsize>(blob.data.size() * sizeof(float)));
}

inline TensorTable read_table(std::ifstream& f) {
    const auto count = get<std::uint32_t>(f);
    struct Entry {
        std::string name;
        std::vector<int> shape;
        std::uint64_t offset;
        std::uint64_t numel;
    };
    std::vector<Entry> entries;
    std::uint64_t total = 0;
    for (std::uint32_t i = 0; i < count; ++i) {
        Entry e;
        const auto name_len = get<std::uint32_t>(f);
        e.name.resize(name_len);
        f.read(e.name.data(), name_len);
        const auto ndim = get<std::uint32_t>(f);
        if (ndim > 8) throw std::runtime_error("checkpoint: implausible rank " + std::to_string(ndim));
        e.numel = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            const auto ext = get<std::uint32_t>(f);
            e.shape.push_back(static_cast<int>(ext));
            e.numel *= ext;
        }
        e.offset = get<std::uint64_t>(f);
        total = std::max(total, e.offset + e.numel * sizeof(float));
        entries.push_back(std::move(e));
    }
    std::vector<char> payload(total);
    f.read(payload.data(), static_cast<std::streamsize>(total));
    if (f.gcount() != static_cast<std::streamsize>(total))
        throw std::runtime_error("checkpoint: truncated tensor data");
    TensorTable table;
    for (auto& e : entries) {
        TensorBlob blob;
        blob.shape = e.shape;
        blob.data.resize(e.numel);
        std::memcpy(blob.data.data(), payload.data() + e.offset, e.numel * sizeof(float));
        table.emplace(std::move(e.name), std::move(blob));
    }
    return table;
}

} // namespace ckpt_detail

inline void write_checkpoint(const std::string& path, const TensorTable& params,
                             const CheckpointAppendix* appendix = nullptr) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("checkpoint: cannot write '" + path + "'");
    f.write("UAF1", 4);
    ckpt_detail::write_table(f, params);
    if (appendix) {
        f.write("UAFO", 4);
        ckpt_detail::put<std::uint32_t>(f, appendix->epoch);
        ckpt_detail::put<std::uint32_t>(f, appendix->stage);
        ckpt_detail::put<std::uint64_t>(f, appendix->step);
        ckpt_detail::put<std::uint64_t>(f, appendix->seed);
        ckpt_detail::put<float>(f, appendix->best_metric);
        ckpt_detail::write_table(f, appendix->moments);
    }
    if (!f) throw std::runtime_error("checkpoint: short write to '" + path + "'");
}

inline TensorTable read_checkpoint(const std::string& path, CheckpointAppendix* appendix = nullptr,
                                   bool* has_appendix = nullptr) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
    char magic[4];
    f.read(magic, 4);
    if (f.gcount() != 4 || std::memcmp(magic, "UAF1", 4) != 0)
        throw std::runtime_error("checkpoint: '" + path + "' is not a UAF1 container");
    TensorTable params = ckpt_detail::read_table(f);
    if (has_appendix) *has_appendix = false;
    char amagic[4];
    f.read(amagic, 4);
    if (f.gcount() == 4 && std::memcmp(amagic, "UAFO", 4) == 0) {
        CheckpointAppendix app;
        app.epoch = ckpt_detail::get<std::uint32_t>(f);
        app.stage = ckpt_detail::get<std::uint32_t>(f);
        app.step = ckpt_detail::get<std::uint64_t>(f);
        app.seed = ckpt_detail::get<std::uint64_t>(f);
        app.best_metric = ckpt_detail::get<float>(f);
        app.moments = ckpt_detail::read_table(f);
        if (has_appendix) *has_appendix = true;
        if (appendix) *appendix = app;
    }
    return params;
}

/// Parameter snapshot of a model, single precision.
template <typename T>
inline TensorTable snapshot_params(const Model<T>& model) {
    TensorTable table;
    model.visit_params([&](const std::string& name, const Tensor<T>& t) {
        TensorBlob blob;
        blob.shape = t.shape;
        blob.data.resize(static_cast<std::size_t>(t.numel()));
        for (std::int64_t i = 0; i < t.numel(); ++i) blob.data[static_cast<std::size_t>(i)] = static_cast<float>(t[i]);
        table.emplace(name, std::move(blob));
    });
    return table;
}

template <typename T>
inline void load_params(Model<T>& model, const TensorTable& table) {
    model.visit_params([&](const std::string& name, Tensor<T>& t) {
        auto it = table.find(name);
        if (it == table.end()) throw std::runtime_error("checkpoint: missing parameter '" + name + "'");
        if (it->second.shape != t.shape)
            throw std::runtime_error("checkpoint: parameter '" + name + "' has shape " + shape_str(it->second.shape) +
                                     ", model expects " + shape_str(t.shape));
        Tensor<T> fresh(t.shape);
        for (std::int64_t i = 0; i < fresh.numel(); ++i)
            fresh[i] = static_cast<T>(it->second.data[static_cast<std::size_t>(i)]);
        t = fresh;
    });
}

} // namespace uafuse
