#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "volume.hpp"

namespace uafuse {

/// Distinct failure modes of the NIfTI-1 subset parser.
class NiftiError : public std::runtime_error {
public:
    enum class Code { Io, BadMagic, BadHeader, BadDims, UnsupportedDtype, Truncated };
    NiftiError(Code c, const std::string& msg) : std::runtime_error("nifti: " + msg), code(c) {}
    Code code;
};

namespace nifti_detail {

// single-file NIfTI-1 header, 348 bytes
struct Header {
    std::int32_t sizeof_hdr;
    char data_type[10];
    char db_name[18];
    std::int32_t extents;
    std::int16_t session_error;
    char regular;
    char dim_info;
    std::int16_t dim[8];
    float intent_p1, intent_p2, intent_p3;
    std::int16_t intent_code;
    std::int16_t datatype;
    std::int16_t bitpix;
    std::int16_t slice_start;
    float pixdim[8];
    float vox_offset;
    float scl_slope;
    float scl_inter;
    std::int16_t slice_end;
    char slice_code;
    char xyzt_units;
    float cal_max, cal_min;
    float slice_duration;
    float toffset;
    std::int32_t glmax, glmin;
    char descrip[80];
    char aux_file[24];
    std::int16_t qform_code, sform_code;
    float quatern_b, quatern_c, quatern_d;
    float qoffset_x, qoffset_y, qoffset_z;
    float srow_x[4], srow_y[4], srow_z[4];
    char intent_name[16];
    char magic[4];
};
static_assert(sizeof(Header) == 348, "NIfTI-1 header must be 348 bytes");

inline constexpr std::int16_t kDtUint8 = 2;
inline constexpr std::int16_t kDtInt16 = 4;
inline constexpr std::int16_t kDtFloat32 = 16;

inline std::uint16_t bswap16(std::uint16_t v) { return static_cast<std::uint16_t>((v >> 8) | (v << 8)); }
inline std::uint32_t bswap32(std::uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0x0000ff00u) | ((v << 8) & 0x00ff0000u) | (v << 24);
}

inline void swap_field(std::int16_t& v) {
    std::uint16_t u;
    std::memcpy(&u, &v, 2);
    u = bswap16(u);
    std::memcpy(&v, &u, 2);
}
inline void swap_field(std::int32_t& v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    u = bswap32(u);
    std::memcpy(&v, &u, 4);
}
inline void swap_field(float& v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    u = bswap32(u);
    std::memcpy(&v, &u, 4);
}

inline void swap_header(Header& h) {
    swap_field(h.sizeof_hdr);
    swap_field(h.extents);
    swap_field(h.session_error);
    for (auto& d : h.dim) swap_field(d);
    swap_field(h.intent_p1);
    swap_field(h.intent_p2);
    swap_field(h.intent_p3);
    swap_field(h.intent_code);
    swap_field(h.datatype);
    swap_field(h.bitpix);
    swap_field(h.slice_start);
    for (auto& p : h.pixdim) swap_field(p);
    swap_field(h.vox_offset);
    swap_field(h.scl_slope);
    swap_field(h.scl_inter);
    swap_field(h.slice_end);
    swap_field(h.cal_max);
    swap_field(h.cal_min);
    swap_field(h.slice_duration);
    swap_field(h.toffset);
    swap_field(h.glmax);
    swap_field(h.glmin);
    swap_field(h.qform_code);
    swap_field(h.sform_code);
    swap_field(h.quatern_b);
    swap_field(h.quatern_c);
    swap_field(h.quatern_d);
    swap_field(h.qoffset_x);
    swap_field(h.qoffset_y);
    swap_field(h.qoffset_z);
    for (auto& v : h.srow_x) swap_field(v);
    for (auto& v : h.srow_y) swap_field(v);
    for (auto& v : h.srow_z) swap_field(v);
}

} // namespace nifti_detail

/// One decoded grid: float data for datatype 16, integer data for 2 / 4.
struct NiftiImage {
    std::array<int, 3> dims{0, 0, 0};
    std::array<float, 3> spacing{1.0f, 1.0f, 1.0f};
    std::int16_t datatype = 0;
    std::vector<float> fdata;
    std::vector<std::int32_t> idata;

    bool is_float() const { return datatype == nifti_detail::kDtFloat32; }
    GridF as_grid() const {
        if (!is_float()) throw NiftiError(NiftiError::Code::UnsupportedDtype, "integer volume where float expected");
        GridF g(dims);
        g.data = fdata;
        return g;
    }
    GridI as_labels() const {
        GridI g(dims);
        if (is_float()) throw NiftiError(NiftiError::Code::UnsupportedDtype, "float volume where labels expected");
        g.data = idata;
        return g;
    }
};

/// Parse the single-file NIfTI-1 subset: magic "n+1", datatype 16/2/4,
/// dim[0] = 3, little- or big-endian (byte-swapped on the fly).
inline NiftiImage read_nifti(const std::string& path) {
    using namespace nifti_detail;
    std::ifstream f(path, std::ios::binary);
    if (!f) throw NiftiError(NiftiError::Code::Io, "cannot open '" + path + "'");

    Header h{};
    f.read(reinterpret_cast<char*>(&h), sizeof(h));
    if (f.gcount() != sizeof(h))
        throw NiftiError(NiftiError::Code::Truncated, "'" + path + "' is shorter than a NIfTI-1 header");

    if (std::memcmp(h.magic, "n+1", 4) != 0)
        throw NiftiError(NiftiError::Code::BadMagic, "bad magic in '" + path + "' (expected single-file n+1)");

    bool swapped = false;
    if (h.sizeof_hdr != 348) {
        swap_header(h);
        swapped = true;
        if (h.sizeof_hdr != 348)
            throw NiftiError(NiftiError::Code::BadHeader, "sizeof_hdr is not 348 in '" + path + "'");
    }

    if (h.dim[0] != 3)
        throw NiftiError(NiftiError::Code::BadDims,
                         "only 3-dimensional volumes are supported, dim[0]=" + std::to_string(h.dim[0]));
    for (int i = 1; i <= 3; ++i)
        if (h.dim[i] <= 0)
            throw NiftiError(NiftiError::Code::BadDims, "nonpositive extent dim[" + std::to_string(i) + "]");

    int bytes_per = 0;
    switch (h.datatype) {
        case kDtUint8: bytes_per = 1; break;
        case kDtInt16: bytes_per = 2; break;
        case kDtFloat32: bytes_per = 4; break;
        default:
            throw NiftiError(NiftiError::Code::UnsupportedDtype,
                             "datatype " + std::to_string(h.datatype) + " not in {2, 4, 16}");
    }
    if (h.bitpix != 8 * bytes_per)
        throw NiftiError(NiftiError::Code::BadHeader, "bitpix " + std::to_string(h.bitpix) +
                                                          " inconsistent with datatype " + std::to_string(h.datatype));
    if (h.vox_offset < 348.0f)
        throw NiftiError(NiftiError::Code::BadHeader, "vox_offset " + std::to_string(h.vox_offset) + " overlaps the header");

    NiftiImage img;
    img.dims = {h.dim[1], h.dim[2], h.dim[3]};
    img.spacing = {h.pixdim[1], h.pixdim[2], h.pixdim[3]};
    img.datatype = h.datatype;

    const std::int64_t n = grid_numel(img.dims);
    std::vector<char> raw(static_cast<std::size_t>(n) * bytes_per);
    f.seekg(static_cast<std::streamoff>(h.vox_offset), std::ios::beg);
    f.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (f.gcount() != static_cast<std::streamsize>(raw.size()))
        throw NiftiError(NiftiError::Code::Truncated, "payload of '" + path + "' is truncated");

    if (h.datatype == kDtFloat32) {
        img.fdata.resize(static_cast<std::size_t>(n));
        std::memcpy(img.fdata.data(), raw.data(), raw.size());
        if (swapped)
            for (auto& v : img.fdata) swap_field(v);
    } else if (h.datatype == kDtUint8) {
        img.idata.resize(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i)
            img.idata[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(raw[static_cast<std::size_t>(i)]);
    } else {
        img.idata.resize(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) {
            std::int16_t v;
            std::memcpy(&v, raw.data() + i * 2, 2);
            if (swapped) swap_field(v);
            img.idata[static_cast<std::size_t>(i)] = v;
        }
    }
    return img;
}

namespace nifti_detail {

inline Header make_header(const std::array<int, 3>& dims, const std::array<float, 3>& spacing,
                          std::int16_t datatype, std::int16_t bitpix) {
    Header h{};
    h.sizeof_hdr = 348;
    h.regular = 'r';
    h.dim[0] = 3;
    for (int i = 0; i < 3; ++i) h.dim[i + 1] = static_cast<std::int16_t>(dims[static_cast<std::size_t>(i)]);
    for (int i = 4; i < 8; ++i) h.dim[i] = 1;
    h.datatype = datatype;
    h.bitpix = bitpix;
    h.pixdim[0] = 1.0f;
    for (int i = 0; i < 3; ++i) h.pixdim[i + 1] = spacing[static_cast<std::size_t>(i)];
    h.vox_offset = 352.0f;
    h.scl_slope = 1.0f;
    h.scl_inter = 0.0f;
    h.xyzt_units = 2; // mm
    std::memcpy(h.magic, "n+1", 4);
    return h;
}

inline void write_file(const std::string& path, const Header& h, const char* payload, std::size_t bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw NiftiError(NiftiError::Code::Io, "cannot write '" + path + "'");
    f.write(reinterpret_cast<const char*>(&h), sizeof(h));
    const char ext[4] = {0, 0, 0, 0}; // no extensions
    f.write(ext, 4);
    f.write(payload, static_cast<std::streamsize>(bytes));
    if (!f) throw NiftiError(NiftiError::Code::Io, "short write to '" + path + "'");
}

} // namespace nifti_detail

inline void write_nifti(const GridF& grid, const std::array<float, 3>& spacing, const std::string& path) {
    using namespace nifti_detail;
    if (grid.empty()) throw NiftiError(NiftiError::Code::BadDims, "refusing to write an empty grid");
    for (int d : grid.dims)
        if (d > 32767) throw NiftiError(NiftiError::Code::BadDims, "extent exceeds the NIfTI-1 short range");
    Header h = make_header(grid.dims, spacing, kDtFloat32, 32);
    write_file(path, h, reinterpret_cast<const char*>(grid.data.data()), grid.data.size() * 4);
}

/// Labels are written as uint8 when they fit, int16 otherwise.
inline void write_nifti(const GridI& grid, const std::array<float, 3>& spacing, const std::string& path) {
    using namespace nifti_detail;
    if (grid.empty()) throw NiftiError(NiftiError::Code::BadDims, "refusing to write an empty grid");
    std::int32_t lo = 0, hi = 0;
    for (std::int32_t v : grid.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (lo >= 0 && hi <= 255) {
        std::vector<std::uint8_t> raw(grid.data.size());
        for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = static_cast<std::uint8_t>(grid.data[i]);
        Header h = make_header(grid.dims, spacing, kDtUint8, 8);
        write_file(path, h, reinterpret_cast<const char*>(raw.data()), raw.size());
        return;
    }
    if (lo < -32768 || hi > 32767)
        throw NiftiError(NiftiError::Code::UnsupportedDtype, "label values exceed the int16 range");
    std::vector<std::int16_t> raw(grid.data.size());
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = static_cast<std::int16_t>(grid.data[i]);
    Header h = nifti_detail::make_header(grid.dims, spacing, kDtInt16, 16);
    write_file(path, h, reinterpret_cast<const char*>(raw.data()), raw.size() * 2);
}

} // namespace uafuse
