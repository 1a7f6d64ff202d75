#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "uafuse/nifti.hpp"
#include "uafuse/rng.hpp"

using namespace uafuse;

namespace {

std::string tmp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "uafuse_nifti_tests";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

GridF random_grid(std::array<int, 3> dims, std::uint64_t seed) {
    Rng rng(seed);
    GridF g(dims);
    for (auto& v : g.data) v = static_cast<float>(rng.next_normal());
    return g;
}

} // namespace

TEST_CASE("float volume round-trips bit-exactly") {
    auto g = random_grid({8, 8, 8}, 1);
    const auto path = tmp_path("roundtrip_f32.nii");
    write_nifti(g, {1.0f, 1.25f, 2.0f}, path);

    auto img = read_nifti(path);
    CHECK(img.datatype == 16);
    REQUIRE(img.dims == g.dims);
    CHECK(std::memcmp(img.fdata.data(), g.data.data(), g.data.size() * 4) == 0);
    CHECK(img.spacing[0] == Catch::Approx(1.0f).margin(1e-6));
    CHECK(img.spacing[1] == Catch::Approx(1.25f).margin(1e-6));
    CHECK(img.spacing[2] == Catch::Approx(2.0f).margin(1e-6));
}

TEST_CASE("label volume round-trips through uint8") {
    GridI g({5, 6, 7});
    Rng rng(2);
    for (auto& v : g.data) v = static_cast<std::int32_t>(rng.next_index(5));
    const auto path = tmp_path("roundtrip_u8.nii");
    write_nifti(g, {1, 1, 1}, path);
    auto img = read_nifti(path);
    CHECK(img.datatype == 2);
    CHECK(img.idata == g.data);
}

TEST_CASE("labels above 255 fall back to int16") {
    GridI g({3, 3, 3}, 400);
    const auto path = tmp_path("roundtrip_i16.nii");
    write_nifti(g, {1, 1, 1}, path);
    auto img = read_nifti(path);
    CHECK(img.datatype == 4);
    CHECK(img.idata == g.data);
}

TEST_CASE("written header satisfies the fixed-field contract") {
    auto g = random_grid({4, 5, 6}, 3);
    const auto path = tmp_path("header.nii");
    write_nifti(g, {1, 1, 1}, path);

    std::ifstream f(path, std::ios::binary);
    std::vector<char> head(352);
    f.read(head.data(), 352);
    REQUIRE(f.gcount() == 352);

    std::int32_t sizeof_hdr;
    std::memcpy(&sizeof_hdr, head.data(), 4);
    CHECK(sizeof_hdr == 348);

    float vox_offset;
    std::memcpy(&vox_offset, head.data() + 108, 4);
    CHECK(vox_offset == 352.0f);

    std::int16_t datatype;
    std::memcpy(&datatype, head.data() + 70, 2);
    CHECK(datatype == 16);

    std::int16_t dim[8];
    std::memcpy(dim, head.data() + 40, 16);
    CHECK(dim[0] == 3);
    CHECK(dim[1] == 4);
    CHECK(dim[2] == 5);
    CHECK(dim[3] == 6);
    CHECK(dim[4] == 1);

    CHECK(std::memcmp(head.data() + 344, "n+1\0", 4) == 0);
}

TEST_CASE("a byte-swapped file parses via endianness detection") {
    auto g = random_grid({4, 4, 4}, 4);
    const auto path = tmp_path("little.nii");
    write_nifti(g, {1.5f, 1.5f, 1.5f}, path);

    // byte-swap every multi-byte field and the payload
    std::ifstream in(path, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    auto swap32at = [&](std::size_t off) { std::swap(bytes[off], bytes[off + 3]); std::swap(bytes[off + 1], bytes[off + 2]); };
    auto swap16at = [&](std::size_t off) { std::swap(bytes[off], bytes[off + 1]); };
    swap32at(0);                                       // sizeof_hdr
    swap32at(32);                                      // extents
    swap16at(36);                                      // session_error
    for (int i = 0; i < 8; ++i) swap16at(40 + 2 * static_cast<std::size_t>(i)); // dim
    for (std::size_t off : {56u, 60u, 64u}) swap32at(off);
    for (std::size_t off : {68u, 70u, 72u, 74u}) swap16at(off);
    for (int i = 0; i < 8; ++i) swap32at(76 + 4 * static_cast<std::size_t>(i)); // pixdim
    for (std::size_t off : {108u, 112u, 116u}) swap32at(off);
    swap16at(120);
    for (std::size_t off : {124u, 128u, 132u, 136u, 140u, 144u}) swap32at(off);
    swap16at(252);
    swap16at(254);
    for (std::size_t off = 256; off < 328; off += 4) swap32at(off);
    for (std::size_t off = 352; off < bytes.size(); off += 4) swap32at(off);

    // sanity: sizeof_hdr now reads as the big-endian value
    std::int32_t raw;
    std::memcpy(&raw, bytes.data(), 4);
    CHECK(raw == 1543569408);

    const auto swapped_path = tmp_path("big.nii");
    std::ofstream out(swapped_path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();

    auto img = read_nifti(swapped_path);
    REQUIRE(img.dims == g.dims);
    CHECK(std::memcmp(img.fdata.data(), g.data.data(), g.data.size() * 4) == 0);
    CHECK(img.spacing[0] == Catch::Approx(1.5f).margin(1e-6));
}

TEST_CASE("parse errors are distinct") {
    auto g = random_grid({4, 4, 4}, 5);
    const auto good = tmp_path("good.nii");
    write_nifti(g, {1, 1, 1}, good);
    std::ifstream in(good, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();

    auto write_variant = [&](const std::string& name, std::function<void(std::vector<char>&)> mutate,
                             std::size_t truncate_to = 0) {
        auto copy = bytes;
        mutate(copy);
        if (truncate_to > 0) copy.resize(truncate_to);
        const auto path = tmp_path(name);
        std::ofstream out(path, std::ios::binary);
        out.write(copy.data(), static_cast<std::streamsize>(copy.size()));
        return path;
    };

    SECTION("missing file") {
        try {
            read_nifti(tmp_path("does_not_exist.nii"));
            FAIL();
        } catch (const NiftiError& e) {
            CHECK(e.code == NiftiError::Code::Io);
        }
    }
    SECTION("wrong magic") {
        auto path = write_variant("bad_magic.nii", [](auto& b) { std::memcpy(b.data() + 344, "ni1\0", 4); });
        try {
            read_nifti(path);
            FAIL();
        } catch (const NiftiError& e) {
            CHECK(e.code == NiftiError::Code::BadMagic);
        }
    }
    SECTION("unsupported datatype") {
        auto path = write_variant("bad_dtype.nii", [](auto& b) {
            const std::int16_t dt = 64; // float64, outside the subset
            std::memcpy(b.data() + 70, &dt, 2);
        });
        try {
            read_nifti(path);
            FAIL();
        } catch (const NiftiError& e) {
            CHECK(e.code == NiftiError::Code::UnsupportedDtype);
        }
    }
    SECTION("wrong dimensionality") {
        auto path = write_variant("bad_dims.nii", [](auto& b) {
            const std::int16_t four = 4;
            std::memcpy(b.data() + 40, &four, 2);
        });
        try {
            read_nifti(path);
            FAIL();
        } catch (const NiftiError& e) {
            CHECK(e.code == NiftiError::Code::BadDims);
        }
    }
    SECTION("truncated payload") {
        auto path = write_variant("truncated.nii", [](auto&) {}, 352 + 100);
        try {
            read_nifti(path);
            FAIL();
        } catch (const NiftiError& e) {
            CHECK(e.code == NiftiError::Code::Truncated);
        }
    }
    SECTION("truncated header") {
        auto path = write_variant("stub.nii", [](auto&) {}, 100);
        try {
            read_nifti(path);
            FAIL();
        } catch (const NiftiError& e) {
            CHECK(e.code == NiftiError::Code::Truncated);
        }
    }
}
