#include "utad/data/volume.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "utad/error.hpp"

namespace utad::data {

RawSlice Volume::slice(int z) const {
    if (z < 0 || z >= depth) throw InvalidInput("slice index " + std::to_string(z) + " out of range");
    RawSlice s{height, width, {}};
    const auto begin = voxels.begin() + static_cast<std::ptrdiff_t>(index(z, 0, 0));
    s.values.assign(begin, begin + static_cast<std::ptrdiff_t>(slice_size()));
    return s;
}

core::LabelSlice Volume::label_slice(int z) const {
    RawSlice raw = slice(z);
    core::LabelSlice out{height, width, std::vector<std::uint8_t>(raw.values.size())};
    for (std::size_t i = 0; i < raw.values.size(); ++i) {
        const float v = raw.values[i];
        if (v < 0.0f || v > 255.0f || v != std::floor(v)) {
            throw InvalidInput("label volume holds non-label value " + std::to_string(v));
        }
        out.labels[i] = static_cast<std::uint8_t>(v);
    }
    return out;
}

std::vector<std::uint8_t> Volume::labels() const {
    std::vector<std::uint8_t> out(voxels.size());
    for (std::size_t i = 0; i < voxels.size(); ++i) {
        const float v = voxels[i];
        if (v < 0.0f || v > 255.0f || v != std::floor(v)) {
            throw InvalidInput("label volume holds non-label value " + std::to_string(v));
        }
        out[i] = static_cast<std::uint8_t>(v);
    }
    return out;
}

namespace {

static_assert(std::endian::native == std::endian::little, "NIfTI writer assumes a little-endian host");

constexpr int kHeaderSize = 348;
constexpr int kVoxOffset = 352;

enum NiftiType : std::int16_t {
    kUInt8 = 2,
    kInt16 = 4,
    kInt32 = 8,
    kFloat32 = 16,
    kFloat64 = 64,
    kInt8 = 256,
    kUInt16 = 512,
    kUInt32 = 768,
};

int bytes_per_voxel(std::int16_t type) {
    switch (type) {
        case kUInt8:
        case kInt8: return 1;
        case kInt16:
        case kUInt16: return 2;
        case kInt32:
        case kUInt32:
        case kFloat32: return 4;
        case kFloat64: return 8;
        default: return 0;
    }
}

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (f == nullptr) throw IngestionError(path.string() + ": cannot open");
    std::vector<unsigned char> bytes;
    std::array<unsigned char, 1 << 16> buf{};
    for (;;) {
        const int n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()));
        if (n < 0) {
            gzclose(f);
            throw IngestionError(path.string() + ": decompression failed");
        }
        if (n == 0) break;
        bytes.insert(bytes.end(), buf.begin(), buf.begin() + n);
    }
    gzclose(f);
    return bytes;
}

template <class T>
T read_scalar(const unsigned char* p, bool swap) {
    std::array<unsigned char, sizeof(T)> b{};
    std::memcpy(b.data(), p, sizeof(T));
    if (swap) std::reverse(b.begin(), b.end());
    T v;
    std::memcpy(&v, b.data(), sizeof(T));
    return v;
}

template <class T>
void put(std::vector<unsigned char>& hdr, std::size_t offset, T v) {
    std::memcpy(hdr.data() + offset, &v, sizeof(T));
}

}  // namespace

Volume load_volume(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IngestionError(path.string() + ": file does not exist");
    const std::vector<unsigned char> bytes = read_all(path);
    if (bytes.size() < kHeaderSize) throw IngestionError(path.string() + ": truncated NIfTI header");
    const unsigned char* h = bytes.data();

    bool swap = false;
    if (read_scalar<std::int32_t>(h, false) != kHeaderSize) {
        if (read_scalar<std::int32_t>(h, true) != kHeaderSize) {
            throw IngestionError(path.string() + ": not a NIfTI-1 file (sizeof_hdr != 348)");
        }
        swap = true;
    }
    if (std::memcmp(h + 344, "n+1", 3) != 0 && std::memcmp(h + 344, "ni1", 3) != 0) {
        throw IngestionError(path.string() + ": missing NIfTI-1 magic");
    }

    std::array<std::int16_t, 8> dim{};
    for (int i = 0; i < 8; ++i) dim[i] = read_scalar<std::int16_t>(h + 40 + 2 * i, swap);
    if (dim[0] < 1 || dim[0] > 7) throw IngestionError(path.string() + ": invalid dim[0]");
    for (int i = 4; i <= dim[0]; ++i) {
        if (dim[i] > 1) throw IngestionError(path.string() + ": only 3-D scalar volumes are supported");
    }
    const int nx = dim[1];
    const int ny = dim[0] >= 2 ? dim[2] : 1;
    const int nz = dim[0] >= 3 ? dim[3] : 1;
    if (nx < 1 || ny < 1 || nz < 1) throw IngestionError(path.string() + ": non-positive dimension");

    const auto datatype = read_scalar<std::int16_t>(h + 70, swap);
    const int bpv = bytes_per_voxel(datatype);
    if (bpv == 0) throw IngestionError(path.string() + ": unsupported datatype " + std::to_string(datatype));

    std::array<float, 8> pixdim{};
    for (int i = 0; i < 8; ++i) pixdim[i] = read_scalar<float>(h + 76 + 4 * i, swap);
    const float vox_offset = read_scalar<float>(h + 108, swap);
    float slope = read_scalar<float>(h + 112, swap);
    const float inter = read_scalar<float>(h + 116, swap);
    if (slope == 0.0f || !std::isfinite(slope)) slope = 1.0f;

    const std::size_t n = static_cast<std::size_t>(nx) * ny * nz;
    const auto offset = static_cast<std::size_t>(vox_offset < kVoxOffset ? kVoxOffset : vox_offset);
    if (bytes.size() < offset + n * bpv) throw IngestionError(path.string() + ": truncated voxel data");

    Volume v;
    v.depth = nz;
    v.height = ny;
    v.width = nx;
    auto spacing_of = [](float s) { return s > 0.0f && std::isfinite(s) ? static_cast<double>(s) : 1.0; };
    v.spacing = Spacing{spacing_of(pixdim[3]), spacing_of(pixdim[2]), spacing_of(pixdim[1])};
    v.voxels.resize(n);

    const unsigned char* data = h + offset;
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned char* p = data + i * bpv;
        double raw = 0.0;
        switch (datatype) {
            case kUInt8: raw = *p; break;
            case kInt8: raw = static_cast<std::int8_t>(*p); break;
            case kInt16: raw = read_scalar<std::int16_t>(p, swap); break;
            case kUInt16: raw = read_scalar<std::uint16_t>(p, swap); break;
            case kInt32: raw = read_scalar<std::int32_t>(p, swap); break;
            case kUInt32: raw = read_scalar<std::uint32_t>(p, swap); break;
            case kFloat32: raw = read_scalar<float>(p, swap); break;
            case kFloat64: raw = read_scalar<double>(p, swap); break;
            default: break;
        }
        if (!std::isfinite(raw)) {
            throw IngestionError(path.string() + ": non-finite voxel at linear index " + std::to_string(i));
        }
        // Identity scaling keeps float32 payloads bitwise.
        v.voxels[i] = (slope == 1.0f && inter == 0.0f) ? static_cast<float>(raw)
                                                         : static_cast<float>(raw * slope + inter);
    }
    return v;
}

void save_volume(const std::filesystem::path& path, const Volume& volume, VoxelType type) {
    if (volume.voxels.size() != static_cast<std::size_t>(volume.depth) * volume.height * volume.width) {
        throw ShapeMismatch("save_volume: voxel count does not match dimensions");
    }
    std::vector<unsigned char> out(kVoxOffset, 0);
    put<std::int32_t>(out, 0, kHeaderSize);
    const std::array<std::int16_t, 8> dim = {3, static_cast<std::int16_t>(volume.width),
                                             static_cast<std::int16_t>(volume.height),
                                             static_cast<std::int16_t>(volume.depth), 1, 1, 1, 1};
    for (int i = 0; i < 8; ++i) put<std::int16_t>(out, 40 + 2 * i, dim[i]);
    const bool bytes = type == VoxelType::UInt8;
    put<std::int16_t>(out, 70, bytes ? kUInt8 : kFloat32);
    put<std::int16_t>(out, 72, bytes ? 8 : 32);
    const std::array<float, 8> pixdim = {1.0f,
                                         static_cast<float>(volume.spacing.x),
                                         static_cast<float>(volume.spacing.y),
                                         static_cast<float>(volume.spacing.z),
                                         0.0f, 0.0f, 0.0f, 0.0f};
    for (int i = 0; i < 8; ++i) put<float>(out, 76 + 4 * i, pixdim[i]);
    put<float>(out, 108, static_cast<float>(kVoxOffset));
    put<float>(out, 112, 1.0f);
    put<float>(out, 116, 0.0f);
    out[123] = 10;  // xyzt_units: mm, sec
    std::memcpy(out.data() + 344, "n+1\0", 4);

    if (bytes) {
        for (float v : volume.voxels) {
            if (v < 0.0f || v > 255.0f || v != std::floor(v)) throw InvalidInput("save_volume: non-byte label value");
            out.push_back(static_cast<unsigned char>(v));
        }
    } else {
        const std::size_t start = out.size();
        out.resize(start + volume.voxels.size() * sizeof(float));
        std::memcpy(out.data() + start, volume.voxels.data(), volume.voxels.size() * sizeof(float));
    }

    const std::string name = path.filename().string();
    const bool gz = name.size() > 3 && name.compare(name.size() - 3, 3, ".gz") == 0;
    if (gz) {
        gzFile f = gzopen(path.c_str(), "wb6");
        if (f == nullptr) throw Error(path.string() + ": cannot open for writing");
        const int written = gzwrite(f, out.data(), static_cast<unsigned>(out.size()));
        const int closed = gzclose(f);
        if (written != static_cast<int>(out.size()) || closed != Z_OK) throw Error(path.string() + ": write failed");
    } else {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw Error(path.string() + ": cannot open for writing");
        f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
        if (!f) throw Error(path.string() + ": write failed");
    }
}

}  // namespace utad::data
