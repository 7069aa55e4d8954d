#include "regmod/io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

namespace regmod {
namespace {

constexpr int kHeaderSize = 348;
constexpr float kVoxOffset = 352.0f;
constexpr std::int16_t kDtUint8 = 2;
constexpr std::int16_t kDtInt16 = 4;
constexpr std::int16_t kDtFloat32 = 16;
constexpr std::int16_t kIntentVector = 1007;

static_assert(std::endian::native == std::endian::little,
              "this reader assumes a little-endian host");

template <typename T>
void put(std::string& buf, std::size_t offset, T value) {
    std::memcpy(buf.data() + offset, &value, sizeof(T));
}

template <typename T>
T get(const std::string& buf, std::size_t offset) {
    T value;
    std::memcpy(&value, buf.data() + offset, sizeof(T));
    return value;
}

std::uint32_t byteswap32(std::uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

struct ParsedHeader {
    std::array<std::int16_t, 8> dim{};
    std::int16_t datatype = 0;
    std::int16_t intent_code = 0;
    std::array<float, 8> pixdim{};
    float vox_offset = 0.0f;
    float scl_slope = 1.0f;
    float scl_inter = 0.0f;
};

ParsedHeader parse_header(const std::string& raw, const std::string& path) {
    if (raw.size() < std::size_t(kHeaderSize) + 4)
        throw DataError("truncated", path + ": file shorter than a NIfTI-1 header");
    auto sizeof_hdr = get<std::uint32_t>(raw, 0);
    if (sizeof_hdr != std::uint32_t(kHeaderSize)) {
        if (byteswap32(sizeof_hdr) == std::uint32_t(kHeaderSize))
            throw DataError("unsupported_endianness",
                            path + ": big-endian NIfTI is not supported");
        throw DataError("bad_magic", path + ": not a NIfTI-1 header (sizeof_hdr != 348)");
    }
    if (std::memcmp(raw.data() + 344, "n+1\0", 4) != 0)
        throw DataError("bad_magic", path + ": magic is not \"n+1\" (single-file NIfTI-1)");

    ParsedHeader h;
    for (int i = 0; i < 8; ++i) {
        h.dim[std::size_t(i)] = get<std::int16_t>(raw, 40 + 2 * std::size_t(i));
        h.pixdim[std::size_t(i)] = get<float>(raw, 76 + 4 * std::size_t(i));
    }
    h.intent_code = get<std::int16_t>(raw, 68);
    h.datatype = get<std::int16_t>(raw, 70);
    h.vox_offset = get<float>(raw, 108);
    h.scl_slope = get<float>(raw, 112);
    h.scl_inter = get<float>(raw, 116);
    if (h.datatype != kDtUint8 && h.datatype != kDtInt16 && h.datatype != kDtFloat32)
        throw DataError("unsupported_datatype",
                        path + ": datatype " + std::to_string(h.datatype) +
                            " not in {uint8, int16, float32}");
    return h;
}

std::size_t datatype_size(std::int16_t dt) {
    return dt == kDtFloat32 ? 4 : (dt == kDtInt16 ? 2 : 1);
}

GridInfo grid_from_header(const ParsedHeader& h, const std::string& path) {
    int nd = h.dim[0] == 5 ? 3 : int(h.dim[0]);
    if (h.dim[0] != 2 && h.dim[0] != 3 && h.dim[0] != 5)
        throw DataError("bad_dimension",
                        path + ": dim[0]=" + std::to_string(h.dim[0]) + " unsupported");
    std::array<int, 3> dims{1, 1, 1};
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    for (int a = 0; a < nd; ++a) {
        dims[std::size_t(a)] = h.dim[std::size_t(a) + 1];
        if (dims[std::size_t(a)] < 1)
            throw DataError("bad_dimension", path + ": non-positive extent");
        double sp = h.pixdim[std::size_t(a) + 1];
        spacing[std::size_t(a)] = sp > 0.0 ? sp : 1.0;
    }
    // A 3D file whose z extent is 1 is really a 2D grid in our convention.
    if (nd == 3 && dims[2] == 1) nd = 2;
    return GridInfo(nd, dims, spacing);
}

double decode_at(const std::string& raw, std::size_t base, std::int16_t dt, std::size_t idx,
                 double slope, double inter) {
    std::size_t off = base + idx * datatype_size(dt);
    if (dt == kDtFloat32) return double(get<float>(raw, off)) * slope + inter;
    if (dt == kDtInt16) return double(get<std::int16_t>(raw, off)) * slope + inter;
    return double(get<std::uint8_t>(raw, off)) * slope + inter;
}

// NIfTI stores the first spatial axis fastest; internally the last axis is
// fastest. Translate a file-order voxel counter into our flat index.
std::size_t internal_index(const GridInfo& g, std::size_t file_idx) {
    std::size_t nx = std::size_t(g.dims[0]), ny = std::size_t(g.dims[1]);
    std::size_t x = file_idx % nx;
    std::size_t y = (file_idx / nx) % ny;
    std::size_t z = file_idx / (nx * ny);
    return (x * ny + y) * std::size_t(g.dims[2]) + z;
}

std::string header_bytes(const GridInfo& g, std::int16_t datatype, int vector_components,
                         const char* descrip) {
    std::string buf(std::size_t(kHeaderSize) + 4, '\0');  // header + empty extension flag
    put<std::int32_t>(buf, 0, kHeaderSize);
    std::array<std::int16_t, 8> dim{};
    std::array<float, 8> pixdim{};
    pixdim[0] = 1.0f;
    if (vector_components > 0) {
        dim[0] = 5;
        dim[4] = 1;
        dim[5] = std::int16_t(vector_components);
    } else {
        dim[0] = std::int16_t(g.ndim);
    }
    for (int a = 0; a < 3; ++a) {
        dim[std::size_t(a) + 1] = 1;
        pixdim[std::size_t(a) + 1] = 1.0f;
    }
    for (int a = 0; a < g.ndim; ++a) {
        dim[std::size_t(a) + 1] = std::int16_t(g.dims[std::size_t(a)]);
        pixdim[std::size_t(a) + 1] = float(g.spacing[std::size_t(a)]);
    }
    if (vector_components > 0 && g.ndim == 2) dim[3] = 1;
    for (int i = 0; i < 8; ++i) {
        put<std::int16_t>(buf, 40 + 2 * std::size_t(i), dim[std::size_t(i)]);
        put<float>(buf, 76 + 4 * std::size_t(i), pixdim[std::size_t(i)]);
    }
    if (vector_components > 0) put<std::int16_t>(buf, 68, kIntentVector);
    put<std::int16_t>(buf, 70, datatype);
    put<std::int16_t>(buf, 72, std::int16_t(8 * datatype_size(datatype)));
    put<float>(buf, 108, kVoxOffset);
    put<float>(buf, 112, 1.0f);  // scl_slope
    put<float>(buf, 116, 0.0f);  // scl_inter
    std::size_t n = std::min(std::strlen(descrip), std::size_t(79));
    std::memcpy(buf.data() + 148, descrip, n);
    std::memcpy(buf.data() + 344, "n+1\0", 4);
    return buf;
}

void append_payload(std::string& out, const GridInfo& g, std::int16_t dt,
                    const double* plane, const std::int32_t* labels) {
    std::size_t n = g.voxel_count();
    std::size_t start = out.size();
    out.resize(start + n * datatype_size(dt));
    for (std::size_t f = 0; f < n; ++f) {
        std::size_t idx = internal_index(g, f);
        if (dt == kDtFloat32) {
            put<float>(out, start + 4 * f, float(plane[idx]));
        } else if (dt == kDtInt16) {
            put<std::int16_t>(out, start + 2 * f, std::int16_t(labels[idx]));
        } else {
            put<std::uint8_t>(out, start + f, std::uint8_t(labels[idx]));
        }
    }
}

}  // namespace

VolumeFile read_volume(const std::string& path) {
    std::string raw = read_file_bytes(path);
    ParsedHeader h = parse_header(raw, path);
    GridInfo g = grid_from_header(h, path);

    std::size_t base = std::size_t(h.vox_offset);
    if (base < std::size_t(kHeaderSize))
        throw DataError("truncated", path + ": vox_offset points inside the header");
    double slope = (h.scl_slope == 0.0f) ? 1.0 : double(h.scl_slope);
    double inter = double(h.scl_inter);
    std::size_t n = g.voxel_count();

    VolumeFile out;
    if (h.dim[0] == 5) {
        if (h.intent_code != kIntentVector)
            throw DataError("bad_dimension",
                            path + ": 5D file without vector intent code 1007");
        if (h.dim[4] != 1)
            throw DataError("bad_dimension", path + ": dim[4] must be 1 for vector files");
        int d = h.dim[5];
        if (d != g.ndim)
            throw DataError("bad_dimension", path + ": dim[5]=" + std::to_string(d) +
                                                 " does not match spatial dimensionality " +
                                                 std::to_string(g.ndim));
        if (h.datatype != kDtFloat32)
            throw DataError("unsupported_datatype",
                            path + ": vector files must be float32");
        std::size_t need = base + std::size_t(d) * n * 4;
        if (raw.size() < need)
            throw DataError("truncated", path + ": payload shorter than the header promises");
        out.kind = VolumeFile::Kind::Field;
        out.field = DisplacementField(g);
        for (int c = 0; c < d; ++c) {
            double* plane = out.field.component(c);
            std::size_t cbase = base + std::size_t(c) * n * 4;
            for (std::size_t f = 0; f < n; ++f)
                plane[internal_index(g, f)] = decode_at(raw, cbase, h.datatype, f, slope, inter);
        }
        return out;
    }

    std::size_t need = base + n * datatype_size(h.datatype);
    if (raw.size() < need)
        throw DataError("truncated", path + ": payload shorter than the header promises");
    if (h.datatype == kDtFloat32) {
        out.kind = VolumeFile::Kind::Scalar;
        out.scalar = ScalarVolume(g);
        for (std::size_t f = 0; f < n; ++f)
            out.scalar.data[internal_index(g, f)] = decode_at(raw, base, h.datatype, f, slope, inter);
    } else {
        out.kind = VolumeFile::Kind::Labels;
        out.labels = LabelVolume(g);
        for (std::size_t f = 0; f < n; ++f)
            out.labels.data[internal_index(g, f)] =
                std::int32_t(std::lround(decode_at(raw, base, h.datatype, f, slope, inter)));
    }
    return out;
}

ScalarVolume read_scalar(const std::string& path) {
    VolumeFile v = read_volume(path);
    if (v.kind == VolumeFile::Kind::Scalar) return std::move(v.scalar);
    if (v.kind == VolumeFile::Kind::Labels) {
        // Integer-typed image used as an intensity volume: widen to double.
        ScalarVolume s(v.labels.grid);
        for (std::size_t i = 0; i < s.data.size(); ++i) s.data[i] = double(v.labels.data[i]);
        return s;
    }
    throw DataError("bad_dimension", path + ": expected a scalar image, found a vector field");
}

LabelVolume read_labels(const std::string& path) {
    VolumeFile v = read_volume(path);
    if (v.kind != VolumeFile::Kind::Labels)
        throw DataError("unsupported_datatype",
                        path + ": label maps must use an integer datatype (uint8 or int16)");
    return std::move(v.labels);
}

DisplacementField read_field(const std::string& path) {
    VolumeFile v = read_volume(path);
    if (v.kind != VolumeFile::Kind::Field)
        throw DataError("bad_dimension",
                        path + ": expected a 5D vector displacement file (intent 1007)");
    return std::move(v.field);
}

void write_scalar(const std::string& path, const ScalarVolume& vol) {
    std::string buf = header_bytes(vol.grid, kDtFloat32, 0, "regmod scalar volume");
    append_payload(buf, vol.grid, kDtFloat32, vol.data.data(), nullptr);
    write_file_atomic(path, buf);
}

void write_labels(const std::string& path, const LabelVolume& labels) {
    std::string buf = header_bytes(labels.grid, kDtInt16, 0, "regmod label map");
    append_payload(buf, labels.grid, kDtInt16, nullptr, labels.data.data());
    write_file_atomic(path, buf);
}

void write_field(const std::string& path, const DisplacementField& u) {
    std::string buf = header_bytes(u.grid, kDtFloat32, u.components(),
                                   "regmod displacement, voxel units");
    for (int c = 0; c < u.components(); ++c)
        append_payload(buf, u.grid, kDtFloat32, u.component(c), nullptr);
    write_file_atomic(path, buf);
}

// --- landmarks ----------------------------------------------------------

namespace {

std::string strip(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(strip(cell));
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

}  // namespace

LandmarkSet read_landmarks(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing_file", path + ": cannot open");
    LandmarkSet lms;
    std::string line;
    int line_no = 0;
    int columns = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = strip(line);
        if (t.empty() || t[0] == '#') continue;
        auto cells = split_csv(t);
        if (columns == 0) {
            if (cells.size() == 3 && cells[0] == "x" && cells[1] == "y" && cells[2] == "z")
                columns = 3;
            else if (cells.size() == 2 && cells[0] == "x" && cells[1] == "y")
                columns = 2;
            else
                throw DataError("csv_header", path + ": line " + std::to_string(line_no) +
                                                  ": expected header \"x,y,z\" or \"x,y\"");
            continue;
        }
        if (int(cells.size()) != columns)
            throw DataError("csv_ragged", path + ": line " + std::to_string(line_no) + ": got " +
                                              std::to_string(cells.size()) + " fields, expected " +
                                              std::to_string(columns));
        std::array<double, 3> p{0.0, 0.0, 0.0};
        for (int c = 0; c < columns; ++c) {
            std::size_t consumed = 0;
            try {
                p[std::size_t(c)] = std::stod(cells[std::size_t(c)], &consumed);
            } catch (const std::exception&) {
                consumed = 0;
            }
            if (consumed != cells[std::size_t(c)].size() || cells[std::size_t(c)].empty())
                throw DataError("csv_numeric", path + ": line " + std::to_string(line_no) +
                                                   ": non-numeric field \"" +
                                                   cells[std::size_t(c)] + "\"");
        }
        lms.points.push_back(p);
    }
    if (columns == 0 && lms.points.empty() && line_no >= 0) {
        // Comment-only or empty file: an empty set, not an error.
    }
    return lms;
}

void write_landmarks(const std::string& path, const LandmarkSet& lms, int ndim) {
    std::ostringstream out;
    out << (ndim == 2 ? "x,y\n" : "x,y,z\n");
    char buf[128];
    for (const auto& p : lms.points) {
        if (ndim == 2)
            std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", p[0], p[1]);
        else
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p[0], p[1], p[2]);
        out << buf;
    }
    write_file_atomic(path, out.str());
}

// --- bytes / hashing ----------------------------------------------------

std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("missing_file", path + ": cannot open");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("io", tmp + ": cannot open for writing");
        out.write(bytes.data(), std::streamsize(bytes.size()));
        if (!out) throw DataError("io", tmp + ": short write");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw DataError("io", path + ": rename failed: " + ec.message());
}

std::string file_hash(const std::string& path) {
    std::string bytes = read_file_bytes(path);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace regmod
