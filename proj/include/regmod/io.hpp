// File formats: a minimal little-endian NIfTI-1 subset (scalar volumes,
// label maps, vector displacement fields), CSV landmark lists, atomic file
// writes and content hashing for run manifests.
#pragma once

#include "regmod/volume.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>

namespace regmod {

// A malformed or unsupported input file. `code` is a stable machine-readable
// tag: bad_magic, unsupported_endianness, unsupported_datatype, truncated,
// bad_dimension, csv_header, csv_ragged, csv_numeric, missing_file, io.
struct DataError : std::runtime_error {
    std::string code;
    DataError(std::string c, const std::string& msg)
        : std::runtime_error(msg), code(std::move(c)) {}
};

struct VolumeFile {
    enum class Kind { Scalar, Labels, Field };
    Kind kind = Kind::Scalar;
    ScalarVolume scalar;
    LabelVolume labels;
    DisplacementField field;
};

// Single-file ("n+1") NIfTI-1, little-endian only, datatypes uint8 / int16 /
// float32. 3D (or 2D) files load as scalar or label volumes by datatype;
// 5D files with dim[4]=1, dim[5]=d and intent code 1007 load as displacement
// fields with d components in voxel units.
VolumeFile read_volume(const std::string& path);

// Coercing convenience wrappers; labels additionally accept float payloads
// that happen to hold integers are NOT allowed — datatype decides.
ScalarVolume read_scalar(const std::string& path);
LabelVolume read_labels(const std::string& path);
DisplacementField read_field(const std::string& path);

// float32 payload; spacing goes to pixdim.
void write_scalar(const std::string& path, const ScalarVolume& vol);
// int16 payload.
void write_labels(const std::string& path, const LabelVolume& labels);
// float32 5D vector file, intent 1007, components in voxel units (noted in
// the header description field).
void write_field(const std::string& path, const DisplacementField& u);

// CSV with header `x,y,z` (or `x,y`), '#' comments, voxel coordinates.
LandmarkSet read_landmarks(const std::string& path);
void write_landmarks(const std::string& path, const LandmarkSet& lms, int ndim);

// Whole-file FNV-1a 64-bit hash, rendered as 16 hex digits.
std::string file_hash(const std::string& path);

// Write to `path.tmp` then rename over `path`.
void write_file_atomic(const std::string& path, const std::string& bytes);
std::string read_file_bytes(const std::string& path);

}  // namespace regmod
