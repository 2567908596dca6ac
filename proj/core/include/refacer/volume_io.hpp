#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "refacer/image.hpp"

namespace refacer {

enum class Datatype : std::int16_t {
  UInt8 = 2,
  Int16 = 4,
  Float32 = 16,
};

enum class Orientation { RasLike, Unknown };

struct VolumeHeader {
  std::array<std::size_t, 3> dims{1, 1, 1};
  std::array<double, 3> voxel_size{1.0, 1.0, 1.0};
  Datatype datatype = Datatype::Float32;
  double scl_slope = 1.0;
  double scl_inter = 0.0;
  Orientation orientation = Orientation::Unknown;

  std::size_t voxel_count() const noexcept { return dims[0] * dims[1] * dims[2]; }
};

/// Scalar 3D grid. Axis 0 is the sagittal (left-right) axis; storage is
/// row-major, so one sagittal plane is a contiguous dims[1] x dims[2] block.
struct Volume {
  VolumeHeader header;
  std::vector<double> data;

  Volume() = default;
  Volume(VolumeHeader h, std::vector<double> values);
  /// Zero-filled volume of the given geometry.
  Volume(std::array<std::size_t, 3> dims, std::array<double, 3> voxel_size);

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return (i * header.dims[1] + j) * header.dims[2] + k;
  }
  double& at(std::size_t i, std::size_t j, std::size_t k) noexcept { return data[index(i, j, k)]; }
  double at(std::size_t i, std::size_t j, std::size_t k) const noexcept { return data[index(i, j, k)]; }
  const std::array<std::size_t, 3>& dims() const noexcept { return header.dims; }

  /// Throws DimMismatch / NonFinite / InvalidArgument when broken.
  void validate() const;
};

/// Minimal NIfTI-1 single-file reader: little-endian, uncompressed,
/// datatypes uint8/int16/float32, three spatial dimensions.
Volume read_nifti(const std::filesystem::path& path);
Volume parse_nifti(const std::vector<std::uint8_t>& bytes);

/// Always writes float32 with slope 1 and intercept 0.
void write_nifti(const Volume& volume, const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_nifti(const Volume& volume);

inline constexpr std::size_t kNiftiHeaderSize = 348;
inline constexpr std::size_t kNiftiDataOffset = 352;



/// 16-bit binary PGM (P5, maxval 65535, big-endian samples as the format
/// requires); pixel = round(clamp(v / white_level, 0, 1) * 65535).
void write_image_pgm(const SliceImage& image, const std::filesystem::path& path, double white_level);
std::vector<std::uint8_t> encode_pgm(const SliceImage& image, double white_level);

// Small shared helpers for the little-endian binary formats in this project.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace refacer
