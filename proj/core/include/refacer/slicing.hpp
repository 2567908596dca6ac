#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "refacer/image.hpp"
#include "refacer/volume_io.hpp"

namespace refacer {

struct SliceSpec {
  std::size_t count = 21;
  double span_fraction = 0.6;  // centred fraction of the sagittal extent
};

/// Linear-interpolated percentile on the sorted data: rank p/100 * (n - 1).
double percentile(std::span<const double> values, double p);

/// Sagittal indices used by extract_slices, in increasing order: count 1 gives
/// floor(D / 2); otherwise count evenly spaced points from D (1 - span) / 2 to
/// D (1 + span) / 2 - 1, rounded half up and deduplicated.
std::vector<std::size_t> slice_positions(std::size_t sagittal_dim, const SliceSpec& spec);

/// One image per position; image rows follow axis 1, columns axis 2.
std::vector<SliceImage> extract_slices(const Volume& volume, const SliceSpec& spec,
                                       std::int64_t subject_id = 0, DomainTag domain = DomainTag::Original);

/// Divisor applied by normalize_subject: the 99.5-percentile of the reference
/// volume. Throws DegenerateVolume when it is not positive.
double normalization_divisor(const Volume& reference);

/// Divides every pixel by normalization_divisor(reference). The reference is
/// the subject's original volume for all three domains. No clipping.
std::vector<SliceImage> normalize_subject(std::vector<SliceImage> slices, const Volume& reference);

/// Square resample: block averaging for exact integer shrink factors,
/// bilinear (pixel-centre aligned) otherwise.
SliceImage resample_to(const SliceImage& image, std::size_t size);

/// On-disk slice set: "RFSL", u32 version, u32 count, u32 height, u32 width,
/// then count*height*width little-endian float32 pixels; plus a CSV index
/// (subject_id,slice_index,offset) with byte offsets into the binary file.
struct SliceDataset {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<SliceImage> images;
};

inline constexpr std::uint32_t kSliceFileVersion = 1;
inline constexpr const char* kSliceFileName = "slices.rfsl";
inline constexpr const char* kSliceIndexName = "slices.csv";

std::vector<std::uint8_t> encode_slice_file(const SliceDataset& dataset);
SliceDataset decode_slice_file(const std::vector<std::uint8_t>& bytes, DomainTag domain = DomainTag::Original);

/// Writes slices.rfsl and slices.csv into `dir` (created if missing).
void write_slice_dataset(const SliceDataset& dataset, const std::filesystem::path& dir);
/// Reads both files; subject/slice ids come from the CSV index.
SliceDataset read_slice_dataset(const std::filesystem::path& dir, DomainTag domain = DomainTag::Original);

}  // namespace refacer
