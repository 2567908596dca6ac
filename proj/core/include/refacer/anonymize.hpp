#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "refacer/volume_io.hpp"

namespace refacer {

/// Voxels selected for anonymisation. Always confined to the anterior half
/// (columns [0, dims[2] / 2)) of every sagittal plane.
struct FaceMask {
  std::array<std::size_t, 3> dims{0, 0, 0};
  std::vector<std::uint8_t> mask;
  double depth_mm = 0.0;

  FaceMask() = default;
  explicit FaceMask(std::array<std::size_t, 3> d, double depth = 0.0)
      : dims(d), mask(d[0] * d[1] * d[2], 0), depth_mm(depth) {}

  std::size_t count() const noexcept;
  bool matches(const Volume& v) const noexcept { return dims == v.dims() && mask.size() == v.data.size(); }
};

struct AnonymizeDefaults {
  static constexpr double threshold_fraction = 0.15;  // of the 99.5-percentile
  static constexpr double blur_depth_mm = 8.0;
  static constexpr double blur_sigma_vox = 2.0;
  static constexpr double removal_posterior_limit = 0.35;  // fraction of the A-P extent
};

/// 0.15 x the volume's 99.5-percentile intensity.
double default_skin_threshold(const Volume& volume);

/// Column of the skin surface for every (sagittal, row) pair: the anterior-most
/// column in the anterior half whose intensity is >= threshold, or -1.
std::vector<std::ptrdiff_t> skin_surface(const Volume& volume, double threshold);

/// Superficial mask: from the skin surface inwards for round(depth_mm / voxel
/// width along axis 2) voxels (at least one). Throws EmptyHead when no voxel
/// reaches the threshold.
FaceMask compute_face_mask(const Volume& volume, double depth_mm, double threshold);

/// Deep mask used for face removal: from the skin surface back to column
/// floor(posterior_limit * dims[2]) (never beyond the anterior half).
FaceMask compute_removal_mask(const Volume& volume, double threshold,
                              double posterior_limit = AnonymizeDefaults::removal_posterior_limit);

/// Zeroes masked voxels; everything else is copied bit-for-bit.
Volume remove_face(const Volume& volume, const FaceMask& mask);

/// Replaces masked voxels with a separable Gaussian blur of the whole volume
/// (radius ceil(3 sigma), mirror boundary, unit-sum kernel).
Volume blur_face(const Volume& volume, const FaceMask& mask, double sigma_vox);

/// Normalised 1D Gaussian taps, length 2 * ceil(3 sigma) + 1.
std::vector<double> gaussian_kernel(double sigma);

/// Mirror index without edge repetition: -1 -> 1, n -> n - 2.
std::size_t reflect_index(std::ptrdiff_t t, std::size_t n) noexcept;

}  // namespace refacer
