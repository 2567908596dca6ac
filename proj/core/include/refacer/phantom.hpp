#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "refacer/rng.hpp"
#include "refacer/volume_io.hpp"

namespace refacer {

/// Facial and cranial shape parameters of one synthetic subject. Lengths
/// are fractions of the image extent; angles are degrees.
struct FaceParams {
  double nose_length = 0.12;
  double nose_angle = 0.0;
  double lip_protrusion = 0.03;
  double chin_extent = 0.04;
  double forehead_slope = 0.0;
  std::array<double, 2> skull_axes{0.33, 0.26};  // rows (S-I), columns (A-P)
  std::uint64_t texture_seed = 0;
};

struct FaceParamRanges {
  static constexpr double nose_length_min = 0.05, nose_length_max = 0.20;
  static constexpr double nose_angle_min = -20.0, nose_angle_max = 20.0;
  static constexpr double lip_min = 0.0, lip_max = 0.06;
  static constexpr double chin_min = 0.0, chin_max = 0.08;
  static constexpr double forehead_min = -0.15, forehead_max = 0.15;
  static constexpr double skull_rows_min = 0.30, skull_rows_max = 0.36;
  static constexpr double skull_cols_min = 0.24, skull_cols_max = 0.28;
};

bool within_ranges(const FaceParams& p) noexcept;

/// Tissue levels before normalisation.
struct TissueLevels {
  static constexpr double skull = 1.1;
  static constexpr double scalp = 0.8;
  static constexpr double face_soft = 0.8;
  static constexpr double face_bone = 1.0;
  static constexpr double brain_mean = 0.5;
  static constexpr double brain_std = 0.15;
  static constexpr double max_intensity = 1.2;
};

struct PhantomOptions {
  /// Zero everything anterior to this fraction of the A-P extent, mimicking
  /// heads cut against the field of view. 0 disables.
  double boundary_cut = 0.0;
  /// Physical extent of the in-plane field of view; voxel sizes follow from dims.
  double fov_sagittal_mm = 180.0;
  double fov_inplane_mm = 240.0;
};

struct PhantomSubject {
  std::int64_t subject_id = 0;
  FaceParams params;
  Volume volume;
};

/// Consumes draws from `rng` in field order; each field uniform on its range.
FaceParams sample_face_params(Rng& rng);

/// Dims are (sagittal, rows, columns), each >= 32. Texture noise comes from `rng`.
Volume render_phantom(const FaceParams& params, std::array<std::size_t, 3> dims, Rng& rng,
                      const PhantomOptions& options = {});

/// Subject `first_id + i` is drawn from Rng::for_stream(master_seed, first_id + i):
/// parameters are sampled from that stream and texture noise from
/// Rng(params.texture_seed). Output does not depend on `threads`.
std::vector<PhantomSubject> generate_cohort(std::size_t n_subjects, std::array<std::size_t, 3> dims,
                                            std::uint64_t master_seed, std::int64_t first_id = 0,
                                            const PhantomOptions& options = {}, unsigned threads = 1);

PhantomSubject generate_subject(std::int64_t subject_id, std::array<std::size_t, 3> dims,
                                std::uint64_t master_seed, const PhantomOptions& options = {});

/// Brain-interior indicator of a rendered phantom (same geometry rules as
/// render_phantom); used to check that face masks stay clear of the brain.
std::vector<bool> brain_region(const FaceParams& params, std::array<std::size_t, 3> dims);

}  // namespace refacer
