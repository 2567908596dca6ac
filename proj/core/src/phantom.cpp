#include "refacer/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "refacer/error.hpp"
#include "refacer/parallel.hpp"

namespace refacer {

namespace {

using R = FaceParamRanges;

enum class Tissue : std::uint8_t { Background, Scalp, Skull, Brain, FaceSoft, FaceBone };

// Head layout in normalised coordinates: y = row position in [0, 1)
// (superior at 0), x = column position in [0, 1) (anterior at 0),
// u = lateral position in (-1, 1) (midline at 0).
constexpr double kCraniumRow = 0.40;
constexpr double kCraniumCol = 0.58;
constexpr double kLateralExtent = 0.85;
constexpr double kScalpThickness = 0.025;
constexpr double kBrainInset = 0.06;
constexpr double kFaceTop = 0.42;
constexpr double kFaceBottom = 0.86;
constexpr double kFacePlane = 0.26;
constexpr double kNoseHalfWidth = 0.35;
constexpr double kFaceHalfWidth = 0.70;

double sq(double v) { return v * v; }

// Piecewise-linear bump: 0 at `start`, 1 at `peak`, 0 at `end`.
double tent(double y, double start, double peak, double end) {
  if (y <= start || y >= end) return 0.0;
  return y <= peak ? (y - start) / (peak - start) : (end - y) / (end - peak);
}

double smooth_bump(double y, double start, double end) {
  if (y <= start || y >= end) return 0.0;
  return std::sin(std::numbers::pi * (y - start) / (end - start));
}

struct SliceGeometry {
  double lateral_scale;  // cranium cross-section shrink at this sagittal position
  double nose_weight;
  double face_weight;
};

SliceGeometry slice_geometry(double u) {
  SliceGeometry g{};
  g.lateral_scale = std::sqrt(std::max(0.0, 1.0 - sq(u / kLateralExtent)));
  g.nose_weight = std::max(0.0, 1.0 - sq(u / kNoseHalfWidth));
  g.face_weight = std::max(0.0, 1.0 - sq(u / kFaceHalfWidth));
  return g;
}

// Anterior protrusion (fraction of width) of the facial profile at row y,
// measured forward from the face plane.
double face_protrusion(const FaceParams& p, const SliceGeometry& g, double y) {
  const double angle = p.nose_angle * std::numbers::pi / 180.0;
  const double nose_reach = p.nose_length * std::cos(angle);
  const double tip_row = 0.60 + 0.5 * p.nose_length * std::sin(angle);
  const double nose = nose_reach * tent(y, 0.48, tip_row, 0.645);
  const double lips = p.lip_protrusion * smooth_bump(y, 0.655, 0.745);
  const double chin = p.chin_extent * smooth_bump(y, 0.755, kFaceBottom);
  return g.nose_weight * nose + g.face_weight * (lips + chin);
}

Tissue classify(const FaceParams& p, const SliceGeometry& g, double y, double x) {
  const double s = g.lateral_scale;
  if (s <= 0.0) return Tissue::Background;

  const double ar = p.skull_axes[0] * s;
  const double ac = p.skull_axes[1] * s;
  auto inside = [&](double inset) {
    const double a = ar - inset, c = ac - inset;
    if (a <= 0.0 || c <= 0.0) return false;
    return sq((y - kCraniumRow) / a) + sq((x - kCraniumCol) / c) < 1.0;
  };
  if (inside(kBrainInset)) return Tissue::Brain;
  if (inside(kScalpThickness)) return Tissue::Skull;
  if (inside(0.0)) return Tissue::Scalp;

  // Forehead soft tissue sits in front of the upper cranium.
  const double cranium_front = kCraniumCol - ac;
  if (y >= 0.22 && y < kFaceTop && g.face_weight > 0.0) {
    const double thickness = g.face_weight * std::max(0.0, 0.03 + p.forehead_slope * (y - 0.32));
    const double half_height = ar * std::sqrt(std::max(0.0, 1.0 - sq((x - kCraniumCol) / ac)));
    if (x >= cranium_front - thickness && x < kCraniumCol && std::abs(y - kCraniumRow) <= half_height + thickness)
      return Tissue::FaceSoft;
  }

  if (y >= kFaceTop && y < kFaceBottom && g.face_weight > 0.0) {
    const double plane = kFacePlane + 0.25 * (1.0 - g.face_weight);
    const double front = plane - face_protrusion(p, g, y);
    if (x >= front && x < kCraniumCol) {
      const bool bone_rows = y >= 0.45 && y < 0.84;
      if (bone_rows && x >= plane + 0.03 && x < plane + 0.06) return Tissue::FaceBone;
      return Tissue::FaceSoft;
    }
  }

  // Neck, posterior to the face.
  if (y >= 0.70 && x >= 0.50 && x < 0.80 && s > 0.3) return Tissue::FaceSoft;
  return Tissue::Background;
}

// Separable box blur with clamped borders along one axis of a row-major grid.
void box_blur_axis(std::vector<double>& v, const std::array<std::size_t, 3>& dims, int axis, std::size_t radius) {
  const std::size_t n = dims[axis];
  const std::size_t stride = axis == 0 ? dims[1] * dims[2] : (axis == 1 ? dims[2] : 1);
  std::vector<std::size_t> bases;
  bases.reserve(v.size() / n);
  for (std::size_t i = 0; i < (axis == 0 ? 1 : dims[0]); ++i)
    for (std::size_t j = 0; j < (axis == 1 ? 1 : dims[1]); ++j)
      for (std::size_t k = 0; k < (axis == 2 ? 1 : dims[2]); ++k) bases.push_back((i * dims[1] + j) * dims[2] + k);

  const auto last = static_cast<std::ptrdiff_t>(n) - 1;
  const auto r = static_cast<std::ptrdiff_t>(radius);
  const double norm = 1.0 / static_cast<double>(2 * radius + 1);
  std::vector<double> line(n);
  for (std::size_t base : bases) {
    for (std::size_t t = 0; t < n; ++t) line[t] = v[base + t * stride];
    for (std::ptrdiff_t t = 0; t <= last; ++t) {
      double acc = 0.0;
      for (std::ptrdiff_t o = -r; o <= r; ++o) acc += line[static_cast<std::size_t>(std::clamp(t + o, std::ptrdiff_t{0}, last))];
      v[base + static_cast<std::size_t>(t) * stride] = acc * norm;
    }
  }
}

std::vector<double> brain_texture(const std::array<std::size_t, 3>& dims, Rng& rng) {
  const std::size_t count = dims[0] * dims[1] * dims[2];
  std::vector<double> noise(count);
  for (auto& value : noise) value = rng.uniform01();
  const std::size_t radius = std::max<std::size_t>(1, std::min({dims[0], dims[1], dims[2]}) / 32);
  for (int pass = 0; pass < 3; ++pass)
    for (int axis = 0; axis < 3; ++axis) box_blur_axis(noise, dims, axis, radius);

  double mean = 0.0;
  for (double value : noise) mean += value;
  mean /= static_cast<double>(count);
  double var = 0.0;
  for (double value : noise) var += sq(value - mean);
  const double sd = std::sqrt(var / static_cast<double>(count));
  for (auto& value : noise) {
    const double z = sd > 0.0 ? (value - mean) / sd : 0.0;
    value = std::clamp(TissueLevels::brain_mean + TissueLevels::brain_std * z, 0.1, 0.9);
  }
  return noise;
}

void check_dims(const std::array<std::size_t, 3>& dims) {
  for (std::size_t d : dims)
    if (d < 32) throw Error(ErrorKind::DimsTooSmall, "phantom dims must be >= 32 per axis, got " + std::to_string(d));
}

template <typename Fn>
void for_each_voxel(const std::array<std::size_t, 3>& dims, Fn&& fn) {
  for (std::size_t i = 0; i < dims[0]; ++i) {
    const double u = ((static_cast<double>(i) + 0.5) / static_cast<double>(dims[0]) - 0.5) * 2.0;
    const SliceGeometry g = slice_geometry(u);
    for (std::size_t j = 0; j < dims[1]; ++j) {
      const double y = (static_cast<double>(j) + 0.5) / static_cast<double>(dims[1]);
      for (std::size_t k = 0; k < dims[2]; ++k) {
        const double x = (static_cast<double>(k) + 0.5) / static_cast<double>(dims[2]);
        fn((i * dims[1] + j) * dims[2] + k, g, y, x);
      }
    }
  }
}

}  // namespace

bool within_ranges(const FaceParams& p) noexcept {
  auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
  return in(p.nose_length, R::nose_length_min, R::nose_length_max) &&
         in(p.nose_angle, R::nose_angle_min, R::nose_angle_max) &&
         in(p.lip_protrusion, R::lip_min, R::lip_max) && in(p.chin_extent, R::chin_min, R::chin_max) &&
         in(p.forehead_slope, R::forehead_min, R::forehead_max) &&
         in(p.skull_axes[0], R::skull_rows_min, R::skull_rows_max) &&
         in(p.skull_axes[1], R::skull_cols_min, R::skull_cols_max);
}

FaceParams sample_face_params(Rng& rng) {
  FaceParams p;
  p.nose_length = rng.uniform(R::nose_length_min, R::nose_length_max);
  p.nose_angle = rng.uniform(R::nose_angle_min, R::nose_angle_max);
  p.lip_protrusion = rng.uniform(R::lip_min, R::lip_max);
  p.chin_extent = rng.uniform(R::chin_min, R::chin_max);
  p.forehead_slope = rng.uniform(R::forehead_min, R::forehead_max);
  p.skull_axes[0] = rng.uniform(R::skull_rows_min, R::skull_rows_max);
  p.skull_axes[1] = rng.uniform(R::skull_cols_min, R::skull_cols_max);
  p.texture_seed = rng.next_u64();
  return p;
}

Volume render_phantom(const FaceParams& params, std::array<std::size_t, 3> dims, Rng& rng,
                      const PhantomOptions& options) {
  check_dims(dims);
  const std::vector<double> texture = brain_texture(dims, rng);

  Volume volume(dims, {options.fov_sagittal_mm / static_cast<double>(dims[0]),
                       options.fov_inplane_mm / static_cast<double>(dims[1]),
                       options.fov_inplane_mm / static_cast<double>(dims[2])});
  volume.header.orientation = Orientation::RasLike;
  for_each_voxel(dims, [&](std::size_t idx, const SliceGeometry& g, double y, double x) {
    if (options.boundary_cut > 0.0 && x < options.boundary_cut) return;
    switch (classify(params, g, y, x)) {
      case Tissue::Background: break;
      case Tissue::Scalp: volume.data[idx] = TissueLevels::scalp; break;
      case Tissue::Skull: volume.data[idx] = TissueLevels::skull; break;
      case Tissue::Brain: volume.data[idx] = texture[idx]; break;
      case Tissue::FaceSoft: volume.data[idx] = TissueLevels::face_soft; break;
      case Tissue::FaceBone: volume.data[idx] = TissueLevels::face_bone; break;
    }
  });
  return volume;
}

std::vector<bool> brain_region(const FaceParams& params, std::array<std::size_t, 3> dims) {
  check_dims(dims);
  std::vector<bool> brain(dims[0] * dims[1] * dims[2], false);
  for_each_voxel(dims, [&](std::size_t idx, const SliceGeometry& g, double y, double x) {
    brain[idx] = classify(params, g, y, x) == Tissue::Brain;
  });
  return brain;
}

PhantomSubject generate_subject(std::int64_t subject_id, std::array<std::size_t, 3> dims,
                                std::uint64_t master_seed, const PhantomOptions& options) {
  Rng stream = Rng::for_stream(master_seed, static_cast<std::uint64_t>(subject_id));
  PhantomSubject subject;
  subject.subject_id = subject_id;
  subject.params = sample_face_params(stream);
  Rng texture_rng(subject.params.texture_seed);
  subject.volume = render_phantom(subject.params, dims, texture_rng, options);
  return subject;
}

std::vector<PhantomSubject> generate_cohort(std::size_t n_subjects, std::array<std::size_t, 3> dims,
                                            std::uint64_t master_seed, std::int64_t first_id,
                                            const PhantomOptions& options, unsigned threads) {
  if (n_subjects < 1) throw Error(ErrorKind::InvalidArgument, "cohort needs at least one subject");
  check_dims(dims);
  std::vector<PhantomSubject> cohort(n_subjects);
  parallel_for(n_subjects, threads, [&](std::size_t i) {
    cohort[i] = generate_subject(first_id + static_cast<std::int64_t>(i), dims, master_seed, options);
  });
  return cohort;
}

}  // namespace refacer
