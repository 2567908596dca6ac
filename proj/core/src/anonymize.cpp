#include "refacer/anonymize.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "refacer/error.hpp"
#include "refacer/slicing.hpp"

namespace refacer {

namespace {

void require_match(const Volume& volume, const FaceMask& mask) {
  if (!mask.matches(volume)) throw Error(ErrorKind::DimMismatch, "mask dims do not match volume dims");
}

// Blur along one axis; `src` and `dst` are distinct row-major grids.
void gaussian_axis(const std::vector<double>& src, std::vector<double>& dst, const std::array<std::size_t, 3>& dims,
                   int axis, const std::vector<double>& taps) {
  const std::size_t n = dims[axis];
  const std::size_t stride = axis == 0 ? dims[1] * dims[2] : (axis == 1 ? dims[2] : 1);
  const auto radius = static_cast<std::ptrdiff_t>(taps.size() / 2);
  for (std::size_t i = 0; i < dims[0]; ++i) {
    for (std::size_t j = 0; j < dims[1]; ++j) {
      for (std::size_t k = 0; k < dims[2]; ++k) {
        const std::size_t idx = (i * dims[1] + j) * dims[2] + k;
        const std::size_t pos = axis == 0 ? i : (axis == 1 ? j : k);
        const std::size_t line_base = idx - pos * stride;
        double acc = 0.0;
        for (std::ptrdiff_t o = -radius; o <= radius; ++o) {
          const std::size_t at = reflect_index(static_cast<std::ptrdiff_t>(pos) + o, n);
          acc += taps[static_cast<std::size_t>(o + radius)] * src[line_base + at * stride];
        }
        dst[idx] = acc;
      }
    }
  }
}

}  // namespace

std::size_t FaceMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

double default_skin_threshold(const Volume& volume) {
  return AnonymizeDefaults::threshold_fraction * percentile(volume.data, 99.5);
}

std::vector<std::ptrdiff_t> skin_surface(const Volume& volume, double threshold) {
  const auto& d = volume.dims();
  const std::size_t half = d[2] / 2;
  std::vector<std::ptrdiff_t> surface(d[0] * d[1], -1);
  for (std::size_t i = 0; i < d[0]; ++i) {
    for (std::size_t j = 0; j < d[1]; ++j) {
      for (std::size_t k = 0; k < half; ++k) {
        if (volume.at(i, j, k) >= threshold) {
          surface[i * d[1] + j] = static_cast<std::ptrdiff_t>(k);
          break;
        }
      }
    }
  }
  return surface;
}

namespace {

FaceMask mask_from_surface(const Volume& volume, double threshold, double depth_mm,
                           const std::function<std::size_t(std::size_t)>& end_column) {
  if (!(threshold > 0.0)) throw Error(ErrorKind::InvalidArgument, "threshold must be > 0");
  const bool any = std::any_of(volume.data.begin(), volume.data.end(), [&](double v) { return v >= threshold; });
  if (!any) throw Error(ErrorKind::EmptyHead, "no voxel reaches the skin threshold");

  const auto& d = volume.dims();
  const std::size_t half = d[2] / 2;
  FaceMask mask(d, depth_mm);
  const auto surface = skin_surface(volume, threshold);
  for (std::size_t i = 0; i < d[0]; ++i) {
    for (std::size_t j = 0; j < d[1]; ++j) {
      const std::ptrdiff_t s = surface[i * d[1] + j];
      if (s < 0) continue;
      const auto start = static_cast<std::size_t>(s);
      const std::size_t stop = std::min(end_column(start), half);
      for (std::size_t k = start; k < stop; ++k) mask.mask[volume.index(i, j, k)] = 1;
    }
  }
  return mask;
}

}  // namespace

FaceMask compute_face_mask(const Volume& volume, double depth_mm, double threshold) {
  if (!(depth_mm > 0.0)) throw Error(ErrorKind::InvalidArgument, "depth_mm must be > 0");
  const auto depth_vox =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(depth_mm / volume.header.voxel_size[2])));
  return mask_from_surface(volume, threshold, depth_mm, [&](std::size_t start) { return start + depth_vox; });
}

FaceMask compute_removal_mask(const Volume& volume, double threshold, double posterior_limit) {
  if (!(posterior_limit > 0.0 && posterior_limit <= 0.5))
    throw Error(ErrorKind::InvalidArgument, "posterior limit must be in (0, 0.5]");
  const auto limit = static_cast<std::size_t>(std::floor(posterior_limit * static_cast<double>(volume.dims()[2])));
  const double depth_mm = static_cast<double>(limit) * volume.header.voxel_size[2];
  return mask_from_surface(volume, threshold, depth_mm, [&](std::size_t) { return limit; });
}

Volume remove_face(const Volume& volume, const FaceMask& mask) {
  require_match(volume, mask);
  Volume out = volume;
  for (std::size_t idx = 0; idx < out.data.size(); ++idx)
    if (mask.mask[idx]) out.data[idx] = 0.0;
  return out;
}

std::size_t reflect_index(std::ptrdiff_t t, std::size_t n) noexcept {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  t %= period;
  if (t < 0) t += period;
  if (t >= static_cast<std::ptrdiff_t>(n)) t = period - t;
  return static_cast<std::size_t>(t);
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorKind::InvalidArgument, "sigma must be > 0");
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (std::ptrdiff_t o = -radius; o <= radius; ++o) {
    const double w = std::exp(-0.5 * static_cast<double>(o * o) / (sigma * sigma));
    taps[static_cast<std::size_t>(o + radius)] = w;
    total += w;
  }
  for (auto& w : taps) w /= total;
  return taps;
}

Volume blur_face(const Volume& volume, const FaceMask& mask, double sigma_vox) {
  require_match(volume, mask);
  const auto taps = gaussian_kernel(sigma_vox);
  const auto& d = volume.dims();
  std::vector<double> a = volume.data, b(volume.data.size());
  gaussian_axis(a, b, d, 2, taps);
  gaussian_axis(b, a, d, 1, taps);
  gaussian_axis(a, b, d, 0, taps);

  Volume out = volume;
  for (std::size_t idx = 0; idx < out.data.size(); ++idx)
    if (mask.mask[idx]) out.data[idx] = b[idx];
  return out;
}

}  // namespace refacer
