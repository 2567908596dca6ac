#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace refacer {

enum class DomainTag { Original, Blurred, Removed, Reconstructed };

std::string_view to_string(DomainTag tag) noexcept;
/// Accepts the names produced by to_string plus the CLI aliases "blur"/"remove".
DomainTag parse_domain_tag(std::string_view name);

/// One 2D grayscale slice, row-major, rows = volume axis 1, columns = volume
/// axis 2 with the anterior (face) side at column 0.
struct SliceImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pixels;
  std::int64_t subject_id = 0;
  std::int64_t slice_index = 0;
  DomainTag domain = DomainTag::Original;

  SliceImage() = default;
  SliceImage(std::size_t w, std::size_t h, double fill = 0.0)
      : width(w), height(h), pixels(w * h, fill) {}

  double& at(std::size_t row, std::size_t col) noexcept { return pixels[row * width + col]; }
  double at(std::size_t row, std::size_t col) const noexcept { return pixels[row * width + col]; }
};

}  // namespace refacer
