#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "refacer/image.hpp"

namespace refacer {

/// Columns [0, floor(W/2)) when the face is at column 0; the mirrored half
/// [W - floor(W/2), W) when `anterior_at_right` is set.
SliceImage front_half(const SliceImage& image, bool anterior_at_right = false);

/// Pearson correlation over all pixels. ZeroVariance when both images are
/// constant; 0 when exactly one is.
double pearson(const SliceImage& a, const SliceImage& b);

struct SsimParams {
  std::size_t window_size = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 1.0;

  void validate() const;
};

/// Normalised 1D Gaussian window; the 2D window is its outer product.
std::vector<double> ssim_window(const SsimParams& params);

/// Mean SSIM over every window position fully inside both images.
double ssim(const SliceImage& a, const SliceImage& b, const SsimParams& params = {});

enum class PairKind { AnonVsOrig, ReconVsOrig };
std::string_view to_string(PairKind kind) noexcept;

struct MetricsRow {
  std::int64_t subject_id = 0;
  std::int64_t slice_index = 0;
  PairKind pair_kind = PairKind::AnonVsOrig;
  double correlation = 0.0;
  double ssim = 0.0;
  std::size_t crop_width = 0;
  std::string group;
};

struct MetricsMean {
  double correlation = 0.0;
  double ssim = 0.0;
  std::size_t count = 0;
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
  std::map<PairKind, MetricsMean> means;
  /// (group, pair kind) -> mean; groups come from EvaluateOptions::group_of.
  std::map<std::pair<std::string, PairKind>, MetricsMean> group_means;

  std::string to_csv() const;
  std::string summary_csv() const;
};

struct SliceTriple {
  SliceImage original;
  SliceImage anonymized;
  SliceImage reconstructed;
};

struct EvaluateOptions {
  SsimParams ssim;
  bool anterior_at_right = false;
  unsigned threads = 1;
  std::function<std::string(std::int64_t subject_id)> group_of;
};

/// Both pair kinds for every triple, computed on front-half crops.
MetricsReport evaluate(const std::vector<SliceTriple>& triples, const EvaluateOptions& options = {});

/// Matches the three sets on (subject_id, slice_index); IncompleteTriple when
/// an original has no anonymized or reconstructed partner (or vice versa).
std::vector<SliceTriple> match_triples(const std::vector<SliceImage>& original,
                                       const std::vector<SliceImage>& anonymized,
                                       const std::vector<SliceImage>& reconstructed);

/// Grid of equally sized images: one output row per input row.
SliceImage make_montage(const std::vector<std::vector<const SliceImage*>>& grid);

}  // namespace refacer
