#include "refacer/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "refacer/error.hpp"
#include "refacer/parallel.hpp"

namespace refacer {

namespace {

void require_same_dims(const SliceImage& a, const SliceImage& b) {
  if (a.width != b.width || a.height != b.height)
    throw Error(ErrorKind::DimMismatch, std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                                            std::to_string(b.width) + "x" + std::to_string(b.height));
}

// Valid-mode separable filter: rows first, then columns.
std::vector<double> filter_valid(const std::vector<double>& img, std::size_t h, std::size_t w,
                                 const std::vector<double>& taps) {
  const std::size_t k = taps.size();
  const std::size_t oh = h - k + 1, ow = w - k + 1;
  std::vector<double> horiz(h * ow);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += taps[t] * img[r * w + c + t];
      horiz[r * ow + c] = acc;
    }
  std::vector<double> out(oh * ow);
  for (std::size_t r = 0; r < oh; ++r)
    for (std::size_t c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += taps[t] * horiz[(r + t) * ow + c];
      out[r * ow + c] = acc;
    }
  return out;
}

}  // namespace

SliceImage front_half(const SliceImage& image, bool anterior_at_right) {
  const std::size_t half = image.width / 2;
  const std::size_t first = anterior_at_right ? image.width - half : 0;
  SliceImage out(half, image.height);
  out.subject_id = image.subject_id;
  out.slice_index = image.slice_index;
  out.domain = image.domain;
  for (std::size_t r = 0; r < image.height; ++r)
    for (std::size_t c = 0; c < half; ++c) out.at(r, c) = image.at(r, first + c);
  return out;
}

double pearson(const SliceImage& a, const SliceImage& b) {
  require_same_dims(a, b);
  if (a.pixels.empty()) throw Error(ErrorKind::EmptyInput, "pearson of empty images");
  // Single pass with running co-moments.
  double mean_a = 0.0, mean_b = 0.0, m2_a = 0.0, m2_b = 0.0, co = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double n = static_cast<double>(i + 1);
    const double da = a.pixels[i] - mean_a;
    const double db = b.pixels[i] - mean_b;
    mean_a += da / n;
    mean_b += db / n;
    m2_a += da * (a.pixels[i] - mean_a);
    m2_b += db * (b.pixels[i] - mean_b);
    co += da * (b.pixels[i] - mean_b);
  }
  const bool const_a = std::all_of(a.pixels.begin(), a.pixels.end(), [&](double v) { return v == a.pixels[0]; });
  const bool const_b = std::all_of(b.pixels.begin(), b.pixels.end(), [&](double v) { return v == b.pixels[0]; });
  if (const_a && const_b) throw Error(ErrorKind::ZeroVariance, "both images are constant");
  if (const_a || const_b) return 0.0;
  return std::clamp(co / std::sqrt(m2_a * m2_b), -1.0, 1.0);
}

void SsimParams::validate() const {
  if (window_size < 1 || window_size % 2 == 0) throw Error(ErrorKind::InvalidArgument, "SSIM window size must be odd");
  if (!(sigma > 0.0) || !(k1 > 0.0) || !(k2 > 0.0) || !(data_range > 0.0))
    throw Error(ErrorKind::InvalidArgument, "SSIM sigma, k1, k2 and data_range must be > 0");
}

std::vector<double> ssim_window(const SsimParams& params) {
  params.validate();
  std::vector<double> taps(params.window_size);
  const double centre = static_cast<double>(params.window_size / 2);
  double total = 0.0;
  for (std::size_t i = 0; i < taps.size(); ++i) {
    const double d = static_cast<double>(i) - centre;
    taps[i] = std::exp(-d * d / (2.0 * params.sigma * params.sigma));
    total += taps[i];
  }
  for (auto& t : taps) t /= total;
  return taps;
}

double ssim(const SliceImage& a, const SliceImage& b, const SsimParams& params) {
  require_same_dims(a, b);
  const auto taps = ssim_window(params);
  if (a.height < params.window_size || a.width < params.window_size)
    throw Error(ErrorKind::TooSmall, "image smaller than the SSIM window");
  const std::size_t h = a.height, w = a.width;
  std::vector<double> aa(a.pixels.size()), bb(a.pixels.size()), ab(a.pixels.size());
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    aa[i] = a.pixels[i] * a.pixels[i];
    bb[i] = b.pixels[i] * b.pixels[i];
    ab[i] = a.pixels[i] * b.pixels[i];
  }
  const auto mu_a = filter_valid(a.pixels, h, w, taps);
  const auto mu_b = filter_valid(b.pixels, h, w, taps);
  const auto e_aa = filter_valid(aa, h, w, taps);
  const auto e_bb = filter_valid(bb, h, w, taps);
  const auto e_ab = filter_valid(ab, h, w, taps);
  const double c1 = (params.k1 * params.data_range) * (params.k1 * params.data_range);
  const double c2 = (params.k2 * params.data_range) * (params.k2 * params.data_range);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
    const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
    const double cov = e_ab[i] - mu_a[i] * mu_b[i];
    const double num = (2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2);
    const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (var_a + var_b + c2);
    total += num / den;
  }
  return total / static_cast<double>(mu_a.size());
}

std::string_view to_string(PairKind kind) noexcept {
  return kind == PairKind::AnonVsOrig ? "anon_vs_orig" : "recon_vs_orig";
}

MetricsReport evaluate(const std::vector<SliceTriple>& triples, const EvaluateOptions& options) {
  options.ssim.validate();
  MetricsReport report;
  report.rows.resize(2 * triples.size());
  parallel_for(triples.size(), options.threads, [&](std::size_t i) {
    const SliceTriple& t = triples[i];
    require_same_dims(t.original, t.anonymized);
    require_same_dims(t.original, t.reconstructed);
    const SliceImage orig = front_half(t.original, options.anterior_at_right);
    const SliceImage anon = front_half(t.anonymized, options.anterior_at_right);
    const SliceImage recon = front_half(t.reconstructed, options.anterior_at_right);
    const std::string group = options.group_of ? options.group_of(t.original.subject_id) : std::string("all");
    auto fill = [&](MetricsRow& row, PairKind kind, const SliceImage& other) {
      row.subject_id = t.original.subject_id;
      row.slice_index = t.original.slice_index;
      row.pair_kind = kind;
      row.correlation = pearson(other, orig);
      row.ssim = ssim(other, orig, options.ssim);
      row.crop_width = orig.width;
      row.group = group;
    };
    fill(report.rows[2 * i], PairKind::AnonVsOrig, anon);
    fill(report.rows[2 * i + 1], PairKind::ReconVsOrig, recon);
  });

  for (const auto& row : report.rows) {
    for (MetricsMean* m : {&report.means[row.pair_kind], &report.group_means[{row.group, row.pair_kind}]}) {
      m->correlation += row.correlation;
      m->ssim += row.ssim;
      ++m->count;
    }
  }
  auto finish = [](MetricsMean& m) {
    if (m.count == 0) return;
    m.correlation /= static_cast<double>(m.count);
    m.ssim /= static_cast<double>(m.count);
  };
  for (auto& [kind, m] : report.means) finish(m);
  for (auto& [key, m] : report.group_means) finish(m);
  return report;
}

std::string MetricsReport::to_csv() const {
  std::ostringstream out;
  out.precision(12);
  out << "subject_id,slice_index,pair_kind,correlation,ssim,crop_width,group\n";
  for (const auto& r : rows)
    out << r.subject_id << ',' << r.slice_index << ',' << to_string(r.pair_kind) << ',' << r.correlation << ','
        << r.ssim << ',' << r.crop_width << ',' << r.group << '\n';
  return out.str();
}

std::string MetricsReport::summary_csv() const {
  std::ostringstream out;
  out.precision(12);
  out << "group,pair_kind,mean_correlation,mean_ssim,count\n";
  for (const auto& [kind, m] : means)
    out << "*," << to_string(kind) << ',' << m.correlation << ',' << m.ssim << ',' << m.count << '\n';
  for (const auto& [key, m] : group_means)
    out << key.first << ',' << to_string(key.second) << ',' << m.correlation << ',' << m.ssim << ',' << m.count << '\n';
  return out.str();
}

std::vector<SliceTriple> match_triples(const std::vector<SliceImage>& original,
                                       const std::vector<SliceImage>& anonymized,
                                       const std::vector<SliceImage>& reconstructed) {
  using Key = std::pair<std::int64_t, std::int64_t>;
  auto index = [](const std::vector<SliceImage>& set, const char* name) {
    std::map<Key, const SliceImage*> m;
    for (const auto& img : set)
      if (!m.emplace(Key{img.subject_id, img.slice_index}, &img).second)
        throw Error(ErrorKind::IncompleteTriple, std::string("duplicate slice in ") + name + " set");
    return m;
  };
  const auto anon = index(anonymized, "anonymized");
  const auto recon = index(reconstructed, "reconstructed");
  const auto orig = index(original, "original");
  if (anon.size() != orig.size() || recon.size() != orig.size())
    throw Error(ErrorKind::IncompleteTriple, "slice sets differ in size: " + std::to_string(orig.size()) + " original, " +
                                                 std::to_string(anon.size()) + " anonymized, " +
                                                 std::to_string(recon.size()) + " reconstructed");
  std::vector<SliceTriple> triples;
  triples.reserve(orig.size());
  for (const auto& [key, o] : orig) {
    const auto a = anon.find(key);
    const auto r = recon.find(key);
    if (a == anon.end() || r == recon.end())
      throw Error(ErrorKind::IncompleteTriple, "subject " + std::to_string(key.first) + " slice " +
                                                   std::to_string(key.second) + " lacks a partner");
    triples.push_back({*o, *a->second, *r->second});
  }
  return triples;
}

SliceImage make_montage(const std::vector<std::vector<const SliceImage*>>& grid) {
  if (grid.empty() || grid.front().empty()) throw Error(ErrorKind::EmptyInput, "montage needs at least one image");
  const std::size_t tile_w = grid.front().front()->width, tile_h = grid.front().front()->height;
  std::size_t cols = 0;
  for (const auto& row : grid) cols = std::max(cols, row.size());
  SliceImage out(cols * tile_w, grid.size() * tile_h);
  for (std::size_t gr = 0; gr < grid.size(); ++gr)
    for (std::size_t gc = 0; gc < grid[gr].size(); ++gc) {
      const SliceImage& tile = *grid[gr][gc];
      if (tile.width != tile_w || tile.height != tile_h) throw Error(ErrorKind::DimMismatch, "montage tiles differ in size");
      for (std::size_t r = 0; r < tile_h; ++r)
        for (std::size_t c = 0; c < tile_w; ++c) out.at(gr * tile_h + r, gc * tile_w + c) = tile.at(r, c);
    }
  return out;
}

}  // namespace refacer
