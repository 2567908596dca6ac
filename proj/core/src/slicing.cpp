#include "refacer/slicing.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "refacer/bytes.hpp"
#include "refacer/error.hpp"

namespace refacer {

double percentile(std::span<const double> values, double p) {
  if (values.empty()) throw Error(ErrorKind::EmptyInput, "percentile of an empty sequence");
  if (!(p >= 0.0 && p <= 100.0)) throw Error(ErrorKind::InvalidArgument, "percentile rank must be in [0, 100]");
  std::vector<double> work(values.begin(), values.end());
  const double rank = p / 100.0 * static_cast<double>(work.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = static_cast<std::size_t>(std::ceil(rank));
  std::nth_element(work.begin(), work.begin() + static_cast<std::ptrdiff_t>(lo), work.end());
  const double v_lo = work[lo];
  double v_hi = v_lo;
  if (hi != lo) v_hi = *std::min_element(work.begin() + static_cast<std::ptrdiff_t>(lo) + 1, work.end());
  return v_lo + (rank - static_cast<double>(lo)) * (v_hi - v_lo);
}

std::vector<std::size_t> slice_positions(std::size_t sagittal_dim, const SliceSpec& spec) {
  if (spec.count < 1) throw Error(ErrorKind::InvalidArgument, "slice count must be >= 1");
  if (!(spec.span_fraction > 0.0 && spec.span_fraction <= 1.0))
    throw Error(ErrorKind::InvalidArgument, "span fraction must be in (0, 1]");
  if (spec.count > sagittal_dim)
    throw Error(ErrorKind::SpecTooLarge, std::to_string(spec.count) + " slices requested from a sagittal extent of " +
                                             std::to_string(sagittal_dim));
  if (spec.count == 1) return {sagittal_dim / 2};

  const double d = static_cast<double>(sagittal_dim);
  const double start = d * (1.0 - spec.span_fraction) / 2.0;
  const double end = d * (1.0 + spec.span_fraction) / 2.0 - 1.0;
  const double step = (end - start) / static_cast<double>(spec.count - 1);
  std::vector<std::size_t> positions;
  positions.reserve(spec.count);
  for (std::size_t k = 0; k < spec.count; ++k) {
    // Ties round up; the tolerance absorbs representation error at exact .5 points.
    const double raw = std::floor(start + static_cast<double>(k) * step + 0.5 + 1e-9);
    const auto pos = static_cast<std::size_t>(std::clamp(raw, 0.0, d - 1.0));
    if (positions.empty() || positions.back() != pos) positions.push_back(pos);
  }
  return positions;
}

std::vector<SliceImage> extract_slices(const Volume& volume, const SliceSpec& spec, std::int64_t subject_id,
                                       DomainTag domain) {
  const auto& d = volume.dims();
  std::vector<SliceImage> slices;
  for (std::size_t pos : slice_positions(d[0], spec)) {
    SliceImage img(d[2], d[1]);
    img.subject_id = subject_id;
    img.slice_index = static_cast<std::int64_t>(pos);
    img.domain = domain;
    const auto first = volume.data.begin() + static_cast<std::ptrdiff_t>(volume.index(pos, 0, 0));
    std::copy(first, first + static_cast<std::ptrdiff_t>(d[1] * d[2]), img.pixels.begin());
    slices.push_back(std::move(img));
  }
  return slices;
}

double normalization_divisor(const Volume& reference) {
  const double divisor = percentile(reference.data, 99.5);
  if (!(divisor > 0.0)) throw Error(ErrorKind::DegenerateVolume, "99.5-percentile of the reference volume is not positive");
  return divisor;
}

std::vector<SliceImage> normalize_subject(std::vector<SliceImage> slices, const Volume& reference) {
  const double divisor = normalization_divisor(reference);
  for (auto& img : slices)
    for (auto& v : img.pixels) v /= divisor;
  return slices;
}

SliceImage resample_to(const SliceImage& image, std::size_t size) {
  if (size < 8) throw Error(ErrorKind::InvalidArgument, "resample size must be >= 8");
  SliceImage out(size, size);
  out.subject_id = image.subject_id;
  out.slice_index = image.slice_index;
  out.domain = image.domain;

  const std::size_t h = image.height, w = image.width;
  if (h % size == 0 && w % size == 0) {
    const std::size_t fh = h / size, fw = w / size;
    const double norm = 1.0 / static_cast<double>(fh * fw);
    for (std::size_t r = 0; r < size; ++r) {
      for (std::size_t c = 0; c < size; ++c) {
        double acc = 0.0;
        for (std::size_t dr = 0; dr < fh; ++dr)
          for (std::size_t dc = 0; dc < fw; ++dc) acc += image.at(r * fh + dr, c * fw + dc);
        out.at(r, c) = acc * norm;
      }
    }
    return out;
  }

  auto source = [](std::size_t dst, std::size_t in, std::size_t outn) {
    const double pos = (static_cast<double>(dst) + 0.5) * static_cast<double>(in) / static_cast<double>(outn) - 0.5;
    return std::clamp(pos, 0.0, static_cast<double>(in - 1));
  };
  for (std::size_t r = 0; r < size; ++r) {
    const double sr = source(r, h, size);
    const auto r0 = static_cast<std::size_t>(std::floor(sr));
    const std::size_t r1 = std::min(r0 + 1, h - 1);
    const double fr = sr - static_cast<double>(r0);
    for (std::size_t c = 0; c < size; ++c) {
      const double sc = source(c, w, size);
      const auto c0 = static_cast<std::size_t>(std::floor(sc));
      const std::size_t c1 = std::min(c0 + 1, w - 1);
      const double fc = sc - static_cast<double>(c0);
      const double top = image.at(r0, c0) * (1.0 - fc) + image.at(r0, c1) * fc;
      const double bottom = image.at(r1, c0) * (1.0 - fc) + image.at(r1, c1) * fc;
      out.at(r, c) = top * (1.0 - fr) + bottom * fr;
    }
  }
  return out;
}

namespace {

constexpr std::size_t kSliceHeaderBytes = 20;

}  // namespace

std::vector<std::uint8_t> encode_slice_file(const SliceDataset& dataset) {
  std::vector<std::uint8_t> out;
  out.reserve(kSliceHeaderBytes + 4 * dataset.images.size() * dataset.height * dataset.width);
  bytes::append_raw(out, "RFSL", 4);
  bytes::append_le<std::uint32_t>(out, kSliceFileVersion);
  bytes::append_le<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.images.size()));
  bytes::append_le<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.height));
  bytes::append_le<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.width));
  for (const auto& img : dataset.images) {
    if (img.height != dataset.height || img.width != dataset.width)
      throw Error(ErrorKind::SizeMismatch, "all slices in a dataset must share one size");
    for (double v : img.pixels) bytes::append_le<float>(out, static_cast<float>(v));
  }
  return out;
}

SliceDataset decode_slice_file(const std::vector<std::uint8_t>& raw, DomainTag domain) {
  bytes::Reader in(raw);
  std::string magic;
  if (!in.read_string(4, magic)) throw Error(ErrorKind::TruncatedData, "slice file shorter than its header");
  if (magic != "RFSL") throw Error(ErrorKind::BadMagic, "slice file magic is not RFSL");
  std::uint32_t version = 0, count = 0, height = 0, width = 0;
  if (!in.read(version) || !in.read(count) || !in.read(height) || !in.read(width))
    throw Error(ErrorKind::TruncatedData, "slice file header truncated");
  if (version != kSliceFileVersion) throw Error(ErrorKind::VersionMismatch, "slice file version " + std::to_string(version));
  const std::size_t pixels = static_cast<std::size_t>(height) * width;
  if (in.remaining() / 4 / std::max<std::size_t>(pixels, 1) < count)
    throw Error(ErrorKind::TruncatedData, "slice payload shorter than header implies");

  SliceDataset ds;
  ds.height = height;
  ds.width = width;
  ds.images.reserve(count);
  for (std::uint32_t n = 0; n < count; ++n) {
    SliceImage img(width, height);
    img.domain = domain;
    for (auto& v : img.pixels) {
      float f = 0.0f;
      in.read(f);
      v = f;
    }
    ds.images.push_back(std::move(img));
  }
  return ds;
}

void write_slice_dataset(const SliceDataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file_bytes(dir / kSliceFileName, encode_slice_file(dataset));
  std::ostringstream csv;
  csv << "subject_id,slice_index,offset\n";
  const std::size_t bytes_per_image = 4 * dataset.height * dataset.width;
  for (std::size_t n = 0; n < dataset.images.size(); ++n)
    csv << dataset.images[n].subject_id << ',' << dataset.images[n].slice_index << ','
        << kSliceHeaderBytes + n * bytes_per_image << '\n';
  const std::string text = csv.str();
  write_file_bytes(dir / kSliceIndexName, std::vector<std::uint8_t>(text.begin(), text.end()));
}

SliceDataset read_slice_dataset(const std::filesystem::path& dir, DomainTag domain) {
  if (!std::filesystem::exists(dir / kSliceFileName))
    throw Error(ErrorKind::MissingInput, "no " + std::string(kSliceFileName) + " in '" + dir.string() + "'");
  SliceDataset ds = decode_slice_file(read_file_bytes(dir / kSliceFileName), domain);

  std::ifstream index(dir / kSliceIndexName);
  if (!index) throw Error(ErrorKind::MissingInput, "no " + std::string(kSliceIndexName) + " in '" + dir.string() + "'");
  std::string line;
  std::getline(index, line);
  std::size_t n = 0;
  while (std::getline(index, line)) {
    if (line.empty()) continue;
    if (n >= ds.images.size()) throw Error(ErrorKind::SizeMismatch, "slice index lists more rows than the slice file");
    std::istringstream row(line);
    std::string field;
    std::getline(row, field, ',');
    ds.images[n].subject_id = std::stoll(field);
    std::getline(row, field, ',');
    ds.images[n].slice_index = std::stoll(field);
    ++n;
  }
  if (n != ds.images.size()) throw Error(ErrorKind::SizeMismatch, "slice index row count differs from the slice file");
  return ds;
}

}  // namespace refacer
