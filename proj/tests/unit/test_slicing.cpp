#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "refacer/anonymize.hpp"
#include "refacer/phantom.hpp"
#include "refacer/slicing.hpp"
#include "test_support.hpp"

using namespace refacer;
using refacer::testing::TempDir;

namespace {

double sorted_percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double rank = p / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = static_cast<std::size_t>(std::ceil(rank));
  return v[lo] + (rank - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Exact rational linspace for span 3/5: point k is
// (D (n - 1) + k (3 D - 5)) / (5 (n - 1)), rounded half up in integers.
std::vector<std::size_t> linspace_oracle(std::size_t dim, std::size_t n) {
  std::vector<std::size_t> out;
  const long long den = 5 * static_cast<long long>(n - 1);
  for (std::size_t k = 0; k < n; ++k) {
    const long long num = static_cast<long long>(dim) * static_cast<long long>(n - 1) +
                          static_cast<long long>(k) * (3 * static_cast<long long>(dim) - 5);
    const auto rounded = static_cast<std::size_t>((2 * num + den) / (2 * den));
    if (out.empty() || out.back() != rounded) out.push_back(rounded);
  }
  return out;
}

}  // namespace

TEST_CASE("percentile small cases") {
  const std::vector<double> four{3.0, 0.0, 2.0, 1.0};
  CHECK(percentile(four, 50.0) == 1.5);
  CHECK(percentile(four, 0.0) == 0.0);
  CHECK(percentile(four, 100.0) == 3.0);
  for (double p : {0.0, 12.5, 99.5, 100.0}) CHECK(percentile(std::vector<double>{5.0}, p) == 5.0);
  REFACER_CHECK_ERROR(percentile(std::vector<double>{}, 50.0), ErrorKind::EmptyInput);
  REFACER_CHECK_ERROR(percentile(four, 101.0), ErrorKind::InvalidArgument);
}

TEST_CASE("percentile equals the full-sort oracle exactly") {
  Rng rng(31);
  std::vector<double> big(10001);
  for (auto& v : big) v = rng.uniform01();
  CHECK(percentile(big, 99.5) == sorted_percentile(big, 99.5));

  for (int instance = 0; instance < 120; ++instance) {
    const std::size_t n = 1 + rng.below(400);
    std::vector<double> v(n);
    for (auto& x : v) x = rng.below(4) == 0 ? std::floor(rng.uniform(0, 5)) : rng.uniform(-10, 10);  // with ties
    const double p = instance % 3 == 0 ? 99.5 : rng.uniform(0.0, 100.0);
    REQUIRE(percentile(v, p) == sorted_percentile(v, p));
  }
}

TEST_CASE("slice positions") {
  const auto table1 = slice_positions(150, {21, 0.6});
  REQUIRE(table1.size() == 21);
  CHECK(table1.front() >= 30);
  CHECK(table1.back() <= 120);
  CHECK(std::is_sorted(table1.begin(), table1.end()));

  CHECK(slice_positions(64, {1, 0.6}) == std::vector<std::size_t>{32});
  CHECK(slice_positions(65, {1, 0.6}) == std::vector<std::size_t>{32});

  for (std::size_t dim : {32, 40, 64, 100, 150, 256}) {
    CAPTURE(dim);
    CHECK(slice_positions(dim, {21, 0.6}) == linspace_oracle(dim, 21));
    CHECK(slice_positions(dim, {7, 0.6}) == linspace_oracle(dim, 7));
  }
  // Duplicates collapse when the span holds fewer voxels than slices.
  const auto crowded = slice_positions(32, {21, 0.6});
  CHECK(crowded.size() < 21);
  CHECK(std::adjacent_find(crowded.begin(), crowded.end()) == crowded.end());

  REFACER_CHECK_ERROR(slice_positions(16, {21, 0.6}), ErrorKind::SpecTooLarge);
  REFACER_CHECK_ERROR(slice_positions(64, {0, 0.6}), ErrorKind::InvalidArgument);
  REFACER_CHECK_ERROR(slice_positions(64, {5, 0.0}), ErrorKind::InvalidArgument);
}

TEST_CASE("extract_slices copies sagittal planes") {
  const auto subject = generate_subject(2, {64, 64, 64}, 5);
  const auto slices = extract_slices(subject.volume, {21, 0.6}, 2, DomainTag::Blurred);
  const auto positions = slice_positions(64, {21, 0.6});
  REQUIRE(slices.size() == positions.size());
  for (std::size_t s = 0; s < slices.size(); ++s) {
    const auto& img = slices[s];
    CHECK(img.subject_id == 2);
    CHECK(img.domain == DomainTag::Blurred);
    CHECK(img.slice_index == static_cast<std::int64_t>(positions[s]));
    REQUIRE(img.width == 64);
    REQUIRE(img.height == 64);
    for (std::size_t r = 0; r < 64; ++r)
      for (std::size_t c = 0; c < 64; ++c) REQUIRE(img.at(r, c) == subject.volume.at(positions[s], r, c));
  }
  const auto again = extract_slices(subject.volume, {21, 0.6}, 2, DomainTag::Blurred);
  for (std::size_t s = 0; s < slices.size(); ++s) CHECK(again[s].pixels == slices[s].pixels);
}

TEST_CASE("normalisation uses the original volume for every domain") {
  Volume v(std::array<std::size_t, 3>{2, 10, 10}, std::array<double, 3>{1.0, 1.0, 1.0});
  std::fill(v.data.begin(), v.data.end(), 2.0);
  SliceImage one(3, 3, 1.0);
  const auto out = normalize_subject({one}, v);
  for (double x : out[0].pixels) CHECK(x == 0.5);

  const Volume zeros(std::array<std::size_t, 3>{4, 4, 4}, std::array<double, 3>{1.0, 1.0, 1.0});
  REFACER_CHECK_ERROR(normalize_subject({one}, zeros), ErrorKind::DegenerateVolume);

  const auto subject = generate_subject(9, {64, 64, 64}, 8);
  const double t = default_skin_threshold(subject.volume);
  const Volume removed = remove_face(subject.volume, compute_removal_mask(subject.volume, t));
  const Volume blurred = blur_face(subject.volume, compute_face_mask(subject.volume, 8.0, t), 2.0);
  const double divisor = normalization_divisor(subject.volume);
  const auto orig_n = normalize_subject(extract_slices(subject.volume, {}), subject.volume);
  const auto rem_n = normalize_subject(extract_slices(removed, {}), subject.volume);
  const auto blur_n = normalize_subject(extract_slices(blurred, {}), subject.volume);
  const auto raw_rem = extract_slices(removed, {});
  for (std::size_t s = 0; s < rem_n.size(); ++s)
    for (std::size_t p = 0; p < rem_n[s].pixels.size(); ++p) REQUIRE(rem_n[s].pixels[p] == raw_rem[s].pixels[p] / divisor);
  CHECK(blur_n.size() == orig_n.size());
}

TEST_CASE("normalised phantom cohort sits mostly at or below 1") {
  const auto cohort = generate_cohort(10, {64, 64, 64}, 11);
  std::size_t total = 0, above = 0;
  for (const auto& s : cohort) {
    for (const auto& img : normalize_subject(extract_slices(s.volume, {}), s.volume)) {
      for (double x : img.pixels) {
        REQUIRE(x >= 0.0);
        ++total;
        above += x > 1.0;
      }
    }
  }
  CHECK(static_cast<double>(above) <= 0.01 * static_cast<double>(total));
}

TEST_CASE("resampling") {
  SliceImage constant(256, 256, 0.37);
  const SliceImage small = resample_to(constant, 64);
  CHECK(small.width == 64);
  for (double x : small.pixels) CHECK(x == doctest::Approx(0.37).epsilon(1e-15));

  SliceImage checker(4, 4);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) checker.at(r, c) = static_cast<double>((r + c) % 2);
  // Below the minimum output size, so check the averaging rule on an 8x8 tile of 2x2 blocks.
  SliceImage tiled(16, 16);
  for (std::size_t r = 0; r < 16; ++r)
    for (std::size_t c = 0; c < 16; ++c) tiled.at(r, c) = checker.at(r % 4, c % 4);
  for (double x : resample_to(tiled, 8).pixels) CHECK(x == 0.5);

  const auto subject = generate_subject(1, {64, 64, 64}, 4);
  const SliceImage slice = extract_slices(subject.volume, {1, 0.6})[0];
  const SliceImage half = resample_to(slice, 32);
  for (std::size_t r = 0; r < 32; ++r)
    for (std::size_t c = 0; c < 32; ++c) {
      const double mean = (slice.at(2 * r, 2 * c) + slice.at(2 * r, 2 * c + 1) + slice.at(2 * r + 1, 2 * c) +
                           slice.at(2 * r + 1, 2 * c + 1)) / 4.0;
      REQUIRE(half.at(r, c) == doctest::Approx(mean).epsilon(1e-15));
    }

  // Non-integer factors interpolate: a horizontal ramp stays a ramp.
  SliceImage ramp(40, 40);
  for (std::size_t r = 0; r < 40; ++r)
    for (std::size_t c = 0; c < 40; ++c) ramp.at(r, c) = static_cast<double>(c);
  const SliceImage up = resample_to(ramp, 64);
  for (std::size_t c = 1; c < 63; ++c) CHECK(up.at(10, c) >= up.at(10, c - 1));
  CHECK(up.at(5, 32) == doctest::Approx((32.5 * 40.0 / 64.0) - 0.5));
  REFACER_CHECK_ERROR(resample_to(ramp, 4), ErrorKind::InvalidArgument);
}

TEST_CASE("slice dataset files round trip") {
  TempDir dir;
  Rng rng(3);
  SliceDataset ds;
  ds.height = 6;
  ds.width = 5;
  for (int n = 0; n < 4; ++n) {
    SliceImage img = refacer::testing::random_image(5, 6, rng);
    for (auto& x : img.pixels) x = static_cast<float>(x);
    img.subject_id = 100 + n;
    img.slice_index = 7 * n;
    ds.images.push_back(img);
  }
  write_slice_dataset(ds, dir.path() / "set");
  const SliceDataset back = read_slice_dataset(dir.path() / "set", DomainTag::Removed);
  REQUIRE(back.images.size() == 4);
  for (std::size_t n = 0; n < 4; ++n) {
    CHECK(back.images[n].pixels == ds.images[n].pixels);
    CHECK(back.images[n].subject_id == ds.images[n].subject_id);
    CHECK(back.images[n].slice_index == ds.images[n].slice_index);
    CHECK(back.images[n].domain == DomainTag::Removed);
  }
  const auto bytes = encode_slice_file(ds);
  CHECK(bytes.size() == 20 + 4 * 4 * 30);
  CHECK(encode_slice_file(back) == bytes);

  auto bad = bytes;
  bad[0] = 'X';
  REFACER_CHECK_ERROR(decode_slice_file(bad), ErrorKind::BadMagic);
  bad = bytes;
  bad.resize(bad.size() - 3);
  REFACER_CHECK_ERROR(decode_slice_file(bad), ErrorKind::TruncatedData);
  bad = bytes;
  bad[4] = 9;
  REFACER_CHECK_ERROR(decode_slice_file(bad), ErrorKind::VersionMismatch);
  REFACER_CHECK_ERROR(read_slice_dataset(dir.path() / "nothing"), ErrorKind::MissingInput);

  SliceDataset mixed = ds;
  mixed.images.push_back(SliceImage(4, 4));
  REFACER_CHECK_ERROR(encode_slice_file(mixed), ErrorKind::SizeMismatch);
}
