#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "refacer/anonymize.hpp"
#include "refacer/metrics.hpp"
#include "refacer/phantom.hpp"
#include "refacer/slicing.hpp"
#include "test_support.hpp"

using namespace refacer;
using refacer::testing::random_image;

namespace {

SliceImage affine(const SliceImage& img, double scale, double shift) {
  SliceImage out = img;
  for (auto& v : out.pixels) v = scale * v + shift;
  return out;
}

}  // namespace

TEST_CASE("front half crop") {
  Rng rng(1);
  SliceImage img = random_image(64, 10, rng);
  const SliceImage crop = front_half(img);
  CHECK(crop.width == 32);
  CHECK(crop.height == 10);
  CHECK(crop.at(3, 31) == img.at(3, 31));
  CHECK(front_half(random_image(65, 10, rng)).width == 32);

  const SliceImage right = front_half(img, true);
  CHECK(right.width == 32);
  CHECK(right.at(2, 0) == img.at(2, 32));
  const SliceImage odd = random_image(65, 4, rng);
  CHECK(front_half(odd, true).at(1, 0) == odd.at(1, 33));
}

TEST_CASE("front half contains the entire face mask footprint") {
  for (int id = 0; id < 5; ++id) {
    const auto subject = generate_subject(id, {64, 64, 64}, 55);
    const Volume& v = subject.volume;
    const double t = default_skin_threshold(v);
    for (const FaceMask& m : {compute_face_mask(v, 8.0, t), compute_removal_mask(v, t)}) {
      Volume as_volume(v.dims(), v.header.voxel_size);
      for (std::size_t i = 0; i < m.mask.size(); ++i) as_volume.data[i] = m.mask[i];
      for (const auto& slice : extract_slices(as_volume, {})) {
        double total = 0.0, cropped = 0.0;
        for (double x : slice.pixels) total += x;
        for (double x : front_half(slice).pixels) cropped += x;
        CHECK(cropped == total);
      }
    }
  }
}

TEST_CASE("pearson closed forms") {
  Rng rng(2);
  const SliceImage x = random_image(16, 16, rng);
  CHECK(pearson(x, x) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(pearson(x, affine(x, -1.0, 3.0)) == doctest::Approx(-1.0).epsilon(1e-14));

  const SliceImage c1(8, 8, 0.3), c2(8, 8, 0.7);
  REFACER_CHECK_ERROR(pearson(c1, c2), ErrorKind::ZeroVariance);
  CHECK(pearson(c1, random_image(8, 8, rng)) == 0.0);
  REFACER_CHECK_ERROR(pearson(x, c1), ErrorKind::DimMismatch);
}

TEST_CASE("pearson matches the two-pass formula") {
  Rng rng(3);
  for (int instance = 0; instance < 150; ++instance) {
    const std::size_t w = 4 + rng.below(28), h = 4 + rng.below(28);
    const SliceImage a = random_image(w, h, rng, -2.0, 3.0);
    SliceImage b = random_image(w, h, rng);
    for (std::size_t i = 0; i < b.pixels.size(); ++i) b.pixels[i] += rng.uniform(-1.0, 1.0) * a.pixels[i];
    const double r = pearson(a, b);
    REQUIRE(std::abs(r - oracle::pearson_two_pass(a.pixels, b.pixels)) <= 1e-12);
    REQUIRE(r >= -1.0);
    REQUIRE(r <= 1.0);
    REQUIRE(std::abs(r - pearson(b, a)) <= 1e-12);
    REQUIRE(std::abs(r - pearson(affine(a, 2.5, -1.0), affine(b, 0.3, 7.0))) <= 1e-12);
  }
}

TEST_CASE("ssim closed forms") {
  Rng rng(4);
  const SliceImage x = random_image(32, 32, rng);
  CHECK(ssim(x, x) == 1.0);

  const double a = 0.2, b = 0.6, c1 = 0.01 * 0.01;
  const double expected = (2 * a * b + c1) / (a * a + b * b + c1);
  CHECK(std::abs(ssim(SliceImage(16, 16, a), SliceImage(16, 16, b)) - expected) <= 1e-12);

  REFACER_CHECK_ERROR(ssim(SliceImage(10, 20), SliceImage(10, 20)), ErrorKind::TooSmall);
  REFACER_CHECK_ERROR(ssim(x, SliceImage(31, 32)), ErrorKind::DimMismatch);
  SsimParams even;
  even.window_size = 10;
  REFACER_CHECK_ERROR(ssim(x, x, even), ErrorKind::InvalidArgument);

  const auto window = ssim_window({});
  CHECK(window.size() == 11);
  double total = 0.0;
  for (double w : window) total += w;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("ssim matches the per-window brute force") {
  Rng rng(5);
  for (int instance = 0; instance < 110; ++instance) {
    const std::size_t w = 11 + rng.below(24), h = 11 + rng.below(24);
    const SliceImage a = random_image(w, h, rng);
    SliceImage b = a;
    const double noise = rng.uniform(0.0, 0.5);
    for (auto& v : b.pixels) v += noise * rng.uniform(-1.0, 1.0);
    const double s = ssim(a, b);
    REQUIRE(std::abs(s - oracle::ssim_brute_force(a, b)) <= 1e-9);
    REQUIRE(std::abs(s - ssim(b, a)) <= 1e-12);
    REQUIRE(s <= 1.0);
    REQUIRE(s >= -1.0);
  }
}

TEST_CASE("ssim is invariant to joint scaling with data range") {
  Rng rng(6);
  const SliceImage a = random_image(24, 24, rng), b = random_image(24, 24, rng);
  for (double c : {0.5, 3.0, 100.0}) {
    SsimParams scaled;
    scaled.data_range = c;
    CHECK(std::abs(ssim(affine(a, c, 0.0), affine(b, c, 0.0), scaled) - ssim(a, b)) <= 1e-12);
  }
}

TEST_CASE("evaluate reports both pairs on front-half crops") {
  Rng rng(7);
  std::vector<SliceImage> orig, anon, recon;
  for (int s = 0; s < 3; ++s)
    for (int k = 0; k < 2; ++k) {
      SliceImage o = random_image(40, 24, rng);
      o.subject_id = s;
      o.slice_index = 10 + k;
      SliceImage a = o;
      for (std::size_t r = 0; r < 24; ++r)
        for (std::size_t c = 0; c < 8; ++c) a.at(r, c) = 0.0;
      orig.push_back(o);
      anon.push_back(a);
      recon.push_back(o);
    }

  const auto triples = match_triples(orig, anon, recon);
  REQUIRE(triples.size() == 6);
  EvaluateOptions opt;
  opt.group_of = [](std::int64_t id) { return id < 2 ? std::string("site_a") : std::string("site_b"); };
  const MetricsReport perfect = evaluate(triples, opt);
  REQUIRE(perfect.rows.size() == 12);
  CHECK(perfect.means.at(PairKind::ReconVsOrig).correlation == doctest::Approx(1.0));
  CHECK(perfect.means.at(PairKind::ReconVsOrig).ssim == doctest::Approx(1.0));
  CHECK(perfect.means.at(PairKind::AnonVsOrig).correlation < 1.0);
  CHECK(perfect.group_means.at({"site_a", PairKind::AnonVsOrig}).count == 4);
  CHECK(perfect.group_means.at({"site_b", PairKind::AnonVsOrig}).count == 2);
  for (const auto& row : perfect.rows) {
    CHECK(row.crop_width == 20);
    CHECK(row.correlation >= -1.0);
    CHECK(row.correlation <= 1.0);
  }
  const SliceImage crop_o = front_half(orig[0]), crop_a = front_half(anon[0]);
  const auto& first = perfect.rows[0];
  CHECK(first.pair_kind == PairKind::AnonVsOrig);
  CHECK(first.correlation == pearson(crop_a, crop_o));
  CHECK(first.ssim == ssim(crop_a, crop_o));

  const MetricsReport degenerate = evaluate(match_triples(orig, anon, anon));
  for (std::size_t i = 0; i < degenerate.rows.size(); i += 2) {
    CHECK(degenerate.rows[i].correlation == degenerate.rows[i + 1].correlation);
    CHECK(degenerate.rows[i].ssim == degenerate.rows[i + 1].ssim);
  }

  EvaluateOptions threaded;
  threaded.threads = 3;
  const MetricsReport parallel = evaluate(triples, threaded);
  CHECK(parallel.to_csv() == evaluate(triples).to_csv());

  const std::string csv = perfect.to_csv();
  CHECK(csv.rfind("subject_id,slice_index,pair_kind,correlation,ssim,crop_width,group\n", 0) == 0);
  CHECK(csv.find("anon_vs_orig") != std::string::npos);
  CHECK(perfect.summary_csv().find("site_b,recon_vs_orig") != std::string::npos);
}

TEST_CASE("incomplete triples are rejected") {
  Rng rng(8);
  SliceImage a = random_image(20, 20, rng);
  a.subject_id = 1;
  SliceImage b = a;
  b.slice_index = 4;
  REFACER_CHECK_ERROR(match_triples({a}, {a}, {b}), ErrorKind::IncompleteTriple);
  REFACER_CHECK_ERROR(match_triples({a, b}, {a}, {a, b}), ErrorKind::IncompleteTriple);
  REFACER_CHECK_ERROR(match_triples({a, a}, {a, a}, {a, a}), ErrorKind::IncompleteTriple);
}

TEST_CASE("montage layout") {
  SliceImage one(3, 2, 1.0), two(3, 2, 2.0), three(3, 2, 3.0);
  const SliceImage m = make_montage({{&one, &two}, {&three}});
  CHECK(m.width == 6);
  CHECK(m.height == 4);
  CHECK(m.at(0, 0) == 1.0);
  CHECK(m.at(1, 4) == 2.0);
  CHECK(m.at(3, 1) == 3.0);
  CHECK(m.at(3, 4) == 0.0);
  SliceImage odd(4, 2);
  REFACER_CHECK_ERROR(make_montage({{&one, &odd}}), ErrorKind::DimMismatch);
  REFACER_CHECK_ERROR(make_montage({}), ErrorKind::EmptyInput);
}
