#include <doctest.h>

#include <cmath>
#include <numeric>

#include "refacer/anonymize.hpp"
#include "refacer/phantom.hpp"
#include "test_support.hpp"

using namespace refacer;

namespace {

constexpr std::array<std::size_t, 3> kDesk{64, 64, 64};
constexpr int kPhantoms = 20;

Volume phantom(int id, const PhantomOptions& opt = {}) { return generate_subject(id, kDesk, 2718, opt).volume; }

Volume scaled(const Volume& v, double c) {
  Volume out = v;
  for (auto& x : out.data) x *= c;
  return out;
}

double row_tv(const Volume& v, std::size_t i, std::size_t j) {
  double tv = 0.0;
  for (std::size_t k = 0; k + 1 < v.dims()[2]; ++k) tv += std::abs(v.at(i, j, k + 1) - v.at(i, j, k));
  return tv;
}

// Direct 1D convolution with mirrored borders, taps recomputed from scratch.
std::vector<double> convolve_mirror(const std::vector<double>& line, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps;
  for (int o = -radius; o <= radius; ++o) taps.push_back(std::exp(-(o * o) / (2.0 * sigma * sigma)));
  const double total = std::accumulate(taps.begin(), taps.end(), 0.0);
  const int n = static_cast<int>(line.size());
  std::vector<double> out(line.size(), 0.0);
  for (int t = 0; t < n; ++t) {
    for (int o = -radius; o <= radius; ++o) {
      int s = t + o;
      while (s < 0 || s >= n) s = s < 0 ? -s : 2 * (n - 1) - s;
      out[static_cast<std::size_t>(t)] += taps[static_cast<std::size_t>(o + radius)] / total * line[static_cast<std::size_t>(s)];
    }
  }
  return out;
}

}  // namespace

TEST_CASE("gaussian kernel and mirror indexing") {
  const auto taps = gaussian_kernel(2.0);
  CHECK(taps.size() == 13);
  CHECK(std::accumulate(taps.begin(), taps.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  for (std::size_t i = 0; i < taps.size(); ++i) CHECK(taps[i] == taps[taps.size() - 1 - i]);
  CHECK(gaussian_kernel(0.4).size() == 5);

  CHECK(reflect_index(-1, 5) == 1);
  CHECK(reflect_index(-4, 5) == 4);
  CHECK(reflect_index(5, 5) == 3);
  CHECK(reflect_index(8, 5) == 0);
  CHECK(reflect_index(9, 5) == 1);
  CHECK(reflect_index(3, 1) == 0);
  REFACER_CHECK_ERROR(gaussian_kernel(0.0), ErrorKind::InvalidArgument);
}

TEST_CASE("face mask follows a per-row scan of the skin surface") {
  PhantomOptions one_mm;
  one_mm.fov_inplane_mm = 64.0;  // 1 mm voxels along the anterior-posterior axis
  const Volume v = phantom(0, one_mm);
  REQUIRE(v.header.voxel_size[2] == 1.0);
  const double threshold = default_skin_threshold(v);
  const FaceMask m = compute_face_mask(v, 6.0, threshold);
  REQUIRE(m.matches(v));
  CHECK(m.depth_mm == 6.0);

  std::size_t full_rows = 0;
  for (std::size_t i = 0; i < 64; ++i)
    for (std::size_t j = 0; j < 64; ++j) {
      std::ptrdiff_t surface = -1;
      for (std::size_t k = 0; k < 32 && surface < 0; ++k)
        if (v.at(i, j, k) >= threshold) surface = static_cast<std::ptrdiff_t>(k);
      std::size_t thickness = 0;
      for (std::size_t k = 0; k < 64; ++k) {
        const bool expected = surface >= 0 && static_cast<std::ptrdiff_t>(k) >= surface &&
                              static_cast<std::ptrdiff_t>(k) < std::min<std::ptrdiff_t>(surface + 6, 32);
        REQUIRE(static_cast<bool>(m.mask[v.index(i, j, k)]) == expected);
        thickness += m.mask[v.index(i, j, k)];
      }
      if (surface >= 0 && surface + 6 <= 32) {
        CHECK(thickness == 6);
        ++full_rows;
      }
    }
  CHECK(full_rows > 100);
}

TEST_CASE("depth converts through the voxel width") {
  const Volume v = phantom(1);  // 240 mm over 64 columns = 3.75 mm voxels
  const double t = default_skin_threshold(v);
  const auto surface = skin_surface(v, t);
  const FaceMask m = compute_face_mask(v, 8.0, t);  // round(8 / 3.75) = 2 voxels
  for (std::size_t i = 0; i < 64; ++i)
    for (std::size_t j = 0; j < 64; ++j) {
      const auto s = surface[i * 64 + j];
      std::size_t thickness = 0;
      for (std::size_t k = 0; k < 64; ++k) thickness += m.mask[v.index(i, j, k)];
      if (s >= 0 && s + 2 <= 32) CHECK(thickness == 2);
      if (s < 0) CHECK(thickness == 0);
    }
  CHECK(compute_face_mask(v, 0.1, t).count() > 0);  // at least one voxel per surface row
}

TEST_CASE("empty heads and bad arguments") {
  const Volume zeros(kDesk, {1.0, 1.0, 1.0});
  REFACER_CHECK_ERROR(compute_face_mask(zeros, 8.0, 0.1), ErrorKind::EmptyHead);
  const Volume v = phantom(2);
  REFACER_CHECK_ERROR(compute_face_mask(v, 8.0, 5.0), ErrorKind::EmptyHead);
  REFACER_CHECK_ERROR(compute_removal_mask(v, 5.0), ErrorKind::EmptyHead);
  REFACER_CHECK_ERROR(compute_face_mask(v, 0.0, 0.1), ErrorKind::InvalidArgument);
  REFACER_CHECK_ERROR(compute_face_mask(v, 8.0, 0.0), ErrorKind::InvalidArgument);

  const FaceMask wrong({32, 64, 64});
  REFACER_CHECK_ERROR(remove_face(v, wrong), ErrorKind::DimMismatch);
  REFACER_CHECK_ERROR(blur_face(v, wrong, 2.0), ErrorKind::DimMismatch);
}

TEST_CASE("remove_face zeroes exactly the mask on seeded phantoms") {
  for (int id = 0; id < kPhantoms; ++id) {
    const Volume v = phantom(id);
    const double t = default_skin_threshold(v);
    for (const FaceMask& m : {compute_face_mask(v, 8.0, t), compute_removal_mask(v, t)}) {
      const Volume out = remove_face(v, m);
      double masked_sum = 0.0;
      std::size_t mismatches = 0;
      for (std::size_t idx = 0; idx < v.data.size(); ++idx) {
        if (m.mask[idx]) masked_sum += std::abs(out.data[idx]);
        else if (out.data[idx] != v.data[idx]) ++mismatches;
      }
      CHECK(masked_sum == 0.0);
      CHECK(mismatches == 0);
      CHECK(remove_face(out, m).data == out.data);
    }
  }
}

TEST_CASE("remove_face identity and half-volume cases") {
  const Volume v = phantom(3);
  CHECK(remove_face(v, FaceMask(kDesk)).data == v.data);

  FaceMask half(kDesk);
  for (std::size_t i = 0; i < 64; ++i)
    for (std::size_t j = 0; j < 64; ++j)
      for (std::size_t k = 0; k < 32; ++k) half.mask[v.index(i, j, k)] = 1;
  const Volume out = remove_face(v, half);
  for (std::size_t i = 0; i < 64; ++i)
    for (std::size_t j = 0; j < 64; ++j)
      for (std::size_t k = 0; k < 64; ++k) REQUIRE(out.at(i, j, k) == (k < 32 ? 0.0 : v.at(i, j, k)));
}

TEST_CASE("blur_face leaves the outside untouched and does not add row variation") {
  for (int id = 0; id < kPhantoms; ++id) {
    const Volume v = phantom(id);
    const FaceMask m = compute_face_mask(v, 8.0, default_skin_threshold(v));
    const Volume out = blur_face(v, m, 2.0);
    std::size_t changed_outside = 0, changed_inside = 0;
    for (std::size_t idx = 0; idx < v.data.size(); ++idx) {
      if (!m.mask[idx]) changed_outside += out.data[idx] != v.data[idx];
      else changed_inside += out.data[idx] != v.data[idx];
    }
    CHECK(changed_outside == 0);
    CHECK(changed_inside > 0);

    for (std::size_t i = 0; i < 64; ++i)
      for (std::size_t j = 0; j < 64; ++j) {
        bool masked_row = false;
        for (std::size_t k = 0; k < 32 && !masked_row; ++k) masked_row = m.mask[v.index(i, j, k)];
        if (masked_row) REQUIRE(row_tv(out, i, j) <= row_tv(v, i, j) + 1e-12);
      }
  }
}

TEST_CASE("blur_face trivial fixed points") {
  Volume constant(std::array<std::size_t, 3>{32, 32, 32}, std::array<double, 3>{1.0, 1.0, 1.0});
  std::fill(constant.data.begin(), constant.data.end(), 0.7);
  FaceMask all(constant.dims());
  std::fill(all.mask.begin(), all.mask.end(), 1);
  const Volume out = blur_face(constant, all, 2.0);
  for (std::size_t idx = 0; idx < out.data.size(); ++idx) REQUIRE(std::abs(out.data[idx] - 0.7) <= 1e-12);

  const Volume v = phantom(4);
  CHECK(blur_face(v, FaceMask(kDesk), 2.0).data == v.data);
}

TEST_CASE("blur of a 1D profile matches direct convolution") {
  const std::array<std::size_t, 3> dims{6, 5, 40};
  Volume v(dims, {1.0, 1.0, 1.0});
  std::vector<double> profile(40);
  for (std::size_t k = 0; k < 40; ++k) profile[k] = 0.05 * static_cast<double>(k) + 0.3 * std::sin(0.7 * static_cast<double>(k));
  for (std::size_t i = 0; i < dims[0]; ++i)
    for (std::size_t j = 0; j < dims[1]; ++j)
      for (std::size_t k = 0; k < 40; ++k) v.at(i, j, k) = profile[k];

  FaceMask m(dims);
  for (std::size_t i = 0; i < dims[0]; ++i)
    for (std::size_t j = 0; j < dims[1]; ++j)
      for (std::size_t k = 3; k < 17; ++k) m.mask[v.index(i, j, k)] = 1;

  const auto expected = convolve_mirror(profile, 2.0);
  const Volume out = blur_face(v, m, 2.0);
  for (std::size_t i = 0; i < dims[0]; ++i)
    for (std::size_t j = 0; j < dims[1]; ++j)
      for (std::size_t k = 0; k < 40; ++k) {
        const double want = m.mask[v.index(i, j, k)] ? expected[k] : profile[k];
        REQUIRE(std::abs(out.at(i, j, k) - want) <= 1e-12);
      }
}

TEST_CASE("anonymizers commute with intensity scaling") {
  for (int id = 0; id < kPhantoms; ++id) {
    const Volume v = phantom(id);
    const double t = default_skin_threshold(v);
    for (double c : {0.5, 2.0, 3.7}) {
      const Volume cv = scaled(v, c);
      const FaceMask m = compute_face_mask(v, 8.0, t);
      const FaceMask cm = compute_face_mask(cv, 8.0, c * t);
      REQUIRE(cm.mask == m.mask);
      const FaceMask r = compute_removal_mask(v, t);
      REQUIRE(compute_removal_mask(cv, c * t).mask == r.mask);

      const Volume removed = remove_face(cv, r);
      const Volume removed_ref = scaled(remove_face(v, r), c);
      CHECK(removed.data == removed_ref.data);

      const Volume blurred = blur_face(cv, m, 2.0);
      const Volume blurred_ref = scaled(blur_face(v, m, 2.0), c);
      double worst = 0.0;
      for (std::size_t idx = 0; idx < v.data.size(); ++idx)
        worst = std::max(worst, std::abs(blurred.data[idx] - blurred_ref.data[idx]));
      CHECK(worst <= 1e-12 * c);
    }
  }
}

TEST_CASE("masks stay in the anterior half and clear of the brain") {
  for (int id = 0; id < kPhantoms; ++id) {
    const auto subject = generate_subject(id, kDesk, 2718);
    const Volume& v = subject.volume;
    const double t = default_skin_threshold(v);
    const auto brain = brain_region(subject.params, kDesk);
    const FaceMask blur_mask = compute_face_mask(v, 8.0, t);
    const FaceMask removal_mask = compute_removal_mask(v, t);
    // Across the face, removal reaches deeper than the superficial blur layer.
    std::size_t face_blur = 0, face_removal = 0;
    for (std::size_t idx = 0; idx < v.data.size(); ++idx) {
      if (idx % 64 >= 22) continue;  // columns anterior to floor(0.35 * 64)
      face_blur += blur_mask.mask[idx];
      face_removal += removal_mask.mask[idx];
      if (blur_mask.mask[idx]) REQUIRE(removal_mask.mask[idx]);
    }
    CHECK(face_removal > 2 * face_blur);
    for (const FaceMask* m : {&blur_mask, &removal_mask})
      for (std::size_t i = 0; i < 64; ++i)
        for (std::size_t j = 0; j < 64; ++j)
          for (std::size_t k = 0; k < 64; ++k) {
            const std::size_t idx = v.index(i, j, k);
            if (!m->mask[idx]) continue;
            REQUIRE(k < 32);
            REQUIRE(!brain[idx]);
          }
  }
}

TEST_CASE("removal mask runs from the surface to the posterior limit") {
  const Volume v = phantom(6);
  const double t = default_skin_threshold(v);
  const auto surface = skin_surface(v, t);
  const FaceMask m = compute_removal_mask(v, t, 0.35);
  const std::size_t limit = 22;  // floor(0.35 * 64)
  for (std::size_t i = 0; i < 64; ++i)
    for (std::size_t j = 0; j < 64; ++j) {
      const auto s = surface[i * 64 + j];
      for (std::size_t k = 0; k < 64; ++k) {
        const bool expected = s >= 0 && static_cast<std::ptrdiff_t>(k) >= s && k < limit;
        REQUIRE(static_cast<bool>(m.mask[v.index(i, j, k)]) == expected);
      }
    }
  REFACER_CHECK_ERROR(compute_removal_mask(v, t, 0.8), ErrorKind::InvalidArgument);
}
