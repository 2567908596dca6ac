#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "refacer/phantom.hpp"
#include "refacer/volume_io.hpp"
#include "test_support.hpp"

using namespace refacer;
using refacer::testing::fixture;
using refacer::testing::TempDir;

namespace {

// Minimal header writer kept separate from serialize_nifti.
std::vector<std::uint8_t> raw_header(std::array<std::int16_t, 3> dims, std::int16_t datatype, std::int16_t bitpix,
                                     float slope = 1.0f, float inter = 0.0f) {
  std::vector<std::uint8_t> h(352, 0);
  auto put = [&](std::size_t off, const auto& v) { std::memcpy(h.data() + off, &v, sizeof v); };
  put(0, std::int32_t{348});
  const std::int16_t dim[8] = {3, dims[0], dims[1], dims[2], 1, 1, 1, 1};
  std::memcpy(h.data() + 40, dim, sizeof dim);
  put(70, datatype);
  put(72, bitpix);
  const float pixdim[8] = {1.0f, 1.2f, 0.938f, 0.938f, 0, 0, 0, 0};
  std::memcpy(h.data() + 76, pixdim, sizeof pixdim);
  put(108, 352.0f);
  put(112, slope);
  put(116, inter);
  std::memcpy(h.data() + 344, "n+1\0", 4);
  return h;
}

std::vector<std::uint8_t> data_section(const std::vector<std::uint8_t>& file) {
  return {file.begin() + static_cast<std::ptrdiff_t>(kNiftiDataOffset), file.end()};
}

}  // namespace

TEST_CASE("int16 fixture matches the independent byte walk") {
  const Volume v = read_nifti(fixture("int16_4x4x4.nii"));
  REQUIRE(v.dims() == std::array<std::size_t, 3>{4, 4, 4});
  CHECK(v.header.datatype == Datatype::Int16);
  CHECK(v.header.voxel_size[0] == doctest::Approx(1.2).epsilon(1e-7));
  CHECK(v.header.voxel_size[1] == doctest::Approx(0.9375));

  std::ifstream expected(fixture("int16_4x4x4.expected.txt"));
  REQUIRE(expected);
  std::string line;
  std::size_t checked = 0;
  while (std::getline(expected, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream in(line);
    std::size_t i, j, k;
    double value;
    in >> i >> j >> k >> value;
    CHECK(v.at(i, j, k) == value);
    ++checked;
  }
  CHECK(checked == 64);
}

TEST_CASE("intensity scaling is applied on read") {
  const Volume v = read_nifti(fixture("uint8_scaled_1x1x1.nii"));
  REQUIRE(v.data.size() == 1);
  CHECK(v.data[0] == 15.0);

  const Volume zero_slope = read_nifti(fixture("uint8_zero_slope.nii"));
  CHECK(zero_slope.data[0] == 9.0);
}

TEST_CASE("Table 1 geometry volume parses to the full voxel count") {
  auto bytes = raw_header({150, 256, 256}, 16, 32);
  const std::size_t n = 150ull * 256 * 256;
  bytes.resize(bytes.size() + 4 * n);
  const float marker = 3.5f;
  std::memcpy(bytes.data() + 352 + 4 * (n - 1), &marker, 4);  // last voxel in file order
  const Volume v = parse_nifti(bytes);
  CHECK(v.data.size() == 9830400);
  CHECK(v.at(149, 255, 255) == 3.5);
  CHECK(v.header.voxel_size[0] == doctest::Approx(1.2));
  CHECK(v.header.voxel_size[2] == doctest::Approx(0.938));
}

TEST_CASE("file order is axis 0 fastest") {
  auto bytes = raw_header({3, 2, 2}, 2, 8);
  for (std::uint8_t b = 0; b < 12; ++b) bytes.push_back(b);
  const Volume v = parse_nifti(bytes);
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t i = 0; i < 3; ++i) CHECK(v.at(i, j, k) == static_cast<double>(i + 3 * (j + 2 * k)));
}

TEST_CASE("fixture round trip is a fixed point") {
  TempDir dir;
  const Volume v = read_nifti(fixture("int16_4x4x4.nii"));
  write_nifti(v, dir / "a.nii");
  const Volume w = read_nifti(dir / "a.nii");
  CHECK(w.dims() == v.dims());
  CHECK(w.data == v.data);
  for (std::size_t d = 0; d < 3; ++d) CHECK(w.header.voxel_size[d] == static_cast<float>(v.header.voxel_size[d]));
  write_nifti(w, dir / "b.nii");
  const auto a_bytes = read_file_bytes(dir / "a.nii");
  const auto b_bytes = read_file_bytes(dir / "b.nii");
  CHECK(data_section(a_bytes) == data_section(b_bytes));
  CHECK(a_bytes == b_bytes);
}

TEST_CASE("phantom round trip stays within float32 rounding") {
  TempDir dir;
  const auto subject = generate_subject(3, {40, 48, 48}, 17);
  write_nifti(subject.volume, dir / "p.nii");
  const Volume back = read_nifti(dir / "p.nii");
  REQUIRE(back.data.size() == subject.volume.data.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < back.data.size(); ++i)
    worst = std::max(worst, std::abs(back.data[i] - subject.volume.data[i]));
  CHECK(worst <= 1e-6);
  CHECK(serialize_nifti(back) == read_file_bytes(dir / "p.nii"));
}

TEST_CASE("corrupted fixtures raise their designated errors") {
  REFACER_CHECK_ERROR(read_nifti(fixture("corrupt_magic.nii")), ErrorKind::WrongMagic);
  REFACER_CHECK_ERROR(read_nifti(fixture("corrupt_truncated.nii")), ErrorKind::TruncatedData);
  REFACER_CHECK_ERROR(read_nifti(fixture("corrupt_datatype.nii")), ErrorKind::UnsupportedDatatype);
  REFACER_CHECK_ERROR(read_nifti(fixture("corrupt_nonfinite.nii")), ErrorKind::NonFinite);
  REFACER_CHECK_ERROR(read_nifti(fixture("corrupt_big_endian.nii")), ErrorKind::UnsupportedFeature);
  REFACER_CHECK_ERROR(read_nifti(fixture("corrupt_multiframe.nii")), ErrorKind::UnsupportedFeature);
  REFACER_CHECK_ERROR(read_nifti(fixture("does_not_exist.nii")), ErrorKind::IoFailure);
  REFACER_CHECK_ERROR(parse_nifti(std::vector<std::uint8_t>(100, 0)), ErrorKind::TruncatedData);
}

TEST_CASE("bitpix inconsistent with datatype is rejected") {
  auto bytes = raw_header({1, 1, 1}, 4, 8);
  bytes.push_back(0);
  bytes.push_back(0);
  REFACER_CHECK_ERROR(parse_nifti(bytes), ErrorKind::UnsupportedDatatype);
}

TEST_CASE("writing to an unwritable path fails loudly") {
  const Volume v(std::array<std::size_t, 3>{2, 2, 2}, std::array<double, 3>{1.0, 1.0, 1.0});
  REFACER_CHECK_ERROR(write_nifti(v, "/nonexistent_dir/x/y.nii"), ErrorKind::IoFailure);
}

TEST_CASE("PGM encoding") {
  auto samples = [](const std::vector<std::uint8_t>& pgm, std::size_t header_len) {
    std::vector<unsigned> out;
    for (std::size_t i = header_len; i + 1 < pgm.size(); i += 2) out.push_back((pgm[i] << 8) | pgm[i + 1]);
    return out;
  };
  const std::string header = "P5\n3 2\n65535\n";

  SliceImage white(3, 2, 2.0);
  auto pgm = encode_pgm(white, 2.0);
  REQUIRE(pgm.size() == header.size() + 12);
  CHECK(std::string(pgm.begin(), pgm.begin() + static_cast<std::ptrdiff_t>(header.size())) == header);
  for (auto s : samples(pgm, header.size())) CHECK(s == 65535);

  for (auto s : samples(encode_pgm(SliceImage(3, 2, 0.0), 2.0), header.size())) CHECK(s == 0);
  for (auto s : samples(encode_pgm(SliceImage(3, 2, 1.0), 2.0), header.size())) {
    CHECK(s >= 32767);
    CHECK(s <= 32769);
  }
  for (auto s : samples(encode_pgm(SliceImage(3, 2, 5.0), 2.0), header.size())) CHECK(s == 65535);
  for (auto s : samples(encode_pgm(SliceImage(3, 2, -1.0), 2.0), header.size())) CHECK(s == 0);

  REFACER_CHECK_ERROR(encode_pgm(white, 0.0), ErrorKind::InvalidArgument);
  REFACER_CHECK_ERROR(write_image_pgm(white, "/nonexistent_dir/a.pgm", 1.0), ErrorKind::IoFailure);
}
