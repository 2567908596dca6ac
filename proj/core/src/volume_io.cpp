#include "refacer/volume_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "refacer/bytes.hpp"
#include "refacer/error.hpp"

namespace refacer {

namespace {

// NIfTI-1 header field offsets.
constexpr std::size_t kOffSizeofHdr = 0;
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffSformCode = 254;
constexpr std::size_t kOffSrowX = 280;
constexpr std::size_t kOffMagic = 344;

std::size_t bytes_per_voxel(Datatype dt) {
  switch (dt) {
    case Datatype::UInt8: return 1;
    case Datatype::Int16: return 2;
    case Datatype::Float32: return 4;
  }
  return 0;
}

Datatype datatype_from_code(std::int16_t code) {
  switch (code) {
    case 2: return Datatype::UInt8;
    case 4: return Datatype::Int16;
    case 16: return Datatype::Float32;
    default:
      throw Error(ErrorKind::UnsupportedDatatype, "NIfTI datatype code " + std::to_string(code));
  }
}

}  // namespace

Volume::Volume(VolumeHeader h, std::vector<double> values) : header(h), data(std::move(values)) {
  validate();
}

Volume::Volume(std::array<std::size_t, 3> dims, std::array<double, 3> voxel_size) {
  header.dims = dims;
  header.voxel_size = voxel_size;
  data.assign(header.voxel_count(), 0.0);
  validate();
}

void Volume::validate() const {
  for (std::size_t d = 0; d < 3; ++d) {
    if (header.dims[d] < 1) throw Error(ErrorKind::InvalidArgument, "volume dims must be >= 1");
    if (!(header.voxel_size[d] > 0.0) || !std::isfinite(header.voxel_size[d]))
      throw Error(ErrorKind::InvalidArgument, "voxel sizes must be positive");
  }
  if (data.size() != header.voxel_count())
    throw Error(ErrorKind::DimMismatch, "data length " + std::to_string(data.size()) +
                                            " != voxel count " + std::to_string(header.voxel_count()));
  if (!std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); }))
    throw Error(ErrorKind::NonFinite, "volume contains non-finite intensities");
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorKind::IoFailure, "read error on '" + path.string() + "'");
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw Error(ErrorKind::IoFailure, "write error on '" + path.string() + "'");
}

Volume parse_nifti(const std::vector<std::uint8_t>& bytes) {
  const std::span<const std::uint8_t> buf(bytes);
  if (buf.size() < kNiftiHeaderSize) throw Error(ErrorKind::TruncatedData, "file shorter than a NIfTI-1 header");

  const auto sizeof_hdr = bytes::load_le<std::int32_t>(buf, kOffSizeofHdr);
  if (sizeof_hdr != static_cast<std::int32_t>(kNiftiHeaderSize)) {
    if (bytes::byteswap_value(sizeof_hdr) == static_cast<std::int32_t>(kNiftiHeaderSize))
      throw Error(ErrorKind::UnsupportedFeature, "big-endian NIfTI files are not supported");
    throw Error(ErrorKind::WrongMagic, "sizeof_hdr is " + std::to_string(sizeof_hdr) + ", expected 348");
  }
  static constexpr std::uint8_t kMagic[4] = {'n', '+', '1', '\0'};
  if (!std::equal(std::begin(kMagic), std::end(kMagic), buf.begin() + kOffMagic)) {
    if (buf[kOffMagic] == 'n' && buf[kOffMagic + 1] == 'i' && buf[kOffMagic + 2] == '1')
      throw Error(ErrorKind::UnsupportedFeature, "two-file (.hdr/.img) NIfTI is not supported");
    throw Error(ErrorKind::WrongMagic, "missing \"n+1\" magic at offset 344");
  }

  std::int16_t dim[8];
  for (int d = 0; d < 8; ++d) dim[d] = bytes::load_le<std::int16_t>(buf, kOffDim + 2 * d);
  if (dim[0] < 3 || dim[0] > 7) throw Error(ErrorKind::UnsupportedFeature, "dim[0] must be 3, got " + std::to_string(dim[0]));
  for (int d = 4; d <= dim[0]; ++d)
    if (dim[d] != 1) throw Error(ErrorKind::UnsupportedFeature, "multi-frame volumes are not supported");

  VolumeHeader header;
  header.datatype = datatype_from_code(bytes::load_le<std::int16_t>(buf, kOffDatatype));
  const auto bitpix = bytes::load_le<std::int16_t>(buf, kOffBitpix);
  if (static_cast<std::size_t>(bitpix) != 8 * bytes_per_voxel(header.datatype))
    throw Error(ErrorKind::UnsupportedDatatype, "bitpix " + std::to_string(bitpix) + " does not match datatype");

  for (std::size_t d = 0; d < 3; ++d) {
    if (dim[d + 1] < 1) throw Error(ErrorKind::UnsupportedFeature, "non-positive dimension");
    header.dims[d] = static_cast<std::size_t>(dim[d + 1]);
    const double pix = bytes::load_le<float>(buf, kOffPixdim + 4 * (d + 1));
    if (!(pix > 0.0) || !std::isfinite(pix)) throw Error(ErrorKind::UnsupportedFeature, "non-positive voxel size");
    header.voxel_size[d] = pix;
  }

  const float vox_offset = bytes::load_le<float>(buf, kOffVoxOffset);
  if (!(vox_offset >= static_cast<float>(kNiftiHeaderSize)) || vox_offset != std::floor(vox_offset))
    throw Error(ErrorKind::UnsupportedFeature, "invalid vox_offset");
  double slope = bytes::load_le<float>(buf, kOffSclSlope);
  double inter = bytes::load_le<float>(buf, kOffSclInter);
  if (!std::isfinite(slope) || !std::isfinite(inter)) throw Error(ErrorKind::NonFinite, "scl_slope/scl_inter not finite");
  if (slope == 0.0) {
    slope = 1.0;
    inter = 0.0;
  }
  header.scl_slope = slope;
  header.scl_inter = inter;
  const auto qform = bytes::load_le<std::int16_t>(buf, kOffQformCode);
  const auto sform = bytes::load_le<std::int16_t>(buf, kOffSformCode);
  header.orientation = (qform > 0 || sform > 0) ? Orientation::RasLike : Orientation::Unknown;

  const std::size_t n = header.voxel_count();
  const std::size_t bpv = bytes_per_voxel(header.datatype);
  const auto data_start = static_cast<std::size_t>(vox_offset);
  if (data_start > buf.size() || (buf.size() - data_start) / bpv < n)
    throw Error(ErrorKind::TruncatedData, "data section holds fewer than " + std::to_string(n) + " voxels");

  std::vector<double> data(n);
  const auto [nx, ny, nz] = header.dims;
  // File order has axis 0 fastest; memory order has axis 2 fastest.
  std::size_t file_index = 0;
  for (std::size_t k = 0; k < nz; ++k) {
    for (std::size_t j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i < nx; ++i, ++file_index) {
        const std::size_t at = data_start + file_index * bpv;
        double raw = 0.0;
        switch (header.datatype) {
          case Datatype::UInt8: raw = buf[at]; break;
          case Datatype::Int16: raw = bytes::load_le<std::int16_t>(buf, at); break;
          case Datatype::Float32: raw = bytes::load_le<float>(buf, at); break;
        }
        const double value = raw * slope + inter;
        if (!std::isfinite(value)) throw Error(ErrorKind::NonFinite, "non-finite voxel at file index " + std::to_string(file_index));
        data[(i * ny + j) * nz + k] = value;
      }
    }
  }
  Volume volume;
  volume.header = header;
  volume.data = std::move(data);
  return volume;
}

Volume read_nifti(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::IoFailure, "no such file '" + path.string() + "'");
  return parse_nifti(read_file_bytes(path));
}

std::vector<std::uint8_t> serialize_nifti(const Volume& volume) {
  volume.validate();
  const auto& h = volume.header;
  for (std::size_t d = 0; d < 3; ++d)
    if (h.dims[d] > 32767) throw Error(ErrorKind::UnsupportedFeature, "dimension exceeds NIfTI-1 int16 range");

  const std::size_t n = h.voxel_count();
  std::vector<std::uint8_t> out(kNiftiDataOffset + 4 * n, 0);
  const std::span<std::uint8_t> buf(out);
  bytes::store_le<std::int32_t>(buf, kOffSizeofHdr, static_cast<std::int32_t>(kNiftiHeaderSize));
  const std::int16_t dim[8] = {3,
                               static_cast<std::int16_t>(h.dims[0]),
                               static_cast<std::int16_t>(h.dims[1]),
                               static_cast<std::int16_t>(h.dims[2]),
                               1, 1, 1, 1};
  for (int d = 0; d < 8; ++d) bytes::store_le<std::int16_t>(buf, kOffDim + 2 * d, dim[d]);
  bytes::store_le<std::int16_t>(buf, kOffDatatype, static_cast<std::int16_t>(Datatype::Float32));
  bytes::store_le<std::int16_t>(buf, kOffBitpix, 32);
  bytes::store_le<float>(buf, kOffPixdim, 1.0f);  // qfac
  for (std::size_t d = 0; d < 3; ++d)
    bytes::store_le<float>(buf, kOffPixdim + 4 * (d + 1), static_cast<float>(h.voxel_size[d]));
  bytes::store_le<float>(buf, kOffVoxOffset, static_cast<float>(kNiftiDataOffset));
  bytes::store_le<float>(buf, kOffSclSlope, 1.0f);
  bytes::store_le<float>(buf, kOffSclInter, 0.0f);
  buf[kOffXyztUnits] = 2;  // millimetres
  if (h.orientation == Orientation::RasLike) {
    bytes::store_le<std::int16_t>(buf, kOffSformCode, 1);
    for (std::size_t row = 0; row < 3; ++row)
      bytes::store_le<float>(buf, kOffSrowX + 16 * row + 4 * row, static_cast<float>(h.voxel_size[row]));
  }
  static constexpr char kMagic[4] = {'n', '+', '1', '\0'};
  std::copy(std::begin(kMagic), std::end(kMagic), out.begin() + kOffMagic);

  const auto [nx, ny, nz] = h.dims;
  std::size_t file_index = 0;
  for (std::size_t k = 0; k < nz; ++k)
    for (std::size_t j = 0; j < ny; ++j)
      for (std::size_t i = 0; i < nx; ++i, ++file_index)
        bytes::store_le<float>(buf, kNiftiDataOffset + 4 * file_index,
                               static_cast<float>(volume.data[(i * ny + j) * nz + k]));
  return out;
}

void write_nifti(const Volume& volume, const std::filesystem::path& path) {
  write_file_bytes(path, serialize_nifti(volume));
}

std::vector<std::uint8_t> encode_pgm(const SliceImage& image, double white_level) {
  if (!(white_level > 0.0)) throw Error(ErrorKind::InvalidArgument, "white_level must be > 0");
  if (image.pixels.size() != image.width * image.height)
    throw Error(ErrorKind::DimMismatch, "pixel count does not match width*height");
  const std::string header =
      "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n65535\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + 2 * image.pixels.size());
  for (double v : image.pixels) {
    const double scaled = std::clamp(v / white_level, 0.0, 1.0);
    const auto level = static_cast<std::uint16_t>(std::lround(scaled * 65535.0));
    out.push_back(static_cast<std::uint8_t>(level >> 8));
    out.push_back(static_cast<std::uint8_t>(level & 0xFF));
  }
  return out;
}

void write_image_pgm(const SliceImage& image, const std::filesystem::path& path, double white_level) {
  write_file_bytes(path, encode_pgm(image, white_level));
}

}  // namespace refacer
