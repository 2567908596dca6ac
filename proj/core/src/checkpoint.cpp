#include <map>
#include <string>

#include "refacer/bytes.hpp"
#include "refacer/cyclegan.hpp"
#include "refacer/error.hpp"
#include "refacer/volume_io.hpp"

namespace refacer {

std::vector<std::uint8_t> encode_checkpoint(const CycleGanModel& model) {
  const auto params = model.named_parameters();
  std::vector<std::uint8_t> out;
  bytes::append_raw(out, "RFCK", 4);
  bytes::append_le<std::uint32_t>(out, kCheckpointVersion);
  bytes::append_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, p] : params) {
    bytes::append_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    bytes::append_raw(out, name.data(), name.size());
    const ad::Shape s = p->value.shape;
    bytes::append_le<std::uint32_t>(out, 4);
    for (std::size_t d : {s.n, s.c, s.h, s.w}) bytes::append_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (Scalar v : p->value.data) bytes::append_le<float>(out, v);
  }
  return out;
}

namespace {

[[noreturn]] void truncated(const std::string& what) { throw Error(ErrorKind::TruncatedRecord, what); }

const Tensor& require(const std::map<std::string, Tensor>& records, const std::string& name) {
  const auto it = records.find(name);
  if (it == records.end()) truncated("checkpoint has no record '" + name + "'");
  return it->second;
}

}  // namespace

CycleGanModel decode_checkpoint(const std::vector<std::uint8_t>& raw) {
  bytes::Reader in(raw);
  std::string magic;
  if (!in.read_string(4, magic) || magic != "RFCK") throw Error(ErrorKind::BadMagic, "checkpoint magic is not RFCK");
  std::uint32_t version = 0, count = 0;
  if (!in.read(version)) truncated("checkpoint header truncated");
  if (version != kCheckpointVersion)
    throw Error(ErrorKind::VersionMismatch, "checkpoint version " + std::to_string(version) + ", expected " +
                                                std::to_string(kCheckpointVersion));
  if (!in.read(count)) truncated("checkpoint header truncated");

  std::map<std::string, Tensor> records;
  for (std::uint32_t r = 0; r < count; ++r) {
    std::uint32_t name_len = 0, rank = 0;
    std::string name;
    if (!in.read(name_len) || !in.read_string(name_len, name) || !in.read(rank))
      truncated("record " + std::to_string(r) + " header truncated");
    if (rank != 4) throw Error(ErrorKind::ShapeMismatch, "record '" + name + "' has rank " + std::to_string(rank));
    std::uint32_t dims[4];
    for (auto& d : dims)
      if (!in.read(d)) truncated("record '" + name + "' shape truncated");
    const ad::Shape shape{dims[0], dims[1], dims[2], dims[3]};
    if (!in.can_read(4 * shape.size())) truncated("record '" + name + "' payload truncated");
    Tensor t(shape);
    for (auto& v : t.data) in.read(v);
    records.emplace(std::move(name), std::move(t));
  }

  GeneratorConfig gen_cfg;
  const Tensor& stem = require(records, "G_reface.stem.weight");
  gen_cfg.base_channels = stem.shape.n;
  gen_cfg.in_channels = stem.shape.c;
  gen_cfg.out_channels = require(records, "G_reface.exit.weight").shape.n;
  gen_cfg.n_res_blocks = 0;
  while (records.count("G_reface.res" + std::to_string(gen_cfg.n_res_blocks) + ".conv1.weight")) ++gen_cfg.n_res_blocks;
  DiscriminatorConfig disc_cfg;
  const Tensor& d1 = require(records, "D_orig.d1.weight");
  disc_cfg.base_channels = d1.shape.n;
  disc_cfg.in_channels = d1.shape.c;

  CycleGanModel model = build_model(gen_cfg, disc_cfg, 0);
  const auto params = model.named_parameters();
  if (params.size() != records.size())
    throw Error(ErrorKind::ShapeMismatch, "checkpoint holds " + std::to_string(records.size()) +
                                              " records, architecture needs " + std::to_string(params.size()));
  for (auto& [name, p] : params) {
    const Tensor& t = require(records, name);
    if (!(t.shape == p->value.shape))
      throw Error(ErrorKind::ShapeMismatch, "record '" + name + "' has shape " + ad::to_string(t.shape));
    p->value = t;
    p->grad = Tensor(t.shape);
  }
  return model;
}

void save_checkpoint(const CycleGanModel& model, const std::filesystem::path& path) {
  write_file_bytes(path, encode_checkpoint(model));
}

CycleGanModel load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::IoFailure, "no such checkpoint '" + path.string() + "'");
  return decode_checkpoint(read_file_bytes(path));
}

}  // namespace refacer
