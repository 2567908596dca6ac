#include "refacer_cli/stages.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "refacer/error.hpp"
#include "refacer/parallel.hpp"
#include "refacer/phantom.hpp"
#include "refacer/slicing.hpp"
#include "refacer/volume_io.hpp"

namespace refacer::cli {

Method parse_method(const std::string& name) {
  if (name == "blur") return Method::Blur;
  if (name == "remove") return Method::Remove;
  throw Error(ErrorKind::InvalidArgument, "method must be blur or remove, got '" + name + "'");
}

std::string to_string(Method m) { return m == Method::Blur ? "blur" : "remove"; }

DomainTag domain_of(Method m) noexcept { return m == Method::Blur ? DomainTag::Blurred : DomainTag::Removed; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorKind::IoFailure, "cannot write '" + path.string() + "'");
}

std::vector<fs::path> list_volumes(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::MissingInput, "no such directory '" + dir.string() + "'");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".nii") out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Error(ErrorKind::MissingInput, "no .nii volumes in '" + dir.string() + "'");
  return out;
}

std::int64_t subject_id_from_name(const fs::path& file, std::int64_t fallback) {
  const std::string stem = file.stem().string();
  const auto first = stem.find_first_of("0123456789");
  if (first == std::string::npos) return fallback;
  auto last = first;
  while (last + 1 < stem.size() && std::isdigit(static_cast<unsigned char>(stem[last + 1]))) ++last;
  return std::stoll(stem.substr(first, std::min<std::size_t>(last - first + 1, 18)));
}

std::vector<SliceImage> read_slices(const fs::path& dir, DomainTag domain) {
  return read_slice_dataset(dir, domain).images;
}

// ---------------------------------------------------------------- phantom-gen

void phantom_gen(const PhantomGenOptions& opt, const fs::path& out) {
  if (opt.subjects == 0) throw Error(ErrorKind::InvalidArgument, "--subjects must be >= 1");
  PhantomOptions popt;
  popt.boundary_cut = opt.boundary_cut;
  const auto cohort = generate_cohort(opt.subjects, opt.dims, opt.seed, opt.first_id, popt, opt.threads);
  fs::create_directories(out);

  std::ostringstream csv;
  csv.precision(17);
  csv << "subject_id,nose_length,nose_angle,lip_protrusion,chin_extent,forehead_slope,skull_rows,skull_cols,"
         "texture_seed,file\n";
  std::vector<std::string> names(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    char name[40];
    std::snprintf(name, sizeof name, "subject_%05lld.nii", static_cast<long long>(cohort[i].subject_id));
    names[i] = name;
    const FaceParams& p = cohort[i].params;
    csv << cohort[i].subject_id << ',' << p.nose_length << ',' << p.nose_angle << ',' << p.lip_protrusion << ','
        << p.chin_extent << ',' << p.forehead_slope << ',' << p.skull_axes[0] << ',' << p.skull_axes[1] << ','
        << p.texture_seed << ',' << name << '\n';
  }
  parallel_for(cohort.size(), opt.threads, [&](std::size_t i) { write_nifti(cohort[i].volume, out / names[i]); });
  write_text(out / "cohort.csv", csv.str());
}

// ---------------------------------------------------------------- anonymize

Volume anonymize_volume(const Volume& v, const AnonymizeOptions& opt) {
  const double threshold = opt.threshold ? *opt.threshold : default_skin_threshold(v);
  if (opt.method == Method::Blur)
    return blur_face(v, compute_face_mask(v, opt.blur_depth_mm, threshold), opt.blur_sigma_vox);
  return remove_face(v, compute_removal_mask(v, threshold, opt.removal_limit));
}

void anonymize_dir(const fs::path& in, const fs::path& out, const AnonymizeOptions& opt) {
  const auto files = list_volumes(in);
  fs::create_directories(out);
  parallel_for(files.size(), opt.threads, [&](std::size_t i) {
    write_nifti(anonymize_volume(read_nifti(files[i]), opt), out / files[i].filename());
  });
}

// ---------------------------------------------------------------- slice

Volume move_axis_first(const Volume& v, std::size_t axis) {
  if (axis > 2) throw Error(ErrorKind::InvalidArgument, "axis must be 0, 1 or 2");
  if (axis == 0) return v;
  const std::array<std::size_t, 3> order{axis, 0, axis == 1 ? 2u : 1u};
  const auto& d = v.dims();
  VolumeHeader h = v.header;
  for (std::size_t a = 0; a < 3; ++a) {
    h.dims[a] = d[order[a]];
    h.voxel_size[a] = v.header.voxel_size[order[a]];
  }
  Volume out(h, std::vector<double>(v.data.size()));
  std::array<std::size_t, 3> src{};
  for (std::size_t i = 0; i < h.dims[0]; ++i)
    for (std::size_t j = 0; j < h.dims[1]; ++j)
      for (std::size_t k = 0; k < h.dims[2]; ++k) {
        src[order[0]] = i;
        src[order[1]] = j;
        src[order[2]] = k;
        out.at(i, j, k) = v.at(src[0], src[1], src[2]);
      }
  return out;
}

void slice_dir(const fs::path& in, const fs::path& out, const SliceOptions& opt) {
  const auto files = list_volumes(in);
  const fs::path norm_dir = opt.norm_source.empty() ? in : opt.norm_source;
  const SliceSpec spec{opt.count, opt.span};
  std::vector<std::vector<SliceImage>> per_file(files.size());
  parallel_for(files.size(), opt.threads, [&](std::size_t i) {
    const fs::path ref_path = norm_dir / files[i].filename();
    if (!fs::exists(ref_path))
      throw Error(ErrorKind::MissingInput, "no normalisation volume '" + ref_path.string() + "'");
    const Volume v = move_axis_first(read_nifti(files[i]), opt.axis);
    const Volume ref = ref_path == files[i] ? v : move_axis_first(read_nifti(ref_path), opt.axis);
    const std::int64_t id = subject_id_from_name(files[i], static_cast<std::int64_t>(i));
    auto slices = normalize_subject(extract_slices(v, spec, id, opt.domain), ref);
    for (auto& s : slices)
      if (s.width != opt.size || s.height != opt.size) s = resample_to(s, opt.size);
    per_file[i] = std::move(slices);
  });

  SliceDataset ds;
  ds.height = ds.width = opt.size;
  for (auto& slices : per_file)
    for (auto& s : slices) ds.images.push_back(std::move(s));
  write_slice_dataset(ds, out);
}

// ---------------------------------------------------------------- train / reconstruct

namespace {

std::vector<SliceImage> sized(std::vector<SliceImage> images, std::size_t size) {
  for (auto& s : images)
    if (s.width != size || s.height != size) s = resample_to(s, size);
  return images;
}

}  // namespace

TrainLog train_dirs(const fs::path& anon, const fs::path& orig, const fs::path& out, const TrainOptions& opt,
                    const Logger& log) {
  const auto anon_images = sized(read_slices(anon, DomainTag::Blurred), opt.size);
  const auto orig_images = sized(read_slices(orig, DomainTag::Original), opt.size);
  fs::create_directories(out);

  TrainConfig cfg = opt.train;
  if (cfg.checkpoint_every > 0) cfg.checkpoint_dir = out / "checkpoints";
  CycleGanModel model = build_model(opt.gen, opt.disc, cfg.seed);
  const TrainLog result = train(model, anon_images, orig_images, cfg, [&](const StepLoss& e, const CycleGanModel&) {
    if (!log) return;
    char line[200];
    std::snprintf(line, sizeof line, "epoch %zu/%zu lr %.3g  D %.4f/%.4f  G_adv %.4f/%.4f  cycle %.4f", e.epoch + 1,
                  cfg.epochs, e.lr, e.d_orig, e.d_anon, e.g_adv_reface, e.g_adv_deface, e.cycle_total());
    log(line);
  });
  save_checkpoint(model, out / "model.rfck");
  write_text(out / "loss_steps.csv", result.to_csv());
  write_text(out / "loss_epochs.csv", result.epochs_to_csv());
  return result;
}

void reconstruct_dir(const fs::path& ckpt, const fs::path& in, const fs::path& out) {
  if (!fs::exists(ckpt)) throw Error(ErrorKind::MissingInput, "no checkpoint '" + ckpt.string() + "'");
  CycleGanModel model = load_checkpoint(ckpt);
  SliceDataset input = read_slice_dataset(in, DomainTag::Blurred);
  SliceDataset output;
  output.height = input.height;
  output.width = input.width;
  output.images.reserve(input.images.size());
  for (const auto& s : input.images) {
    SliceImage r = reface(model, s);
    r.domain = DomainTag::Reconstructed;
    output.images.push_back(std::move(r));
  }
  write_slice_dataset(output, out);
}

// ---------------------------------------------------------------- evaluate

MetricsReport evaluate_dirs(const fs::path& orig, const fs::path& anon, const fs::path& recon, const fs::path& report,
                            const fs::path& montage_dir, const EvaluateStageOptions& opt) {
  const auto o = read_slices(orig, DomainTag::Original);
  const auto a = read_slices(anon, DomainTag::Blurred);
  const auto r = read_slices(recon, DomainTag::Reconstructed);
  const auto triples = match_triples(o, a, r);

  EvaluateOptions eopt;
  eopt.anterior_at_right = opt.anterior_at_right;
  eopt.threads = opt.threads;
  const MetricsReport result = evaluate(triples, eopt);

  if (report.has_parent_path()) fs::create_directories(report.parent_path());
  write_text(report, result.to_csv());
  write_text(report.parent_path() / (report.stem().string() + "_summary.csv"), result.summary_csv());

  if (!montage_dir.empty() && opt.montage_subjects > 0) {
    fs::create_directories(montage_dir);
    std::map<std::int64_t, std::vector<const SliceTriple*>> by_subject;
    for (const auto& t : triples) by_subject[t.original.subject_id].push_back(&t);
    std::size_t written = 0;
    for (auto& [id, list] : by_subject) {
      if (written++ == opt.montage_subjects) break;
      std::sort(list.begin(), list.end(), [](const SliceTriple* x, const SliceTriple* y) {
        return x->original.slice_index < y->original.slice_index;
      });
      std::vector<std::vector<const SliceImage*>> grid(3);
      for (const SliceTriple* t : list) {
        grid[0].push_back(&t->original);
        grid[1].push_back(&t->anonymized);
        grid[2].push_back(&t->reconstructed);
      }
      char name[48];
      std::snprintf(name, sizeof name, "montage_subject_%05lld.pgm", static_cast<long long>(id));
      write_image_pgm(make_montage(grid), montage_dir / name, 1.2);
    }
  }
  return result;
}

}  // namespace refacer::cli
