#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "refacer/anonymize.hpp"
#include "refacer/cyclegan.hpp"
#include "refacer/image.hpp"
#include "refacer/metrics.hpp"

namespace refacer::cli {

namespace fs = std::filesystem;

/// Progress sink; stages never print directly.
using Logger = std::function<void(const std::string&)>;

enum class Method { Blur, Remove };
Method parse_method(const std::string& name);
std::string to_string(Method m);
DomainTag domain_of(Method m) noexcept;

struct PhantomGenOptions {
  std::size_t subjects = 1;
  std::array<std::size_t, 3> dims{64, 64, 64};
  std::uint64_t seed = 0;
  std::int64_t first_id = 0;
  double boundary_cut = 0.0;
  unsigned threads = 1;
};
/// subject_NNNNN.nii per subject plus cohort.csv.
void phantom_gen(const PhantomGenOptions& opt, const fs::path& out);

struct AnonymizeOptions {
  Method method = Method::Blur;
  double blur_depth_mm = AnonymizeDefaults::blur_depth_mm;
  double blur_sigma_vox = AnonymizeDefaults::blur_sigma_vox;
  double removal_limit = AnonymizeDefaults::removal_posterior_limit;
  /// Skin threshold; default_skin_threshold(volume) when unset.
  std::optional<double> threshold;
  unsigned threads = 1;
};
Volume anonymize_volume(const Volume& v, const AnonymizeOptions& opt);
/// Same file names as the input directory.
void anonymize_dir(const fs::path& in, const fs::path& out, const AnonymizeOptions& opt);

struct SliceOptions {
  std::size_t count = 21;
  double span = 0.6;
  std::size_t size = 64;
  std::size_t axis = 0;
  DomainTag domain = DomainTag::Original;
  /// Volumes whose 99.5-percentile normalises each subject (same file names);
  /// the input directory itself when empty.
  fs::path norm_source;
  unsigned threads = 1;
};
/// Moves `axis` to the front; the other two keep their relative order.
Volume move_axis_first(const Volume& v, std::size_t axis);
void slice_dir(const fs::path& in, const fs::path& out, const SliceOptions& opt);

struct TrainOptions {
  GeneratorConfig gen;
  DiscriminatorConfig disc;
  TrainConfig train;
  std::size_t size = 64;
};
/// model.rfck, loss_steps.csv, loss_epochs.csv (+ checkpoints/ when enabled).
TrainLog train_dirs(const fs::path& anon, const fs::path& orig, const fs::path& out, const TrainOptions& opt,
                    const Logger& log = {});

void reconstruct_dir(const fs::path& ckpt, const fs::path& in, const fs::path& out);

struct EvaluateStageOptions {
  bool anterior_at_right = false;
  std::size_t montage_subjects = 3;
  unsigned threads = 1;
};
/// Writes the per-slice CSV to `report` and a summary next to it
/// (<stem>_summary.csv); montages (original / anonymised / reconstructed rows)
/// go to `montage_dir` when it is non-empty.
MetricsReport evaluate_dirs(const fs::path& orig, const fs::path& anon, const fs::path& recon, const fs::path& report,
                            const fs::path& montage_dir, const EvaluateStageOptions& opt);

/// Every *.nii under `dir`, sorted by name.
std::vector<fs::path> list_volumes(const fs::path& dir);
/// First run of digits: "subject_00042.nii" -> 42, "IXI017-Guys-0698-T1.nii" -> 17;
/// `fallback` when there is none.
std::int64_t subject_id_from_name(const fs::path& file, std::int64_t fallback);
std::vector<SliceImage> read_slices(const fs::path& dir, DomainTag domain);
void write_text(const fs::path& path, const std::string& text);

}  // namespace refacer::cli
