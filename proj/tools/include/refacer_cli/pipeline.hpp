#pragma once

#include <set>
#include <string>
#include <vector>

#include "refacer_cli/config.hpp"
#include "refacer_cli/stages.hpp"

namespace refacer::cli {

/// Everything `pipeline --config` controls. Defaults are the desk-scale
/// experiment: 300 training and 50 held-out phantoms at 64^3, 21 slices,
/// 64x64 images, 60 epochs, both anonymisation methods.
struct PipelineConfig {
  fs::path out;
  std::size_t train_subjects = 300;
  std::size_t test_subjects = 50;
  std::array<std::size_t, 3> dims{64, 64, 64};
  std::uint64_t seed = 0;
  double boundary_cut = 0.0;
  std::vector<Method> methods{Method::Blur, Method::Remove};
  AnonymizeOptions anonymize;
  SliceOptions slice;
  TrainOptions train;
  EvaluateStageOptions evaluate;
  unsigned threads = 1;

  static const std::set<std::string>& keys();
  static PipelineConfig from(const KeyValueConfig& kv);
  /// Canonical key=value text (round-trips through from()).
  std::string to_text() const;
};

struct DomainResult {
  Method method = Method::Blur;
  TrainLog log;
  MetricsReport report;
  std::string checkpoint_sha256;
  std::string report_sha256;
};

struct PipelineResult {
  std::vector<DomainResult> domains;
};

/// phantom-gen -> anonymize -> slice -> train -> reconstruct -> evaluate under
/// cfg.out:
///   cohort/{train,test}            volumes
///   anon/<method>/{train,test}     anonymised volumes
///   slices/<domain>/{train,test}   slice datasets (original, blur, remove)
///   models/<method>                checkpoint and loss logs
///   recon/<method>                 refaced held-out slices
///   eval/<method>                  report.csv, report_summary.csv, montage/
/// Every directory gets its own manifest.json.
PipelineResult run_pipeline(const PipelineConfig& cfg, const Logger& log = {});

}  // namespace refacer::cli
