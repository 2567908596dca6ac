#include <chrono>
#include <cmath>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "acceptance.hpp"
#include "refacer/cyclegan.hpp"
#include "refacer/rng.hpp"
#include "refacer_cli/pipeline.hpp"
#include "test_support.hpp"

namespace refacer::acceptance {

namespace {

using Clock = std::chrono::steady_clock;
using cli::Method;

constexpr double kBudgetHours = 4.0;
constexpr std::uint64_t kSeeds[] = {1, 2, 3};

cli::PipelineConfig desk_config(Method method, std::uint64_t seed, const std::filesystem::path& out) {
  cli::PipelineConfig cfg;  // desk-scale defaults: 300 + 50 subjects, 64x64, 21 slices, 60 epochs, batch 1
  cfg.methods = {method};
  cfg.seed = seed;
  cfg.train.train.seed = seed;
  cfg.out = out;
  cfg.threads = 1;
  return cfg;
}

/// Seconds per training step of the desk-scale model on 64x64 inputs.
double measure_step_seconds(const cli::PipelineConfig& cfg) {
  Rng rng(5);
  std::vector<SliceImage> anon, orig;
  for (int i = 0; i < 3; ++i) {
    anon.push_back(refacer::testing::random_image(cfg.slice.size, cfg.slice.size, rng));
    orig.push_back(refacer::testing::random_image(cfg.slice.size, cfg.slice.size, rng));
  }
  CycleGanModel model = build_model(cfg.train.gen, cfg.train.disc, 1);
  TrainConfig t = cfg.train.train;
  t.epochs = 2;
  const auto t0 = Clock::now();
  const TrainLog log = train(model, anon, orig, t);
  return std::chrono::duration<double>(Clock::now() - t0).count() / static_cast<double>(log.steps.size());
}

struct Run {
  Method method;
  std::uint64_t seed;
  cli::DomainResult result;
  double hours = 0.0;
};

/// Shared state for criteria 6-10: the projection, then (if affordable or
/// forced) the nine-plus-six training runs.
class Experiments {
 public:
  explicit Experiments(ExperimentOptions opt) : opt_(std::move(opt)) {}

  struct Projection {
    double step_seconds = 0.0;
    std::size_t steps_per_run = 0;
    double hours_per_run = 0.0;
  };

  const Projection& projection() {
    if (!projection_) {
      const auto cfg = desk_config(Method::Blur, 1, {});
      Projection p;
      p.step_seconds = measure_step_seconds(cfg);
      const std::size_t images = cfg.train_subjects * cfg.slice.count;
      p.steps_per_run = (images + cfg.train.train.batch_size - 1) / cfg.train.train.batch_size * cfg.train.train.epochs;
      p.hours_per_run = p.step_seconds * static_cast<double>(p.steps_per_run) / 3600.0;
      projection_ = p;
    }
    return *projection_;
  }

  bool affordable(std::size_t runs) { return opt_.force || projection().hours_per_run * runs <= kBudgetHours; }

  std::string skipped(std::size_t runs, const std::string& what) {
    const Projection& p = projection();
    return "not run: " + what + " needs " + std::to_string(runs) + " desk-scale training runs of " +
           std::to_string(p.steps_per_run) + " steps at a measured " + format_number(p.step_seconds) +
           " s/step, projected " + format_number(p.hours_per_run * runs) + " h against a " +
           format_number(kBudgetHours) + " h budget (pass --run-experiments to force)";
  }

  const std::vector<Run>& runs(Method method) {
    auto& slot = method == Method::Blur ? blur_ : remove_;
    if (!slot) {
      slot.emplace();
      for (std::uint64_t seed : kSeeds) slot->push_back(execute(method, seed, "runs"));
    }
    return *slot;
  }

  const std::vector<Run>& reruns(Method method) {
    auto& slot = method == Method::Blur ? blur_rerun_ : remove_rerun_;
    if (!slot) {
      slot.emplace();
      for (std::uint64_t seed : kSeeds) slot->push_back(execute(method, seed, "reruns"));
    }
    return *slot;
  }

 private:
  Run execute(Method method, std::uint64_t seed, const std::string& group) {
    const auto dir = opt_.work_dir / group / (cli::to_string(method) + "_seed" + std::to_string(seed));
    std::cerr << "running " << cli::to_string(method) << " seed " << seed << " in " << dir << '\n';
    const auto t0 = Clock::now();
    auto result = cli::run_pipeline(desk_config(method, seed, dir), [](const std::string& s) { std::cerr << s << '\n'; });
    Run r{method, seed, std::move(result.domains.front()), 0.0};
    r.hours = std::chrono::duration<double>(Clock::now() - t0).count() / 3600.0;
    return r;
  }

  ExperimentOptions opt_;
  std::optional<Projection> projection_;
  std::optional<std::vector<Run>> blur_, remove_, blur_rerun_, remove_rerun_;
};

const MetricsMean& mean_of(const Run& r, PairKind kind) { return r.result.report.means.at(kind); }

double total_hours(const std::vector<Run>& runs) {
  double h = 0.0;
  for (const auto& r : runs) h += r.hours;
  return h;
}

}  // namespace

std::vector<Criterion> experiment_criteria(const ExperimentOptions& opt) {
  auto ex = std::make_shared<Experiments>(opt);

  auto blur = [ex]() -> Verdict {
    if (!ex->affordable(3)) return {false, ex->skipped(3, "the blur experiment")};
    const auto& runs = ex->runs(Method::Blur);
    int ok = 0;
    std::ostringstream d;
    for (const auto& r : runs) {
      const auto& rec = mean_of(r, PairKind::ReconVsOrig);
      const auto& anon = mean_of(r, PairKind::AnonVsOrig);
      const bool good = rec.correlation >= anon.correlation && rec.ssim >= anon.ssim - 0.02;
      ok += good;
      d << "seed " << r.seed << ": corr " << format_number(rec.correlation, 4) << " vs " << format_number(anon.correlation, 4)
        << ", ssim " << format_number(rec.ssim, 4) << " vs " << format_number(anon.ssim, 4) << (good ? " ok" : " miss")
        << "; ";
    }
    const double hours = total_hours(runs);
    d << ok << "/3 seeds, " << format_number(hours) << " h (budget 4 h)";
    return {ok >= 2 && hours <= kBudgetHours, d.str()};
  };

  auto removal = [ex]() -> Verdict {
    if (!ex->affordable(3)) return {false, ex->skipped(3, "the removal experiment")};
    const auto& runs = ex->runs(Method::Remove);
    int ok = 0;
    std::ostringstream d;
    for (const auto& r : runs) {
      const double gain = mean_of(r, PairKind::ReconVsOrig).correlation - mean_of(r, PairKind::AnonVsOrig).correlation;
      ok += gain >= 0.05;
      d << "seed " << r.seed << ": corr gain " << format_number(gain, 4) << (gain >= 0.05 ? " ok" : " miss") << "; ";
    }
    const double hours = total_hours(runs);
    d << ok << "/3 seeds (gain >= 0.05), " << format_number(hours) << " h (budget 4 h)";
    return {ok >= 2 && hours <= kBudgetHours, d.str()};
  };

  auto difficulty = [ex]() -> Verdict {
    if (!ex->affordable(6)) return {false, ex->skipped(6, "comparing the blur and removal runs")};
    double blur_corr = 0.0, remove_corr = 0.0;
    for (const auto& r : ex->runs(Method::Blur)) blur_corr += mean_of(r, PairKind::ReconVsOrig).correlation / 3.0;
    for (const auto& r : ex->runs(Method::Remove)) remove_corr += mean_of(r, PairKind::ReconVsOrig).correlation / 3.0;
    return {blur_corr > remove_corr, "mean reconstructed correlation: blur " + format_number(blur_corr, 4) +
                                         ", removal " + format_number(remove_corr, 4)};
  };

  auto health = [ex]() -> Verdict {
    if (!ex->affordable(6)) return {false, ex->skipped(6, "checking every run's loss log")};
    int healthy = 0;
    std::ostringstream d;
    for (Method m : {Method::Blur, Method::Remove})
      for (const auto& r : ex->runs(m)) {
        bool finite = true;
        for (const auto& s : r.result.log.steps) finite = finite && s.all_finite();
        const double first = r.result.log.epochs.front().cycle_total();
        const double last = r.result.log.epochs.back().cycle_total();
        const bool good = finite && last < 0.5 * first;
        healthy += good;
        d << cli::to_string(m) << "/" << r.seed << ": cycle " << format_number(first, 4) << " -> "
          << format_number(last, 4) << (finite ? "" : " non-finite") << "; ";
      }
    d << healthy << "/6 healthy";
    return {healthy == 6, d.str()};
  };

  auto determinism = [ex]() -> Verdict {
    if (!ex->affordable(12)) return {false, ex->skipped(12, "rerunning all six runs")};
    int same = 0;
    for (Method m : {Method::Blur, Method::Remove}) {
      const auto& a = ex->runs(m);
      const auto& b = ex->reruns(m);
      for (std::size_t i = 0; i < a.size(); ++i)
        same += a[i].result.checkpoint_sha256 == b[i].result.checkpoint_sha256 &&
                a[i].result.report_sha256 == b[i].result.report_sha256;
    }
    return {same == 6, std::to_string(same) + "/6 reruns reproduce checkpoint and report hashes with 1 thread"};
  };

  return {
      {6, "desk-scale refacing, blur", blur},
      {7, "desk-scale refacing, removal", removal},
      {8, "relative difficulty", difficulty},
      {9, "training health", health},
      {10, "determinism", determinism},
  };
}

}  // namespace refacer::acceptance
