#include "refacer_cli/dispatch.hpp"

#include <CLI11.hpp>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <string>

#include "refacer/error.hpp"
#include "refacer/slicing.hpp"
#include "refacer_cli/manifest.hpp"
#include "refacer_cli/pipeline.hpp"
#include "refacer_cli/stages.hpp"
#include "refacer_cli/version.hpp"

namespace refacer::cli {

std::uint64_t default_seed() {
  const char* env = std::getenv("REFACER_SEED");
  if (!env || !*env) return 0;
  std::uint64_t v = 0;
  const char* end = env + std::strlen(env);
  const auto [ptr, ec] = std::from_chars(env, end, v);
  if (ec != std::errc() || ptr != end)
    throw Error(ErrorKind::InvalidArgument, std::string("REFACER_SEED must be an unsigned integer, got '") + env + "'");
  return v;
}

namespace {

int exit_code(ErrorKind kind) {
  return kind == ErrorKind::UnknownFlag || kind == ErrorKind::ConfigParse ? 2 : 1;
}

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(17);
  o << v;
  return o.str();
}

/// Options shared by the subcommands, bound before parsing.
struct Args {
  unsigned threads = 1;
  std::uint64_t seed = 0;

  // phantom-gen
  std::size_t subjects = 1;
  std::string dims = "64,64,64";
  std::int64_t first_id = 0;
  double boundary_cut = 0.0;

  // shared paths
  std::string in, out, data, anon, orig, recon, ckpt, montage, config, norm_source;

  // anonymize
  std::string method = "blur";
  double depth_mm = AnonymizeDefaults::blur_depth_mm;
  double sigma = AnonymizeDefaults::blur_sigma_vox;
  double removal_limit = AnonymizeDefaults::removal_posterior_limit;
  double threshold = 0.0;

  // slice
  std::string domain = "original";
  std::size_t count = 21;
  double span = 0.6;
  std::size_t size = 64;
  std::size_t axis = 0;

  // train
  std::size_t epochs = 60;
  double lr = 2e-4;
  std::size_t batch_size = 1;
  double lambda_cycle = 10.0;
  double lambda_identity = 0.0;
  std::size_t pool_size = 50;
  std::size_t base_channels = 16;
  std::size_t res_blocks = 9;
  std::size_t checkpoint_every = 0;

  // evaluate / pipeline
  std::size_t montage_subjects = 3;
  bool anterior_at_right = false;
  std::vector<std::string> overrides;
};

void add_threads(CLI::App* app, Args& a) {
  app->add_option("--threads", a.threads, "Worker threads for parallel-safe stages (1 = bit-deterministic)")
      ->check(CLI::PositiveNumber);
}

void add_seed(CLI::App* app, Args& a) {
  app->add_option("--seed", a.seed, "Seed (default: $REFACER_SEED or 0)");
}

/// Locates <data>/<name> or <data>/<name>/train.
fs::path dataset_dir(const fs::path& data, const std::string& name) {
  for (const fs::path& candidate : {data / name, data / name / "train"})
    if (fs::exists(candidate / kSliceFileName)) return candidate;
  throw Error(ErrorKind::MissingInput, "no slice dataset for '" + name + "' under '" + data.string() + "'");
}

int run_phantom_gen(const Args& a, std::ostream& out) {
  PhantomGenOptions p;
  p.subjects = a.subjects;
  p.dims = parse_dims(a.dims);
  p.seed = a.seed;
  p.first_id = a.first_id;
  p.boundary_cut = a.boundary_cut;
  p.threads = a.threads;
  RunManifest m("phantom-gen");
  m.flag("subjects", std::to_string(a.subjects));
  m.flag("dims", a.dims);
  m.flag("first_id", std::to_string(a.first_id));
  m.flag("boundary_cut", fmt(a.boundary_cut));
  m.flag("threads", std::to_string(a.threads));
  m.seed("seed", a.seed);
  phantom_gen(p, a.out);
  m.write(a.out);
  out << "wrote " << a.subjects << " subjects to " << a.out << '\n';
  return 0;
}

int run_anonymize(const Args& a, std::ostream& out) {
  AnonymizeOptions o;
  o.method = parse_method(a.method);
  o.blur_depth_mm = a.depth_mm;
  o.blur_sigma_vox = a.sigma;
  o.removal_limit = a.removal_limit;
  if (a.threshold > 0.0) o.threshold = a.threshold;
  o.threads = a.threads;
  RunManifest m("anonymize");
  m.flag("method", a.method);
  m.flag("depth_mm", fmt(a.depth_mm));
  m.flag("sigma", fmt(a.sigma));
  m.flag("removal_limit", fmt(a.removal_limit));
  m.flag("threshold", a.threshold > 0.0 ? fmt(a.threshold) : "auto");
  m.input("volumes", a.in);
  anonymize_dir(a.in, a.out, o);
  m.write(a.out);
  out << "anonymized " << a.in << " -> " << a.out << '\n';
  return 0;
}

int run_slice(const Args& a, std::ostream& out) {
  SliceOptions o;
  o.count = a.count;
  o.span = a.span;
  o.size = a.size;
  o.axis = a.axis;
  o.domain = parse_domain_tag(a.domain);
  o.norm_source = a.norm_source;
  o.threads = a.threads;
  RunManifest m("slice");
  m.flag("domain", a.domain);
  m.flag("count", std::to_string(a.count));
  m.flag("span", fmt(a.span));
  m.flag("size", std::to_string(a.size));
  m.flag("axis", std::to_string(a.axis));
  m.input("volumes", a.in);
  if (!a.norm_source.empty()) m.input("normalisation", a.norm_source);
  slice_dir(a.in, a.out, o);
  m.write(a.out);
  out << "sliced " << a.in << " -> " << a.out << '\n';
  return 0;
}

int run_train(const Args& a, std::ostream& out, std::ostream& err) {
  const Method method = parse_method(a.domain);
  if (a.data.empty() && (a.anon.empty() || a.orig.empty()))
    throw Error(ErrorKind::MissingInput, "train needs --data or both --anon and --orig");
  const fs::path anon = a.anon.empty() ? dataset_dir(a.data, to_string(method)) : fs::path(a.anon);
  const fs::path orig = a.orig.empty() ? dataset_dir(a.data, "original") : fs::path(a.orig);

  TrainOptions t;
  t.size = a.size;
  t.gen.base_channels = a.base_channels;
  t.gen.n_res_blocks = a.res_blocks;
  t.disc.base_channels = a.base_channels;
  t.train.epochs = a.epochs;
  t.train.lr = a.lr;
  t.train.batch_size = a.batch_size;
  t.train.lambda_cycle = a.lambda_cycle;
  t.train.lambda_identity = a.lambda_identity;
  t.train.pool_size = a.pool_size;
  t.train.checkpoint_every = a.checkpoint_every;
  t.train.seed = a.seed;

  RunManifest m("train");
  m.flag("domain", a.domain);
  m.flag("epochs", std::to_string(a.epochs));
  m.flag("size", std::to_string(a.size));
  m.flag("lr", fmt(a.lr));
  m.flag("batch_size", std::to_string(a.batch_size));
  m.flag("lambda_cycle", fmt(a.lambda_cycle));
  m.flag("lambda_identity", fmt(a.lambda_identity));
  m.flag("pool_size", std::to_string(a.pool_size));
  m.flag("base_channels", std::to_string(a.base_channels));
  m.flag("res_blocks", std::to_string(a.res_blocks));
  m.flag("checkpoint_every", std::to_string(a.checkpoint_every));
  m.seed("seed", a.seed);
  m.input("anonymized", anon);
  m.input("original", orig);
  train_dirs(anon, orig, a.out, t, [&](const std::string& line) { err << line << '\n'; });
  m.write(a.out);
  out << "trained " << to_string(method) << " model -> " << (fs::path(a.out) / "model.rfck").string() << '\n';
  return 0;
}

int run_reconstruct(const Args& a, std::ostream& out) {
  RunManifest m("reconstruct");
  m.input("checkpoint", a.ckpt);
  m.input("anonymized", a.in);
  reconstruct_dir(a.ckpt, a.in, a.out);
  m.write(a.out);
  out << "reconstructed " << a.in << " -> " << a.out << '\n';
  return 0;
}

int run_evaluate(const Args& a, std::ostream& out) {
  EvaluateStageOptions o;
  o.anterior_at_right = a.anterior_at_right;
  o.montage_subjects = a.montage_subjects;
  o.threads = a.threads;
  RunManifest m("evaluate");
  m.flag("anterior_at_right", a.anterior_at_right ? "true" : "false");
  m.flag("montage_subjects", std::to_string(a.montage_subjects));
  m.input("original", a.orig);
  m.input("anonymized", a.anon);
  m.input("reconstructed", a.recon);
  const fs::path report(a.out);
  const MetricsReport r = evaluate_dirs(a.orig, a.anon, a.recon, report, a.montage, o);
  const fs::path dir = report.has_parent_path() ? report.parent_path() : fs::path(".");
  m.write(dir);
  for (const auto& [kind, mean] : r.means)
    out << to_string(kind) << ": correlation " << mean.correlation << "  ssim " << mean.ssim << "  (n=" << mean.count
        << ")\n";
  return 0;
}

int run_pipeline_cmd(const Args& a, bool seed_given, std::ostream& out, std::ostream& err) {
  KeyValueConfig kv = KeyValueConfig::load(a.config);
  for (const auto& item : a.overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::ConfigParse, "--set expects key=value, got '" + item + "'");
    kv.set(item.substr(0, eq), item.substr(eq + 1));
  }
  if (!a.out.empty()) kv.set("out", a.out);
  if (seed_given || (!kv.has("seed") && std::getenv("REFACER_SEED"))) kv.set("seed", std::to_string(a.seed));
  if (a.threads != 1) kv.set("threads", std::to_string(a.threads));
  const PipelineConfig cfg = PipelineConfig::from(kv);
  const PipelineResult result = run_pipeline(cfg, [&](const std::string& line) { err << line << '\n'; });
  for (const auto& d : result.domains)
    for (const auto& [kind, mean] : d.report.means)
      out << to_string(d.method) << ' ' << to_string(kind) << ": correlation " << mean.correlation << "  ssim "
          << mean.ssim << '\n';
  return 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Anonymise synthetic head volumes, train a CycleGAN to undo it, and measure the result.", "refacer"};
  app.set_version_flag("--version", std::string(kVersion));
  Args a;

  auto* gen = app.add_subcommand("phantom-gen", "Render a seeded cohort of synthetic head volumes");
  gen->add_option("--subjects", a.subjects, "Number of subjects")->check(CLI::PositiveNumber);
  gen->add_option("--dims", a.dims, "Volume dims X,Y,Z (axis 0 sagittal)");
  gen->add_option("--first-id", a.first_id, "Id of the first subject");
  gen->add_option("--boundary-cut", a.boundary_cut, "Zero the anterior fraction of the A-P extent")
      ->check(CLI::Range(0.0, 0.5));
  gen->add_option("--out", a.out, "Output directory")->required();
  add_seed(gen, a);
  add_threads(gen, a);

  auto* anon = app.add_subcommand("anonymize", "Blur or remove the face of every volume in a directory");
  anon->add_option("--in", a.in, "Input volume directory")->required();
  anon->add_option("--out", a.out, "Output directory")->required();
  anon->add_option("--method", a.method, "blur or remove")->check(CLI::IsMember({"blur", "remove"}));
  anon->add_option("--depth-mm", a.depth_mm, "Blur mask depth behind the skin (mm)")->check(CLI::PositiveNumber);
  anon->add_option("--sigma", a.sigma, "Blur sigma (voxels)")->check(CLI::PositiveNumber);
  anon->add_option("--removal-limit", a.removal_limit, "Posterior extent of removal (fraction of A-P)")
      ->check(CLI::Range(0.0, 0.5));
  anon->add_option("--threshold", a.threshold, "Skin threshold (default: 0.15 x 99.5th percentile)");
  add_threads(anon, a);

  auto* slice = app.add_subcommand("slice", "Extract, normalise and resample sagittal slices");
  slice->add_option("--in", a.in, "Input volume directory")->required();
  slice->add_option("--out", a.out, "Output slice dataset directory")->required();
  slice->add_option("--domain", a.domain, "original, blur or remove")
      ->check(CLI::IsMember({"original", "blur", "remove", "blurred", "removed"}));
  slice->add_option("--norm-source", a.norm_source, "Volumes that set each subject's normalisation");
  slice->add_option("--count", a.count, "Slices per subject")->check(CLI::PositiveNumber);
  slice->add_option("--span", a.span, "Centred fraction of the sagittal extent")->check(CLI::Range(0.0, 1.0));
  slice->add_option("--size", a.size, "Output image size")->check(CLI::Range(8, 4096));
  slice->add_option("--axis", a.axis, "Volume axis treated as sagittal")->check(CLI::Range(0, 2));
  add_threads(slice, a);

  auto* train_cmd = app.add_subcommand("train", "Train a CycleGAN on unpaired anonymised/original slices");
  train_cmd->add_option("--domain", a.domain, "blur or remove")->required()->check(CLI::IsMember({"blur", "remove"}));
  train_cmd->add_option("--data", a.data, "Directory holding original/ and <domain>/ slice datasets");
  train_cmd->add_option("--anon", a.anon, "Anonymised slice dataset (overrides --data)");
  train_cmd->add_option("--orig", a.orig, "Original slice dataset (overrides --data)");
  train_cmd->add_option("--out", a.out, "Output directory")->required();
  train_cmd->add_option("--epochs", a.epochs, "Epochs (even)")->check(CLI::PositiveNumber);
  train_cmd->add_option("--size", a.size, "Image size")->check(CLI::Range(8, 4096));
  train_cmd->add_option("--lr", a.lr, "Initial learning rate");
  train_cmd->add_option("--batch-size", a.batch_size, "Batch size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--lambda-cycle", a.lambda_cycle, "Cycle-consistency weight");
  train_cmd->add_option("--lambda-identity", a.lambda_identity, "Identity-loss weight (0 = off)");
  train_cmd->add_option("--pool-size", a.pool_size, "Image pool capacity (0 = off)");
  train_cmd->add_option("--base-channels", a.base_channels, "Channels of the first conv layer")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--res-blocks", a.res_blocks, "Residual blocks per generator");
  train_cmd->add_option("--checkpoint-every", a.checkpoint_every, "Checkpoint every k epochs (0 = final only)");
  add_seed(train_cmd, a);

  auto* recon = app.add_subcommand("reconstruct", "Reface anonymised slices with a trained model");
  recon->add_option("--ckpt", a.ckpt, "Model checkpoint")->required();
  recon->add_option("--in", a.in, "Anonymised slice dataset")->required();
  recon->add_option("--out", a.out, "Output slice dataset directory")->required();

  auto* eval = app.add_subcommand("evaluate", "Front-half correlation and SSIM of anonymised and refaced slices");
  eval->add_option("--orig", a.orig, "Original slice dataset")->required();
  eval->add_option("--anon", a.anon, "Anonymised slice dataset")->required();
  eval->add_option("--recon", a.recon, "Reconstructed slice dataset")->required();
  eval->add_option("--out", a.out, "Per-slice report CSV")->required();
  eval->add_option("--montage", a.montage, "Directory for PGM montages");
  eval->add_option("--montage-subjects", a.montage_subjects, "Subjects rendered as montages");
  eval->add_flag("--anterior-at-right", a.anterior_at_right, "Face is at the last column");
  add_threads(eval, a);

  auto* pipe = app.add_subcommand("pipeline", "Run every stage from one key=value config file");
  pipe->add_option("--config", a.config, "Config file")->required();
  pipe->add_option("--out", a.out, "Output directory (overrides the config)");
  pipe->add_option("--set", a.overrides, "Extra key=value overrides");
  add_seed(pipe, a);
  add_threads(pipe, a);

  app.require_subcommand(0, 1);

  if (argc <= 1) {
    out << app.help();
    return 2;
  }
  try {
    a.seed = default_seed();
    app.parse(argc, argv);
    if (app.get_subcommands().empty()) {
      out << app.help();
      return 2;
    }
    const bool seed_given = pipe->count("--seed") > 0;
    if (*gen) return run_phantom_gen(a, out);
    if (*anon) return run_anonymize(a, out);
    if (*slice) return run_slice(a, out);
    if (*train_cmd) return run_train(a, out, err);
    if (*recon) return run_reconstruct(a, out);
    if (*eval) return run_evaluate(a, out);
    return run_pipeline_cmd(a, seed_given, out, err);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ExtrasError& e) {
    err << "error: " << to_string(ErrorKind::UnknownFlag) << ": " << e.what() << '\n';
    return 2;
  } catch (const CLI::RequiredError& e) {
    err << "error: " << to_string(ErrorKind::MissingInput) << ": " << e.what() << '\n';
    return 2;
  } catch (const CLI::ParseError& e) {
    err << "error: " << to_string(ErrorKind::InvalidArgument) << ": " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << to_string(ErrorKind::IoFailure) << ": " << e.what() << '\n';
    return 1;
  }
}

}  // namespace refacer::cli
