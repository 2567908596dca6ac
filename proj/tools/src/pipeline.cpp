#include "refacer_cli/pipeline.hpp"

#include <sstream>

#include "refacer/error.hpp"
#include "refacer_cli/manifest.hpp"

namespace refacer::cli {

const std::set<std::string>& PipelineConfig::keys() {
  static const std::set<std::string> k{
      "out",          "train_subjects", "test_subjects",  "dims",           "seed",       "boundary_cut",
      "methods",      "blur_depth_mm",  "blur_sigma_vox", "removal_limit",  "slices",     "span",
      "size",         "axis",           "epochs",         "lr",             "batch_size", "lambda_cycle",
      "lambda_identity", "pool_size",   "base_channels",  "res_blocks",     "beta1",      "beta2",
      "checkpoint_every", "montage_subjects", "anterior_at_right", "threads"};
  return k;
}

PipelineConfig PipelineConfig::from(const KeyValueConfig& kv) {
  kv.restrict_to(keys());
  PipelineConfig c;
  c.out = kv.get_string("out", "");
  c.train_subjects = kv.get_uint("train_subjects", c.train_subjects);
  c.test_subjects = kv.get_uint("test_subjects", c.test_subjects);
  if (kv.has("dims")) c.dims = parse_dims(kv.get_string("dims", ""));
  c.seed = kv.get_uint("seed", c.seed);
  c.boundary_cut = kv.get_double("boundary_cut", c.boundary_cut);
  if (kv.has("methods")) {
    c.methods.clear();
    for (const auto& m : kv.get_list("methods", {})) c.methods.push_back(parse_method(m));
  }
  c.anonymize.blur_depth_mm = kv.get_double("blur_depth_mm", c.anonymize.blur_depth_mm);
  c.anonymize.blur_sigma_vox = kv.get_double("blur_sigma_vox", c.anonymize.blur_sigma_vox);
  c.anonymize.removal_limit = kv.get_double("removal_limit", c.anonymize.removal_limit);
  c.slice.count = kv.get_uint("slices", c.slice.count);
  c.slice.span = kv.get_double("span", c.slice.span);
  c.slice.size = kv.get_uint("size", c.slice.size);
  c.slice.axis = kv.get_uint("axis", c.slice.axis);

  TrainConfig& t = c.train.train;
  t.epochs = kv.get_uint("epochs", t.epochs);
  t.lr = kv.get_double("lr", t.lr);
  t.batch_size = kv.get_uint("batch_size", t.batch_size);
  t.lambda_cycle = kv.get_double("lambda_cycle", t.lambda_cycle);
  t.lambda_identity = kv.get_double("lambda_identity", t.lambda_identity);
  t.pool_size = kv.get_uint("pool_size", t.pool_size);
  t.beta1 = kv.get_double("beta1", t.beta1);
  t.beta2 = kv.get_double("beta2", t.beta2);
  t.checkpoint_every = kv.get_uint("checkpoint_every", t.checkpoint_every);
  c.train.gen.base_channels = kv.get_uint("base_channels", c.train.gen.base_channels);
  c.train.disc.base_channels = c.train.gen.base_channels;
  c.train.gen.n_res_blocks = kv.get_uint("res_blocks", c.train.gen.n_res_blocks);
  c.train.size = c.slice.size;

  c.evaluate.montage_subjects = kv.get_uint("montage_subjects", c.evaluate.montage_subjects);
  c.evaluate.anterior_at_right = kv.get_bool("anterior_at_right", c.evaluate.anterior_at_right);
  c.threads = static_cast<unsigned>(kv.get_uint("threads", c.threads));
  if (c.threads == 0) throw Error(ErrorKind::ConfigParse, "threads must be >= 1");
  if (c.methods.empty()) throw Error(ErrorKind::ConfigParse, "methods must name blur and/or remove");
  t.seed = c.seed;
  t.validate();
  return c;
}

std::string PipelineConfig::to_text() const {
  std::ostringstream o;
  o.precision(17);
  const TrainConfig& t = train.train;
  std::string methods_text;
  for (Method m : methods) methods_text += (methods_text.empty() ? "" : ",") + to_string(m);
  o << "out = " << out.string() << "\ntrain_subjects = " << train_subjects << "\ntest_subjects = " << test_subjects
    << "\ndims = " << dims[0] << ',' << dims[1] << ',' << dims[2] << "\nseed = " << seed
    << "\nboundary_cut = " << boundary_cut << "\nmethods = " << methods_text
    << "\nblur_depth_mm = " << anonymize.blur_depth_mm << "\nblur_sigma_vox = " << anonymize.blur_sigma_vox
    << "\nremoval_limit = " << anonymize.removal_limit << "\nslices = " << slice.count << "\nspan = " << slice.span
    << "\nsize = " << slice.size << "\naxis = " << slice.axis << "\nepochs = " << t.epochs << "\nlr = " << t.lr
    << "\nbatch_size = " << t.batch_size << "\nlambda_cycle = " << t.lambda_cycle
    << "\nlambda_identity = " << t.lambda_identity << "\npool_size = " << t.pool_size
    << "\nbase_channels = " << train.gen.base_channels << "\nres_blocks = " << train.gen.n_res_blocks
    << "\nbeta1 = " << t.beta1 << "\nbeta2 = " << t.beta2 << "\ncheckpoint_every = " << t.checkpoint_every
    << "\nmontage_subjects = " << evaluate.montage_subjects
    << "\nanterior_at_right = " << (evaluate.anterior_at_right ? "true" : "false") << "\nthreads = " << threads
    << '\n';
  return o.str();
}

namespace {

void flags_from_text(RunManifest& m, const std::string& text) {
  const KeyValueConfig kv = KeyValueConfig::parse(text);
  for (const auto& key : PipelineConfig::keys()) m.flag(key, kv.get_string(key, ""));
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg, const Logger& log) {
  if (cfg.out.empty()) throw Error(ErrorKind::MissingInput, "pipeline needs an output directory");
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  const std::string cfg_text = cfg.to_text();
  auto manifest = [&](const std::string& stage) {
    RunManifest m("pipeline:" + stage);
    flags_from_text(m, cfg_text);
    m.seed("seed", cfg.seed);
    return m;
  };
  const fs::path out = cfg.out;
  fs::create_directories(out);
  RunManifest top = manifest("all");

  // Held-out subjects continue the id sequence so both cohorts share one seed.
  for (const auto& [split, n, first] : {std::tuple{"train", cfg.train_subjects, std::int64_t{0}},
                                        std::tuple{"test", cfg.test_subjects,
                                                   static_cast<std::int64_t>(cfg.train_subjects)}}) {
    say(std::string("phantom-gen ") + split + ": " + std::to_string(n) + " subjects");
    PhantomGenOptions p;
    p.subjects = n;
    p.dims = cfg.dims;
    p.seed = cfg.seed;
    p.first_id = first;
    p.boundary_cut = cfg.boundary_cut;
    p.threads = cfg.threads;
    const fs::path dir = out / "cohort" / split;
    RunManifest m = manifest("phantom-gen");
    phantom_gen(p, dir);
    m.write(dir);

    SliceOptions s = cfg.slice;
    s.domain = DomainTag::Original;
    s.threads = cfg.threads;
    const fs::path sdir = out / "slices" / "original" / split;
    RunManifest ms = manifest("slice");
    ms.input("volumes", dir);
    slice_dir(dir, sdir, s);
    ms.write(sdir);
  }

  PipelineResult result;
  for (Method method : cfg.methods) {
    const std::string name = to_string(method);
    for (const char* split : {"train", "test"}) {
      say("anonymize " + name + " " + split);
      AnonymizeOptions a = cfg.anonymize;
      a.method = method;
      a.threads = cfg.threads;
      const fs::path src = out / "cohort" / split;
      const fs::path dir = out / "anon" / name / split;
      RunManifest m = manifest("anonymize");
      m.input("volumes", src);
      anonymize_dir(src, dir, a);
      m.write(dir);

      SliceOptions s = cfg.slice;
      s.domain = domain_of(method);
      s.norm_source = src;
      s.threads = cfg.threads;
      const fs::path sdir = out / "slices" / name / split;
      RunManifest ms = manifest("slice");
      ms.input("volumes", dir);
      ms.input("normalisation", src);
      slice_dir(dir, sdir, s);
      ms.write(sdir);
    }

    say("train " + name);
    DomainResult dr;
    dr.method = method;
    const fs::path mdir = out / "models" / name;
    {
      RunManifest m = manifest("train");
      m.input("anonymized", out / "slices" / name / "train");
      m.input("original", out / "slices" / "original" / "train");
      TrainOptions t = cfg.train;
      t.train.seed = cfg.seed;
      dr.log = train_dirs(out / "slices" / name / "train", out / "slices" / "original" / "train", mdir, t, log);
      m.write(mdir);
    }
    dr.checkpoint_sha256 = sha256_file(mdir / "model.rfck");

    say("reconstruct " + name);
    const fs::path rdir = out / "recon" / name;
    {
      RunManifest m = manifest("reconstruct");
      m.input("checkpoint", mdir / "model.rfck");
      m.input("anonymized", out / "slices" / name / "test");
      reconstruct_dir(mdir / "model.rfck", out / "slices" / name / "test", rdir);
      m.write(rdir);
    }

    say("evaluate " + name);
    const fs::path edir = out / "eval" / name;
    {
      RunManifest m = manifest("evaluate");
      m.input("original", out / "slices" / "original" / "test");
      m.input("anonymized", out / "slices" / name / "test");
      m.input("reconstructed", rdir);
      EvaluateStageOptions e = cfg.evaluate;
      e.threads = cfg.threads;
      fs::create_directories(edir);
      dr.report = evaluate_dirs(out / "slices" / "original" / "test", out / "slices" / name / "test", rdir,
                                edir / "report.csv", edir / "montage", e);
      m.write(edir);
    }
    dr.report_sha256 = sha256_file(edir / "report.csv");
    result.domains.push_back(std::move(dr));
  }
  write_text(out / "pipeline.cfg", cfg_text);
  top.write(out);
  return result;
}

}  // namespace refacer::cli
