#include "refacer/cyclegan.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "refacer/error.hpp"

namespace refacer {

namespace {

Tensor stack_batch(const std::vector<SliceImage>& images, const std::vector<std::size_t>& order, std::size_t first,
                   std::size_t batch) {
  const SliceImage& ref = images.front();
  Tensor t(ad::Shape{batch, 1, ref.height, ref.width});
  const std::size_t plane = ref.height * ref.width;
  for (std::size_t b = 0; b < batch; ++b) {
    const SliceImage& img = images[order[(first + b) % order.size()]];
    for (std::size_t i = 0; i < plane; ++i) t.data[b * plane + i] = static_cast<Scalar>(img.pixels[i]);
  }
  return t;
}

// Splits a batch into single images for the pool and reassembles the answer.
Tensor query_pool(ImagePool& pool, const Tensor& batch) {
  const ad::Shape s = batch.shape;
  const std::size_t item = s.c * s.h * s.w;
  Tensor out(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    Tensor single(ad::Shape{1, s.c, s.h, s.w},
                  std::vector<Scalar>(batch.data.begin() + static_cast<std::ptrdiff_t>(n * item),
                                      batch.data.begin() + static_cast<std::ptrdiff_t>((n + 1) * item)));
    const Tensor chosen = pool.query(single);
    std::copy(chosen.data.begin(), chosen.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(n * item));
  }
  return out;
}

double scalar_of(Tape& tape, ad::Var v) { return static_cast<double>(tape.value(v).data[0]); }

void check_dataset(const std::vector<SliceImage>& images, const char* name) {
  if (images.empty()) throw Error(ErrorKind::EmptyDataset, std::string(name) + " dataset is empty");
  for (const auto& img : images)
    if (img.width != images.front().width || img.height != images.front().height)
      throw Error(ErrorKind::SizeMismatch, std::string(name) + " dataset mixes image sizes");
}

}  // namespace

bool StepLoss::all_finite() const noexcept {
  for (double v : {lr, d_orig, d_anon, g_adv_reface, g_adv_deface, cycle_anon, cycle_orig, identity, g_total})
    if (!std::isfinite(v)) return false;
  return true;
}

namespace {

void write_row(std::ostringstream& out, const StepLoss& s) {
  out << s.epoch << ',' << s.step << ',' << s.lr << ',' << s.d_orig << ',' << s.d_anon << ',' << s.g_adv_reface << ','
      << s.g_adv_deface << ',' << s.cycle_anon << ',' << s.cycle_orig << ',' << s.identity << ',' << s.g_total << '\n';
}

constexpr const char* kLogHeader =
    "epoch,step,lr,d_orig,d_anon,g_adv_reface,g_adv_deface,cycle_anon,cycle_orig,identity,g_total\n";

}  // namespace

std::string TrainLog::to_csv() const {
  std::ostringstream out;
  out.precision(9);
  out << kLogHeader;
  for (const auto& s : steps) write_row(out, s);
  return out.str();
}

std::string TrainLog::epochs_to_csv() const {
  std::ostringstream out;
  out.precision(9);
  out << kLogHeader;
  for (const auto& s : epochs) write_row(out, s);
  return out.str();
}

TrainLog train(CycleGanModel& model, const std::vector<SliceImage>& dataset_anon,
               const std::vector<SliceImage>& dataset_orig, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  check_dataset(dataset_anon, "anonymized");
  check_dataset(dataset_orig, "original");
  if (dataset_anon.front().width != dataset_orig.front().width ||
      dataset_anon.front().height != dataset_orig.front().height)
    throw Error(ErrorKind::SizeMismatch, "anonymized and original images differ in size");

  const ad::AdamConfig adam_cfg{cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_epsilon};
  ad::Adam<Scalar> opt_g(model.generator_parameters(), adam_cfg);
  ad::Adam<Scalar> opt_d(model.discriminator_parameters(), adam_cfg);
  ImagePool pool_orig(cfg.pool_size, Rng::for_stream(cfg.seed, 101).next_u64());
  ImagePool pool_anon(cfg.pool_size, Rng::for_stream(cfg.seed, 102).next_u64());
  Rng shuffle_rng = Rng::for_stream(cfg.seed, 100);

  std::vector<std::size_t> order_anon(dataset_anon.size()), order_orig(dataset_orig.size());
  const std::size_t longest = std::max(dataset_anon.size(), dataset_orig.size());
  const std::size_t steps_per_epoch = (longest + cfg.batch_size - 1) / cfg.batch_size;
  const Scalar lambda_cycle = static_cast<Scalar>(cfg.lambda_cycle);
  const Scalar lambda_identity = static_cast<Scalar>(cfg.lambda_identity);

  TrainLog log;
  log.steps.reserve(cfg.epochs * steps_per_epoch);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, cfg);
    std::iota(order_anon.begin(), order_anon.end(), std::size_t{0});
    std::iota(order_orig.begin(), order_orig.end(), std::size_t{0});
    shuffle_rng.shuffle(std::span<std::size_t>(order_anon));
    shuffle_rng.shuffle(std::span<std::size_t>(order_orig));

    StepLoss mean_row;
    mean_row.epoch = epoch;
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      const std::size_t first = step * cfg.batch_size;
      const std::size_t batch = std::min(cfg.batch_size, longest - first);
      StepLoss row;
      row.epoch = epoch;
      row.step = step;
      row.lr = lr;

      // Generator graph: both translations and both cycles.
      Tape gt;
      const ad::Var anon = gt.constant(stack_batch(dataset_anon, order_anon, first, batch));
      const ad::Var orig = gt.constant(stack_batch(dataset_orig, order_orig, first, batch));
      const ad::Var fake_orig = model.g_reface.forward(gt, anon, true);
      const ad::Var rec_anon = model.f_deface.forward(gt, fake_orig, true);
      const ad::Var fake_anon = model.f_deface.forward(gt, orig, true);
      const ad::Var rec_orig = model.g_reface.forward(gt, fake_anon, true);

      // Discriminators first, on pooled (detached) fakes.
      {
        Tape dt;
        const ad::Var real_o = dt.constant(gt.value(orig));
        const ad::Var real_a = dt.constant(gt.value(anon));
        const ad::Var pooled_o = dt.constant(query_pool(pool_orig, gt.value(fake_orig)));
        const ad::Var pooled_a = dt.constant(query_pool(pool_anon, gt.value(fake_anon)));
        const ad::Var loss_do = lsgan_loss_d(dt, model.d_orig.forward(dt, real_o, true), model.d_orig.forward(dt, pooled_o, true));
        const ad::Var loss_da = lsgan_loss_d(dt, model.d_anon.forward(dt, real_a, true), model.d_anon.forward(dt, pooled_a, true));
        const ad::Var total = ad::add(dt, loss_do, loss_da);
        opt_d.zero_grad();
        dt.backward(total);
        opt_d.step(lr);
        row.d_orig = scalar_of(dt, loss_do);
        row.d_anon = scalar_of(dt, loss_da);
      }

      // Generators against the updated (frozen) discriminators.
      const ad::Var adv_reface = lsgan_loss_g(gt, model.d_orig.forward(gt, fake_orig, false));
      const ad::Var adv_deface = lsgan_loss_g(gt, model.d_anon.forward(gt, fake_anon, false));
      const ad::Var cyc_anon = cycle_loss(gt, anon, rec_anon, lambda_cycle);
      const ad::Var cyc_orig = cycle_loss(gt, orig, rec_orig, lambda_cycle);
      ad::Var total = ad::add(gt, ad::add(gt, adv_reface, adv_deface), ad::add(gt, cyc_anon, cyc_orig));
      if (cfg.lambda_identity > 0.0) {
        const ad::Var id_o = cycle_loss(gt, orig, model.g_reface.forward(gt, orig, true), lambda_identity);
        const ad::Var id_a = cycle_loss(gt, anon, model.f_deface.forward(gt, anon, true), lambda_identity);
        const ad::Var id_total = ad::add(gt, id_o, id_a);
        row.identity = scalar_of(gt, id_total);
        total = ad::add(gt, total, id_total);
      }
      opt_g.zero_grad();
      gt.backward(total);
      opt_g.step(lr);

      row.g_adv_reface = scalar_of(gt, adv_reface);
      row.g_adv_deface = scalar_of(gt, adv_deface);
      row.cycle_anon = scalar_of(gt, cyc_anon);
      row.cycle_orig = scalar_of(gt, cyc_orig);
      row.g_total = scalar_of(gt, total);
      log.steps.push_back(row);

      mean_row.d_orig += row.d_orig;
      mean_row.d_anon += row.d_anon;
      mean_row.g_adv_reface += row.g_adv_reface;
      mean_row.g_adv_deface += row.g_adv_deface;
      mean_row.cycle_anon += row.cycle_anon;
      mean_row.cycle_orig += row.cycle_orig;
      mean_row.identity += row.identity;
      mean_row.g_total += row.g_total;
    }
    const auto n = static_cast<double>(steps_per_epoch);
    mean_row.step = steps_per_epoch;
    mean_row.lr = lr;
    mean_row.d_orig /= n;
    mean_row.d_anon /= n;
    mean_row.g_adv_reface /= n;
    mean_row.g_adv_deface /= n;
    mean_row.cycle_anon /= n;
    mean_row.cycle_orig /= n;
    mean_row.identity /= n;
    mean_row.g_total /= n;
    log.epochs.push_back(mean_row);

    if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) {
      std::filesystem::create_directories(cfg.checkpoint_dir);
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%04zu.rfck", epoch + 1);
      save_checkpoint(model, cfg.checkpoint_dir / name);
    }
    if (on_epoch) on_epoch(mean_row, model);
  }
  return log;
}

}  // namespace refacer
