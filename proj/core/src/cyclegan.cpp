#include "refacer/cyclegan.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "refacer/error.hpp"

namespace refacer {

namespace {

constexpr double kInitStd = 0.02;

std::string layer_name(const char* prefix, std::size_t index) { return prefix + std::to_string(index); }

}  // namespace

// ---------------------------------------------------------------- Network

Parameter& Network::param(const std::string& name) {
  const auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorKind::InvalidArgument, "no parameter named '" + name + "'");
  return params_[it->second];
}

const Parameter& Network::param(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorKind::InvalidArgument, "no parameter named '" + name + "'");
  return params_[it->second];
}

std::size_t Network::parameter_count() const noexcept {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.value.size();
  return total;
}

void Network::add_conv(const std::string& name, ad::Shape weight_shape, std::size_t bias_channels, Rng& rng) {
  Tensor w(weight_shape);
  for (auto& v : w.data) v = static_cast<Scalar>(kInitStd * rng.normal());
  params_.emplace_back(name + ".weight", std::move(w));
  params_.emplace_back(name + ".bias", Tensor(ad::Shape{1, bias_channels, 1, 1}));
  ++conv_layers_;
}

void Network::add_norm(const std::string& name, std::size_t channels, Rng& rng) {
  Tensor gain(ad::Shape{1, channels, 1, 1});
  for (auto& v : gain.data) v = static_cast<Scalar>(1.0 + kInitStd * rng.normal());
  params_.emplace_back(name + ".gain", std::move(gain));
  params_.emplace_back(name + ".offset", Tensor(ad::Shape{1, channels, 1, 1}));
}

void Network::finalize() {
  index_.clear();
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!index_.emplace(params_[i].name, i).second)
      throw Error(ErrorKind::InvalidArgument, "duplicate parameter name '" + params_[i].name + "'");
  }
}

ad::Var Network::bind(Tape& tape, const std::string& name, bool trainable) {
  return tape.parameter(param(name), trainable);
}

// ---------------------------------------------------------------- Generator

Generator::Generator(const GeneratorConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.base_channels < 1 || cfg.in_channels < 1 || cfg.out_channels < 1)
    throw Error(ErrorKind::InvalidArgument, "generator channel counts must be >= 1");
  const std::size_t c = cfg.base_channels;
  add_conv("stem", {c, cfg.in_channels, 7, 7}, c, rng);
  add_norm("stem.norm", c, rng);
  add_conv("down1", {2 * c, c, 3, 3}, 2 * c, rng);
  add_norm("down1.norm", 2 * c, rng);
  add_conv("down2", {4 * c, 2 * c, 3, 3}, 4 * c, rng);
  add_norm("down2.norm", 4 * c, rng);
  for (std::size_t r = 0; r < cfg.n_res_blocks; ++r) {
    const std::string block = layer_name("res", r);
    add_conv(block + ".conv1", {4 * c, 4 * c, 3, 3}, 4 * c, rng);
    add_norm(block + ".norm1", 4 * c, rng);
    add_conv(block + ".conv2", {4 * c, 4 * c, 3, 3}, 4 * c, rng);
    add_norm(block + ".norm2", 4 * c, rng);
  }
  // Transposed-conv weights are (in, out, K, K).
  add_conv("up1", {4 * c, 2 * c, 4, 4}, 2 * c, rng);
  add_norm("up1.norm", 2 * c, rng);
  add_conv("up2", {2 * c, c, 4, 4}, c, rng);
  add_norm("up2.norm", c, rng);
  add_conv("exit", {cfg.out_channels, c, 7, 7}, cfg.out_channels, rng);
  finalize();
}

ad::Var Generator::conv_norm_relu(Tape& tape, ad::Var x, const std::string& name, std::size_t stride,
                                  std::size_t pad, bool transposed, bool trainable) {
  const ad::Var w = bind(tape, name + ".weight", trainable);
  const ad::Var b = bind(tape, name + ".bias", trainable);
  const ad::Var y = transposed ? ad::conv2d_transpose(tape, x, w, b, stride, pad)
                               : ad::conv2d(tape, x, w, b, {stride, pad, ad::PadMode::Reflect});
  const ad::Var n = ad::instance_norm(tape, y, bind(tape, name + ".norm.gain", trainable),
                                      bind(tape, name + ".norm.offset", trainable), kNormEps);
  return ad::relu(tape, n);
}

ad::Var Generator::forward(Tape& tape, ad::Var x, bool trainable) {
  const ad::Shape s = tape.value(x).shape;
  if (s.c != cfg_.in_channels || s.h % 4 != 0 || s.w % 4 != 0 || s.h < 8 || s.w < 8)
    throw Error(ErrorKind::ShapeMismatch, "generator input " + ad::to_string(s) + " must have " +
                                              std::to_string(cfg_.in_channels) + " channel(s) and sides divisible by 4");
  ad::Var h = conv_norm_relu(tape, x, "stem", 1, 3, false, trainable);
  h = conv_norm_relu(tape, h, "down1", 2, 1, false, trainable);
  h = conv_norm_relu(tape, h, "down2", 2, 1, false, trainable);
  for (std::size_t r = 0; r < cfg_.n_res_blocks; ++r) {
    const std::string block = layer_name("res", r);
    auto norm = [&](ad::Var v, const char* which) {
      return ad::instance_norm(tape, v, bind(tape, block + "." + which + ".gain", trainable),
                               bind(tape, block + "." + which + ".offset", trainable), kNormEps);
    };
    const ad::ConvOptions same{1, 1, ad::PadMode::Reflect};
    ad::Var y = ad::conv2d(tape, h, bind(tape, block + ".conv1.weight", trainable),
                           bind(tape, block + ".conv1.bias", trainable), same);
    y = ad::relu(tape, norm(y, "norm1"));
    y = ad::conv2d(tape, y, bind(tape, block + ".conv2.weight", trainable),
                   bind(tape, block + ".conv2.bias", trainable), same);
    h = ad::add(tape, h, norm(y, "norm2"));
  }
  h = conv_norm_relu(tape, h, "up1", 2, 1, true, trainable);
  h = conv_norm_relu(tape, h, "up2", 2, 1, true, trainable);
  const ad::Var out = ad::conv2d(tape, h, bind(tape, "exit.weight", trainable), bind(tape, "exit.bias", trainable),
                                 {1, 3, ad::PadMode::Reflect});
  return ad::scale(tape, ad::tanh(tape, out), kGeneratorOutputScale);
}

// ---------------------------------------------------------------- Discriminator

Discriminator::Discriminator(const DiscriminatorConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.n_layers != kDiscriminatorConvLayers)
    throw Error(ErrorKind::InvalidArgument, "discriminator must have exactly 5 conv layers");
  if (cfg.base_channels < 1 || cfg.in_channels < 1)
    throw Error(ErrorKind::InvalidArgument, "discriminator channel counts must be >= 1");
  const std::size_t c = cfg.base_channels;
  add_conv("d1", {c, cfg.in_channels, 4, 4}, c, rng);
  add_conv("d2", {2 * c, c, 4, 4}, 2 * c, rng);
  add_norm("d2.norm", 2 * c, rng);
  add_conv("d3", {4 * c, 2 * c, 4, 4}, 4 * c, rng);
  add_norm("d3.norm", 4 * c, rng);
  add_conv("d4", {8 * c, 4 * c, 4, 4}, 8 * c, rng);
  add_norm("d4.norm", 8 * c, rng);
  add_conv("d5", {1, 8 * c, 4, 4}, 1, rng);
  finalize();
}

ad::Var Discriminator::forward(Tape& tape, ad::Var x, bool trainable) {
  auto conv = [&](ad::Var v, const char* name, std::size_t stride) {
    return ad::conv2d(tape, v, bind(tape, std::string(name) + ".weight", trainable),
                      bind(tape, std::string(name) + ".bias", trainable), {stride, 1, ad::PadMode::Zero});
  };
  auto norm = [&](ad::Var v, const char* name) {
    return ad::instance_norm(tape, v, bind(tape, std::string(name) + ".norm.gain", trainable),
                             bind(tape, std::string(name) + ".norm.offset", trainable), kNormEps);
  };
  ad::Var h = ad::leaky_relu(tape, conv(x, "d1", 2), kLeakySlope);
  h = ad::leaky_relu(tape, norm(conv(h, "d2", 2), "d2"), kLeakySlope);
  h = ad::leaky_relu(tape, norm(conv(h, "d3", 2), "d3"), kLeakySlope);
  h = ad::leaky_relu(tape, norm(conv(h, "d4", 1), "d4"), kLeakySlope);
  return conv(h, "d5", 1);
}

// ---------------------------------------------------------------- model

std::vector<std::pair<std::string, Parameter*>> CycleGanModel::named_parameters() {
  std::vector<std::pair<std::string, Parameter*>> out;
  auto add = [&](const char* prefix, Network& net) {
    for (auto& p : net.parameters()) out.emplace_back(std::string(prefix) + "." + p.name, &p);
  };
  add("G_reface", g_reface);
  add("F_deface", f_deface);
  add("D_orig", d_orig);
  add("D_anon", d_anon);
  return out;
}

std::vector<std::pair<std::string, const Parameter*>> CycleGanModel::named_parameters() const {
  std::vector<std::pair<std::string, const Parameter*>> out;
  for (auto& [name, p] : const_cast<CycleGanModel*>(this)->named_parameters()) out.emplace_back(name, p);
  return out;
}

std::vector<Parameter*> CycleGanModel::generator_parameters() {
  std::vector<Parameter*> out;
  for (auto& p : g_reface.parameters()) out.push_back(&p);
  for (auto& p : f_deface.parameters()) out.push_back(&p);
  return out;
}

std::vector<Parameter*> CycleGanModel::discriminator_parameters() {
  std::vector<Parameter*> out;
  for (auto& p : d_orig.parameters()) out.push_back(&p);
  for (auto& p : d_anon.parameters()) out.push_back(&p);
  return out;
}

std::uint64_t CycleGanModel::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [name, p] : named_parameters()) {
    mix(name.data(), name.size());
    const std::uint64_t dims[4] = {p->value.shape.n, p->value.shape.c, p->value.shape.h, p->value.shape.w};
    mix(dims, sizeof dims);
    for (Scalar v : p->value.data) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      mix(&bits, sizeof bits);
    }
  }
  return h;
}

CycleGanModel build_model(const GeneratorConfig& gen_cfg, const DiscriminatorConfig& disc_cfg, std::uint64_t seed) {
  CycleGanModel model;
  model.gen_cfg = gen_cfg;
  model.disc_cfg = disc_cfg;
  Rng g_rng = Rng::for_stream(seed, 0);
  Rng f_rng = Rng::for_stream(seed, 1);
  Rng do_rng = Rng::for_stream(seed, 2);
  Rng da_rng = Rng::for_stream(seed, 3);
  model.g_reface = Generator(gen_cfg, g_rng);
  model.f_deface = Generator(gen_cfg, f_rng);
  model.d_orig = Discriminator(disc_cfg, do_rng);
  model.d_anon = Discriminator(disc_cfg, da_rng);

  const std::size_t expected_gen = generator_conv_layers(gen_cfg.n_res_blocks);
  for (const Generator* g : {&model.g_reface, &model.f_deface})
    if (g->conv_layer_count() != expected_gen)
      throw Error(ErrorKind::InvalidArgument, "generator built with " + std::to_string(g->conv_layer_count()) +
                                                  " conv layers, expected " + std::to_string(expected_gen));
  for (const Discriminator* d : {&model.d_orig, &model.d_anon})
    if (d->conv_layer_count() != kDiscriminatorConvLayers)
      throw Error(ErrorKind::InvalidArgument, "discriminator conv layer count is not 5");
  return model;
}

// ---------------------------------------------------------------- losses

template <typename T>
ad::Var lsgan_loss_d(ad::Tape<T>& tape, ad::Var d_real, ad::Var d_fake) {
  const ad::Var real_term = ad::mean(tape, ad::square(tape, ad::add_scalar(tape, d_real, T(-1))));
  const ad::Var fake_term = ad::mean(tape, ad::square(tape, d_fake));
  return ad::scale(tape, ad::add(tape, real_term, fake_term), T(0.5));
}

template <typename T>
ad::Var lsgan_loss_g(ad::Tape<T>& tape, ad::Var d_fake) {
  return ad::mean(tape, ad::square(tape, ad::add_scalar(tape, d_fake, T(-1))));
}

template <typename T>
ad::Var cycle_loss(ad::Tape<T>& tape, ad::Var x, ad::Var x_cycled, T lambda_cycle) {
  return ad::scale(tape, ad::mean(tape, ad::abs(tape, ad::sub(tape, x, x_cycled))), lambda_cycle);
}

template ad::Var lsgan_loss_d<float>(ad::Tape<float>&, ad::Var, ad::Var);
template ad::Var lsgan_loss_d<double>(ad::Tape<double>&, ad::Var, ad::Var);
template ad::Var lsgan_loss_g<float>(ad::Tape<float>&, ad::Var);
template ad::Var lsgan_loss_g<double>(ad::Tape<double>&, ad::Var);
template ad::Var cycle_loss<float>(ad::Tape<float>&, ad::Var, ad::Var, float);
template ad::Var cycle_loss<double>(ad::Tape<double>&, ad::Var, ad::Var, double);

// ---------------------------------------------------------------- schedule & pool

void TrainConfig::validate() const {
  if (epochs == 0 || epochs % 2 != 0) throw Error(ErrorKind::InvalidArgument, "epochs must be a positive even number");
  if (!(lr >= 0.0)) throw Error(ErrorKind::InvalidArgument, "lr must be >= 0");
  if (batch_size == 0) throw Error(ErrorKind::InvalidArgument, "batch_size must be >= 1");
  if (!(lambda_cycle >= 0.0) || !(lambda_identity >= 0.0))
    throw Error(ErrorKind::InvalidArgument, "loss weights must be >= 0");
  if (checkpoint_every > 0 && checkpoint_dir.empty())
    throw Error(ErrorKind::InvalidArgument, "checkpoint_every needs a checkpoint_dir");
}

double lr_schedule(std::size_t epoch, const TrainConfig& cfg) {
  const double half = static_cast<double>(cfg.epochs) / 2.0;
  const double remaining = static_cast<double>(cfg.epochs) - static_cast<double>(epoch);
  if (static_cast<double>(epoch) < half) return cfg.lr;
  return cfg.lr * std::max(0.0, remaining / half);
}

ImagePool::ImagePool(std::size_t capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed) {
  images_.reserve(capacity);
}

Tensor ImagePool::query(const Tensor& image) {
  if (capacity_ == 0) return image;
  if (images_.size() < capacity_) {
    images_.push_back(image);
    return image;
  }
  if (rng_.uniform01() < 0.5) {
    const auto slot = static_cast<std::size_t>(rng_.below(capacity_));
    Tensor stored = std::move(images_[slot]);
    images_[slot] = image;
    return stored;
  }
  return image;
}

// ---------------------------------------------------------------- inference

Tensor image_to_tensor(const SliceImage& image) {
  Tensor t(ad::Shape{1, 1, image.height, image.width});
  for (std::size_t i = 0; i < image.pixels.size(); ++i) t.data[i] = static_cast<Scalar>(image.pixels[i]);
  return t;
}

SliceImage tensor_to_image(const Tensor& tensor, std::size_t batch_index) {
  const ad::Shape s = tensor.shape;
  SliceImage img(s.w, s.h);
  const std::size_t plane = s.h * s.w;
  for (std::size_t i = 0; i < plane; ++i) img.pixels[i] = tensor.data[batch_index * s.c * plane + i];
  return img;
}

namespace {

SliceImage run_generator(Generator& gen, const SliceImage& input) {
  Tape tape;
  const ad::Var x = tape.constant(image_to_tensor(input));
  const ad::Var y = gen.forward(tape, x, /*trainable=*/false);
  SliceImage out = tensor_to_image(tape.value(y));
  out.subject_id = input.subject_id;
  out.slice_index = input.slice_index;
  return out;
}

}  // namespace

SliceImage reface(CycleGanModel& model, const SliceImage& anonymized) {
  SliceImage out = run_generator(model.g_reface, anonymized);
  for (auto& v : out.pixels) v = std::max(v, 0.0);
  out.domain = DomainTag::Reconstructed;
  return out;
}

SliceImage deface(CycleGanModel& model, const SliceImage& original) {
  SliceImage out = run_generator(model.f_deface, original);
  out.domain = DomainTag::Blurred;
  return out;
}

}  // namespace refacer
