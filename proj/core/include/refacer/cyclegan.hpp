#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "refacer/adam.hpp"
#include "refacer/autodiff.hpp"
#include "refacer/image.hpp"
#include "refacer/rng.hpp"

namespace refacer {

using Scalar = float;
using Tensor = ad::Tensor<Scalar>;
using Tape = ad::Tape<Scalar>;
using Parameter = ad::Parameter<Scalar>;

/// Stem (7x7 entry + two stride-2 convs), residual trunk, then two
/// transposed-conv upsamplers and a 7x7 exit conv.
struct GeneratorConfig {
  std::size_t base_channels = 16;
  std::size_t n_res_blocks = 9;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
};

/// Four 4x4 conv blocks (strides 2, 2, 2, 1) and a 1-channel output conv.
struct DiscriminatorConfig {
  std::size_t base_channels = 16;
  std::size_t n_layers = 5;
  std::size_t in_channels = 1;
};

constexpr std::size_t generator_conv_layers(std::size_t n_res_blocks) noexcept { return 3 + 2 * n_res_blocks + 3; }
constexpr std::size_t kDiscriminatorConvLayers = 5;
static_assert(generator_conv_layers(9) == 24, "generator must have 24 conv layers with 9 residual blocks");
static_assert(kDiscriminatorConvLayers == 5, "discriminator must have 5 conv layers");

/// Generators emit kGeneratorOutputScale * tanh(.) so targets up to the
/// bright skull rim (about 1.1 after normalisation) stay reachable.
inline constexpr Scalar kGeneratorOutputScale = 1.5f;
inline constexpr Scalar kLeakySlope = 0.2f;
inline constexpr Scalar kNormEps = 1e-5f;

/// Ordered, named parameters plus the layer list used by forward().
class Network {
 public:
  Parameter& param(const std::string& name);
  const Parameter& param(const std::string& name) const;
  std::vector<Parameter>& parameters() noexcept { return params_; }
  const std::vector<Parameter>& parameters() const noexcept { return params_; }
  std::size_t conv_layer_count() const noexcept { return conv_layers_; }
  std::size_t parameter_count() const noexcept;

 protected:
  void add_conv(const std::string& name, ad::Shape weight_shape, std::size_t bias_channels, Rng& rng);
  void add_norm(const std::string& name, std::size_t channels, Rng& rng);
  /// Binds the parameter to the tape; trainable=false treats it as a constant.
  ad::Var bind(Tape& tape, const std::string& name, bool trainable);
  void finalize();

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> index_;
  std::size_t conv_layers_ = 0;
};

class Generator : public Network {
 public:
  Generator() = default;
  Generator(const GeneratorConfig& cfg, Rng& rng);
  ad::Var forward(Tape& tape, ad::Var x, bool trainable);
  const GeneratorConfig& config() const noexcept { return cfg_; }

 private:
  ad::Var conv_norm_relu(Tape& tape, ad::Var x, const std::string& name, std::size_t stride, std::size_t pad,
                         bool transposed, bool trainable);
  GeneratorConfig cfg_;
};

class Discriminator : public Network {
 public:
  Discriminator() = default;
  Discriminator(const DiscriminatorConfig& cfg, Rng& rng);
  ad::Var forward(Tape& tape, ad::Var x, bool trainable);
  const DiscriminatorConfig& config() const noexcept { return cfg_; }

 private:
  DiscriminatorConfig cfg_;
};

/// G_reface maps anonymised -> original, F_deface original -> anonymised;
/// D_orig and D_anon judge the two domains.
struct CycleGanModel {
  GeneratorConfig gen_cfg;
  DiscriminatorConfig disc_cfg;
  Generator g_reface;
  Generator f_deface;
  Discriminator d_orig;
  Discriminator d_anon;

  /// (qualified name, parameter) in a fixed order: G_reface, F_deface, D_orig, D_anon.
  std::vector<std::pair<std::string, Parameter*>> named_parameters();
  std::vector<std::pair<std::string, const Parameter*>> named_parameters() const;
  std::vector<Parameter*> generator_parameters();
  std::vector<Parameter*> discriminator_parameters();
  /// FNV-1a over names, shapes and float bits of every parameter.
  std::uint64_t checksum() const;
};

/// Weights ~ N(0, 0.02), norm gains ~ N(1, 0.02), biases and offsets 0.
/// Throws InvalidArgument when a layer count differs from the architecture.
CycleGanModel build_model(const GeneratorConfig& gen_cfg, const DiscriminatorConfig& disc_cfg, std::uint64_t seed);

// Losses, usable on float or double tapes.
/// 0.5 mean((d_real - 1)^2) + 0.5 mean(d_fake^2).
template <typename T>
ad::Var lsgan_loss_d(ad::Tape<T>& tape, ad::Var d_real, ad::Var d_fake);
/// mean((d_fake - 1)^2).
template <typename T>
ad::Var lsgan_loss_g(ad::Tape<T>& tape, ad::Var d_fake);
/// lambda * mean(|x - x_cycled|).
template <typename T>
ad::Var cycle_loss(ad::Tape<T>& tape, ad::Var x, ad::Var x_cycled, T lambda_cycle);

struct TrainConfig {
  std::size_t epochs = 60;
  double lr = 2e-4;
  std::size_t batch_size = 1;
  double lambda_cycle = 10.0;
  double lambda_identity = 0.0;
  std::size_t pool_size = 50;
  std::uint64_t seed = 0;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  /// Write a checkpoint every k epochs into checkpoint_dir (0 disables).
  std::size_t checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;

  void validate() const;
};

/// lr for epoch < epochs/2, then lr * (epochs - epoch) / (epochs / 2),
/// clamped at 0. Epochs are 0-based.
double lr_schedule(std::size_t epoch, const TrainConfig& cfg);

/// Replay buffer of generated images. Until full, every query is stored and
/// returned; afterwards, with probability 1/2 a random stored image is
/// returned and replaced by the query, otherwise the query itself.
class ImagePool {
 public:
  ImagePool(std::size_t capacity, std::uint64_t seed);
  Tensor query(const Tensor& image);
  std::size_t size() const noexcept { return images_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }

 private:
  std::size_t capacity_;
  std::vector<Tensor> images_;
  Rng rng_;
};

struct StepLoss {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double lr = 0.0;
  double d_orig = 0.0;
  double d_anon = 0.0;
  double g_adv_reface = 0.0;  // D_orig on G_reface(anon)
  double g_adv_deface = 0.0;  // D_anon on F_deface(orig)
  double cycle_anon = 0.0;    // anon -> G -> F
  double cycle_orig = 0.0;    // orig -> F -> G
  double identity = 0.0;
  double g_total = 0.0;

  double cycle_total() const noexcept { return cycle_anon + cycle_orig; }
  bool all_finite() const noexcept;
};

struct TrainLog {
  std::vector<StepLoss> steps;
  /// Per-epoch means of every component (step field holds the step count).
  std::vector<StepLoss> epochs;

  std::string to_csv() const;
  std::string epochs_to_csv() const;
};

using EpochCallback = std::function<void(const StepLoss& epoch_mean, const CycleGanModel& model)>;

/// Unpaired training: each epoch shuffles the two domains independently and
/// runs max(|anon|, |orig|) / batch_size steps (rounded up). Each step updates
/// both discriminators on pooled fakes, then both generators.
TrainLog train(CycleGanModel& model, const std::vector<SliceImage>& dataset_anon,
               const std::vector<SliceImage>& dataset_orig, const TrainConfig& cfg,
               const EpochCallback& on_epoch = {});

/// G_reface forward without gradients; output clamped to >= 0.
SliceImage reface(CycleGanModel& model, const SliceImage& anonymized);
/// F_deface forward without gradients (no clamping).
SliceImage deface(CycleGanModel& model, const SliceImage& original);

Tensor image_to_tensor(const SliceImage& image);
SliceImage tensor_to_image(const Tensor& tensor, std::size_t batch_index = 0);

/// "RFCK", u32 version, u32 record count, then per record: u32 name length,
/// name bytes, u32 rank (4), 4 x u32 dims, little-endian float32 payload.
inline constexpr std::uint32_t kCheckpointVersion = 1;
std::vector<std::uint8_t> encode_checkpoint(const CycleGanModel& model);
/// Architecture is recovered from the tensor names and shapes.
CycleGanModel decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const CycleGanModel& model, const std::filesystem::path& path);
CycleGanModel load_checkpoint(const std::filesystem::path& path);

}  // namespace refacer
