#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "motionseg/layers.hpp"

namespace mseg {

enum class Role {
  teacher_segmenter,
  generator,
  disc_global,
  disc_patch,
  proxy,
  student
};

std::string to_string(Role r);
Role role_from_string(const std::string& s);

struct ArchSpec {
  Role role = Role::teacher_segmenter;
  int encoder_depth = 5;   // convolutional layers in the encoder
  int base_channels = 16;
  int input_channels = 2;
  int output_channels = 1;
  int image_size = 64;
  int patch_k = 4;         // patch-discriminator score-map resolution
  int noise_size = 32;     // generator only; 0 disables noise concatenation

  void validate() const;
};

// Desk-scale defaults per role (teacher depth 5, proxy 6, student 10,
// generator input 1 + noise channels, 4x4 patch map).
ArchSpec default_arch(Role role, int image_size = 64, int base_channels = 16,
                      int noise_size = 32);

// Noise vector: each scalar is broadcast to a full-resolution channel before
// concatenation with the mask.
struct GeneratorNoise {
  std::vector<double> values;

  static GeneratorNoise sample(int noise_size, RandomStream& rng);
};

// U-shaped encoder-decoder with matching-resolution skip connections and
// bilinear upsampling in the expanding path.
class UNet {
 public:
  UNet() = default;
  UNet(int in_ch, int out_ch, int base_ch, int encoder_depth, int image_size,
       RandomStream& rng);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gout);
  std::vector<ParamRef> params(const std::string& prefix);

 private:
  struct EncLevel {
    std::vector<Conv2d> convs;
    std::vector<Silu> acts;
    AvgPool2 pool;
  };
  struct DecLevel {
    BilinearUp2 up;
    Conv2d conv;
    Silu act;
  };
  std::vector<EncLevel> enc_;
  std::vector<DecLevel> dec_;
  Conv2d head_;
  std::vector<Tensor> skips_;  // forward cache for gradient routing
};

// Teacher / Proxy / Student: probability mask in (0,1) from flow or frame.
class Segmenter {
 public:
  Segmenter() = default;
  Segmenter(const ArchSpec& spec, uint64_t seed);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gout);

  ProbMask segment(const FlowField& flow);
  ProbMask segment(const Image& frame);

  std::vector<ParamRef> params();
  const ArchSpec& spec() const { return spec_; }

 private:
  ArchSpec spec_;
  UNet unet_;
  SigmoidLayer out_;
};

class Generator {
 public:
  Generator() = default;
  Generator(const ArchSpec& spec, uint64_t seed);

  Tensor forward(const Tensor& mask_with_noise);  // linear 2-channel output
  Tensor backward(const Tensor& gout);

  // Broadcasts the noise to constant channels and runs the net.
  FlowField generate(const BinaryMask& mask, const GeneratorNoise& noise);
  Tensor make_input(const Tensor& mask, const GeneratorNoise& noise) const;

  std::vector<ParamRef> params();
  const ArchSpec& spec() const { return spec_; }

 private:
  ArchSpec spec_;
  UNet unet_;
};

class GlobalDiscriminator {
 public:
  GlobalDiscriminator() = default;
  GlobalDiscriminator(const ArchSpec& spec, uint64_t seed);

  Tensor forward(const Tensor& flow);  // 1x1x1 score in (0,1)
  Tensor backward(const Tensor& gout);
  std::vector<ParamRef> params();
  const ArchSpec& spec() const { return spec_; }

 private:
  ArchSpec spec_;
  std::vector<Conv2d> convs_;
  std::vector<Silu> acts_;
  std::vector<AvgPool2> pools_;
  GlobalAvgPool gap_;
  Dense head_;
  SigmoidLayer out_;
};

class PatchDiscriminator {
 public:
  PatchDiscriminator() = default;
  PatchDiscriminator(const ArchSpec& spec, uint64_t seed);

  Tensor forward(const Tensor& flow);  // 1 x k x k score map in (0,1)
  Tensor backward(const Tensor& gout);
  std::vector<ParamRef> params();
  const ArchSpec& spec() const { return spec_; }

 private:
  ArchSpec spec_;
  std::vector<Conv2d> convs_;
  std::vector<Silu> acts_;
  std::vector<AvgPool2> pools_;
  Conv2d head_;
  SigmoidLayer out_;
};

struct DiscOutput {
  double global_score = 0.0;
  Image patch_map;  // k x k

  // Single score used by the adversarial losses: mean of the global score
  // and the patch-map mean.
  double combined() const;
};

DiscOutput discriminate(GlobalDiscriminator& global_d, PatchDiscriminator& patch_d,
                        const FlowField& flow);

size_t param_count(const std::vector<ParamRef>& params);
uint64_t param_checksum(const std::vector<ParamRef>& params);
void zero_grads(const std::vector<ParamRef>& params);

// Checkpoint container: JSON ArchSpec header + (name, shape, little-endian
// float32 data) records.
void save_checkpoint(const std::filesystem::path& path, const ArchSpec& spec,
                     const std::vector<ParamRef>& params);
ArchSpec read_checkpoint_spec(const std::filesystem::path& path);
void load_checkpoint(const std::filesystem::path& path, const ArchSpec& expect,
                     const std::vector<ParamRef>& params);

template <typename Net>
Net load_network(const std::filesystem::path& path) {
  ArchSpec spec = read_checkpoint_spec(path);
  Net net(spec, 0);
  auto refs = net.params();
  load_checkpoint(path, spec, refs);
  return net;
}

}  // namespace mseg
