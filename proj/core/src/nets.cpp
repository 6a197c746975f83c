#include "motionseg/nets.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace mseg {

using json = nlohmann::json;

std::string to_string(Role r) {
  switch (r) {
    case Role::teacher_segmenter: return "teacher_segmenter";
    case Role::generator: return "generator";
    case Role::disc_global: return "disc_global";
    case Role::disc_patch: return "disc_patch";
    case Role::proxy: return "proxy";
    case Role::student: return "student";
  }
  return "?";
}

Role role_from_string(const std::string& s) {
  for (Role r : {Role::teacher_segmenter, Role::generator, Role::disc_global,
                 Role::disc_patch, Role::proxy, Role::student})
    if (to_string(r) == s) return r;
  throw ConfigError("unknown network role: " + s);
}

void ArchSpec::validate() const {
  if (encoder_depth < 2) throw ConfigError("ArchSpec: encoder_depth must be >= 2");
  if (base_channels < 1) throw ConfigError("ArchSpec: base_channels must be >= 1");
  if (input_channels < 1) throw ConfigError("ArchSpec: input_channels must be >= 1");
  if (image_size < 16 || image_size % 16 != 0)
    throw ConfigError("ArchSpec: image_size must be a multiple of 16");
  if (patch_k < 1 || image_size % patch_k != 0 ||
      (image_size / patch_k) & ((image_size / patch_k) - 1))
    throw ConfigError("ArchSpec: image_size/patch_k must be a power of two");
  if (noise_size < 0) throw ConfigError("ArchSpec: noise_size must be >= 0");
  if (role == Role::generator && input_channels != 1 + noise_size)
    throw ConfigError("ArchSpec: generator input channels must be 1 + noise_size");
}

ArchSpec default_arch(Role role, int image_size, int base_channels,
                      int noise_size) {
  ArchSpec s;
  s.role = role;
  s.image_size = image_size;
  s.base_channels = base_channels;
  s.noise_size = noise_size;
  switch (role) {
    case Role::teacher_segmenter:
      s.encoder_depth = 5;
      s.input_channels = 2;  // flow (u,v)
      break;
    case Role::generator:
      s.encoder_depth = 5;
      s.input_channels = 1 + noise_size;
      s.output_channels = 2;
      break;
    case Role::disc_global:
    case Role::disc_patch:
      s.encoder_depth = 4;
      s.input_channels = 2;
      break;
    case Role::proxy:
      s.encoder_depth = 6;
      s.input_channels = 1;
      break;
    case Role::student:
      s.encoder_depth = 10;
      s.input_channels = 1;
      break;
  }
  s.validate();
  return s;
}

GeneratorNoise GeneratorNoise::sample(int noise_size, RandomStream& rng) {
  GeneratorNoise n;
  n.values.resize(noise_size);
  for (auto& v : n.values) v = rng.normal();
  return n;
}

// ------------------------------------------------------------------- UNet

namespace {

int unet_levels(int encoder_depth, int image_size) {
  int levels = std::clamp((encoder_depth + 1) / 2, 2, 4);
  // Each level below the first halves the resolution; keep the bottom >= 4 px.
  while (levels > 2 && (image_size >> (levels - 1)) < 4) --levels;
  return levels;
}

int level_channels(int base, int level) { return base << std::min(level, 3); }

}  // namespace

UNet::UNet(int in_ch, int out_ch, int base_ch, int encoder_depth, int image_size,
           RandomStream& rng) {
  const int levels = unet_levels(encoder_depth, image_size);
  std::vector<int> counts(levels, encoder_depth / levels);
  for (int l = 0; l < encoder_depth % levels; ++l) ++counts[l];

  enc_.resize(levels);
  int prev_ch = in_ch;
  for (int l = 0; l < levels; ++l) {
    const int ch = level_channels(base_ch, l);
    for (int k = 0; k < counts[l]; ++k) {
      enc_[l].convs.emplace_back(k == 0 ? prev_ch : ch, ch, 3, rng);
      enc_[l].acts.emplace_back();
    }
    prev_ch = ch;
  }
  dec_.resize(levels - 1);
  for (int l = levels - 2; l >= 0; --l) {
    const int skip_ch = level_channels(base_ch, l);
    const int deep_ch = level_channels(base_ch, l + 1);
    dec_[l].conv = Conv2d(skip_ch + deep_ch, skip_ch, 3, rng);
  }
  head_ = Conv2d(base_ch, out_ch, 1, rng);
}

Tensor UNet::forward(const Tensor& x) {
  const int levels = static_cast<int>(enc_.size());
  skips_.assign(levels, Tensor{});
  Tensor cur = x;
  for (int l = 0; l < levels; ++l) {
    for (size_t k = 0; k < enc_[l].convs.size(); ++k)
      cur = enc_[l].acts[k].forward(enc_[l].convs[k].forward(cur));
    if (l + 1 < levels) {
      skips_[l] = cur;
      cur = enc_[l].pool.forward(cur);
    }
  }
  for (int l = levels - 2; l >= 0; --l) {
    Tensor up = dec_[l].up.forward(cur);
    cur = dec_[l].act.forward(dec_[l].conv.forward(concat_channels(skips_[l], up)));
  }
  return head_.forward(cur);
}

Tensor UNet::backward(const Tensor& gout) {
  const int levels = static_cast<int>(enc_.size());
  Tensor g = head_.backward(gout);
  std::vector<Tensor> skip_grads(levels);
  for (int l = 0; l < levels - 1; ++l) {
    Tensor gcat = dec_[l].conv.backward(dec_[l].act.backward(g));
    Tensor gskip(skips_[l].c, skips_[l].h, skips_[l].w);
    Tensor gup(gcat.c - gskip.c, gcat.h, gcat.w);
    split_channels(gcat, gskip, gup);
    skip_grads[l] = std::move(gskip);
    g = dec_[l].up.backward(gup);
  }
  // g now targets the bottom encoder level; walk back up.
  for (int l = levels - 1; l >= 0; --l) {
    if (l + 1 < levels) {
      g = enc_[l].pool.backward(g);
      for (size_t i = 0; i < g.v.size(); ++i) g.v[i] += skip_grads[l].v[i];
    }
    for (int k = static_cast<int>(enc_[l].convs.size()) - 1; k >= 0; --k)
      g = enc_[l].convs[k].backward(enc_[l].acts[k].backward(g));
  }
  return g;
}

std::vector<ParamRef> UNet::params(const std::string& prefix) {
  std::vector<ParamRef> out;
  for (size_t l = 0; l < enc_.size(); ++l)
    for (size_t k = 0; k < enc_[l].convs.size(); ++k) {
      auto p = enc_[l].convs[k].params(prefix + ".enc" + std::to_string(l) + "." +
                                       std::to_string(k));
      out.insert(out.end(), p.begin(), p.end());
    }
  for (size_t l = 0; l < dec_.size(); ++l) {
    auto p = dec_[l].conv.params(prefix + ".dec" + std::to_string(l));
    out.insert(out.end(), p.begin(), p.end());
  }
  auto p = head_.params(prefix + ".head");
  out.insert(out.end(), p.begin(), p.end());
  return out;
}

// -------------------------------------------------------------- Segmenter

Segmenter::Segmenter(const ArchSpec& spec, uint64_t seed) : spec_(spec) {
  spec_.validate();
  RandomStream rng(seed ^ 0x5e9u);
  unet_ = UNet(spec_.input_channels, spec_.output_channels, spec_.base_channels,
               spec_.encoder_depth, spec_.image_size, rng);
}

Tensor Segmenter::forward(const Tensor& x) {
  if (x.c != spec_.input_channels || x.h != spec_.image_size ||
      x.w != spec_.image_size)
    throw ShapeError("Segmenter: input shape mismatch");
  return out_.forward(unet_.forward(x));
}

Tensor Segmenter::backward(const Tensor& gout) {
  return unet_.backward(out_.backward(gout));
}

ProbMask Segmenter::segment(const FlowField& flow) {
  return tensor_to_probmask(forward(flow_to_tensor(flow)));
}

ProbMask Segmenter::segment(const Image& frame) {
  return tensor_to_probmask(forward(image_to_tensor(frame)));
}

std::vector<ParamRef> Segmenter::params() {
  return unet_.params(to_string(spec_.role));
}

// -------------------------------------------------------------- Generator

Generator::Generator(const ArchSpec& spec, uint64_t seed) : spec_(spec) {
  spec_.validate();
  RandomStream rng(seed ^ 0x6e40u);
  unet_ = UNet(spec_.input_channels, spec_.output_channels, spec_.base_channels,
               spec_.encoder_depth, spec_.image_size, rng);
}

Tensor Generator::make_input(const Tensor& mask, const GeneratorNoise& noise) const {
  if (static_cast<int>(noise.values.size()) != spec_.noise_size)
    throw ShapeError("Generator: noise size mismatch");
  Tensor in(1 + spec_.noise_size, mask.h, mask.w);
  std::copy(mask.v.begin(), mask.v.end(), in.plane(0));
  for (int i = 0; i < spec_.noise_size; ++i) {
    double* p = in.plane(1 + i);
    std::fill(p, p + in.plane_size(), noise.values[i]);
  }
  return in;
}

Tensor Generator::forward(const Tensor& mask_with_noise) {
  if (mask_with_noise.c != spec_.input_channels ||
      mask_with_noise.h != spec_.image_size)
    throw ShapeError("Generator: input shape mismatch");
  return unet_.forward(mask_with_noise);
}

Tensor Generator::backward(const Tensor& gout) { return unet_.backward(gout); }

FlowField Generator::generate(const BinaryMask& mask, const GeneratorNoise& noise) {
  return tensor_to_flow(forward(make_input(mask_to_tensor(mask), noise)));
}

std::vector<ParamRef> Generator::params() { return unet_.params("generator"); }

// ---------------------------------------------------------- Discriminators

GlobalDiscriminator::GlobalDiscriminator(const ArchSpec& spec, uint64_t seed)
    : spec_(spec) {
  spec_.validate();
  RandomStream rng(seed ^ 0xd15cu);
  int size = spec_.image_size, ch = spec_.input_channels;
  int next = spec_.base_channels;
  while (size > 8) {
    convs_.emplace_back(ch, next, 3, rng);
    acts_.emplace_back();
    pools_.emplace_back();
    ch = next;
    next = std::min(next * 2, spec_.base_channels * 4);
    size /= 2;
  }
  head_ = Dense(ch, 1, rng);
}

Tensor GlobalDiscriminator::forward(const Tensor& flow) {
  if (flow.c != spec_.input_channels || flow.h != spec_.image_size)
    throw ShapeError("GlobalDiscriminator: input shape mismatch");
  Tensor cur = flow;
  for (size_t i = 0; i < convs_.size(); ++i)
    cur = pools_[i].forward(acts_[i].forward(convs_[i].forward(cur)));
  return out_.forward(head_.forward(gap_.forward(cur)));
}

Tensor GlobalDiscriminator::backward(const Tensor& gout) {
  Tensor g = gap_.backward(head_.backward(out_.backward(gout)));
  for (int i = static_cast<int>(convs_.size()) - 1; i >= 0; --i)
    g = convs_[i].backward(acts_[i].backward(pools_[i].backward(g)));
  return g;
}

std::vector<ParamRef> GlobalDiscriminator::params() {
  std::vector<ParamRef> out;
  for (size_t i = 0; i < convs_.size(); ++i) {
    auto p = convs_[i].params("disc_global.conv" + std::to_string(i));
    out.insert(out.end(), p.begin(), p.end());
  }
  auto p = head_.params("disc_global.head");
  out.insert(out.end(), p.begin(), p.end());
  return out;
}

PatchDiscriminator::PatchDiscriminator(const ArchSpec& spec, uint64_t seed)
    : spec_(spec) {
  spec_.validate();
  RandomStream rng(seed ^ 0xa7c4u);
  int size = spec_.image_size, ch = spec_.input_channels;
  int next = spec_.base_channels;
  while (size > spec_.patch_k) {
    convs_.emplace_back(ch, next, 3, rng);
    acts_.emplace_back();
    pools_.emplace_back();
    ch = next;
    next = std::min(next * 2, spec_.base_channels * 4);
    size /= 2;
  }
  head_ = Conv2d(ch, 1, 1, rng);
}

Tensor PatchDiscriminator::forward(const Tensor& flow) {
  if (flow.c != spec_.input_channels || flow.h != spec_.image_size)
    throw ShapeError("PatchDiscriminator: input shape mismatch");
  Tensor cur = flow;
  for (size_t i = 0; i < convs_.size(); ++i)
    cur = pools_[i].forward(acts_[i].forward(convs_[i].forward(cur)));
  return out_.forward(head_.forward(cur));
}

Tensor PatchDiscriminator::backward(const Tensor& gout) {
  Tensor g = head_.backward(out_.backward(gout));
  for (int i = static_cast<int>(convs_.size()) - 1; i >= 0; --i)
    g = convs_[i].backward(acts_[i].backward(pools_[i].backward(g)));
  return g;
}

std::vector<ParamRef> PatchDiscriminator::params() {
  std::vector<ParamRef> out;
  for (size_t i = 0; i < convs_.size(); ++i) {
    auto p = convs_[i].params("disc_patch.conv" + std::to_string(i));
    out.insert(out.end(), p.begin(), p.end());
  }
  auto p = head_.params("disc_patch.head");
  out.insert(out.end(), p.begin(), p.end());
  return out;
}

double DiscOutput::combined() const {
  double pm = 0.0;
  for (double v : patch_map.data) pm += v;
  pm /= static_cast<double>(patch_map.data.size());
  return 0.5 * (global_score + pm);
}

DiscOutput discriminate(GlobalDiscriminator& global_d, PatchDiscriminator& patch_d,
                        const FlowField& flow) {
  const Tensor x = flow_to_tensor(flow);
  DiscOutput out;
  out.global_score = global_d.forward(x).v[0];
  const Tensor pm = patch_d.forward(x);
  out.patch_map = Image(pm.w, pm.h, 1);
  out.patch_map.data = pm.v;
  return out;
}

// ----------------------------------------------------------------- params

size_t param_count(const std::vector<ParamRef>& params) {
  size_t n = 0;
  for (const auto& p : params) n += p.value->size();
  return n;
}

uint64_t param_checksum(const std::vector<ParamRef>& params) {
  uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over float32 bytes
  for (const auto& p : params)
    for (double d : *p.value) {
      const auto f = static_cast<float>(d);
      uint32_t bits;
      std::memcpy(&bits, &f, 4);
      for (int i = 0; i < 4; ++i) {
        h ^= (bits >> (8 * i)) & 0xff;
        h *= 0x100000001b3ULL;
      }
    }
  return h;
}

void zero_grads(const std::vector<ParamRef>& params) {
  for (const auto& p : params) std::fill(p.grad->begin(), p.grad->end(), 0.0);
}

// ------------------------------------------------------------- checkpoint

namespace {

constexpr char kMagic[8] = {'M', 'S', 'E', 'G', 'C', 'K', 'P', '1'};

json arch_to_json(const ArchSpec& s) {
  return json{{"role", to_string(s.role)},
              {"encoder_depth", s.encoder_depth},
              {"base_channels", s.base_channels},
              {"input_channels", s.input_channels},
              {"output_channels", s.output_channels},
              {"image_size", s.image_size},
              {"patch_k", s.patch_k},
              {"noise_size", s.noise_size}};
}

ArchSpec arch_from_json(const json& j) {
  ArchSpec s;
  s.role = role_from_string(j.at("role"));
  s.encoder_depth = j.at("encoder_depth");
  s.base_channels = j.at("base_channels");
  s.input_channels = j.at("input_channels");
  s.output_channels = j.at("output_channels");
  s.image_size = j.at("image_size");
  s.patch_k = j.at("patch_k");
  s.noise_size = j.at("noise_size");
  return s;
}

void put_u32(std::ostream& os, uint32_t v) {
  static_assert(std::endian::native == std::endian::little);
  os.write(reinterpret_cast<const char*>(&v), 4);
}

uint32_t get_u32(std::istream& is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ArchSpec& spec,
                     const std::vector<ParamRef>& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  os.write(kMagic, 8);
  const std::string header = arch_to_json(spec).dump();
  put_u32(os, static_cast<uint32_t>(header.size()));
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  put_u32(os, static_cast<uint32_t>(params.size()));
  for (const auto& p : params) {
    put_u32(os, static_cast<uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_u32(os, static_cast<uint32_t>(p.value->size()));
    for (double d : *p.value) {
      const auto f = static_cast<float>(d);
      os.write(reinterpret_cast<const char*>(&f), 4);
    }
  }
  if (!os) throw IoError("checkpoint write failed: " + path.string());
}

ArchSpec read_checkpoint_spec(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw IoError("not a checkpoint file: " + path.string());
  const uint32_t hlen = get_u32(is);
  std::string header(hlen, '\0');
  is.read(header.data(), hlen);
  try {
    return arch_from_json(json::parse(header));
  } catch (const json::exception& e) {
    throw IoError("bad checkpoint header: " + std::string(e.what()));
  }
}

void load_checkpoint(const std::filesystem::path& path, const ArchSpec& expect,
                     const std::vector<ParamRef>& params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  is.seekg(8);
  const uint32_t hlen = get_u32(is);
  is.seekg(8 + 4 + hlen);
  const uint32_t nrec = get_u32(is);
  if (nrec != params.size())
    throw IoError("checkpoint record count mismatch in " + path.string());
  (void)expect;
  for (const auto& p : params) {
    const uint32_t nlen = get_u32(is);
    std::string name(nlen, '\0');
    is.read(name.data(), nlen);
    const uint32_t count = get_u32(is);
    if (name != p.name || count != p.value->size())
      throw IoError("checkpoint record mismatch: expected " + p.name + ", got " +
                    name);
    for (uint32_t i = 0; i < count; ++i) {
      float f;
      is.read(reinterpret_cast<char*>(&f), 4);
      (*p.value)[i] = f;
    }
  }
  if (!is) throw IoError("truncated checkpoint: " + path.string());
}

}  // namespace mseg
