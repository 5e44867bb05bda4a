#include "pfnet/model/pfnet.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "pfnet/errors.hpp"
#include "pfnet/geometry/ifps.hpp"
#include "pfnet/tensor/ops.hpp"

namespace pfnet::model {

using geometry::PointCloud;

Cmlp::Cmlp(std::size_t in_channels, const std::vector<std::size_t>& widths,
           std::size_t pooled_layers)
    : pooled_layers_(pooled_layers) {
  std::size_t in = in_channels;
  for (std::size_t w : widths) {
    layers_.emplace_back(in, w);
    norms_.emplace_back(w);
    in = w;
  }
  for (std::size_t l = widths.size() - pooled_layers; l < widths.size(); ++l)
    output_dim_ += widths[l];
}

Var Cmlp::forward(Graph& g, Var points, std::size_t batch, Mode mode, Binding binding) {
  const std::size_t in = layers_.front().weight.shape[0];
  if (points.shape().size() != 2 || points.shape()[1] != in)
    throw ShapeError("CMLP expects [P x " + std::to_string(in) + "] input, got " +
                     shape_to_string(points.shape()));
  if (batch == 0 || points.shape()[0] % batch != 0 || points.shape()[0] < batch)
    throw ShapeError("CMLP: " + std::to_string(points.shape()[0]) +
                     " rows cannot be split into " + std::to_string(batch) + " clouds");
  std::vector<Var> pooled;
  Var x = points;
  const std::size_t first_pooled = layers_.size() - pooled_layers_;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    x = ops::relu(norms_[l].forward(g, layers_[l].forward(g, x, binding), mode, binding));
    if (l >= first_pooled) pooled.push_back(ops::maxpool_groups(x, batch));
  }
  return pooled.size() == 1 ? pooled.front() : ops::concat_cols(pooled);
}

void Cmlp::initialize(std::mt19937_64& rng) {
  for (auto& layer : layers_) layer.initialize(rng);
}

void Cmlp::visit(const std::string& prefix, const ParamVisitor& fn) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].visit(prefix + ".layer" + std::to_string(l), fn);
    norms_[l].visit(prefix + ".bn" + std::to_string(l), fn);
  }
}

void Cmlp::visit_buffers(const std::string& prefix, const ParamVisitor& fn) {
  for (std::size_t l = 0; l < norms_.size(); ++l)
    norms_[l].visit_buffers(prefix + ".bn" + std::to_string(l), fn);
}

MultiResolutionEncoder::MultiResolutionEncoder(const EncoderConfig& config)
    : config_(config), fusion_(config.n_scales, 1) {
  config_.validate();
  for (std::size_t s = 0; s < config_.n_scales; ++s)
    cmlps_.emplace_back(3, config_.cmlp_widths, config_.pooled_layers);
}

std::vector<PointCloud> MultiResolutionEncoder::downsample(const PointCloud& cloud) const {
  std::size_t divisor = 1;
  for (std::size_t s = 1; s < config_.n_scales; ++s) divisor *= config_.k;
  if (cloud.size() < divisor || cloud.size() % divisor != 0)
    throw DomainError("encoder input of " + std::to_string(cloud.size()) +
                      " points is not divisible by " + std::to_string(divisor) +
                      "; pad or trim the partial cloud");
  const auto sizes = config_.scale_sizes(cloud.size());
  std::vector<PointCloud> scales{cloud};
  if (sizes.size() == 1) return scales;
  // Later scales are prefixes of one IFPS run: the greedy order is nested.
  const auto order = geometry::ifps(cloud, sizes[1], geometry::IfpsStart::extremal);
  for (std::size_t s = 1; s < sizes.size(); ++s)
    scales.push_back(geometry::gather(
        cloud, std::span<const std::size_t>(order.indices.data(), sizes[s])));
  return scales;
}

EncoderOutput MultiResolutionEncoder::forward(Graph& g, std::span<const PointCloud> partials,
                                              Mode mode, Binding binding) {
  if (partials.empty()) throw ShapeError("encoder: empty batch");
  const std::size_t n = partials.front().size();
  std::vector<std::vector<PointCloud>> per_scale(config_.n_scales);
  for (const auto& partial : partials) {
    if (partial.size() != n)
      throw ShapeError("encoder: all clouds in a batch need the same size, got " +
                       std::to_string(n) + " and " + std::to_string(partial.size()));
    auto scales = downsample(partial);
    for (std::size_t s = 0; s < scales.size(); ++s) per_scale[s].push_back(std::move(scales[s]));
  }
  std::vector<Var> inputs;
  for (const auto& clouds : per_scale) inputs.push_back(g.constant(geometry::stack_clouds(clouds)));
  return forward_scales(g, inputs, partials.size(), mode, binding);
}

EncoderOutput MultiResolutionEncoder::forward_scales(Graph& g, const std::vector<Var>& scale_points,
                                                     std::size_t batch, Mode mode,
                                                     Binding binding) {
  if (scale_points.size() != config_.n_scales)
    throw ShapeError("encoder: expected " + std::to_string(config_.n_scales) + " scale inputs");
  EncoderOutput out;
  for (std::size_t s = 0; s < cmlps_.size(); ++s)
    out.scale_features.push_back(cmlps_[s].forward(g, scale_points[s], batch, mode, binding));
  out.latent_map = ops::stack_cols(out.scale_features);
  const Var fused = fusion_.forward(g, out.latent_map, binding);
  out.feature = ops::reshape(fused, Shape{batch, config_.combined_dim()});
  return out;
}

void MultiResolutionEncoder::initialize(std::mt19937_64& rng) {
  for (auto& c : cmlps_) c.initialize(rng);
  fusion_.initialize(rng);
}

void MultiResolutionEncoder::visit(const std::string& prefix, const ParamVisitor& fn) {
  for (std::size_t s = 0; s < cmlps_.size(); ++s)
    cmlps_[s].visit(prefix + ".cmlp" + std::to_string(s), fn);
  fusion_.visit(prefix + ".fusion", fn);
}

void MultiResolutionEncoder::visit_buffers(const std::string& prefix, const ParamVisitor& fn) {
  for (std::size_t s = 0; s < cmlps_.size(); ++s)
    cmlps_[s].visit_buffers(prefix + ".cmlp" + std::to_string(s), fn);
}

PointPyramidDecoder::PointPyramidDecoder(const DecoderConfig& config, std::size_t input_dim)
    : config_(config), input_dim_(input_dim) {
  config_.validate();
  const auto& w = config_.fc_widths;
  fc1_ = Linear(input_dim, w[0]);
  fc2_ = Linear(w[0], w[1]);
  fc3_ = Linear(w[1], w[2]);
  head_primary_ = Linear(w[2], config_.m1 * 3);
  head_secondary_ = Linear(w[1], config_.m2 * 3);
  head_detail_ = Linear(w[0], config_.m * 3);
}

DecoderOutput PointPyramidDecoder::forward(Graph& g, Var feature, Binding binding) {
  if (feature.shape().size() != 2 || feature.shape()[1] != input_dim_)
    throw ShapeError("decoder expects [B x " + std::to_string(input_dim_) + "] features, got " +
                     shape_to_string(feature.shape()));
  const std::size_t batch = feature.shape()[0];
  const Var f1 = ops::relu(fc1_.forward(g, feature, binding));
  const Var f2 = ops::relu(fc2_.forward(g, f1, binding));
  const Var f3 = ops::relu(fc3_.forward(g, f2, binding));

  DecoderOutput out;
  out.primary = ops::reshape(head_primary_.forward(g, f3, binding), Shape{batch * config_.m1, 3});
  const Var offsets2 =
      ops::reshape(head_secondary_.forward(g, f2, binding), Shape{batch * config_.m2, 3});
  out.secondary = ops::add(ops::repeat_rows(out.primary, config_.m2 / config_.m1), offsets2);
  const Var offsets1 =
      ops::reshape(head_detail_.forward(g, f1, binding), Shape{batch * config_.m, 3});
  out.detail = ops::add(ops::repeat_rows(out.secondary, config_.m / config_.m2), offsets1);
  return out;
}

void PointPyramidDecoder::initialize(std::mt19937_64& rng) {
  for (Linear* l : {&fc1_, &fc2_, &fc3_, &head_primary_, &head_secondary_, &head_detail_})
    l->initialize(rng);
}

void PointPyramidDecoder::visit(const std::string& prefix, const ParamVisitor& fn) {
  fc1_.visit(prefix + ".fc1", fn);
  fc2_.visit(prefix + ".fc2", fn);
  fc3_.visit(prefix + ".fc3", fn);
  head_primary_.visit(prefix + ".head_primary", fn);
  head_secondary_.visit(prefix + ".head_secondary", fn);
  head_detail_.visit(prefix + ".head_detail", fn);
}

Discriminator::Discriminator(const DiscriminatorConfig& config)
    : config_(config), features_(3, config.point_widths, config.pooled_layers) {
  config_.validate();
  std::size_t in = config_.latent_dim();
  for (std::size_t w : config_.fc_widths) {
    fc_.emplace_back(in, w);
    fc_norms_.emplace_back(w);
    in = w;
  }
  output_ = Linear(in, 1);
}

DiscriminatorOutput Discriminator::forward(Graph& g, Var cloud, std::size_t batch, Mode mode,
                                           Binding binding) {
  DiscriminatorOutput out;
  out.latent = features_.forward(g, cloud, batch, mode, binding);
  Var x = out.latent;
  for (std::size_t l = 0; l < fc_.size(); ++l)
    x = ops::relu(fc_norms_[l].forward(g, fc_[l].forward(g, x, binding), mode, binding));
  out.probability = ops::sigmoid(output_.forward(g, x, binding));
  return out;
}

void Discriminator::initialize(std::mt19937_64& rng) {
  features_.initialize(rng);
  for (auto& l : fc_) l.initialize(rng);
  output_.initialize(rng);
}

void Discriminator::visit(const std::string& prefix, const ParamVisitor& fn) {
  features_.visit(prefix, fn);
  for (std::size_t l = 0; l < fc_.size(); ++l) {
    fc_[l].visit(prefix + ".fc" + std::to_string(l), fn);
    fc_norms_[l].visit(prefix + ".fc_bn" + std::to_string(l), fn);
  }
  output_.visit(prefix + ".out", fn);
}

void Discriminator::visit_buffers(const std::string& prefix, const ParamVisitor& fn) {
  features_.visit_buffers(prefix, fn);
  for (std::size_t l = 0; l < fc_norms_.size(); ++l)
    fc_norms_[l].visit_buffers(prefix + ".fc_bn" + std::to_string(l), fn);
}

PFNet::PFNet(const ModelConfig& config, std::uint64_t init_seed)
    : config_(config),
      encoder_(config.encoder),
      decoder_(config.decoder, config.encoder.combined_dim()),
      discriminator_(config.discriminator) {
  config_.validate();
  std::mt19937_64 rng(init_seed);
  encoder_.initialize(rng);
  decoder_.initialize(rng);
  discriminator_.initialize(rng);
}

GeneratorOutput PFNet::generate(Graph& g, std::span<const PointCloud> partials, Mode mode,
                                Binding binding) {
  GeneratorOutput out;
  out.encoder = encoder_.forward(g, partials, mode, binding);
  out.decoder = decoder_.forward(g, out.encoder.feature, binding);
  return out;
}

DiscriminatorOutput PFNet::discriminate(Graph& g, Var clouds, std::size_t batch, Mode mode,
                                        Binding binding) {
  return discriminator_.forward(g, clouds, batch, mode, binding);
}

std::vector<PointCloud> PFNet::complete(const PointCloud& partial) {
  Graph g;
  const auto out = generate(g, std::span<const PointCloud>(&partial, 1), Mode::eval,
                            Binding::frozen);
  return {PointCloud::from_tensor(out.decoder.primary.value()),
          PointCloud::from_tensor(out.decoder.secondary.value()),
          PointCloud::from_tensor(out.decoder.detail.value())};
}

void PFNet::visit_generator(const ParamVisitor& fn) {
  encoder_.visit("mre", fn);
  decoder_.visit("ppd", fn);
}

void PFNet::visit_discriminator(const ParamVisitor& fn) { discriminator_.visit("disc", fn); }

void PFNet::visit_parameters(const ParamVisitor& fn) {
  visit_generator(fn);
  visit_discriminator(fn);
}

void PFNet::visit_buffers(const ParamVisitor& fn) {
  encoder_.visit_buffers("mre", fn);
  discriminator_.visit_buffers("disc", fn);
}

std::vector<NamedTensor> PFNet::generator_parameters() {
  std::vector<NamedTensor> out;
  visit_generator([&out](const std::string& name, Tensor& t) { out.push_back({name, &t}); });
  return out;
}

std::vector<NamedTensor> PFNet::discriminator_parameters() {
  std::vector<NamedTensor> out;
  visit_discriminator([&out](const std::string& name, Tensor& t) { out.push_back({name, &t}); });
  return out;
}

std::size_t PFNet::parameter_count() {
  std::size_t total = 0;
  visit_parameters([&total](const std::string&, Tensor& t) { total += t.size(); });
  return total;
}

std::string PFNet::summary() {
  std::ostringstream os;
  std::size_t total = 0;
  visit_parameters([&](const std::string& name, Tensor& t) {
    os << name << ' ' << shape_to_string(t.shape) << ' ' << t.size() << '\n';
    total += t.size();
  });
  os << "total " << total << '\n';
  return os.str();
}

Checkpoint PFNet::to_checkpoint(const KeyValues& extra_header) {
  Checkpoint ckp;
  ckp.header = extra_header;
  for (const auto& [key, value] : config_.to_key_values()) ckp.header[key] = value;
  auto add = [&ckp](const std::string& name, Tensor& t) {
    ckp.tensors.emplace_back(name, Tensor(t.shape, t.values));
  };
  visit_parameters(add);
  visit_buffers(add);
  return ckp;
}

void PFNet::save(const std::filesystem::path& path, const KeyValues& extra_header) {
  write_checkpoint(path, to_checkpoint(extra_header));
}

PFNet PFNet::from_checkpoint(const Checkpoint& checkpoint) {
  PFNet net(ModelConfig::from_key_values(checkpoint.header));
  std::set<std::string> expected;
  auto load = [&](const std::string& name, Tensor& t) {
    expected.insert(name);
    const Tensor* stored = checkpoint.find(name);
    if (stored == nullptr) throw ConfigError("checkpoint lacks tensor '" + name + "'");
    if (stored->shape != t.shape)
      throw ConfigError("checkpoint tensor '" + name + "' has shape " +
                        shape_to_string(stored->shape) + ", model expects " +
                        shape_to_string(t.shape));
    t.values = stored->values;
  };
  net.visit_parameters(load);
  net.visit_buffers(load);
  for (const auto& [name, tensor] : checkpoint.tensors)
    if (!expected.contains(name))
      throw ConfigError("checkpoint holds unexpected tensor '" + name + "'");
  return net;
}

PFNet PFNet::load(const std::filesystem::path& path) {
  return from_checkpoint(read_checkpoint(path));
}

}  // namespace pfnet::model
