#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pfnet/geometry/point_cloud.hpp"
#include "pfnet/model/config.hpp"
#include "pfnet/model/layers.hpp"
#include "pfnet/tensor/adam.hpp"
#include "pfnet/tensor/checkpoint.hpp"

namespace pfnet::model {

// Combined multi-layer perceptron: shared per-point layers with batchnorm and
// ReLU; the last `pooled_layers` outputs are max-pooled over the points of each
// cloud and concatenated.
class Cmlp {
 public:
  Cmlp() = default;
  Cmlp(std::size_t in_channels, const std::vector<std::size_t>& widths, std::size_t pooled_layers);

  // points [B*P x in] -> [B x sum(pooled widths)]
  Var forward(Graph& g, Var points, std::size_t batch, Mode mode, Binding binding);

  void initialize(std::mt19937_64& rng);
  void visit(const std::string& prefix, const ParamVisitor& fn);
  void visit_buffers(const std::string& prefix, const ParamVisitor& fn);

  std::size_t output_dim() const { return output_dim_; }

 private:
  std::vector<Linear> layers_;
  std::vector<BatchNorm> norms_;
  std::size_t pooled_layers_ = 0;
  std::size_t output_dim_ = 0;
};

struct EncoderOutput {
  Var feature;     // V: [B x combined_dim]
  Var latent_map;  // [B*combined_dim x n_scales]; column s holds scale s
  std::vector<Var> scale_features;  // per scale, [B x combined_dim]
};

// Multi-resolution encoder: IFPS downsampling to n/k, n/k^2, ..., one
// independent CMLP per scale, then a shared [n_scales -> 1] linear fusion
// applied to every latent row.
class MultiResolutionEncoder {
 public:
  MultiResolutionEncoder() = default;
  explicit MultiResolutionEncoder(const EncoderConfig& config);

  // All clouds must have the same size, divisible by k^(n_scales - 1).
  EncoderOutput forward(Graph& g, std::span<const geometry::PointCloud> partials, Mode mode,
                        Binding binding);
  // Runs every CMLP on the same point tensor (no downsampling) and fuses.
  EncoderOutput forward_scales(Graph& g, const std::vector<Var>& scale_points, std::size_t batch,
                               Mode mode, Binding binding);

  // The per-scale inputs used by forward(): IFPS subsets seeded at the
  // lexicographically largest point, so the result is independent of point order.
  std::vector<geometry::PointCloud> downsample(const geometry::PointCloud& cloud) const;

  void initialize(std::mt19937_64& rng);
  void visit(const std::string& prefix, const ParamVisitor& fn);
  void visit_buffers(const std::string& prefix, const ParamVisitor& fn);

  Linear& fusion() { return fusion_; }
  Cmlp& cmlp(std::size_t scale) { return cmlps_.at(scale); }

 private:
  EncoderConfig config_;
  std::vector<Cmlp> cmlps_;
  Linear fusion_;
};

struct DecoderOutput {
  Var primary;    // [B*M1 x 3]
  Var secondary;  // [B*M2 x 3]
  Var detail;     // [B*M x 3]
};

// Point pyramid decoder: FC1..FC3 trunk with ReLU; linear heads predict the
// primary centers from FC3 and relative offsets from FC2 and FC1, which are
// added to the expanded coarser stage.
class PointPyramidDecoder {
 public:
  PointPyramidDecoder() = default;
  PointPyramidDecoder(const DecoderConfig& config, std::size_t input_dim);

  DecoderOutput forward(Graph& g, Var feature, Binding binding);

  void initialize(std::mt19937_64& rng);
  void visit(const std::string& prefix, const ParamVisitor& fn);

  Linear& head_primary() { return head_primary_; }
  Linear& head_secondary() { return head_secondary_; }
  Linear& head_detail() { return head_detail_; }

 private:
  DecoderConfig config_;
  std::size_t input_dim_ = 0;
  Linear fc1_, fc2_, fc3_;
  Linear head_primary_, head_secondary_, head_detail_;
};

struct DiscriminatorOutput {
  Var latent;       // [B x latent_dim]
  Var probability;  // [B x 1]
};

class Discriminator {
 public:
  Discriminator() = default;
  explicit Discriminator(const DiscriminatorConfig& config);

  // cloud [B*M x 3]
  DiscriminatorOutput forward(Graph& g, Var cloud, std::size_t batch, Mode mode, Binding binding);

  void initialize(std::mt19937_64& rng);
  void visit(const std::string& prefix, const ParamVisitor& fn);
  void visit_buffers(const std::string& prefix, const ParamVisitor& fn);

 private:
  DiscriminatorConfig config_;
  Cmlp features_;
  std::vector<Linear> fc_;
  std::vector<BatchNorm> fc_norms_;
  Linear output_;
};

struct GeneratorOutput {
  EncoderOutput encoder;
  DecoderOutput decoder;
};

// All learnable state: F = PPD(MRE(.)) and D(.).
class PFNet {
 public:
  explicit PFNet(const ModelConfig& config, std::uint64_t init_seed = 0);

  const ModelConfig& config() const { return config_; }

  GeneratorOutput generate(Graph& g, std::span<const geometry::PointCloud> partials, Mode mode,
                           Binding binding = Binding::trainable);
  DiscriminatorOutput discriminate(Graph& g, Var clouds, std::size_t batch, Mode mode,
                                   Binding binding = Binding::trainable);

  // Inference on one partial cloud in eval mode: {primary, secondary, detail}.
  std::vector<geometry::PointCloud> complete(const geometry::PointCloud& partial);

  MultiResolutionEncoder& encoder() { return encoder_; }
  PointPyramidDecoder& decoder() { return decoder_; }
  Discriminator& discriminator() { return discriminator_; }

  void visit_generator(const ParamVisitor& fn);
  void visit_discriminator(const ParamVisitor& fn);
  void visit_parameters(const ParamVisitor& fn);
  // Batchnorm running statistics (not optimized, but checkpointed).
  void visit_buffers(const ParamVisitor& fn);

  std::vector<NamedTensor> generator_parameters();
  std::vector<NamedTensor> discriminator_parameters();

  std::size_t parameter_count();
  // One line per tensor: name, shape, element count; then a total.
  std::string summary();

  Checkpoint to_checkpoint(const KeyValues& extra_header = {});
  void save(const std::filesystem::path& path, const KeyValues& extra_header = {});
  // Rebuilds the architecture from the checkpoint header and loads every
  // tensor, rejecting missing, unexpected or mis-shaped entries.
  static PFNet from_checkpoint(const Checkpoint& checkpoint);
  static PFNet load(const std::filesystem::path& path);

 private:
  ModelConfig config_;
  MultiResolutionEncoder encoder_;
  PointPyramidDecoder decoder_;
  Discriminator discriminator_;
};

}  // namespace pfnet::model
