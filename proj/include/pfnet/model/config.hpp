#pragma once

#include <cstddef>
#include <vector>

#include "pfnet/key_value.hpp"

namespace pfnet::model {

struct EncoderConfig {
  std::size_t k = 2;  // downsampling factor between scales
  std::vector<std::size_t> cmlp_widths{64, 128, 256, 512, 1024};
  std::size_t pooled_layers = 4;  // the last layers whose max-pooled outputs are concatenated
  std::size_t n_scales = 3;

  std::vector<std::size_t> pooled_widths() const;
  std::size_t combined_dim() const;
  // Point counts of the scales for an input of n points: n, n/k, n/k^2, ...
  std::vector<std::size_t> scale_sizes(std::size_t n) const;
  void validate() const;
};

struct DecoderConfig {
  std::vector<std::size_t> fc_widths{1024, 512, 256};  // FC1, FC2, FC3
  std::size_t m1 = 64;   // primary centers
  std::size_t m2 = 128;  // secondary centers
  std::size_t m = 512;   // detail points (the predicted missing region)

  void validate() const;
};

struct DiscriminatorConfig {
  std::vector<std::size_t> point_widths{64, 64, 128, 256};
  std::size_t pooled_layers = 3;
  std::vector<std::size_t> fc_widths{256, 128, 16};  // followed by a 1-unit sigmoid output

  std::size_t latent_dim() const;
  void validate() const;
};

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
  DiscriminatorConfig discriminator;

  // The published architecture; only the final prediction size m varies.
  static ModelConfig paper(std::size_t m = 512);
  // Every layer width divided by `divisor` (at least 1 unit each).
  ModelConfig scaled_down(std::size_t divisor) const;
  // Encoder and decoder widths divided by one divisor, discriminator widths by another.
  ModelConfig scaled_down(std::size_t generator_divisor, std::size_t discriminator_divisor) const;

  void validate() const;
  KeyValues to_key_values() const;
  static ModelConfig from_key_values(const KeyValues& kv);
};

}  // namespace pfnet::model
