#include "pfnet/model/config.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <string>

#include "pfnet/errors.hpp"

namespace pfnet::model {

namespace {

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
  return s;
}

std::vector<std::size_t> split_list(const std::string& text, const std::string& key) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ParseError("key '" + key + "': '" + text + "' is not a list of integers");
    }
  }
  return out;
}

void require_positive(const std::vector<std::size_t>& widths, const char* what) {
  if (widths.empty() || std::find(widths.begin(), widths.end(), std::size_t{0}) != widths.end())
    throw ConfigError(std::string(what) + " must be a non-empty list of positive widths");
}

}  // namespace

std::vector<std::size_t> EncoderConfig::pooled_widths() const {
  return {cmlp_widths.end() - static_cast<std::ptrdiff_t>(pooled_layers), cmlp_widths.end()};
}

std::size_t EncoderConfig::combined_dim() const {
  const auto w = pooled_widths();
  return std::accumulate(w.begin(), w.end(), std::size_t{0});
}

std::vector<std::size_t> EncoderConfig::scale_sizes(std::size_t n) const {
  std::vector<std::size_t> sizes{n};
  for (std::size_t s = 1; s < n_scales; ++s) sizes.push_back(sizes.back() / k);
  return sizes;
}

void EncoderConfig::validate() const {
  require_positive(cmlp_widths, "encoder widths");
  if (k < 1) throw ConfigError("encoder: k must be at least 1");
  if (pooled_layers == 0 || pooled_layers > cmlp_widths.size())
    throw ConfigError("encoder: pooled layer count exceeds the layer count");
  if (n_scales == 0) throw ConfigError("encoder: at least one scale is required");
}

void DecoderConfig::validate() const {
  require_positive(fc_widths, "decoder widths");
  if (fc_widths.size() != 3) throw ConfigError("decoder: exactly three FC layers are required");
  if (m1 == 0 || m2 == 0 || m == 0) throw ConfigError("decoder: M1, M2 and M must be positive");
  if (m2 % m1 != 0 || m % m2 != 0)
    throw ConfigError("decoder: need M1 | M2 and M2 | M, got M1=" + std::to_string(m1) +
                      " M2=" + std::to_string(m2) + " M=" + std::to_string(m));
}

std::size_t DiscriminatorConfig::latent_dim() const {
  return std::accumulate(point_widths.end() - static_cast<std::ptrdiff_t>(pooled_layers),
                         point_widths.end(), std::size_t{0});
}

void DiscriminatorConfig::validate() const {
  require_positive(point_widths, "discriminator point widths");
  require_positive(fc_widths, "discriminator FC widths");
  if (pooled_layers == 0 || pooled_layers > point_widths.size())
    throw ConfigError("discriminator: pooled layer count exceeds the layer count");
}

ModelConfig ModelConfig::paper(std::size_t m) {
  ModelConfig c;
  c.decoder.m = m;
  return c;
}

ModelConfig ModelConfig::scaled_down(std::size_t divisor) const {
  return scaled_down(divisor, divisor);
}

ModelConfig ModelConfig::scaled_down(std::size_t generator_divisor,
                                     std::size_t discriminator_divisor) const {
  if (generator_divisor == 0 || discriminator_divisor == 0)
    throw ConfigError("scale divisor must be positive");
  auto shrink = [](std::vector<std::size_t> v, std::size_t divisor) {
    for (auto& w : v) w = std::max<std::size_t>(1, w / divisor);
    return v;
  };
  ModelConfig c = *this;
  c.encoder.cmlp_widths = shrink(encoder.cmlp_widths, generator_divisor);
  c.decoder.fc_widths = shrink(decoder.fc_widths, generator_divisor);
  c.discriminator.point_widths = shrink(discriminator.point_widths, discriminator_divisor);
  c.discriminator.fc_widths = shrink(discriminator.fc_widths, discriminator_divisor);
  return c;
}

void ModelConfig::validate() const {
  encoder.validate();
  decoder.validate();
  discriminator.validate();
}

KeyValues ModelConfig::to_key_values() const {
  return {
      {"model.k", std::to_string(encoder.k)},
      {"model.cmlp_widths", join(encoder.cmlp_widths)},
      {"model.cmlp_pooled_layers", std::to_string(encoder.pooled_layers)},
      {"model.n_scales", std::to_string(encoder.n_scales)},
      {"model.fc_widths", join(decoder.fc_widths)},
      {"model.m1", std::to_string(decoder.m1)},
      {"model.m2", std::to_string(decoder.m2)},
      {"model.m", std::to_string(decoder.m)},
      {"model.disc_point_widths", join(discriminator.point_widths)},
      {"model.disc_pooled_layers", std::to_string(discriminator.pooled_layers)},
      {"model.disc_fc_widths", join(discriminator.fc_widths)},
  };
}

ModelConfig ModelConfig::from_key_values(const KeyValues& kv) {
  auto get = [&kv](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw ParseError("model config lacks key '" + key + "'");
    return it->second;
  };
  ModelConfig c;
  c.encoder.k = kv_uint(kv, "model.k");
  c.encoder.cmlp_widths = split_list(get("model.cmlp_widths"), "model.cmlp_widths");
  c.encoder.pooled_layers = kv_uint(kv, "model.cmlp_pooled_layers");
  c.encoder.n_scales = kv_uint(kv, "model.n_scales");
  c.decoder.fc_widths = split_list(get("model.fc_widths"), "model.fc_widths");
  c.decoder.m1 = kv_uint(kv, "model.m1");
  c.decoder.m2 = kv_uint(kv, "model.m2");
  c.decoder.m = kv_uint(kv, "model.m");
  c.discriminator.point_widths = split_list(get("model.disc_point_widths"), "model.disc_point_widths");
  c.discriminator.pooled_layers = kv_uint(kv, "model.disc_pooled_layers");
  c.discriminator.fc_widths = split_list(get("model.disc_fc_widths"), "model.disc_fc_widths");
  c.validate();
  return c;
}

}  // namespace pfnet::model
