#pragma once

#include <random>

#include "support/random_nets.hpp"

namespace testsupport {

// Random net on [-1,1]^n0 whose hidden units are pushed into stability by
// bias shifts: roughly a third stably inactive, a third stably active, and
// some active units given weights dependent on earlier active ones. With
// `whole_layer` set, one random layer is forced fully active.
inline Network forced_stable_network(const std::vector<std::size_t>& arch, std::mt19937_64& rng,
                                     bool whole_layer = false) {
  Network base = random_network(arch, rng);
  std::vector<Layer> layers = base.layers();
  std::uniform_int_distribution<int> pick(0, 5);
  std::uniform_real_distribution<double> coef(-1.5, 1.5);
  const std::size_t L = layers.size() - 1;
  const std::size_t full = std::uniform_int_distribution<std::size_t>(0, L - 1)(rng);
  double input_scale = 1.0;  // bound on |h| feeding the current layer
  for (std::size_t l = 0; l < L; ++l) {
    Layer& layer = layers[l];
    std::vector<std::size_t> active_rows;
    double out_scale = 0.0;
    for (std::size_t i = 0; i < layer.width(); ++i) {
      int kind = whole_layer && l == full ? 2 : pick(rng);
      if (kind == 3 && !active_rows.empty()) {
        // dependent row: combination of earlier stably active rows
        auto dst = layer.weights.row(i);
        std::fill(dst.begin(), dst.end(), 0.0);
        for (std::size_t k : active_rows) {
          const double a = coef(rng);
          auto src = layer.weights.row(k);
          for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += a * src[c];
        }
        kind = 2;
      }
      double row_norm = 0.0;
      for (double w : layer.weights.row(i)) row_norm += std::abs(w);
      const double margin = row_norm * input_scale + 0.5;
      if (kind <= 1) {
        layer.bias[i] = -margin;
      } else if (kind == 2) {
        layer.bias[i] = margin;
        active_rows.push_back(i);
      }
      out_scale = std::max(out_scale, std::abs(layer.bias[i]) + margin);
    }
    input_scale = out_scale;
  }
  return Network(base.input_dim(), layers);
}

}  // namespace testsupport
