#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "rulemon/concept_head.hpp"

namespace rulemon::testing {

// Logistic regression data packed into an activation stack: every sample is
// a 1 x width grid of independent pixels with standard normal features and
// labels drawn from sigmoid(w.x + b).
inline ActivationStack logistic_stack(std::mt19937_64& rng, int n_pixels, const std::vector<double>& weights,
                                      double bias, int width = 100) {
  const int d = static_cast<int>(weights.size());
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ActivationStack stack;
  stack.channels = d;
  // n_pixels is rounded up to a multiple of width.
  const int w = width;
  stack.grid = {1, w};
  for (int done = 0; done < n_pixels;) {
    ActivationSample s;
    s.activations.assign(static_cast<std::size_t>(d * w), 0.0);
    std::vector<double> label(static_cast<std::size_t>(w));
    for (int i = 0; i < w; ++i) {
      double z = bias;
      for (int c = 0; c < d; ++c) {
        const double x = normal(rng);
        s.activations[static_cast<std::size_t>(c * w + i)] = x;
        z += weights[static_cast<std::size_t>(c)] * x;
      }
      label[static_cast<std::size_t>(i)] = u(rng) < 1.0 / (1.0 + std::exp(-z)) ? 1.0 : 0.0;
    }
    s.label = TruthMask({1, w}, std::move(label));
    stack.samples.push_back(std::move(s));
    done += w;
  }
  return stack;
}

// Fixed true parameters used by the calibration checks.
inline std::vector<double> logistic_weights(int d) {
  std::vector<double> w(static_cast<std::size_t>(d));
  for (int c = 0; c < d; ++c) w[static_cast<std::size_t>(c)] = (c % 2 ? -1.0 : 1.0) * (0.3 + 0.15 * c);
  return w;
}

// Class-imbalanced probe data: a 4 x 4 feature grid upscaled to 16 x 16
// labels, with a small positive blob whose activations only partly separate
// it from the background.
inline ActivationStack imbalanced_probe_stack(std::mt19937_64& rng, int n_samples, int channels = 4) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> pos(0, 3);
  ActivationStack stack;
  stack.channels = channels;
  stack.grid = {4, 4};
  for (int n = 0; n < n_samples; ++n) {
    ActivationSample s;
    s.activations.assign(static_cast<std::size_t>(channels * 16), 0.0);
    const int br = pos(rng), bc = pos(rng);
    for (int c = 0; c < channels; ++c) {
      for (int i = 0; i < 16; ++i) {
        const bool hot = i / 4 == br && i % 4 == bc;
        const double signal = c == 0 ? (hot ? 1.5 : 0.0) : 0.0;
        s.activations[static_cast<std::size_t>(c * 16 + i)] = signal + normal(rng);
      }
    }
    std::vector<double> label(256, 0.0);
    for (int r = br * 4 + 1; r < br * 4 + 3; ++r)
      for (int c = bc * 4 + 1; c < bc * 4 + 3; ++c) label[static_cast<std::size_t>(r * 16 + c)] = 1.0;
    s.label = TruthMask({16, 16}, std::move(label));
    stack.samples.push_back(std::move(s));
  }
  return stack;
}

}  // namespace rulemon::testing
