#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rulemon/mask.hpp"

namespace rulemon {

/// One image: C activation maps on the feature grid (channel-major,
/// row-major within a channel) and its binary concept label.
struct ActivationSample {
  std::vector<double> activations;
  TruthMask label;
};

struct ActivationStack {
  int channels = 0;
  MaskShape grid;
  std::vector<ActivationSample> samples;

  /// Throws DataError on size mismatches, non-finite activations or
  /// non-binary labels.
  void validate() const;
};

/// Linear 1x1 probe sigmoid(w.x + b), optionally with a Gaussian posterior
/// over (w, b) whose covariance is stored row-major with the bias last.
struct ConceptHead {
  std::vector<double> weights;
  double bias = 0.0;
  std::string layer_id;
  std::optional<std::vector<double>> covariance;
  std::optional<double> prior_precision;

  int channels() const { return static_cast<int>(weights.size()); }
  bool calibrated() const { return covariance.has_value(); }
};

enum class Loss { BCE, Dice, BalancedBCE };
enum class Optimizer { Adam, SGD };

std::string to_string(Loss l);
Loss parse_loss(std::string_view s);

struct TrainConfig {
  Loss loss = Loss::BCE;
  Optimizer optimizer = Optimizer::Adam;
  int epochs = 7;
  double lr = 1e-3;
  int batch = 8;                   // samples per step
  double prior_precision = 1.0;    // L2 term lambda/2 |theta|^2 over the whole training set
  double validation_fraction = 0.2;  // 0 disables early stopping
  double early_stop_delta = 1e-3;
  int patience = 3;
  std::uint64_t seed = 0;
  std::string layer_id;
};

struct TrainLog {
  std::vector<double> train_loss;       // per epoch, full pass after the epoch
  std::vector<double> validation_loss;  // per epoch when a validation split exists
  int epochs_run = 0;
  bool stopped_early = false;
};

/// Minimizes the chosen loss plus the L2 prior term. Features are resampled
/// bilinearly onto each label grid first, which is the same as upscaling the
/// logits since the probe is linear. Throws DataError when no training label
/// is positive and NumericError when the loss diverges.
ConceptHead train_head(const ActivationStack& data, const TrainConfig& cfg, TrainLog* log = nullptr);

/// Mean loss over every label pixel of the stack plus prior_precision/(2N)
/// |theta|^2, and optionally its gradient in (weights..., bias) order.
double loss_and_gradient(const ConceptHead& head, const ActivationStack& data, Loss loss, double prior_precision,
                         std::vector<double>* gradient = nullptr);

/// Laplace posterior at the head's parameters: covariance = (sum over label
/// pixels of s(z)(1-s(z)) x x^T + lambda I)^-1 with x = (features, 1).
ConceptHead laplace_fit(const ConceptHead& head, const ActivationStack& data, double prior_precision = 1.0);

/// sigmoid(mu / sqrt(1 + pi s2 / 8)).
double probit_predictive(double mu, double s2);

/// Probability mask for one sample's activations on the given grid,
/// resampled to out_shape (the grid itself when omitted). Calibrated mode
/// needs a posterior and throws UsageError otherwise.
TruthMask predict(const ConceptHead& head, const std::vector<double>& activations, MaskShape grid, bool calibrated,
                  std::optional<MaskShape> out_shape = std::nullopt);

/// Predictions and labels of every label pixel, concatenated over samples.
struct PixelPredictions {
  std::vector<double> probabilities;
  std::vector<double> labels;
};
PixelPredictions predict_pixels(const ConceptHead& head, const ActivationStack& data, bool calibrated);

struct PriorSelection {
  ConceptHead head;
  double prior_precision = 1.0;
  std::vector<std::pair<double, double>> ece_by_precision;
};

/// Fits the posterior for every prior precision in the grid and keeps the
/// one with the lowest calibrated ECE on the validation stack.
PriorSelection select_prior_precision(const ConceptHead& head, const ActivationStack& train,
                                      const ActivationStack& validation, const std::vector<double>& grid,
                                      int n_bins = 10);

}  // namespace rulemon
