#pragma once

#include <span>
#include <vector>

namespace fairreg {

/// Batch statistics behind the correlation penalty. All moments are
/// population-style (divide by n). When either standard deviation is at or
/// below the guard epsilon the batch is degenerate: corr is forced to 0 so a
/// constant batch can never poison training with NaN.
struct CorrStats {
  double mu_pred = 0.0;
  double mu_s = 0.0;
  double sigma_pred = 0.0;
  double sigma_s = 0.0;
  double corr = 0.0;
  std::size_t n = 0;
  bool degenerate = false;
};

/// Guard below which a standard deviation counts as zero.
inline constexpr double kVarianceEps = 1e-8;

/// Pearson correlation between predictions and binary group membership.
/// Throws ConfigError on length mismatch, n < 2, or a flag outside {0,1}.
CorrStats pearson_corr(std::span<const double> preds, std::span<const int> s);

/// lambda * |corr| and its exact gradient with respect to each prediction.
struct CorrPenalty {
  double penalty = 0.0;
  std::vector<double> grad;
  CorrStats stats;
};

/// Analytic gradient of lambda*|corr| through the prediction-side moments
/// (the membership statistics are constants):
///   d|corr|/dyhat_i = sign(corr) * [ (s_i - mu_s) / (n sigma_y sigma_s)
///                                    - corr (yhat_i - mu_y) / (n sigma_y^2) ]
/// with sign(0) = 0. Degenerate batches and lambda = 0 return zero penalty
/// and a zero gradient.
CorrPenalty corr_penalty_and_grad(std::span<const double> preds, std::span<const int> s,
                                  double lambda);

/// The adversary: a single sigmoid unit over the encoder's hidden
/// activations, predicting group membership.
struct AdversaryHead {
  std::vector<double> w;
  double b = 0.0;

  static AdversaryHead zeros(std::size_t width) { return {std::vector<double>(width, 0.0), 0.0}; }
};

/// One joint evaluation of the adversary on a batch: mean log-loss, true
/// gradient for the head's own update, and the sign-flipped input gradient
/// handed back to the encoder.
struct AdversaryStep {
  double loss = 0.0;                          // mean log-loss over the batch
  std::vector<double> head_grad_w;            // d(mean loss)/dw
  double head_grad_b = 0.0;
  std::vector<std::vector<double>> reversed;  // per example: -alpha * d(mean loss)/dh_i
  bool skipped = false;                       // empty batch: everything zero
};

/// Evaluates head loss sigma(w.h + b) against the flags under the numerically
/// stable log-loss, producing the head gradient and the reversed encoder
/// gradient scaled by alpha. An empty batch is a no-op with `skipped` set.
/// Throws ConfigError when a hidden vector does not match the head width or a
/// flag is outside {0,1}.
AdversaryStep adversary_step(const std::vector<std::vector<double>>& hidden,
                             std::span<const int> s, const AdversaryHead& head,
                             double alpha);

}  // namespace fairreg
