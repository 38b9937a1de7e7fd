#include "fairreg/regularization.hpp"

#include <cmath>
#include <string>

#include "fairreg/common.hpp"

namespace fairreg {

namespace {

void check_flags(std::span<const int> s) {
  for (int f : s) {
    if (f != 0 && f != 1) {
      throw ConfigError("membership flag must be 0 or 1, got " + std::to_string(f));
    }
  }
}

double stable_softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

}  // namespace

CorrStats pearson_corr(std::span<const double> preds, std::span<const int> s) {
  if (preds.size() != s.size()) {
    throw ConfigError("prediction and flag lengths differ: " + std::to_string(preds.size()) +
                      " vs " + std::to_string(s.size()));
  }
  if (preds.size() < 2) {
    throw ConfigError("correlation needs at least 2 examples, got " +
                      std::to_string(preds.size()));
  }
  check_flags(s);

  CorrStats st;
  st.n = preds.size();
  const double n = static_cast<double>(st.n);
  for (std::size_t i = 0; i < st.n; ++i) {
    st.mu_pred += preds[i];
    st.mu_s += s[i];
  }
  st.mu_pred /= n;
  st.mu_s /= n;
  double var_pred = 0.0, var_s = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < st.n; ++i) {
    const double dp = preds[i] - st.mu_pred;
    const double ds = s[i] - st.mu_s;
    var_pred += dp * dp;
    var_s += ds * ds;
    cov += dp * ds;
  }
  st.sigma_pred = std::sqrt(var_pred / n);
  st.sigma_s = std::sqrt(var_s / n);
  if (st.sigma_pred <= kVarianceEps || st.sigma_s <= kVarianceEps) {
    st.degenerate = true;
    st.corr = 0.0;
    return st;
  }
  st.corr = (cov / n) / (st.sigma_pred * st.sigma_s);
  return st;
}

CorrPenalty corr_penalty_and_grad(std::span<const double> preds, std::span<const int> s,
                                  double lambda) {
  if (!(std::isfinite(lambda) && lambda >= 0.0)) {
    throw ConfigError("lambda must be finite and >= 0");
  }
  CorrPenalty out;
  out.stats = pearson_corr(preds, s);
  out.grad.assign(preds.size(), 0.0);
  if (lambda == 0.0 || out.stats.degenerate || out.stats.corr == 0.0) {
    return out;
  }
  const CorrStats& st = out.stats;
  out.penalty = lambda * std::abs(st.corr);
  const double sign = st.corr > 0.0 ? 1.0 : -1.0;
  const double n = static_cast<double>(st.n);
  const double inv_cov_term = 1.0 / (n * st.sigma_pred * st.sigma_s);
  const double inv_var_term = st.corr / (n * st.sigma_pred * st.sigma_pred);
  for (std::size_t i = 0; i < st.n; ++i) {
    out.grad[i] = lambda * sign *
                  ((s[i] - st.mu_s) * inv_cov_term - (preds[i] - st.mu_pred) * inv_var_term);
  }
  return out;
}

AdversaryStep adversary_step(const std::vector<std::vector<double>>& hidden,
                             std::span<const int> s, const AdversaryHead& head,
                             double alpha) {
  if (hidden.size() != s.size()) {
    throw ConfigError("hidden batch and flag lengths differ");
  }
  if (!(std::isfinite(alpha) && alpha >= 0.0)) {
    throw ConfigError("alpha must be finite and >= 0");
  }
  check_flags(s);
  AdversaryStep step;
  step.head_grad_w.assign(head.w.size(), 0.0);
  if (hidden.empty()) {
    step.skipped = true;
    return step;
  }
  const double n = static_cast<double>(hidden.size());
  step.reversed.resize(hidden.size());
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    const std::vector<double>& h = hidden[i];
    if (h.size() != head.w.size()) {
      throw ConfigError("hidden vector width " + std::to_string(h.size()) +
                        " does not match head width " + std::to_string(head.w.size()));
    }
    double z = head.b;
    for (std::size_t j = 0; j < h.size(); ++j) z += head.w[j] * h[j];
    // log-loss of sigma(z) against s, written to stay finite for any z
    step.loss += stable_softplus(z) - s[i] * z;
    const double residual = (sigmoid(z) - s[i]) / n;
    for (std::size_t j = 0; j < h.size(); ++j) {
      step.head_grad_w[j] += residual * h[j];
    }
    step.head_grad_b += residual;
    std::vector<double>& rev = step.reversed[i];
    rev.resize(h.size());
    for (std::size_t j = 0; j < h.size(); ++j) {
      rev[j] = -alpha * residual * head.w[j];
    }
  }
  step.loss /= n;
  return step;
}

}  // namespace fairreg
