// End-to-end acceptance checks for the fairness stack. Each check prints
// one PASS/FAIL line; the process exits nonzero if any line fails. The study
// thresholds were pinned from the recorded sweep on the default generator
// (see configs/) and are frozen here on purpose: a drift in the generator or
// the trainer that moves the numbers is a finding, not a reason to retune.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iterator>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fairreg/common.hpp"
#include "fairreg/dataset.hpp"
#include "fairreg/metrics.hpp"
#include "fairreg/model.hpp"
#include "fairreg/regularization.hpp"
#include "fairreg/report_io.hpp"
#include "fairreg/rng.hpp"
#include "fairreg/synthgen.hpp"
#include "fairreg/trainer.hpp"

namespace {

using namespace fairreg;
using Clock = std::chrono::steady_clock;

double secs(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---- frozen study constants -------------------------------------------------

constexpr double kLambdaStar = 0.005;     // winner of the recorded sweep
constexpr double kSecondLambda = 0.01;    // second-group penalty weight
constexpr double kAdversaryAlphas[] = {0.25, 0.5};
constexpr double kPinnedLinearRatio = 2.2656456464770427;  // default-seed value
constexpr double kRatioCeiling = 1.15;
constexpr double kMseInflationCap = 1.10;
constexpr double kBothGroupCeiling = 1.2;
// Half of one prediction flip in the thinnest subgroup bin (~1/222 per run):
// bins whose mean gap sits below this are parity noise, not signal.
constexpr double kGapFloor = 0.002;

constexpr double kFdStep = 1e-6;

// ---- small helpers ----------------------------------------------------------

struct Line {
  bool pass = false;
  std::string text;
};

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double l2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double rel_err(const std::vector<double>& got, const std::vector<double>& want) {
  double diff = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    const double d = got[i] - want[i];
    diff += d * d;
  }
  return std::sqrt(diff) / std::max(l2(want), 1e-300);
}

std::vector<int> mixed_flags(RandomEngine& rng, std::size_t n, double p) {
  std::vector<int> s(n);
  for (;;) {
    bool zero = false, one = false;
    for (auto& f : s) {
      f = rng.uniform() < p ? 1 : 0;
      (f ? one : zero) = true;
    }
    if (zero && one) return s;
  }
}

// ---- 1: correlation oracle --------------------------------------------------

Line check_oracle() {
  const auto t0 = Clock::now();
  RandomEngine rng(101);
  double worst = 0.0;
  for (int it = 0; it < 1000; ++it) {
    const std::size_t n = 2 + rng.below(255);
    const std::vector<int> s = mixed_flags(rng, n, rng.uniform(0.1, 0.9));
    std::vector<double> preds(n);
    for (auto& p : preds) p = rng.uniform();

    // independent two-pass reference
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mx += preds[i];
      my += s[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dx = preds[i] - mx;
      const double dy = s[i] - my;
      sxy += dx * dy;
      sxx += dx * dx;
      syy += dy * dy;
    }
    const double ref = sxy / std::sqrt(sxx * syy);
    worst = std::max(worst, std::abs(ref - pearson_corr(preds, s).corr));
  }
  const double dt = secs(t0);
  const bool ok = worst <= 1e-12 && dt < 1.0;
  return {ok, fmt("correlation matches the two-pass reference: worst |diff| %.1e over "
                  "1000 batches (%.2fs)",
                  worst, dt)};
}

// ---- 2: gradients against central finite differences ------------------------

double penalty_value(const std::vector<double>& preds, const std::vector<int>& s,
                     double lambda) {
  return corr_penalty_and_grad(preds, s, lambda).penalty;
}

double check_corr_grad(RandomEngine& rng) {
  double worst = 0.0;
  for (int it = 0; it < 50; ++it) {
    const std::size_t n = 8 + rng.below(57);
    std::vector<double> preds(n);
    std::vector<int> s;
    // stay away from the |corr| kink: the gradient is undefined at corr = 0
    for (;;) {
      s = mixed_flags(rng, n, rng.uniform(0.2, 0.8));
      for (auto& p : preds) p = rng.uniform();
      if (std::abs(pearson_corr(preds, s).corr) >= 1e-3) break;
    }
    const double lambda = rng.uniform(0.1, 2.0);
    const CorrPenalty cp = corr_penalty_and_grad(preds, s, lambda);
    std::vector<double> fd(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> hi = preds, lo = preds;
      hi[i] += kFdStep;
      lo[i] -= kFdStep;
      fd[i] = (penalty_value(hi, s, lambda) - penalty_value(lo, s, lambda)) / (2.0 * kFdStep);
    }
    worst = std::max(worst, rel_err(cp.grad, fd));
  }
  return worst;
}

// independent stable log-loss of the sigmoid head, for differencing
double head_loss(const std::vector<std::vector<double>>& hidden, const std::vector<int>& s,
                 const std::vector<double>& w, double b) {
  double total = 0.0;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    double z = b;
    for (std::size_t k = 0; k < w.size(); ++k) z += w[k] * hidden[i][k];
    total += std::max(z, 0.0) - s[i] * z + std::log1p(std::exp(-std::abs(z)));
  }
  return total / static_cast<double>(hidden.size());
}

double check_adversary_grad(RandomEngine& rng) {
  double worst = 0.0;
  for (int it = 0; it < 50; ++it) {
    const std::size_t n = 4 + rng.below(29);
    const std::size_t width = 2 + rng.below(7);
    std::vector<std::vector<double>> hidden(n, std::vector<double>(width));
    for (auto& row : hidden) {
      for (auto& h : row) h = rng.normal();
    }
    const std::vector<int> s = mixed_flags(rng, n, rng.uniform(0.2, 0.8));
    AdversaryHead head = AdversaryHead::zeros(width);
    for (auto& w : head.w) w = 0.7 * rng.normal();
    head.b = 0.3 * rng.normal();
    const double alpha = rng.uniform(0.25, 2.0);

    const AdversaryStep st = adversary_step(hidden, s, head, alpha);

    std::vector<double> got, want;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < width; ++k) {
        auto hi = hidden, lo = hidden;
        hi[i][k] += kFdStep;
        lo[i][k] -= kFdStep;
        const double d =
            (head_loss(hi, s, head.w, head.b) - head_loss(lo, s, head.w, head.b)) /
            (2.0 * kFdStep);
        got.push_back(st.reversed[i][k]);
        want.push_back(-alpha * d);
      }
    }
    worst = std::max(worst, rel_err(got, want));

    got.clear();
    want.clear();
    for (std::size_t k = 0; k < width; ++k) {
      auto hi = head.w, lo = head.w;
      hi[k] += kFdStep;
      lo[k] -= kFdStep;
      got.push_back(st.head_grad_w[k]);
      want.push_back((head_loss(hidden, s, hi, head.b) - head_loss(hidden, s, lo, head.b)) /
                     (2.0 * kFdStep));
    }
    got.push_back(st.head_grad_b);
    want.push_back((head_loss(hidden, s, head.w, head.b + kFdStep) -
                    head_loss(hidden, s, head.w, head.b - kFdStep)) /
                   (2.0 * kFdStep));
    worst = std::max(worst, rel_err(got, want));
  }
  return worst;
}

Dataset step_fixture(RandomEngine& rng, std::size_t n, std::size_t dim) {
  Dataset ds;
  ds.dim = dim;
  ds.group_names = {"g1", "g2"};
  ds.rater_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Example ex;
    ex.label = rng.uniform();
    ex.features.resize(dim);
    for (auto& f : ex.features) f = rng.normal();
    ex.groups["g1"] = rng.uniform() < 0.4 ? 1 : 0;
    ex.groups["g2"] = rng.uniform() < 0.3 ? 1 : 0;
    ds.examples.push_back(std::move(ex));
  }
  ds.validate();
  return ds;
}

std::vector<std::size_t> random_batch(RandomEngine& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> idx(k);
  for (auto& i : idx) i = rng.below(n);
  return idx;
}

double min_preactivation(const ModelParams& params, const Dataset& ds,
                         const std::vector<std::size_t>& idx) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t width = params.hidden_b.size();
  for (std::size_t i : idx) {
    for (std::size_t u = 0; u < width; ++u) {
      double z = params.hidden_b[u];
      for (std::size_t j = 0; j < params.arch.input_dim; ++j) {
        z += params.hidden_w[u * params.arch.input_dim + j] * ds.examples[i].features[j];
      }
      best = std::min(best, std::abs(z));
    }
  }
  return best;
}

double check_full_step(RandomEngine& rng) {
  double worst = 0.0;
  for (int it = 0; it < 50; ++it) {
    const Dataset ds = step_fixture(rng, 60, 5);

    TrainConfig cfg;
    cfg.arch = {ModelKind::Mlp1, 5, 6};
    cfg.penalties = {{"g1", 0.7, 16}, {"g2", 0.4, 16}};
    cfg.adversary = AdversarySpec{"g1", 0.8, 0.05, 16};

    StepPlan plan;
    plan.main = random_batch(rng, ds.size(), 24);
    plan.penalty = {random_batch(rng, ds.size(), 16), random_batch(rng, ds.size(), 16)};
    plan.adversary = random_batch(rng, ds.size(), 16);

    std::vector<std::size_t> touched = plan.main;
    for (const auto& p : plan.penalty) touched.insert(touched.end(), p.begin(), p.end());
    touched.insert(touched.end(), plan.adversary.begin(), plan.adversary.end());

    // keep every relu comfortably away from its kink so the difference
    // quotient sees a smooth function
    ModelParams params;
    do {
      params = init_params(cfg.arch, rng.next_u64());
    } while (min_preactivation(params, ds, touched) < 1e-4);

    AdversaryHead head = AdversaryHead::zeros(6);
    for (auto& w : head.w) w = 0.5 * rng.normal();
    head.b = 0.1;

    const Gradients grads = step_gradients(cfg, ds, params, &head, plan).grads;

    const auto objective = [&](const ModelParams& p) {
      return step_objective(cfg, ds, p, &head, plan);
    };
    std::vector<double> got, want;
    const auto probe = [&](double* slot, double analytic) {
      const double keep = *slot;
      *slot = keep + kFdStep;
      const double hi = objective(params);
      *slot = keep - kFdStep;
      const double lo = objective(params);
      *slot = keep;
      got.push_back(analytic);
      want.push_back((hi - lo) / (2.0 * kFdStep));
    };
    for (std::size_t i = 0; i < params.hidden_w.size(); ++i) {
      probe(&params.hidden_w[i], grads.hidden_w[i]);
    }
    for (std::size_t i = 0; i < params.hidden_b.size(); ++i) {
      probe(&params.hidden_b[i], grads.hidden_b[i]);
    }
    for (std::size_t i = 0; i < params.out_w.size(); ++i) {
      probe(&params.out_w[i], grads.out_w[i]);
    }
    probe(&params.out_b, grads.out_b);
    worst = std::max(worst, rel_err(got, want));
  }
  return worst;
}

Line check_gradients() {
  const auto t0 = Clock::now();
  RandomEngine rng(202);
  const double corr = check_corr_grad(rng);
  const double adv = check_adversary_grad(rng);
  const double full = check_full_step(rng);
  const double dt = secs(t0);
  const bool ok = corr <= 1e-5 && adv <= 1e-5 && full <= 1e-4 && dt < 10.0;
  return {ok, fmt("gradients match finite differences: penalty %.1e, adversary %.1e, "
                  "assembled step %.1e (worst rel err, 50 fixtures each, %.1fs)",
                  corr, adv, full)};
}

// ---- 3: metric identities ---------------------------------------------------

Dataset metric_fixture(RandomEngine& rng, std::size_t n) {
  Dataset ds;
  ds.dim = 1;
  ds.group_names = {"g"};
  ds.rater_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Example ex;
    ex.label = rng.uniform();
    ex.features = {0.0};
    ex.groups["g"] = rng.uniform() < 0.3 ? 1 : 0;
    ds.examples.push_back(std::move(ex));
  }
  ds.validate();
  return ds;
}

std::vector<double> noisy_preds(RandomEngine& rng, const Dataset& ds) {
  std::vector<double> preds;
  preds.reserve(ds.size());
  for (const auto& ex : ds.examples) {
    preds.push_back(std::clamp(ex.label + 0.3 * rng.normal(), 0.0, 1.0));
  }
  return preds;
}

Line check_identities() {
  const auto t0 = Clock::now();
  RandomEngine rng(303);
  const double tau = 0.5;

  // uniform-prior conditional gap is exactly the mean of surviving bin gaps
  bool uniform_exact = true;
  for (int it = 0; it < 60; ++it) {
    const Dataset ds = metric_fixture(rng, 400);
    const std::vector<double> preds = noisy_preds(rng, ds);
    const BinSpec bins{static_cast<int>(2ULL << rng.below(3)), 0.0, tau};  // 2, 4, or 8
    try {
      const CondResult r =
          conditional_eo_gap(preds, ds, "g", tau, bins, Prior::uniform(), 5);
      double mean = 0.0;
      int used = 0;
      for (const auto& row : r.bins) {
        if (row.used) {
          mean += row.fpr_in - row.fpr_out;
          ++used;
        }
      }
      mean /= static_cast<double>(used);
      if (r.value.value != mean) uniform_exact = false;
    } catch (const UndefinedMetricError&) {
    }
  }

  // a single conditioning bin reduces both conditional metrics to the
  // unconditional ones
  double worst_b1 = 0.0;
  for (int it = 0; it < 60; ++it) {
    const Dataset ds = metric_fixture(rng, 400);
    const std::vector<double> preds = noisy_preds(rng, ds);
    const BinSpec one{1, 0.0, tau};
    try {
      const double gap =
          conditional_eo_gap(preds, ds, "g", tau, one, Prior::uniform(), 1).value.value;
      worst_b1 = std::max(worst_b1, std::abs(gap - eo_gap(preds, ds, "g", tau)));
      const MetricCell ratio =
          conditional_fpr_ratio(preds, ds, "g", tau, one, Prior::uniform(), 1).value;
      const MetricCell plain = fpr_ratio(preds, ds, "g", tau);
      if (std::isinf(ratio.value) || std::isinf(plain.value)) {
        if (ratio.value != plain.value) worst_b1 = std::max(worst_b1, 1.0);
      } else {
        worst_b1 = std::max(worst_b1, std::abs(ratio.value - plain.value));
      }
    } catch (const UndefinedMetricError&) {
    }
  }

  // renormalized background-prior weights sum to one over surviving bins
  double worst_w = 0.0;
  for (int it = 0; it < 60; ++it) {
    const Dataset ds = metric_fixture(rng, 400);
    const std::vector<double> preds = noisy_preds(rng, ds);
    const BinSpec bins{4, 0.0, tau};
    const int min_cell = 5 + static_cast<int>(rng.below(25));
    try {
      const CondResult r =
          conditional_fpr_ratio(preds, ds, "g", tau, bins, Prior::background(), min_cell);
      double sum = 0.0;
      for (const auto& row : r.bins) {
        if (row.weight < 0.0) worst_w = std::max(worst_w, 1.0);
        sum += row.weight;
      }
      worst_w = std::max(worst_w, std::abs(sum - 1.0));
    } catch (const UndefinedMetricError&) {
    }
  }

  const double dt = secs(t0);
  const bool ok = uniform_exact && worst_b1 <= 1e-12 && worst_w <= 1e-12 && dt < 1.0;
  return {ok, fmt("conditional metric identities: uniform==bin-mean %s, one-bin "
                  "reduction %.1e, prior weight sum %.1e (%.2fs)",
                  uniform_exact ? "exact" : "VIOLATED", worst_b1, worst_w, dt)};
}

// ---- 4: reduction to plain SGD and bit determinism --------------------------

bool same_params(const ModelParams& a, const ModelParams& b) {
  return a.hidden_w == b.hidden_w && a.hidden_b == b.hidden_b && a.out_w == b.out_w &&
         a.out_b == b.out_b;
}

Line check_reduction(const Dataset& train_ds, const Dataset& eval_ds) {
  const auto t0 = Clock::now();

  TrainConfig plain;
  plain.arch = {ModelKind::Mlp1, train_ds.dim, 64};
  plain.epochs = 8;
  plain.seed = 5;
  plain.runs = 2;

  TrainConfig zero = plain;
  zero.penalties = {{"g1", 0.0, 128}};

  const RunResult a = train(plain, train_ds, eval_ds);
  const RunResult b = train(zero, train_ds, eval_ds);
  const bool reduce = a.mse_history == b.mse_history && same_params(a.params, b.params) &&
                      report_to_json(a.report) == report_to_json(b.report);

  const ExperimentResult e1 = run_experiment(plain, train_ds, eval_ds);
  const ExperimentResult e2 = run_experiment(plain, train_ds, eval_ds);
  bool repeat = report_to_json(e1.aggregate) == report_to_json(e2.aggregate) &&
                e1.runs.size() == e2.runs.size();
  for (std::size_t i = 0; repeat && i < e1.runs.size(); ++i) {
    repeat = same_params(e1.runs[i].params, e2.runs[i].params) &&
             e1.runs[i].mse_history == e2.runs[i].mse_history;
  }

  const double dt = secs(t0);
  const bool ok = reduce && repeat && dt < 30.0;
  return {ok, fmt("zero-weight penalty %s plain SGD and repeat runs are %s (%.1fs)",
                  reduce ? "reduces to" : "DIVERGES from",
                  repeat ? "bit-identical" : "NOT reproducible", dt)};
}

// ---- 5-7: the synthetic study -----------------------------------------------

struct StudyOut {
  ExperimentResult linear, mlp1, both;
  std::vector<ExperimentResult> sweep;  // one per kSweep entry
  std::vector<ExperimentResult> adv;    // one per kAdversaryAlphas entry
  double wall = 0.0;
};

constexpr double kSweep[] = {kLambdaStar, 0.01, 0.02};

double g1_cond(const ExperimentResult& r) {
  return r.aggregate.groups.at("g1").cond_fpr_ratio.at("uniform").value;
}
double g2_cond(const ExperimentResult& r) {
  return r.aggregate.groups.at("g2").cond_fpr_ratio.at("uniform").value;
}
const MetricCell& g1_plain(const ExperimentResult& r) {
  return r.aggregate.groups.at("g1").fpr_ratio;
}
double spread(const MetricCell& c, int runs) {
  return c.se * std::sqrt(static_cast<double>(runs));
}

StudyOut run_study(const Dataset& train_ds, const Dataset& eval_ds) {
  const auto t0 = Clock::now();
  StudyOut out;

  TrainConfig base;
  base.arch = {ModelKind::Mlp1, train_ds.dim, 64};
  base.runs = 10;

  TrainConfig linear = base;
  linear.arch = {ModelKind::Linear, train_ds.dim, 0};
  out.linear = run_experiment(linear, train_ds, eval_ds);
  out.mlp1 = run_experiment(base, train_ds, eval_ds);

  for (double lam : kSweep) {
    TrainConfig corr = base;
    corr.penalties = {{"g1", lam, 128}};
    out.sweep.push_back(run_experiment(corr, train_ds, eval_ds));
  }
  for (double alpha : kAdversaryAlphas) {
    TrainConfig adv = base;
    adv.adversary = AdversarySpec{"g1", alpha, 0.05, 128};
    out.adv.push_back(run_experiment(adv, train_ds, eval_ds));
  }
  TrainConfig both = base;
  both.penalties = {{"g1", kLambdaStar, 128}, {"g2", kSecondLambda, 128}};
  out.both = run_experiment(both, train_ds, eval_ds);

  out.wall = secs(t0);
  return out;
}

Line check_study(const StudyOut& s) {
  const double lin = g1_cond(s.linear);
  const double mlp = g1_cond(s.mlp1);
  const double reg = g1_cond(s.sweep[0]);
  const double mlp_mse = s.mlp1.aggregate.mse.value;
  const double reg_mse = s.sweep[0].aggregate.mse.value;

  const bool a = lin >= 1.5 && std::abs(lin - kPinnedLinearRatio) <= 0.05 * kPinnedLinearRatio;
  const bool b = mlp < lin;
  const bool c = reg <= kRatioCeiling && reg_mse <= kMseInflationCap * mlp_mse;

  // the frozen lambda must still be what the sweep would pick: nearest to
  // parity among the points inside the accuracy budget
  std::size_t pick = std::size(kSweep);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.sweep.size(); ++i) {
    if (s.sweep[i].aggregate.mse.value > kMseInflationCap * mlp_mse) continue;
    const double d = std::abs(g1_cond(s.sweep[i]) - 1.0);
    if (d < best) {
      best = d;
      pick = i;
    }
  }
  const bool swept = pick == 0;

  const double single_g2 = g2_cond(s.sweep[0]);
  const double both_g2 = g2_cond(s.both);
  const double both_g1 = g1_cond(s.both);
  const bool d = both_g2 < single_g2 && both_g1 <= kBothGroupCeiling;

  const bool ok = a && b && c && swept && d && s.wall <= 600.0;
  return {ok, fmt("study: linear %.3f (>=1.5, pinned %.3f), mlp1 %.3f, corr-reg@%g "
                  "%.3f (<=%.2f, mse %+.1f%%), second penalty g2 %.3f<%.3f g1 %.3f "
                  "(<=%.1f) (%.0fs)",
                  lin, kPinnedLinearRatio, mlp, kLambdaStar, reg, kRatioCeiling,
                  100.0 * (reg_mse / mlp_mse - 1.0), both_g2, single_g2, both_g1,
                  kBothGroupCeiling, s.wall)};
}

Line check_stability(const StudyOut& s) {
  const int runs = 10;
  const MetricCell& corr = g1_plain(s.sweep[0]);
  const double corr_sd = spread(corr, runs);
  const double bound = 0.5 * (corr.value - 1.0);
  const bool hard = corr.value > 1.0 && corr_sd <= bound;

  // adversary run whose mean overall ratio lands closest to the penalty's
  std::size_t near = 0;
  for (std::size_t i = 1; i < s.adv.size(); ++i) {
    if (std::abs(g1_plain(s.adv[i]).value - corr.value) <
        std::abs(g1_plain(s.adv[near]).value - corr.value)) {
      near = i;
    }
  }
  const MetricCell& adv = g1_plain(s.adv[near]);
  const double adv_sd = spread(adv, runs);
  const bool soft = corr_sd <= adv_sd;

  return {hard, fmt("stability: corr-reg ratio %.3f sd %.3f <= 0.5*(mean-1) = %.3f; "
                    "soft comparison vs adversary (mean %.3f, sd %.3f at alpha %g): %s",
                    corr.value, corr_sd, bound, adv.value, adv_sd, kAdversaryAlphas[near],
                    soft ? "tighter" : "not tighter, reported")};
}

Line check_bins(const StudyOut& s) {
  const auto& base_bins = s.mlp1.aggregate.groups.at("g1").fpr_bins;
  const auto& reg_bins = s.sweep[0].aggregate.groups.at("g1").fpr_bins;

  bool monotone = true;
  for (std::size_t b = 1; b < base_bins.size(); ++b) {
    if (base_bins[b].out_cell.value < base_bins[b - 1].out_cell.value - 1e-12) {
      monotone = false;
    }
  }

  bool shrinks = true;
  double worst_before = 0.0, worst_after = 0.0;
  for (std::size_t b = 0; b < base_bins.size(); ++b) {
    const double before = std::abs(base_bins[b].gap.value);
    const double after = std::abs(reg_bins[b].gap.value);
    worst_before = std::max(worst_before, before);
    worst_after = std::max(worst_after, after);
    if (after > std::max(before, kGapFloor)) shrinks = false;
  }

  const bool ok = monotone && shrinks;
  return {ok, fmt("per-bin shape: background FPR %s in the rating bin, subgroup gap "
                  "%s in every bin (worst |gap| %.4f -> %.4f, floor %.3f)",
                  monotone ? "non-decreasing" : "NOT monotone",
                  shrinks ? "shrinks" : "does NOT shrink", worst_before, worst_after,
                  kGapFloor)};
}

// ---- 8: degenerate inputs ---------------------------------------------------

bool cell_clean(const MetricCell& c, bool ratio) {
  if (!c.defined) return true;
  if (std::isnan(c.value)) return false;
  return std::isfinite(c.value) || (ratio && c.value > 0.0);
}

bool report_clean(const MetricsReport& r) {
  if (!cell_clean(r.mse, false)) return false;
  for (const auto& [name, g] : r.groups) {
    (void)name;
    for (const MetricCell* c : {&g.fpr_in, &g.fpr_out, &g.fnr_in, &g.fnr_out, &g.dp_gap,
                                &g.eo_gap}) {
      if (!cell_clean(*c, false)) return false;
    }
    if (!cell_clean(g.fpr_ratio, true)) return false;
    for (const auto& [p, c] : g.cond_eo_gap) {
      (void)p;
      if (!cell_clean(c, false)) return false;
    }
    for (const auto& [p, c] : g.cond_fpr_ratio) {
      (void)p;
      if (!cell_clean(c, true)) return false;
    }
    for (const auto* rows : {&g.fpr_bins, &g.calibration_bins}) {
      for (const auto& row : *rows) {
        if (!cell_clean(row.in_cell, false) || !cell_clean(row.out_cell, false) ||
            !cell_clean(row.gap, false)) {
          return false;
        }
      }
    }
  }
  return true;
}

// labels drawn from `pick`: 0 forces a negative, 1 forces a positive
Dataset degen_dataset(RandomEngine& rng, std::size_t n, double tau,
                      const std::function<double(bool member)>& label_of) {
  Dataset ds;
  ds.dim = 2;
  ds.group_names = {"g"};
  ds.rater_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Example ex;
    const bool member = rng.uniform() < 0.4;
    ex.label = label_of(member);
    ex.features = {rng.normal(), rng.normal()};
    ex.groups["g"] = member ? 1 : 0;
    ds.examples.push_back(std::move(ex));
  }
  (void)tau;
  ds.validate();
  return ds;
}

Line check_degenerate() {
  const auto t0 = Clock::now();
  RandomEngine rng(909);
  const double tau = 0.5;

  ModelParams params = init_params({ModelKind::Linear, 2, 0}, 7);
  const BinSpec rating{4, 0.0, tau};
  const BinSpec calib{4, 0.0, 1.0};
  const std::vector<std::string> priors{"uniform", "background", "subgroup"};

  int done = 0;
  std::string why;
  for (int it = 0; it < 500 && why.empty(); ++it) {
    const int family = it % 4;
    try {
      switch (family) {
        case 0: {  // constant predictions or constant flags
          const std::size_t n = 2 + rng.below(63);
          std::vector<double> preds(n, rng.uniform());
          std::vector<int> s(n);
          if (it % 8 < 4) {
            s = mixed_flags(rng, n, 0.5);  // constant predictions, mixed flags
          } else {
            const int flag = static_cast<int>(rng.below(2));
            for (auto& f : s) f = flag;  // constant flags
            for (auto& p : preds) p = rng.uniform();
          }
          const CorrPenalty cp = corr_penalty_and_grad(preds, s, rng.uniform(0.0, 3.0));
          if (cp.penalty != 0.0 || !cp.stats.degenerate) why = "degenerate batch not zeroed";
          for (double g : cp.grad) {
            if (g != 0.0) why = "degenerate batch kept a gradient";
          }
          if (pearson_corr(preds, s).corr != 0.0) why = "degenerate correlation not zero";
          break;
        }
        case 1: {  // no negatives on one side
          const bool starve_members = it % 8 < 4;
          const Dataset ds = degen_dataset(rng, 40 + rng.below(100), tau, [&](bool m) {
            const bool starved = m == starve_members;
            return starved ? rng.uniform(tau, 1.0) : rng.uniform(0.0, 1.0);
          });
          std::vector<double> preds;
          preds.reserve(ds.size());
          for (std::size_t i = 0; i < ds.size(); ++i) preds.push_back(rng.uniform());
          try {
            (void)fpr_ratio(preds, ds, "g", tau);
          } catch (const UndefinedMetricError&) {
          }
          if (!report_clean(evaluate(params, ds, tau, rating, calib, priors, 5))) {
            why = "starved slice produced a dirty report";
          }
          break;
        }
        case 2: {  // every example in (or out of) the group
          Dataset ds = degen_dataset(rng, 30 + rng.below(60), tau,
                                     [&](bool) { return rng.uniform(); });
          const int flag = static_cast<int>(rng.below(2));
          for (auto& ex : ds.examples) ex.groups["g"] = flag;
          std::vector<double> preds;
          preds.reserve(ds.size());
          for (std::size_t i = 0; i < ds.size(); ++i) preds.push_back(rng.uniform());
          for (const auto metric : {0, 1, 2}) {
            try {
              if (metric == 0) (void)fpr_ratio(preds, ds, "g", tau);
              if (metric == 1) (void)eo_gap(preds, ds, "g", tau);
              if (metric == 2) {
                (void)conditional_eo_gap(preds, ds, "g", tau, rating, Prior::uniform(), 1);
              }
            } catch (const UndefinedMetricError&) {
            }
          }
          if (!report_clean(evaluate(params, ds, tau, rating, calib, priors, 5))) {
            why = "single-group report is dirty";
          }
          break;
        }
        case 3: {  // min-cell filter drops every bin; empty adversary batch
          const Dataset ds = degen_dataset(rng, 20 + rng.below(40), tau,
                                           [&](bool) { return rng.uniform(); });
          std::vector<double> preds;
          preds.reserve(ds.size());
          for (std::size_t i = 0; i < ds.size(); ++i) preds.push_back(rng.uniform());
          bool threw = false;
          try {
            (void)conditional_fpr_ratio(preds, ds, "g", tau, rating, Prior::uniform(),
                                        static_cast<int>(ds.size()) + 1);
          } catch (const UndefinedMetricError&) {
            threw = true;
          }
          if (!threw) why = "all-dropped bins did not raise the typed error";
          const AdversaryStep st =
              adversary_step({}, std::span<const int>{}, AdversaryHead::zeros(3), 1.0);
          if (!st.skipped || st.loss != 0.0) why = "empty adversary batch not skipped";
          break;
        }
      }
    } catch (const Error& e) {
      why = std::string("unexpected typed error: ") + e.what();
    } catch (const std::exception& e) {
      why = std::string("untyped exception: ") + e.what();
    }
    ++done;
  }

  const double dt = secs(t0);
  const bool ok = why.empty() && done == 500;
  return {ok, ok ? fmt("degenerate inputs: 500 cases produced typed errors or zeroed "
                       "penalties, no NaN or stray infinity (%.1fs)",
                       dt)
                 : fmt("degenerate inputs: case %d failed: %s", done, why.c_str())};
}

}  // namespace

int main() {
  GenConfig gen = default_gen_config();
  gen.seed = 1;
  const Dataset train_ds = generate(gen);
  gen.seed = 2;
  const Dataset eval_ds = generate(gen);

  std::vector<Line> lines;
  lines.push_back(check_oracle());
  lines.push_back(check_gradients());
  lines.push_back(check_identities());
  lines.push_back(check_reduction(train_ds, eval_ds));
  const StudyOut study = run_study(train_ds, eval_ds);
  lines.push_back(check_study(study));
  lines.push_back(check_stability(study));
  lines.push_back(check_bins(study));
  lines.push_back(check_degenerate());

  int passed = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    printf("%2zu %s  %s\n", i + 1, lines[i].pass ? "PASS" : "FAIL", lines[i].text.c_str());
    if (lines[i].pass) ++passed;
  }
  printf("acceptance: %d/%zu\n", passed, lines.size());
  return passed == static_cast<int>(lines.size()) ? 0 : 1;
}
