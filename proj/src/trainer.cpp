#include "fairreg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <numeric>
#include <thread>
#include <utility>

#include "fairreg/common.hpp"

namespace fairreg {

namespace {

void check_positive_finite(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(std::string(what) + " must be positive and finite, got " +
                      std::to_string(v));
  }
}

void check_nonneg_finite(double v, const char* what) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw ConfigError(std::string(what) + " must be >= 0 and finite, got " + std::to_string(v));
  }
}

// Negative examples whose flag for `group` is known, ascending by index.
// Enforces the sampling preconditions: at least `batch` of them, and both
// flag values present (a one-sided pool would make every correlation batch
// degenerate and silently disable the term).
std::vector<std::size_t> known_negative_pool(const Dataset& ds, const std::string& group,
                                             double tau, std::size_t batch, const char* what) {
  const GroupPartition part = partition_by_group(ds, group);
  std::vector<std::size_t> pool;
  std::size_t flagged = 0;
  for (std::size_t i : part.members) {
    if (ds.examples[i].label < tau) {
      pool.push_back(i);
      ++flagged;
    }
  }
  for (std::size_t i : part.others) {
    if (ds.examples[i].label < tau) pool.push_back(i);
  }
  std::sort(pool.begin(), pool.end());
  const std::string where = std::string(what) + " on group '" + group + "'";
  if (pool.size() < batch) {
    throw ConfigError(where + ": " + std::to_string(pool.size()) +
                      " known-demographic negatives but batch size is " + std::to_string(batch));
  }
  if (flagged == 0 || flagged == pool.size()) {
    throw ConfigError(where + ": known-demographic negatives all carry flag=" +
                      std::to_string(flagged == 0 ? 0 : 1));
  }
  return pool;
}

struct Pools {
  std::vector<std::vector<std::size_t>> penalty;  // aligned with cfg.penalties
  std::vector<std::size_t> adversary;
};

Pools build_pools(const TrainConfig& cfg, const Dataset& train_set) {
  Pools pools;
  pools.penalty.reserve(cfg.penalties.size());
  for (const auto& spec : cfg.penalties) {
    pools.penalty.push_back(
        known_negative_pool(train_set, spec.group, cfg.tau, spec.batch_size, "penalty"));
  }
  if (cfg.adversary) {
    pools.adversary = known_negative_pool(train_set, cfg.adversary->group, cfg.tau,
                                          cfg.adversary->batch_size, "adversary");
  }
  return pools;
}

void check_step_finite(const StepOutcome& outc, const TrainConfig& cfg, const ModelParams& params,
                       const AdversaryHead& head, std::int64_t step, int epoch) {
  const auto fail = [&](const std::string& what) {
    throw NumericError("non-finite " + what + " at training step " + std::to_string(step) +
                       " (epoch " + std::to_string(epoch) + ")");
  };
  if (!std::isfinite(outc.mse)) fail("main batch loss");
  for (std::size_t p = 0; p < outc.penalties.size(); ++p) {
    if (!std::isfinite(outc.penalties[p])) {
      fail("penalty on group '" + cfg.penalties[p].group + "'");
    }
  }
  if (!std::isfinite(outc.adversary_loss)) fail("adversary loss");
  const auto all_finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  if (!all_finite(params.hidden_w) || !all_finite(params.hidden_b) || !all_finite(params.out_w) ||
      !std::isfinite(params.out_b)) {
    fail("model parameter");
  }
  if (!all_finite(head.w) || !std::isfinite(head.b)) fail("adversary head parameter");
}

void apply_sgd(ModelParams* params, const Gradients& grads, double lr) {
  for (std::size_t i = 0; i < params->hidden_w.size(); ++i) params->hidden_w[i] -= lr * grads.hidden_w[i];
  for (std::size_t i = 0; i < params->hidden_b.size(); ++i) params->hidden_b[i] -= lr * grads.hidden_b[i];
  for (std::size_t i = 0; i < params->out_w.size(); ++i) params->out_w[i] -= lr * grads.out_w[i];
  params->out_b -= lr * grads.out_b;
}

MetricCell try_metric(std::int64_t count, const std::function<double()>& f) {
  try {
    return MetricCell::of(f(), count);
  } catch (const UndefinedMetricError&) {
    return MetricCell::undefined(count);
  }
}

}  // namespace

void TrainConfig::validate() const {
  arch.validate();
  if (!(tau > 0.0 && tau < 1.0)) {
    throw ConfigError("tau must lie in (0, 1), got " + std::to_string(tau));
  }
  if (epochs < 0) throw ConfigError("epochs must be >= 0, got " + std::to_string(epochs));
  check_positive_finite(learning_rate, "learning_rate");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  for (const auto& p : penalties) {
    if (p.group.empty()) throw ConfigError("penalty without a group name");
    check_nonneg_finite(p.lambda, "penalty lambda");
    if (p.batch_size < 2) {
      throw ConfigError("penalty batch_size must be >= 2 (correlation needs two points), got " +
                        std::to_string(p.batch_size));
    }
  }
  if (adversary) {
    if (arch.kind != ModelKind::Mlp1) {
      throw ConfigError("adversary needs a hidden layer; the architecture is linear");
    }
    if (adversary->group.empty()) throw ConfigError("adversary without a group name");
    check_nonneg_finite(adversary->alpha, "adversary alpha");
    check_positive_finite(adversary->head_lr, "adversary head_lr");
    if (adversary->batch_size == 0) throw ConfigError("adversary batch_size must be >= 1");
  }
  if (runs < 1) throw ConfigError("runs must be >= 1, got " + std::to_string(runs));
  if (eval_bins < 1) throw ConfigError("eval_bins must be >= 1, got " + std::to_string(eval_bins));
  if (calibration_bins < 1) {
    throw ConfigError("calibration_bins must be >= 1, got " + std::to_string(calibration_bins));
  }
  if (min_cell < 0) throw ConfigError("min_cell must be >= 0, got " + std::to_string(min_cell));
  if (priors.empty()) throw ConfigError("at least one prior is required");
  for (const auto& name : priors) prior_from_name(name);  // throws on an unknown name
}

StepPlan sample_step(const TrainConfig& cfg, std::vector<std::size_t> main_chunk,
                     const std::vector<std::vector<std::size_t>>& penalty_pools,
                     const std::vector<std::size_t>& adversary_pool, RandomEngine& rng) {
  StepPlan plan;
  plan.main = std::move(main_chunk);
  plan.penalty.resize(cfg.penalties.size());
  for (std::size_t p = 0; p < cfg.penalties.size(); ++p) {
    if (cfg.penalties[p].lambda == 0.0) continue;  // draws nothing: stream matches no-penalty run
    const auto& pool = penalty_pools[p];
    auto& batch = plan.penalty[p];
    batch.reserve(cfg.penalties[p].batch_size);
    for (std::size_t k = 0; k < cfg.penalties[p].batch_size; ++k) {
      batch.push_back(pool[rng.below(pool.size())]);
    }
  }
  if (cfg.adversary) {
    plan.adversary.reserve(cfg.adversary->batch_size);
    for (std::size_t k = 0; k < cfg.adversary->batch_size; ++k) {
      plan.adversary.push_back(adversary_pool[rng.below(adversary_pool.size())]);
    }
  }
  return plan;
}

StepOutcome step_gradients(const TrainConfig& cfg, const Dataset& train_set,
                           const ModelParams& params, const AdversaryHead* head,
                           const StepPlan& plan) {
  if (cfg.adversary && head == nullptr) {
    throw ConfigError("adversary configured but no head supplied");
  }
  if (plan.main.empty()) throw ConfigError("empty main batch");
  if (plan.penalty.size() != cfg.penalties.size()) {
    throw ConfigError("step plan has " + std::to_string(plan.penalty.size()) +
                      " penalty batches for " + std::to_string(cfg.penalties.size()) +
                      " penalty specs");
  }

  StepOutcome out;
  out.grads = zero_gradients(params.arch);
  out.penalties.assign(cfg.penalties.size(), 0.0);
  const auto& ex = train_set.examples;

  const double nb = static_cast<double>(plan.main.size());
  std::vector<ForwardTrace> traces(plan.main.size());
  for (std::size_t i = 0; i < plan.main.size(); ++i) {
    traces[i] = forward(params, ex[plan.main[i]].features);
    out.mse += loss_sq(traces[i].prediction, ex[plan.main[i]].label);
  }
  out.mse /= nb;
  for (std::size_t i = 0; i < plan.main.size(); ++i) {
    const double upstream = 2.0 * (traces[i].prediction - ex[plan.main[i]].label) / nb;
    backward_into(params, ex[plan.main[i]].features, upstream, traces[i], &out.grads);
  }

  for (std::size_t p = 0; p < cfg.penalties.size(); ++p) {
    const auto& batch = plan.penalty[p];
    if (batch.empty()) continue;  // lambda = 0
    std::vector<ForwardTrace> tr(batch.size());
    std::vector<double> preds(batch.size());
    std::vector<int> flags(batch.size());
    for (std::size_t k = 0; k < batch.size(); ++k) {
      tr[k] = forward(params, ex[batch[k]].features);
      preds[k] = tr[k].prediction;
      flags[k] = ex[batch[k]].groups.at(cfg.penalties[p].group);
    }
    const CorrPenalty pen = corr_penalty_and_grad(preds, flags, cfg.penalties[p].lambda);
    out.penalties[p] = pen.penalty;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      backward_into(params, ex[batch[k]].features, pen.grad[k], tr[k], &out.grads);
    }
  }

  if (cfg.adversary && !plan.adversary.empty()) {
    std::vector<ForwardTrace> tr(plan.adversary.size());
    std::vector<std::vector<double>> hiddens(plan.adversary.size());
    std::vector<int> flags(plan.adversary.size());
    for (std::size_t k = 0; k < plan.adversary.size(); ++k) {
      tr[k] = forward(params, ex[plan.adversary[k]].features);
      hiddens[k] = tr[k].hidden;
      flags[k] = ex[plan.adversary[k]].groups.at(cfg.adversary->group);
    }
    out.adv = adversary_step(hiddens, flags, *head, cfg.adversary->alpha);
    out.adversary_loss = out.adv.loss;
    for (std::size_t k = 0; k < plan.adversary.size(); ++k) {
      backward_into(params, ex[plan.adversary[k]].features, 0.0, tr[k], &out.grads,
                    out.adv.reversed[k]);
    }
  }
  return out;
}

double step_objective(const TrainConfig& cfg, const Dataset& train_set, const ModelParams& params,
                      const AdversaryHead* head, const StepPlan& plan) {
  if (cfg.adversary && head == nullptr) {
    throw ConfigError("adversary configured but no head supplied");
  }
  if (plan.main.empty()) throw ConfigError("empty main batch");
  const auto& ex = train_set.examples;

  double obj = 0.0;
  for (std::size_t i : plan.main) {
    obj += loss_sq(forward(params, ex[i].features).prediction, ex[i].label);
  }
  obj /= static_cast<double>(plan.main.size());

  for (std::size_t p = 0; p < cfg.penalties.size() && p < plan.penalty.size(); ++p) {
    const auto& batch = plan.penalty[p];
    if (batch.empty()) continue;
    std::vector<double> preds(batch.size());
    std::vector<int> flags(batch.size());
    for (std::size_t k = 0; k < batch.size(); ++k) {
      preds[k] = forward(params, ex[batch[k]].features).prediction;
      flags[k] = ex[batch[k]].groups.at(cfg.penalties[p].group);
    }
    obj += corr_penalty_and_grad(preds, flags, cfg.penalties[p].lambda).penalty;
  }

  if (cfg.adversary && !plan.adversary.empty()) {
    std::vector<std::vector<double>> hiddens(plan.adversary.size());
    std::vector<int> flags(plan.adversary.size());
    for (std::size_t k = 0; k < plan.adversary.size(); ++k) {
      hiddens[k] = forward(params, ex[plan.adversary[k]].features).hidden;
      flags[k] = ex[plan.adversary[k]].groups.at(cfg.adversary->group);
    }
    // The encoder maximizes the head's loss, hence the sign.
    obj -= cfg.adversary->alpha *
           adversary_step(hiddens, flags, *head, cfg.adversary->alpha).loss;
  }
  return obj;
}

RunResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset& eval_set) {
  cfg.validate();
  train_set.validate();
  eval_set.validate();
  if (train_set.size() == 0) throw ConfigError("training set is empty");
  if (train_set.dim != cfg.arch.input_dim) {
    throw ConfigError("architecture expects input_dim=" + std::to_string(cfg.arch.input_dim) +
                      " but the training set has dim=" + std::to_string(train_set.dim));
  }
  if (eval_set.dim != train_set.dim) {
    throw ConfigError("train/eval feature dimension mismatch: " + std::to_string(train_set.dim) +
                      " vs " + std::to_string(eval_set.dim));
  }
  if (eval_set.group_names != train_set.group_names) {
    throw ConfigError("train/eval group sets differ");
  }
  if (eval_set.size() == 0) throw ConfigError("evaluation set is empty");

  const Pools pools = build_pools(cfg, train_set);  // precondition failures land here

  RunResult run;
  run.params = init_params(cfg.arch, cfg.seed);
  run.head = cfg.adversary ? AdversaryHead::zeros(cfg.arch.hidden_width) : AdversaryHead{};
  AdversaryHead* head = cfg.adversary ? &run.head : nullptr;
  RandomEngine rng(cfg.seed ^ kSampleSeedSalt);

  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  std::int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double sq_sum = 0.0;  // per-example squared error over the epoch
    std::vector<double> pen_sum(cfg.penalties.size(), 0.0);
    double adv_sum = 0.0;
    std::size_t steps_in_epoch = 0;

    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      StepPlan plan = sample_step(cfg, {order.begin() + start, order.begin() + stop},
                                  pools.penalty, pools.adversary, rng);
      const std::size_t main_size = plan.main.size();
      const StepOutcome outc = step_gradients(cfg, train_set, run.params, head, plan);

      apply_sgd(&run.params, outc.grads, cfg.learning_rate);
      if (cfg.adversary) {
        for (std::size_t j = 0; j < run.head.w.size(); ++j) {
          run.head.w[j] -= cfg.adversary->head_lr * outc.adv.head_grad_w[j];
        }
        run.head.b -= cfg.adversary->head_lr * outc.adv.head_grad_b;
      }
      check_step_finite(outc, cfg, run.params, run.head, step, epoch);

      sq_sum += outc.mse * static_cast<double>(main_size);
      for (std::size_t p = 0; p < pen_sum.size(); ++p) pen_sum[p] += outc.penalties[p];
      adv_sum += outc.adversary_loss;
      ++steps_in_epoch;
      ++step;
    }

    run.mse_history.push_back(sq_sum / static_cast<double>(n));
    std::vector<double> pen_mean(cfg.penalties.size(), 0.0);
    for (std::size_t p = 0; p < pen_mean.size(); ++p) {
      pen_mean[p] = pen_sum[p] / static_cast<double>(steps_in_epoch);
    }
    run.penalty_history.push_back(std::move(pen_mean));
    if (cfg.adversary) {
      run.adversary_loss_history.push_back(adv_sum / static_cast<double>(steps_in_epoch));
    }
  }

  run.report = evaluate(run.params, eval_set, cfg.tau, cfg.rating_bin_spec(),
                        cfg.calibration_bin_spec(), cfg.priors, cfg.min_cell);
  return run;
}

MetricsReport evaluate(const ModelParams& params, const Dataset& eval_set, double tau,
                       const BinSpec& rating_bins, const BinSpec& calibration_bins,
                       const std::vector<std::string>& priors, int min_cell_count) {
  params.validate();
  eval_set.validate();
  if (eval_set.size() == 0) throw ConfigError("evaluation set is empty");
  if (eval_set.dim != params.arch.input_dim) {
    throw ConfigError("model expects input_dim=" + std::to_string(params.arch.input_dim) +
                      " but the evaluation set has dim=" + std::to_string(eval_set.dim));
  }
  if (!(tau > 0.0 && tau < 1.0)) {
    throw ConfigError("tau must lie in (0, 1), got " + std::to_string(tau));
  }
  if (!(rating_bins.lo <= 0.0) || !(rating_bins.hi >= tau)) {
    throw ConfigError("rating bins must cover [0, tau)");
  }
  if (min_cell_count < 0) throw ConfigError("min_cell_count must be >= 0");

  const std::size_t n = eval_set.size();
  std::vector<double> preds(n), labels(n);
  double mse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    preds[i] = forward(params, eval_set.examples[i].features).prediction;
    labels[i] = eval_set.examples[i].label;
    mse += loss_sq(preds[i], labels[i]);
  }
  mse /= static_cast<double>(n);

  MetricsReport rep;
  rep.tau = tau;
  rep.rating_bins = rating_bins;
  rep.calibration_bins = calibration_bins;
  rep.min_cell_count = min_cell_count;
  rep.priors = priors;
  rep.runs = 1;
  rep.mse = MetricCell::of(mse, static_cast<std::int64_t>(n));

  for (const auto& gname : eval_set.group_names) {
    GroupReport gr;
    const GroupPartition part = partition_by_group(eval_set, gname);

    const auto side_view = [&](const std::vector<std::size_t>& idx) {
      std::pair<std::vector<double>, std::vector<double>> out;
      out.first.reserve(idx.size());
      out.second.reserve(idx.size());
      for (std::size_t i : idx) {
        out.first.push_back(preds[i]);
        out.second.push_back(labels[i]);
      }
      return out;
    };
    const auto [preds_in, labels_in] = side_view(part.members);
    const auto [preds_out, labels_out] = side_view(part.others);
    const auto count_below = [&](const std::vector<double>& ls) {
      return static_cast<std::int64_t>(
          std::count_if(ls.begin(), ls.end(), [&](double y) { return y < tau; }));
    };
    const std::int64_t neg_in = count_below(labels_in);
    const std::int64_t neg_out = count_below(labels_out);
    const std::int64_t pos_in = static_cast<std::int64_t>(labels_in.size()) - neg_in;
    const std::int64_t pos_out = static_cast<std::int64_t>(labels_out.size()) - neg_out;

    gr.fpr_in = try_metric(neg_in, [&] { return fpr(preds_in, labels_in, tau); });
    gr.fpr_out = try_metric(neg_out, [&] { return fpr(preds_out, labels_out, tau); });
    gr.fnr_in = try_metric(pos_in, [&] { return fnr(preds_in, labels_in, tau); });
    gr.fnr_out = try_metric(pos_out, [&] { return fnr(preds_out, labels_out, tau); });
    try {
      gr.fpr_ratio = fpr_ratio(preds, eval_set, gname, tau);
    } catch (const UndefinedMetricError&) {
      gr.fpr_ratio = MetricCell::undefined(neg_in + neg_out);
    }
    gr.dp_gap =
        try_metric(static_cast<std::int64_t>(part.members.size() + part.others.size()),
                   [&] { return demographic_parity_gap(preds, eval_set, gname, tau); });
    gr.eo_gap = try_metric(neg_in + neg_out, [&] { return eo_gap(preds, eval_set, gname, tau); });

    for (const auto& pname : priors) {
      const Prior prior = prior_from_name(pname);
      try {
        gr.cond_eo_gap[pname] =
            conditional_eo_gap(preds, eval_set, gname, tau, rating_bins, prior, min_cell_count)
                .value;
      } catch (const UndefinedMetricError&) {
        gr.cond_eo_gap[pname] = MetricCell::undefined(0);
      }
      try {
        gr.cond_fpr_ratio[pname] =
            conditional_fpr_ratio(preds, eval_set, gname, tau, rating_bins, prior, min_cell_count)
                .value;
      } catch (const UndefinedMetricError&) {
        gr.cond_fpr_ratio[pname] = MetricCell::undefined(0);
      }
    }

    // Unfiltered per-rating-bin FPR table (reporting only; the conditional
    // metrics apply their own min-cell filter).
    {
      const double width = (rating_bins.hi - rating_bins.lo) / rating_bins.count;
      std::vector<std::int64_t> cnt_in(rating_bins.count, 0), fp_in(rating_bins.count, 0);
      std::vector<std::int64_t> cnt_out(rating_bins.count, 0), fp_out(rating_bins.count, 0);
      const auto tally = [&](const std::vector<std::size_t>& idx, std::vector<std::int64_t>& cnt,
                             std::vector<std::int64_t>& fp) {
        for (std::size_t i : idx) {
          if (labels[i] >= tau) continue;
          const int b = bin_of(labels[i], rating_bins);
          ++cnt[b];
          if (preds[i] >= tau) ++fp[b];
        }
      };
      tally(part.members, cnt_in, fp_in);
      tally(part.others, cnt_out, fp_out);
      for (int b = 0; b < rating_bins.count; ++b) {
        ReportBinRow row;
        row.bin = b;
        row.lo = rating_bins.lo + b * width;
        row.hi = rating_bins.lo + (b + 1) * width;
        row.in_cell = cnt_in[b] > 0
                          ? MetricCell::of(static_cast<double>(fp_in[b]) / cnt_in[b], cnt_in[b])
                          : MetricCell::undefined(0);
        row.out_cell = cnt_out[b] > 0
                           ? MetricCell::of(static_cast<double>(fp_out[b]) / cnt_out[b], cnt_out[b])
                           : MetricCell::undefined(0);
        row.gap = (row.in_cell.defined && row.out_cell.defined)
                      ? MetricCell::of(row.in_cell.value - row.out_cell.value,
                                       cnt_in[b] + cnt_out[b])
                      : MetricCell::undefined(cnt_in[b] + cnt_out[b]);
        gr.fpr_bins.push_back(row);
      }
    }

    for (const auto& crow : calibration_gap(preds, labels, eval_set, gname, calibration_bins)) {
      ReportBinRow row;
      row.bin = crow.bin;
      row.lo = crow.lo;
      row.hi = crow.hi;
      row.in_cell = crow.n_in > 0 ? MetricCell::of(crow.mean_in, crow.n_in)
                                  : MetricCell::undefined(0);
      row.out_cell = crow.n_out > 0 ? MetricCell::of(crow.mean_out, crow.n_out)
                                    : MetricCell::undefined(0);
      row.gap = crow.gap;
      gr.calibration_bins.push_back(row);
    }

    rep.groups.emplace(gname, std::move(gr));
  }
  return rep;
}

ExperimentResult run_experiment(const TrainConfig& cfg, const Dataset& train_set,
                                const Dataset& eval_set) {
  cfg.validate();
  ExperimentResult out;
  out.runs.resize(static_cast<std::size_t>(cfg.runs));

  const std::size_t total = static_cast<std::size_t>(cfg.runs);
  const std::size_t block = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  for (std::size_t base = 0; base < total; base += block) {
    const std::size_t stop = std::min(total, base + block);
    std::vector<std::future<RunResult>> futs;
    futs.reserve(stop - base);
    for (std::size_t k = base; k < stop; ++k) {
      TrainConfig per_run = cfg;
      per_run.seed = cfg.seed + static_cast<std::uint64_t>(k);
      futs.push_back(std::async(std::launch::async, [per_run, &train_set, &eval_set] {
        return train(per_run, train_set, eval_set);
      }));
    }
    for (std::size_t k = base; k < stop; ++k) {
      try {
        out.runs[k] = futs[k - base].get();
      } catch (const std::exception& e) {
        throw Error("run with seed " + std::to_string(cfg.seed + k) + " failed: " + e.what());
      }
    }
  }

  if (cfg.runs == 1) {
    out.aggregate = out.runs[0].report;
  } else {
    std::vector<MetricsReport> reports;
    reports.reserve(out.runs.size());
    for (const auto& r : out.runs) reports.push_back(r.report);
    out.aggregate = aggregate_runs(reports);
  }
  return out;
}

StudyResult study(const std::vector<StudyEntry>& protocol, const Dataset& train_set,
                  const Dataset& eval_set) {
  if (protocol.empty()) throw ConfigError("study protocol has no configurations");
  for (const auto& entry : protocol) {
    if (entry.name.empty()) throw ConfigError("study configuration without a name");
    entry.config.validate();
  }
  for (std::size_t i = 0; i < protocol.size(); ++i) {
    for (std::size_t j = i + 1; j < protocol.size(); ++j) {
      if (protocol[i].name == protocol[j].name) {
        throw ConfigError("duplicate study configuration name '" + protocol[i].name + "'");
      }
    }
  }
  const TrainConfig& first = protocol.front().config;
  for (const auto& entry : protocol) {
    const TrainConfig& c = entry.config;
    if (c.tau != first.tau || c.eval_bins != first.eval_bins ||
        c.calibration_bins != first.calibration_bins || c.min_cell != first.min_cell ||
        c.priors != first.priors) {
      throw ConfigError("study configurations must share evaluation settings; '" + entry.name +
                        "' differs from '" + protocol.front().name + "'");
    }
  }

  StudyResult out;
  out.rows.reserve(protocol.size());
  for (const auto& entry : protocol) {
    try {
      out.rows.push_back({entry.name, run_experiment(entry.config, train_set, eval_set)});
    } catch (const Error& e) {
      throw Error("study configuration '" + entry.name + "': " + e.what());
    }
  }
  return out;
}

}  // namespace fairreg
