#include "fairreg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "fairreg/common.hpp"
#include "test_util.hpp"

using namespace fairreg;

namespace {

using Vec = std::vector<double>;

// Synthetic regression task: label linear in x0/x1 plus noise, x1 shifted by
// rho for group members so predictions pick up the flag unless penalized.
Dataset make_task(std::size_t n, std::uint64_t seed, double rho, double noise) {
  RandomEngine rng(seed);
  Dataset ds;
  ds.dim = 3;
  ds.group_names = {"g1"};
  ds.examples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Example ex;
    const int s = rng.uniform() < 0.4 ? 1 : 0;
    const double x0 = rng.normal();
    const double x1 = rng.normal() + rho * s;
    const double x2 = rng.normal();
    double y = 0.5 + 0.2 * x0 - 0.15 * x1 + noise * rng.normal();
    y = std::clamp(y, 0.01, 0.99);
    ex.features = {x0, x1, x2};
    ex.label = y;
    ex.groups = {{"g1", s}};
    ds.examples.push_back(std::move(ex));
  }
  ds.validate();
  return ds;
}

// The 8-example hand fixture used by the oracle simulation below.
Dataset tiny_fixture() {
  const std::vector<Vec> xs = {{0.5, -0.2}, {-0.3, 0.8}, {0.9, 0.1},  {0.2, 0.4},
                               {-0.5, -0.6}, {0.7, 0.3}, {0.1, -0.9}, {-0.8, 0.5}};
  const Vec ys = {0.10, 0.30, 0.20, 0.80, 0.40, 0.15, 0.35, 0.90};
  const std::vector<int> ss = {1, 0, 1, 1, 0, 0, 1, 0};
  Dataset ds;
  ds.dim = 2;
  ds.group_names = {"g1"};
  for (std::size_t i = 0; i < xs.size(); ++i) {
    Example ex;
    ex.features = xs[i];
    ex.label = ys[i];
    ex.groups = {{"g1", ss[i]}};
    ds.examples.push_back(std::move(ex));
  }
  ds.validate();
  return ds;
}

std::vector<double*> param_coords(ModelParams& p) {
  std::vector<double*> out;
  for (auto& v : p.hidden_w) out.push_back(&v);
  for (auto& v : p.hidden_b) out.push_back(&v);
  for (auto& v : p.out_w) out.push_back(&v);
  out.push_back(&p.out_b);
  return out;
}

std::vector<double> grad_coords(const Gradients& g) {
  std::vector<double> out;
  out.insert(out.end(), g.hidden_w.begin(), g.hidden_w.end());
  out.insert(out.end(), g.hidden_b.begin(), g.hidden_b.end());
  out.insert(out.end(), g.out_w.begin(), g.out_w.end());
  out.push_back(g.out_b);
  return out;
}

bool same_params(const ModelParams& a, const ModelParams& b) {
  return a.hidden_w == b.hidden_w && a.hidden_b == b.hidden_b && a.out_w == b.out_w &&
         a.out_b == b.out_b;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("two sgd steps with a correlation penalty match a scripted simulation") {
  const Dataset ds = tiny_fixture();
  TrainConfig cfg;
  cfg.arch = {ModelKind::Linear, 2, 0};
  cfg.tau = 0.5;
  cfg.epochs = 1;
  cfg.learning_rate = 0.1;
  cfg.batch_size = 4;
  cfg.penalties = {{"g1", 0.7, 4}};
  cfg.seed = 77;
  cfg.min_cell = 0;
  cfg.eval_bins = 1;

  const RunResult run = train(cfg, ds, ds);

  // Scripted simulation: same sampling contract, training math rebuilt from
  // scratch on plain arrays.
  ModelParams sim = init_params(cfg.arch, cfg.seed);
  RandomEngine rng(cfg.seed ^ kSampleSeedSalt);
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  // negatives (y < tau) with a known flag, ascending
  const std::vector<std::size_t> pool = {0, 1, 2, 4, 5, 6};

  double epoch_sq = 0.0;
  double epoch_pen = 0.0;
  for (std::size_t start = 0; start < 8; start += 4) {
    const std::vector<std::size_t> chunk(order.begin() + start, order.begin() + start + 4);
    std::vector<std::size_t> pen_batch;
    for (int k = 0; k < 4; ++k) pen_batch.push_back(pool[rng.below(pool.size())]);

    Vec gw(2, 0.0);
    double gb = 0.0;
    const auto predict = [&](const Vec& x) {
      return sim.out_w[0] * x[0] + sim.out_w[1] * x[1] + sim.out_b;
    };
    double mse = 0.0;
    for (std::size_t i : chunk) {
      const double yhat = predict(ds.examples[i].features);
      const double d = yhat - ds.examples[i].label;
      mse += d * d;
      const double up = 2.0 * d / 4.0;
      gw[0] += up * ds.examples[i].features[0];
      gw[1] += up * ds.examples[i].features[1];
      gb += up;
    }
    mse /= 4.0;
    epoch_sq += mse * 4.0;

    Vec p(4);
    Vec s(4);
    for (int k = 0; k < 4; ++k) {
      p[k] = predict(ds.examples[pen_batch[k]].features);
      s[k] = ds.examples[pen_batch[k]].groups.at("g1");
    }
    const double mp = (p[0] + p[1] + p[2] + p[3]) / 4.0;
    const double ms = (s[0] + s[1] + s[2] + s[3]) / 4.0;
    double vp = 0.0, vs = 0.0, cov = 0.0;
    for (int k = 0; k < 4; ++k) {
      vp += (p[k] - mp) * (p[k] - mp);
      vs += (s[k] - ms) * (s[k] - ms);
      cov += (p[k] - mp) * (s[k] - ms);
    }
    const double sp = std::sqrt(vp / 4.0);
    const double ssd = std::sqrt(vs / 4.0);
    cov /= 4.0;
    if (sp > 1e-8 && ssd > 1e-8) {
      const double r = cov / (sp * ssd);
      epoch_pen += 0.7 * std::abs(r);
      const double sign = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
      for (int k = 0; k < 4; ++k) {
        const double gk = 0.7 * sign *
                          ((s[k] - ms) / (4.0 * sp * ssd) - r * (p[k] - mp) / (4.0 * sp * sp));
        gw[0] += gk * ds.examples[pen_batch[k]].features[0];
        gw[1] += gk * ds.examples[pen_batch[k]].features[1];
        gb += gk;
      }
    }

    sim.out_w[0] -= 0.1 * gw[0];
    sim.out_w[1] -= 0.1 * gw[1];
    sim.out_b -= 0.1 * gb;
  }

  REQUIRE(run.params.out_w.size() == 2);
  CHECK(std::abs(run.params.out_w[0] - sim.out_w[0]) <= 1e-12);
  CHECK(std::abs(run.params.out_w[1] - sim.out_w[1]) <= 1e-12);
  CHECK(std::abs(run.params.out_b - sim.out_b) <= 1e-12);

  REQUIRE(run.mse_history.size() == 1);
  CHECK(std::abs(run.mse_history[0] - epoch_sq / 8.0) <= 1e-12);
  REQUIRE(run.penalty_history.size() == 1);
  REQUIRE(run.penalty_history[0].size() == 1);
  CHECK(std::abs(run.penalty_history[0][0] - epoch_pen / 2.0) <= 1e-12);
  CHECK(run.adversary_loss_history.empty());
}

TEST_CASE("zero-lambda penalties leave the trajectory bit-identical") {
  const Dataset ds = make_task(400, 11, 1.0, 0.05);
  TrainConfig plain;
  plain.arch = {ModelKind::Mlp1, 3, 8};
  plain.epochs = 3;
  plain.batch_size = 64;
  plain.seed = 5;
  plain.min_cell = 5;

  TrainConfig with_zero = plain;
  with_zero.penalties = {{"g1", 0.0, 32}};

  const RunResult a = train(plain, ds, ds);
  const RunResult b = train(with_zero, ds, ds);
  CHECK(same_params(a.params, b.params));
  CHECK(a.mse_history == b.mse_history);
  REQUIRE(b.penalty_history.size() == 3);
  for (const auto& epoch : b.penalty_history) {
    REQUIRE(epoch.size() == 1);
    CHECK(epoch[0] == 0.0);
  }
}

TEST_CASE("identical configs train bit-identically; seeds change the outcome") {
  const Dataset ds = make_task(400, 12, 1.0, 0.05);
  TrainConfig cfg;
  cfg.arch = {ModelKind::Mlp1, 3, 8};
  cfg.epochs = 3;
  cfg.batch_size = 64;
  cfg.penalties = {{"g1", 1.0, 32}};
  cfg.adversary = AdversarySpec{"g1", 1.0, 0.1, 32};
  cfg.seed = 9;
  cfg.min_cell = 5;

  const RunResult a = train(cfg, ds, ds);
  const RunResult b = train(cfg, ds, ds);
  CHECK(same_params(a.params, b.params));
  CHECK(a.head.w == b.head.w);
  CHECK(a.head.b == b.head.b);
  CHECK(a.mse_history == b.mse_history);
  CHECK(a.penalty_history == b.penalty_history);
  CHECK(a.adversary_loss_history == b.adversary_loss_history);

  TrainConfig other = cfg;
  other.seed = 10;
  const RunResult c = train(other, ds, ds);
  CHECK_FALSE(same_params(a.params, c.params));
}

TEST_CASE("zero epochs returns the untouched initialization and empty history") {
  const Dataset ds = make_task(100, 13, 1.0, 0.05);
  TrainConfig cfg;
  cfg.arch = {ModelKind::Mlp1, 3, 4};
  cfg.epochs = 0;
  cfg.seed = 21;
  cfg.min_cell = 0;

  const RunResult run = train(cfg, ds, ds);
  CHECK(same_params(run.params, init_params(cfg.arch, 21)));
  CHECK(run.mse_history.empty());
  CHECK(run.penalty_history.empty());
  CHECK(run.adversary_loss_history.empty());
  CHECK(run.report.mse.defined);
}

TEST_CASE("step gradients match central differences of the step objective") {
  // Fixture hunt: skip seeds whose batches sit on a relu kink or a
  // correlation sign change, where the objective is not differentiable.
  const double h = 1e-6;
  bool found = false;
  for (std::uint64_t attempt = 1; attempt <= 50 && !found; ++attempt) {
    const Dataset ds = make_task(60, 100 + attempt, 1.2, 0.05);
    TrainConfig cfg;
    cfg.arch = {ModelKind::Mlp1, 3, 5};
    cfg.penalties = {{"g1", 0.8, 10}};
    cfg.adversary = AdversarySpec{"g1", 0.7, 0.1, 10};
    cfg.seed = 300 + attempt;
    ModelParams params = init_params(cfg.arch, cfg.seed);

    // hand-assembled batches: first 8 examples, then negatives with known
    // flags for the penalty and adversary sides
    StepPlan plan;
    for (std::size_t i = 0; i < 8; ++i) plan.main.push_back(i);
    std::vector<std::size_t> negs;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.examples[i].label < cfg.tau) negs.push_back(i);
    }
    REQUIRE(negs.size() >= 20);
    plan.penalty = {{negs.begin(), negs.begin() + 10}};
    plan.adversary.assign(negs.begin() + 10, negs.begin() + 20);

    // a head with real weights so the reversed term is non-trivial
    AdversaryHead head = AdversaryHead::zeros(5);
    RandomEngine hrng(888);
    for (auto& w : head.w) w = 0.4 * hrng.normal();
    head.b = 0.1;

    // kink guards
    bool clean = true;
    std::vector<std::size_t> everyone = plan.main;
    everyone.insert(everyone.end(), plan.penalty[0].begin(), plan.penalty[0].end());
    everyone.insert(everyone.end(), plan.adversary.begin(), plan.adversary.end());
    for (std::size_t i : everyone) {
      for (std::size_t j = 0; j < 5 && clean; ++j) {
        double z = params.hidden_b[j];
        for (std::size_t k = 0; k < 3; ++k) {
          z += params.hidden_w[j * 3 + k] * ds.examples[i].features[k];
        }
        if (std::abs(z) < 1e-4) clean = false;
      }
      if (!clean) break;
    }
    if (clean) {
      std::vector<double> pen_preds;
      std::vector<int> pen_flags;
      for (std::size_t i : plan.penalty[0]) {
        pen_preds.push_back(forward(params, ds.examples[i].features).prediction);
        pen_flags.push_back(ds.examples[i].groups.at("g1"));
      }
      const CorrStats st = pearson_corr(pen_preds, pen_flags);
      if (st.degenerate || std::abs(st.corr) < 1e-3) clean = false;
    }
    if (!clean) continue;
    found = true;

    const StepOutcome outc = step_gradients(cfg, ds, params, &head, plan);
    const std::vector<double> analytic = grad_coords(outc.grads);
    const std::vector<double*> coords = param_coords(params);
    REQUIRE(coords.size() == analytic.size());
    for (std::size_t c = 0; c < coords.size(); ++c) {
      const double keep = *coords[c];
      *coords[c] = keep + h;
      const double up = step_objective(cfg, ds, params, &head, plan);
      *coords[c] = keep - h;
      const double down = step_objective(cfg, ds, params, &head, plan);
      *coords[c] = keep;
      const double fd = (up - down) / (2.0 * h);
      const double err = std::abs(fd - analytic[c]);
      const double scale = std::max({std::abs(fd), std::abs(analytic[c]), 1.0e-4});
      CHECK(err / scale <= 1e-4);
    }

    // and one real train step applies exactly -lr * that gradient
    TrainConfig one = cfg;
    one.epochs = 1;
    one.batch_size = ds.size();
    one.min_cell = 0;
    const ModelParams before = init_params(one.arch, one.seed);
    RandomEngine rng(one.seed ^ kSampleSeedSalt);
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::vector<std::size_t> negpool;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.examples[i].label < one.tau) negpool.push_back(i);
    }
    StepPlan whole;
    whole.main = order;
    whole.penalty.resize(1);
    for (std::size_t k = 0; k < 10; ++k) {
      whole.penalty[0].push_back(negpool[rng.below(negpool.size())]);
    }
    for (std::size_t k = 0; k < 10; ++k) {
      whole.adversary.push_back(negpool[rng.below(negpool.size())]);
    }
    AdversaryHead zero_head = AdversaryHead::zeros(5);
    const StepOutcome step1 = step_gradients(one, ds, before, &zero_head, whole);
    const RunResult run = train(one, ds, ds);
    const std::vector<double> g = grad_coords(step1.grads);
    ModelParams expect = before;
    const std::vector<double*> ec = param_coords(expect);
    for (std::size_t c = 0; c < ec.size(); ++c) *ec[c] -= one.learning_rate * g[c];
    CHECK(same_params(run.params, expect));
  }
  CHECK(found);
}

TEST_CASE("default learning rate halves the training error on a linear task") {
  const Dataset train_set = make_task(1000, 31, 0.8, 0.05);
  const Dataset eval_set = make_task(500, 32, 0.8, 0.05);
  TrainConfig cfg;
  cfg.arch = {ModelKind::Linear, 3, 0};
  cfg.seed = 1;
  cfg.min_cell = 5;
  const RunResult run = train(cfg, train_set, eval_set);
  REQUIRE(run.mse_history.size() == 30);
  CHECK(run.mse_history.back() < 0.5 * run.mse_history.front());
  CHECK(run.mse_history.back() < 0.02);
}

TEST_CASE("the correlation penalty shrinks prediction-flag correlation") {
  const Dataset train_set = make_task(1500, 41, 2.5, 0.05);
  const Dataset eval_set = make_task(700, 42, 2.5, 0.05);
  TrainConfig base;
  base.arch = {ModelKind::Mlp1, 3, 8};
  base.epochs = 15;
  base.batch_size = 128;
  base.seed = 3;
  base.min_cell = 5;

  TrainConfig reg = base;
  reg.penalties = {{"g1", 4.0, 128}};

  const RunResult plain = train(base, train_set, eval_set);
  const RunResult penalized = train(reg, train_set, eval_set);

  const auto corr_on_eval_negatives = [&](const ModelParams& params) {
    std::vector<double> preds;
    std::vector<int> flags;
    for (const auto& ex : eval_set.examples) {
      if (ex.label >= 0.5) continue;
      preds.push_back(forward(params, ex.features).prediction);
      flags.push_back(ex.groups.at("g1"));
    }
    return std::abs(pearson_corr(preds, flags).corr);
  };

  const double before = corr_on_eval_negatives(plain.params);
  const double after = corr_on_eval_negatives(penalized.params);
  CHECK(before > 0.3);  // the task genuinely leaks the flag
  CHECK(after < 0.5 * before);
  CHECK(after < 0.15);
  // the penalty actually engaged
  CHECK(penalized.penalty_history.back()[0] > 0.0);
}

TEST_CASE("adversarial training runs, trains its head, and logs its loss") {
  const Dataset train_set = make_task(800, 51, 1.5, 0.05);
  const Dataset eval_set = make_task(400, 52, 1.5, 0.05);
  TrainConfig cfg;
  cfg.arch = {ModelKind::Mlp1, 3, 8};
  cfg.epochs = 6;
  cfg.batch_size = 128;
  cfg.adversary = AdversarySpec{"g1", 1.0, 0.1, 64};
  cfg.seed = 8;
  cfg.min_cell = 5;

  const RunResult run = train(cfg, train_set, eval_set);
  REQUIRE(run.adversary_loss_history.size() == 6);
  // the head moved off its zero initialization (ln 2 loss) as it learned
  const double ln2 = std::log(2.0);
  CHECK(run.adversary_loss_history.front() <= ln2 + 1e-9);
  bool any_weight = false;
  for (double w : run.head.w) any_weight = any_weight || w != 0.0;
  CHECK(any_weight);
}

TEST_CASE("precondition violations fail before any training") {
  const Dataset ds = make_task(200, 61, 1.0, 0.05);
  TrainConfig cfg;
  cfg.arch = {ModelKind::Mlp1, 3, 4};
  cfg.min_cell = 0;

  SUBCASE("unknown penalty group") {
    cfg.penalties = {{"nope", 1.0, 8}};
    CHECK_THROWS_WITH_AS(train(cfg, ds, ds), doctest::Contains("available"), ConfigError);
  }
  SUBCASE("not enough known-demographic negatives") {
    cfg.penalties = {{"g1", 1.0, 100000}};
    CHECK_THROWS_WITH_AS(train(cfg, ds, ds), doctest::Contains("known-demographic negatives"),
                         ConfigError);
  }
  SUBCASE("one-sided flags in the pool") {
    Dataset flat = ds;
    for (auto& ex : flat.examples) ex.groups["g1"] = 1;
    cfg.penalties = {{"g1", 1.0, 8}};
    CHECK_THROWS_WITH_AS(train(cfg, flat, flat), doctest::Contains("flag=1"), ConfigError);
  }
  SUBCASE("adversary needs the mlp") {
    TrainConfig lin = cfg;
    lin.arch = {ModelKind::Linear, 3, 0};
    lin.adversary = AdversarySpec{"g1", 1.0, 0.1, 8};
    CHECK_THROWS_AS(train(lin, ds, ds), ConfigError);
  }
  SUBCASE("schema mismatches") {
    const Dataset other = [&] {
      Dataset d = ds;
      d.dim = 4;
      for (auto& ex : d.examples) ex.features.push_back(0.0);
      return d;
    }();
    CHECK_THROWS_AS(train(cfg, ds, other), ConfigError);
    Dataset renamed = ds;
    renamed.group_names = {"g2"};
    for (auto& ex : renamed.examples) {
      const int s = ex.groups.at("g1");
      ex.groups = {{"g2", s}};
    }
    CHECK_THROWS_AS(train(cfg, ds, renamed), ConfigError);
  }
  SUBCASE("config field rejections") {
    const auto bad = [&](auto mutate) {
      TrainConfig c = cfg;
      mutate(c);
      CHECK_THROWS_AS(c.validate(), ConfigError);
    };
    bad([](TrainConfig& c) { c.tau = 0.0; });
    bad([](TrainConfig& c) { c.tau = 1.0; });
    bad([](TrainConfig& c) { c.epochs = -1; });
    bad([](TrainConfig& c) { c.learning_rate = 0.0; });
    bad([](TrainConfig& c) { c.batch_size = 0; });
    bad([](TrainConfig& c) { c.penalties = {{"g1", -0.5, 8}}; });
    bad([](TrainConfig& c) { c.penalties = {{"g1", 1.0, 1}}; });
    bad([](TrainConfig& c) { c.penalties = {{"", 1.0, 8}}; });
    bad([](TrainConfig& c) { c.runs = 0; });
    bad([](TrainConfig& c) { c.eval_bins = 0; });
    bad([](TrainConfig& c) { c.min_cell = -1; });
    bad([](TrainConfig& c) { c.priors.clear(); });
    bad([](TrainConfig& c) { c.priors = {"sideways"}; });
    bad([](TrainConfig& c) {
      c.adversary = AdversarySpec{"g1", -1.0, 0.1, 8};
      c.arch = {ModelKind::Mlp1, 3, 4};
    });
  }
}

TEST_CASE("a diverging run aborts with the step named") {
  const Dataset ds = make_task(200, 71, 1.0, 0.05);
  TrainConfig cfg;
  cfg.arch = {ModelKind::Linear, 3, 0};
  cfg.learning_rate = 1.0e8;
  cfg.epochs = 5;
  cfg.batch_size = 32;
  cfg.min_cell = 0;
  CHECK_THROWS_WITH_AS(train(cfg, ds, ds), doctest::Contains("step"), NumericError);
}

TEST_CASE("evaluation of a perfect predictor reports zero error rates") {
  // one feature equal to the label makes identity weights a perfect model
  Dataset ds;
  ds.dim = 1;
  ds.group_names = {"g1"};
  RandomEngine rng(81);
  for (int i = 0; i < 400; ++i) {
    Example ex;
    ex.label = rng.uniform();
    ex.features = {ex.label};
    ex.groups = {{"g1", rng.uniform() < 0.3 ? 1 : 0}};
    ds.examples.push_back(std::move(ex));
  }
  ds.validate();

  ModelParams perfect;
  perfect.arch = {ModelKind::Linear, 1, 0};
  perfect.out_w = {1.0};
  perfect.out_b = 0.0;

  const MetricsReport rep = evaluate(perfect, ds, 0.5, BinSpec{4, 0.0, 0.5},
                                     BinSpec{4, 0.0, 1.0}, {"uniform"}, 0);
  CHECK(rep.mse.value == 0.0);
  const GroupReport& gr = rep.groups.at("g1");
  CHECK(gr.fpr_in.value == 0.0);
  CHECK(gr.fpr_out.value == 0.0);
  CHECK(gr.fnr_in.value == 0.0);
  CHECK(gr.fnr_out.value == 0.0);
  CHECK(gr.eo_gap.value == 0.0);
  CHECK(gr.cond_eo_gap.at("uniform").value == 0.0);
}

TEST_CASE("evaluation of a constant threshold predictor reports unit rates") {
  Dataset ds;
  ds.dim = 1;
  ds.group_names = {"g1"};
  RandomEngine rng(82);
  for (int i = 0; i < 400; ++i) {
    Example ex;
    ex.label = rng.uniform();
    ex.features = {0.0};
    ex.groups = {{"g1", rng.uniform() < 0.3 ? 1 : 0}};
    ds.examples.push_back(std::move(ex));
  }
  ds.validate();

  ModelParams constant;
  constant.arch = {ModelKind::Linear, 1, 0};
  constant.out_w = {0.0};
  constant.out_b = 0.5;  // exactly tau: everything predicted positive

  const MetricsReport rep = evaluate(constant, ds, 0.5, BinSpec{4, 0.0, 0.5},
                                     BinSpec{4, 0.0, 1.0}, {"uniform", "background"}, 1);
  const GroupReport& gr = rep.groups.at("g1");
  CHECK(gr.fpr_in.value == 1.0);
  CHECK(gr.fpr_out.value == 1.0);
  CHECK(gr.fnr_in.value == 0.0);
  CHECK(gr.fpr_ratio.value == 1.0);
  CHECK(gr.eo_gap.value == 0.0);
  CHECK(gr.cond_fpr_ratio.at("uniform").value == 1.0);
  CHECK(gr.cond_fpr_ratio.at("background").value == 1.0);
}

TEST_CASE("evaluation of a label-independent predictor has no group gap") {
  // predictions uniform and independent of both label and flag
  Dataset ds;
  ds.dim = 1;
  ds.group_names = {"g1"};
  RandomEngine rng(83);
  for (int i = 0; i < 20000; ++i) {
    Example ex;
    ex.label = rng.uniform();
    ex.features = {rng.uniform()};  // unrelated to the label
    ex.groups = {{"g1", rng.uniform() < 0.3 ? 1 : 0}};
    ds.examples.push_back(std::move(ex));
  }
  ds.validate();

  ModelParams passthrough;
  passthrough.arch = {ModelKind::Linear, 1, 0};
  passthrough.out_w = {1.0};
  passthrough.out_b = 0.0;

  const double tau = 0.4;
  const MetricsReport rep = evaluate(passthrough, ds, tau, BinSpec{4, 0.0, tau},
                                     BinSpec{4, 0.0, 1.0}, {"uniform"}, 20);
  const GroupReport& gr = rep.groups.at("g1");
  // P(yhat >= tau) = 1 - tau on both sides, so every gap sits near zero
  CHECK(gr.fpr_in.value == doctest::Approx(1.0 - tau).epsilon(0.07));
  CHECK(gr.fpr_out.value == doctest::Approx(1.0 - tau).epsilon(0.07));
  CHECK(std::abs(gr.eo_gap.value) < 0.05);
  CHECK(std::abs(gr.dp_gap.value) < 0.05);
  CHECK(std::abs(gr.cond_eo_gap.at("uniform").value) < 0.06);

  // structural checks on the per-bin tables
  REQUIRE(gr.fpr_bins.size() == 4);
  std::int64_t binned = 0;
  for (const auto& row : gr.fpr_bins) binned += row.gap.count;
  CHECK(binned == gr.eo_gap.count);
  REQUIRE(gr.calibration_bins.size() == 4);
}

TEST_CASE("experiment seeds are consecutive and aggregate cell-wise") {
  const Dataset train_set = make_task(300, 91, 1.0, 0.05);
  const Dataset eval_set = make_task(200, 92, 1.0, 0.05);
  TrainConfig cfg;
  cfg.arch = {ModelKind::Linear, 3, 0};
  cfg.epochs = 2;
  cfg.batch_size = 64;
  cfg.seed = 40;
  cfg.runs = 3;
  cfg.min_cell = 5;

  const ExperimentResult exp = run_experiment(cfg, train_set, eval_set);
  REQUIRE(exp.runs.size() == 3);
  // each run is exactly the single-seed training
  for (int k = 0; k < 3; ++k) {
    TrainConfig single = cfg;
    single.seed = 40 + static_cast<std::uint64_t>(k);
    const RunResult alone = train(single, train_set, eval_set);
    CHECK(same_params(exp.runs[k].params, alone.params));
  }
  CHECK(exp.aggregate.runs == 3);
  CHECK(exp.aggregate.mse.defined);
  CHECK(exp.aggregate.mse.has_se);
  CHECK(exp.aggregate.mse.se >= 0.0);

  // aggregating a run with itself keeps the mean and zeroes the spread
  const MetricsReport twice = aggregate_runs({exp.runs[0].report, exp.runs[0].report});
  CHECK(twice.mse.value == exp.runs[0].report.mse.value);
  CHECK(twice.mse.se == 0.0);

  TrainConfig one = cfg;
  one.runs = 1;
  const ExperimentResult single = run_experiment(one, train_set, eval_set);
  CHECK(single.aggregate.mse.value == exp.runs[0].report.mse.value);
  CHECK_FALSE(single.aggregate.mse.has_se);
}

TEST_CASE("a failing run aborts the experiment with its seed named") {
  const Dataset ds = make_task(200, 95, 1.0, 0.05);
  TrainConfig cfg;
  cfg.arch = {ModelKind::Linear, 3, 0};
  cfg.learning_rate = 1.0e8;
  cfg.epochs = 3;
  cfg.batch_size = 32;
  cfg.seed = 60;
  cfg.runs = 2;
  cfg.min_cell = 0;
  CHECK_THROWS_WITH_AS(run_experiment(cfg, ds, ds), doctest::Contains("seed"), Error);
}

TEST_CASE("study rows follow protocol order and share evaluation settings") {
  const Dataset train_set = make_task(300, 96, 1.0, 0.05);
  const Dataset eval_set = make_task(200, 97, 1.0, 0.05);
  TrainConfig base;
  base.arch = {ModelKind::Linear, 3, 0};
  base.epochs = 1;
  base.batch_size = 64;
  base.runs = 2;
  base.min_cell = 5;

  TrainConfig mlp = base;
  mlp.arch = {ModelKind::Mlp1, 3, 4};

  const StudyResult result = study({{"linear", base}, {"mlp", mlp}}, train_set, eval_set);
  REQUIRE(result.rows.size() == 2);
  CHECK(result.rows[0].name == "linear");
  CHECK(result.rows[1].name == "mlp");
  CHECK(result.rows[0].result.aggregate.mse.defined);
  CHECK(result.rows[1].result.aggregate.mse.defined);

  SUBCASE("mismatched evaluation settings are rejected") {
    TrainConfig drifted = mlp;
    drifted.tau = 0.6;
    CHECK_THROWS_WITH_AS(study({{"a", base}, {"b", drifted}}, train_set, eval_set),
                         doctest::Contains("share evaluation settings"), ConfigError);
  }
  SUBCASE("duplicate names are rejected") {
    CHECK_THROWS_WITH_AS(study({{"a", base}, {"a", mlp}}, train_set, eval_set),
                         doctest::Contains("duplicate"), ConfigError);
  }
  SUBCASE("an empty protocol is rejected") {
    CHECK_THROWS_AS(study({}, train_set, eval_set), ConfigError);
  }
}

}  // TEST_SUITE
