#include "fairreg/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fairreg/common.hpp"
#include "fairreg/rng.hpp"

namespace fairreg {

void Architecture::validate() const {
  if (input_dim == 0) throw ConfigError("model input_dim must be >= 1");
  if (kind == ModelKind::Mlp1 && hidden_width == 0) {
    throw ConfigError("mlp1 needs hidden_width >= 1");
  }
}

std::string model_kind_name(ModelKind kind) {
  return kind == ModelKind::Linear ? "linear" : "mlp1";
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "linear") return ModelKind::Linear;
  if (name == "mlp1") return ModelKind::Mlp1;
  throw ConfigError("unknown model kind '" + name + "' (linear, mlp1)");
}

void ModelParams::validate() const {
  arch.validate();
  const std::size_t d = arch.input_dim;
  const std::size_t h = arch.kind == ModelKind::Mlp1 ? arch.hidden_width : 0;
  if (hidden_w.size() != h * d || hidden_b.size() != h) {
    throw ConfigError("hidden layer shape does not match the architecture");
  }
  const std::size_t out_len = arch.kind == ModelKind::Mlp1 ? h : d;
  if (out_w.size() != out_len) {
    throw ConfigError("output layer shape does not match the architecture");
  }
}

Gradients zero_gradients(const Architecture& arch) {
  arch.validate();
  Gradients g;
  if (arch.kind == ModelKind::Mlp1) {
    g.hidden_w.assign(arch.hidden_width * arch.input_dim, 0.0);
    g.hidden_b.assign(arch.hidden_width, 0.0);
    g.out_w.assign(arch.hidden_width, 0.0);
  } else {
    g.out_w.assign(arch.input_dim, 0.0);
  }
  return g;
}

ModelParams init_params(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  ModelParams p;
  p.arch = arch;
  p.init_seed = seed;
  RandomEngine rng(seed);
  if (arch.kind == ModelKind::Mlp1) {
    const double lim1 =
        std::sqrt(6.0 / static_cast<double>(arch.input_dim + arch.hidden_width));
    p.hidden_w.reserve(arch.hidden_width * arch.input_dim);
    for (std::size_t i = 0; i < arch.hidden_width * arch.input_dim; ++i) {
      p.hidden_w.push_back(rng.uniform(-lim1, lim1));
    }
    p.hidden_b.assign(arch.hidden_width, 0.0);
    const double lim2 = std::sqrt(6.0 / static_cast<double>(arch.hidden_width + 1));
    p.out_w.reserve(arch.hidden_width);
    for (std::size_t i = 0; i < arch.hidden_width; ++i) {
      p.out_w.push_back(rng.uniform(-lim2, lim2));
    }
  } else {
    const double lim = std::sqrt(6.0 / static_cast<double>(arch.input_dim + 1));
    p.out_w.reserve(arch.input_dim);
    for (std::size_t i = 0; i < arch.input_dim; ++i) {
      p.out_w.push_back(rng.uniform(-lim, lim));
    }
  }
  return p;
}

ForwardTrace forward(const ModelParams& params, std::span<const double> x) {
  if (x.size() != params.arch.input_dim) {
    throw ConfigError("forward: input has " + std::to_string(x.size()) +
                      " features, model expects " + std::to_string(params.arch.input_dim));
  }
  ForwardTrace trace;
  if (params.arch.kind == ModelKind::Mlp1) {
    const std::size_t h = params.arch.hidden_width;
    const std::size_t d = params.arch.input_dim;
    trace.hidden.resize(h);
    for (std::size_t j = 0; j < h; ++j) {
      double z = 0.0;
      const double* row = params.hidden_w.data() + j * d;
      for (std::size_t k = 0; k < d; ++k) z += row[k] * x[k];
      z += params.hidden_b[j];
      trace.hidden[j] = z > 0.0 ? z : 0.0;
    }
    double y = 0.0;
    for (std::size_t j = 0; j < h; ++j) y += params.out_w[j] * trace.hidden[j];
    trace.prediction = y + params.out_b;
  } else {
    double y = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) y += params.out_w[k] * x[k];
    trace.prediction = y + params.out_b;
  }
  return trace;
}

double loss_sq(double yhat, double y) {
  const double d = yhat - y;
  return d * d;
}

void backward_into(const ModelParams& params, std::span<const double> x, double upstream,
                   const ForwardTrace& trace, Gradients* grads,
                   std::span<const double> upstream_hidden) {
  const std::size_t d = params.arch.input_dim;
  if (x.size() != d) throw ConfigError("backward: input length mismatch");
  if (params.arch.kind == ModelKind::Linear) {
    if (!upstream_hidden.empty()) {
      throw ConfigError("hidden-layer gradients make no sense for a linear model");
    }
    for (std::size_t k = 0; k < d; ++k) grads->out_w[k] += upstream * x[k];
    grads->out_b += upstream;
    return;
  }
  const std::size_t h = params.arch.hidden_width;
  if (trace.hidden.size() != h) throw ConfigError("backward: trace/arch mismatch");
  if (!upstream_hidden.empty() && upstream_hidden.size() != h) {
    throw ConfigError("backward: hidden upstream length mismatch");
  }
  for (std::size_t j = 0; j < h; ++j) {
    grads->out_w[j] += upstream * trace.hidden[j];
  }
  grads->out_b += upstream;
  for (std::size_t j = 0; j < h; ++j) {
    // Post-relu activation is positive iff the pre-activation was; at exactly
    // zero nothing flows back.
    if (trace.hidden[j] <= 0.0) continue;
    double dz = upstream * params.out_w[j];
    if (!upstream_hidden.empty()) dz += upstream_hidden[j];
    grads->hidden_b[j] += dz;
    double* row = grads->hidden_w.data() + j * d;
    for (std::size_t k = 0; k < d; ++k) row[k] += dz * x[k];
  }
}

Gradients backward(const ModelParams& params, const std::vector<std::vector<double>>& xs,
                   std::span<const double> upstream) {
  if (xs.size() != upstream.size()) {
    throw ConfigError("backward: batch has " + std::to_string(xs.size()) +
                      " examples but " + std::to_string(upstream.size()) +
                      " upstream values");
  }
  Gradients grads = zero_gradients(params.arch);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const ForwardTrace trace = forward(params, xs[i]);
    backward_into(params, xs[i], upstream[i], trace, &grads);
  }
  return grads;
}

namespace {
constexpr const char* kParamsFormat = "fairreg-params-v1";
}

std::string params_to_json(const ModelParams& params) {
  params.validate();
  nlohmann::json doc;
  doc["format"] = kParamsFormat;
  doc["arch"] = {{"kind", model_kind_name(params.arch.kind)},
                 {"input_dim", params.arch.input_dim},
                 {"hidden_width", params.arch.hidden_width}};
  doc["init_seed"] = params.init_seed;
  doc["hidden_w"] = params.hidden_w;
  doc["hidden_b"] = params.hidden_b;
  doc["out_w"] = params.out_w;
  doc["out_b"] = params.out_b;
  return doc.dump(1) + "\n";
}

ModelParams params_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
    if (doc.at("format").get<std::string>() != kParamsFormat) {
      throw ParseError("unsupported format '" + doc.at("format").get<std::string>() + "'");
    }
    ModelParams p;
    p.arch.kind = model_kind_from_name(doc.at("arch").at("kind").get<std::string>());
    p.arch.input_dim = doc.at("arch").at("input_dim").get<std::size_t>();
    p.arch.hidden_width = doc.at("arch").at("hidden_width").get<std::size_t>();
    p.init_seed = doc.at("init_seed").get<std::uint64_t>();
    p.hidden_w = doc.at("hidden_w").get<std::vector<double>>();
    p.hidden_b = doc.at("hidden_b").get<std::vector<double>>();
    p.out_w = doc.at("out_w").get<std::vector<double>>();
    p.out_b = doc.at("out_b").get<double>();
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad parameter document: ") + e.what());
  }
}

void save_params(const ModelParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << params_to_json(params);
}

ModelParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return params_from_json(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace fairreg
