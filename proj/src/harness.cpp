// Copyright 2026 The FISMO Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fismo/harness.hpp"

#include <glob.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "fismo/error.hpp"
#include "fismo/matops.hpp"
#include "fismo/random.hpp"
#include "json.hpp"

#ifndef FISMO_VERSION
#define FISMO_VERSION "0.0.0"
#endif

namespace fismo {

using json = nlohmann::ordered_json;

std::string version_string() { return std::string("v") + FISMO_VERSION; }

double OptimizerConfig::resolved_lr(long horizon) const {
  if (schedule == Schedule::inv_sqrt_horizon) {
    return schedule_c / std::sqrt(static_cast<double>(horizon));
  }
  return lr;
}

// ------------------------------------------------------------------ config

namespace {

const char* to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::quadratic: return "quadratic";
    case ProblemKind::logistic: return "logistic";
    case ProblemKind::mlp: return "mlp";
  }
  return "?";
}

const char* to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::fismo: return "fismo";
    case OptimizerKind::muon: return "muon";
    case OptimizerKind::adamw: return "adamw";
    case OptimizerKind::sgd: return "sgd";
  }
  return "?";
}

class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(path_, "expected an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    const std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!ok.contains(it.key())) throw ConfigError(field(it.key()), "unknown key");
    }
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const json& at(const char* key) const { return j_.at(key); }
  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  double number(const char* key, double def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(field(key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(field(key), "must be finite");
    return d;
  }

  std::int64_t integer(const char* key, std::int64_t def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer");
    return v.get<std::int64_t>();
  }

  std::uint64_t unsigned_integer(const char* key, std::uint64_t def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                   v.get<std::int64_t>() < 0)) {
      throw ConfigError(field(key), "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  bool boolean(const char* key, bool def) const {
    if (!has(key)) return def;
    if (!j_.at(key).is_boolean()) throw ConfigError(field(key), "expected true or false");
    return j_.at(key).get<bool>();
  }

  std::string string(const char* key, const std::string& def) const {
    if (!has(key)) return def;
    if (!j_.at(key).is_string()) throw ConfigError(field(key), "expected a string");
    return j_.at(key).get<std::string>();
  }

  std::string required_string(const char* key) const {
    if (!has(key)) throw ConfigError(field(key), "missing required key");
    return string(key, "");
  }

 private:
  const json& j_;
  std::string path_;
};

void require(bool ok, const std::string& path, const std::string& msg) {
  if (!ok) throw ConfigError(path, msg);
}

ProblemConfig parse_problem(const json& j) {
  Obj o(j, "problem");
  ProblemConfig p;
  const std::string kind = o.required_string("kind");
  p.seed = o.unsigned_integer("seed", 0);
  if (kind == "quadratic") {
    o.allow({"kind", "seed", "m", "n"});
    p.kind = ProblemKind::quadratic;
    p.m = static_cast<std::size_t>(o.integer("m", 6));
    p.n = static_cast<std::size_t>(o.integer("n", 4));
    require(o.integer("m", 6) >= 2, o.field("m"), "must be >= 2");
    require(o.integer("n", 4) >= 2, o.field("n"), "must be >= 2");
    p.n_samples = 1;
  } else if (kind == "logistic") {
    o.allow({"kind", "seed", "m", "n", "n_samples"});
    p.kind = ProblemKind::logistic;
    require(o.integer("m", 4) >= 2, o.field("m"), "must be >= 2");
    require(o.integer("n", 8) >= 1, o.field("n"), "must be >= 1");
    require(o.integer("n_samples", 512) >= 1, o.field("n_samples"), "must be >= 1");
    p.m = static_cast<std::size_t>(o.integer("m", 4));
    p.n = static_cast<std::size_t>(o.integer("n", 8));
    p.n_samples = static_cast<std::size_t>(o.integer("n_samples", 512));
  } else if (kind == "mlp") {
    o.allow({"kind", "seed", "layer_dims", "n_samples", "input_noise", "separation",
             "loss_scale"});
    p.kind = ProblemKind::mlp;
    if (o.has("layer_dims")) {
      const json& dims = o.at("layer_dims");
      require(dims.is_array(), o.field("layer_dims"), "expected an array of integers");
      p.mlp.layer_dims.clear();
      for (std::size_t i = 0; i < dims.size(); ++i) {
        const std::string f = o.field("layer_dims") + "[" + std::to_string(i) + "]";
        require(dims[i].is_number_integer(), f, "expected an integer");
        const auto d = dims[i].get<std::int64_t>();
        require(d >= 1 && d <= 64, f, "must lie in [1, 64]");
        p.mlp.layer_dims.push_back(static_cast<std::size_t>(d));
      }
      require(p.mlp.layer_dims.size() == 4 || p.mlp.layer_dims.size() == 5,
              o.field("layer_dims"), "need 2 or 3 hidden layers (4 or 5 entries)");
      require(p.mlp.layer_dims.back() >= 2, o.field("layer_dims"),
              "the output layer needs at least 2 classes");
    }
    require(o.integer("n_samples", 512) >= 1, o.field("n_samples"), "must be >= 1");
    p.mlp.n_samples = static_cast<std::size_t>(o.integer("n_samples", 512));
    p.mlp.input_noise = o.number("input_noise", p.mlp.input_noise);
    p.mlp.separation = o.number("separation", p.mlp.separation);
    p.mlp.loss_scale = o.number("loss_scale", p.mlp.loss_scale);
    require(p.mlp.input_noise >= 0.0, o.field("input_noise"), "must be >= 0");
    require(p.mlp.loss_scale > 0.0, o.field("loss_scale"), "must be positive");
    p.n_samples = p.mlp.n_samples;
  } else {
    throw ConfigError(o.field("kind"), "unknown problem '" + kind +
                                           "' (expected quadratic, logistic or mlp)");
  }
  return p;
}

void parse_polar(const Obj& parent, OptimizerConfig& c) {
  if (!parent.has("polar")) return;
  Obj o(parent.at("polar"), parent.field("polar"));
  o.allow({"backend", "iterations", "variant"});
  const std::string backend = o.string("backend", "newton_schulz");
  if (backend == "exact") {
    c.polar_backend = PolarBackend::exact;
  } else if (backend == "newton_schulz") {
    c.polar_backend = PolarBackend::newton_schulz;
  } else {
    throw ConfigError(o.field("backend"), "expected exact or newton_schulz");
  }
  const auto iters = o.integer("iterations", 5);
  require(iters >= 1 && iters <= 50, o.field("iterations"), "must lie in [1, 50]");
  c.ns.iterations = static_cast<int>(iters);
  const std::string variant = o.string("variant", "quintic");
  if (variant == "quintic") {
    c.ns.variant = NsVariant::quintic;
  } else if (variant == "cubic") {
    c.ns.variant = NsVariant::cubic;
  } else {
    throw ConfigError(o.field("variant"), "expected quintic or cubic");
  }
}

void parse_schedule(const Obj& parent, OptimizerConfig& c) {
  if (!parent.has("schedule")) return;
  Obj o(parent.at("schedule"), parent.field("schedule"));
  o.allow({"type", "C"});
  const std::string type = o.string("type", "constant");
  if (type == "constant") {
    c.schedule = Schedule::constant;
    require(!o.has("C"), o.field("C"), "only valid with type inv_sqrt_horizon");
  } else if (type == "inv_sqrt_horizon") {
    c.schedule = Schedule::inv_sqrt_horizon;
    c.schedule_c = o.number("C", 1.0);
    require(c.schedule_c > 0.0, o.field("C"), "must be positive");
  } else {
    throw ConfigError(o.field("type"), "expected constant or inv_sqrt_horizon");
  }
}

bool valid_label(const std::string& s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.';
  });
}

OptimizerConfig parse_optimizer(const json& j, const std::string& path) {
  Obj o(j, path);
  OptimizerConfig c;
  const std::string kind = o.required_string("kind");
  if (kind == "fismo") {
    o.allow({"label", "kind", "lr", "schedule", "weight_decay", "bias_lr", "beta", "gamma",
             "c_gamma", "mu", "polar"});
    c.kind = OptimizerKind::fismo;
  } else if (kind == "muon") {
    o.allow({"label", "kind", "lr", "schedule", "weight_decay", "bias_lr", "beta", "polar"});
    c.kind = OptimizerKind::muon;
  } else if (kind == "adamw") {
    o.allow({"label", "kind", "lr", "schedule", "weight_decay", "bias_lr", "beta1", "beta2",
             "eps"});
    c.kind = OptimizerKind::adamw;
    c.lr = 1e-3;
  } else if (kind == "sgd") {
    o.allow({"label", "kind", "lr", "schedule", "weight_decay", "momentum"});
    c.kind = OptimizerKind::sgd;
    c.lr = 0.05;
  } else {
    throw ConfigError(o.field("kind"), "unknown optimizer '" + kind +
                                           "' (expected fismo, muon, adamw or sgd)");
  }
  c.label = o.string("label", kind);
  require(valid_label(c.label), o.field("label"),
          "labels may contain only letters, digits, '_', '-' and '.'");
  c.lr = o.number("lr", c.lr);
  require(c.lr > 0.0, o.field("lr"), "must be positive");
  parse_schedule(o, c);
  c.weight_decay = o.number("weight_decay", 0.0);
  require(c.weight_decay >= 0.0, o.field("weight_decay"), "must be >= 0");
  c.bias_lr = o.number("bias_lr", c.bias_lr);
  require(c.bias_lr > 0.0, o.field("bias_lr"), "must be positive");
  c.beta = o.number("beta", c.beta);
  require(c.beta >= 0.0 && c.beta < 1.0, o.field("beta"), "must lie in [0, 1)");
  if (o.has("gamma")) {
    c.gamma = o.number("gamma", 0.0);
    require(*c.gamma >= 0.0 && *c.gamma <= 1.0, o.field("gamma"), "must lie in [0, 1]");
  }
  c.c_gamma = o.number("c_gamma", c.c_gamma);
  require(c.c_gamma > 0.0, o.field("c_gamma"), "must be positive");
  c.mu = o.number("mu", c.mu);
  require(c.mu > 0.0, o.field("mu"), "must be positive");
  c.momentum = o.number("momentum", c.momentum);
  require(c.momentum >= 0.0 && c.momentum < 1.0, o.field("momentum"), "must lie in [0, 1)");
  c.beta1 = o.number("beta1", c.beta1);
  require(c.beta1 >= 0.0 && c.beta1 < 1.0, o.field("beta1"), "must lie in [0, 1)");
  c.beta2 = o.number("beta2", c.beta2);
  require(c.beta2 >= 0.0 && c.beta2 < 1.0, o.field("beta2"), "must lie in [0, 1)");
  c.eps = o.number("eps", c.eps);
  require(c.eps >= 0.0, o.field("eps"), "must be >= 0");
  parse_polar(o, c);
  return c;
}

json problem_json(const ProblemConfig& p) {
  json j;
  j["kind"] = to_string(p.kind);
  j["seed"] = p.seed;
  switch (p.kind) {
    case ProblemKind::quadratic:
      j["m"] = p.m;
      j["n"] = p.n;
      break;
    case ProblemKind::logistic:
      j["m"] = p.m;
      j["n"] = p.n;
      j["n_samples"] = p.n_samples;
      break;
    case ProblemKind::mlp:
      j["layer_dims"] = p.mlp.layer_dims;
      j["n_samples"] = p.mlp.n_samples;
      j["input_noise"] = p.mlp.input_noise;
      j["separation"] = p.mlp.separation;
      j["loss_scale"] = p.mlp.loss_scale;
      break;
  }
  return j;
}

json optimizer_json(const OptimizerConfig& c) {
  json j;
  j["label"] = c.label;
  j["kind"] = to_string(c.kind);
  j["lr"] = c.lr;
  if (c.schedule == Schedule::constant) {
    j["schedule"] = {{"type", "constant"}};
  } else {
    j["schedule"] = {{"type", "inv_sqrt_horizon"}, {"C", c.schedule_c}};
  }
  j["weight_decay"] = c.weight_decay;
  auto polar = [&] {
    return json{{"backend", c.polar_backend == PolarBackend::exact ? "exact" : "newton_schulz"},
                {"iterations", c.ns.iterations},
                {"variant", c.ns.variant == NsVariant::quintic ? "quintic" : "cubic"}};
  };
  switch (c.kind) {
    case OptimizerKind::fismo:
      j["bias_lr"] = c.bias_lr;
      j["beta"] = c.beta;
      j["gamma"] = c.gamma ? json(*c.gamma) : json(nullptr);
      j["c_gamma"] = c.c_gamma;
      j["mu"] = c.mu;
      j["polar"] = polar();
      break;
    case OptimizerKind::muon:
      j["bias_lr"] = c.bias_lr;
      j["beta"] = c.beta;
      j["polar"] = polar();
      break;
    case OptimizerKind::adamw:
      j["bias_lr"] = c.bias_lr;
      j["beta1"] = c.beta1;
      j["beta2"] = c.beta2;
      j["eps"] = c.eps;
      break;
    case OptimizerKind::sgd:
      j["momentum"] = c.momentum;
      break;
  }
  return j;
}

json config_json(const RunConfig& c) {
  json j;
  j["name"] = c.name;
  j["problem"] = problem_json(c.problem);
  j["optimizers"] = json::array();
  for (const auto& o : c.optimizers) j["optimizers"].push_back(optimizer_json(o));
  j["horizon"] = c.horizon;
  j["batch_size"] = c.batch_size;
  j["full_batch"] = c.full_batch;
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir.generic_string();
  j["snapshot_every"] = c.snapshot_every;
  j["record_wall_time"] = c.record_wall_time;
  j["threads"] = c.threads;
  return j;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("malformed JSON: ") + e.what());
  }
  Obj o(j, "");
  o.allow({"name", "problem", "optimizers", "horizon", "batch_size", "full_batch", "seeds",
           "output_dir", "snapshot_every", "record_wall_time", "threads"});
  RunConfig c;
  c.name = o.string("name", c.name);
  if (!o.has("problem")) throw ConfigError("problem", "missing required key");
  c.problem = parse_problem(o.at("problem"));

  if (!o.has("optimizers")) throw ConfigError("optimizers", "missing required key");
  const json& opts = o.at("optimizers");
  require(opts.is_array() && !opts.empty(), "optimizers", "expected a non-empty array");
  std::set<std::string> labels;
  for (std::size_t i = 0; i < opts.size(); ++i) {
    const std::string path = "optimizers[" + std::to_string(i) + "]";
    c.optimizers.push_back(parse_optimizer(opts[i], path));
    require(labels.insert(c.optimizers.back().label).second, path + ".label",
            "duplicate label '" + c.optimizers.back().label + "'");
  }

  c.horizon = o.integer("horizon", c.horizon);
  require(c.horizon >= 1, "horizon", "must be >= 1");
  const auto batch = o.integer("batch_size", 64);
  require(batch >= 1, "batch_size", "must be >= 1");
  c.batch_size = static_cast<std::size_t>(batch);
  c.full_batch = o.boolean("full_batch", false);
  if (!c.full_batch && c.problem.kind != ProblemKind::quadratic) {
    require(c.batch_size <= c.problem.n_samples, "batch_size",
            "exceeds problem.n_samples (" + std::to_string(c.problem.n_samples) + ")");
  }
  if (o.has("seeds")) {
    const json& seeds = o.at("seeds");
    require(seeds.is_array() && !seeds.empty(), "seeds", "expected a non-empty array");
    c.seeds.clear();
    std::set<std::uint64_t> seen;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      const std::string f = "seeds[" + std::to_string(i) + "]";
      require(seeds[i].is_number_unsigned() ||
                  (seeds[i].is_number_integer() && seeds[i].get<std::int64_t>() >= 0),
              f, "expected a non-negative integer");
      const auto s = seeds[i].get<std::uint64_t>();
      require(seen.insert(s).second, f, "duplicate seed");
      c.seeds.push_back(s);
    }
  }
  c.output_dir = o.string("output_dir", c.output_dir.string());
  c.snapshot_every = o.integer("snapshot_every", 0);
  require(c.snapshot_every >= 0, "snapshot_every", "must be >= 0");
  c.record_wall_time = o.boolean("record_wall_time", false);
  const auto threads = o.integer("threads", 0);
  require(threads >= 0, "threads", "must be >= 0");
  c.threads = static_cast<int>(threads);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const RunConfig& cfg, int indent) {
  return config_json(cfg).dump(indent);
}

std::unique_ptr<Problem> make_problem(const ProblemConfig& cfg, std::uint64_t run_seed) {
  const std::uint64_t seed = mix_seed(cfg.seed, run_seed);
  switch (cfg.kind) {
    case ProblemKind::quadratic:
      return make_quadratic_problem(cfg.m, cfg.n, seed);
    case ProblemKind::logistic:
      return make_logistic_problem(cfg.m, cfg.n, cfg.n_samples, seed);
    case ProblemKind::mlp:
      return make_mlp_problem(cfg.mlp, seed);
  }
  throw InvalidInput("make_problem: unknown problem kind");
}

// -------------------------------------------------------------- formatting

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string metrics_csv(std::span<const MetricsRecord> records) {
  std::string out = kMetricsHeader;
  out += '\n';
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  // Skipped steps have no update.
  auto kappa = [](double v) { return std::isnan(v) ? std::string() : format_double(v); };
  for (const auto& r : records) {
    out += std::to_string(r.step) + ',' + format_double(r.loss) + ',' +
           format_double(r.grad_nuclear) + ',' + format_double(r.grad_frobenius) + ',' +
           kappa(r.update_kappa) + ',' + opt(r.kpq) + ',' + opt(r.momentum_tracking) +
           ',' + std::to_string(r.wall_ns) + '\n';
  }
  return out;
}

namespace {

double parse_number(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw InvalidInput("metrics CSV: bad number '" + s + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot write " + p.string());
  out << bytes;
}

json matrix_json(const Matrix& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.values()}};
}

Matrix matrix_from_json(const json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("data").get<std::vector<double>>());
}

}  // namespace

std::vector<MetricsRecord> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw InvalidInput("metrics CSV: unexpected header");
  }
  std::vector<MetricsRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 8) throw InvalidInput("metrics CSV: expected 8 fields");
    MetricsRecord r;
    r.step = std::stol(f[0]);
    r.loss = parse_number(f[1]);
    r.grad_nuclear = parse_number(f[2]);
    r.grad_frobenius = parse_number(f[3]);
    r.update_kappa = f[4].empty() ? std::numeric_limits<double>::quiet_NaN() : parse_number(f[4]);
    if (!f[5].empty()) r.kpq = parse_number(f[5]);
    if (!f[6].empty()) r.momentum_tracking = parse_number(f[6]);
    r.wall_ns = std::stoll(f[7]);
    out.push_back(r);
  }
  return out;
}

std::string snapshot_to_json_line(const Snapshot& s) {
  json j;
  j["step"] = s.step;
  j["param"] = s.param;
  j["eta"] = s.eta;
  j["beta"] = s.beta;
  j["gamma"] = s.gamma;
  j["mu"] = s.mu;
  j["loss_prev"] = s.loss_prev;
  j["loss"] = s.loss;
  j["weights_prev"] = matrix_json(s.weights_prev);
  j["weights"] = matrix_json(s.weights);
  j["grad"] = matrix_json(s.grad);
  j["full_grad"] = matrix_json(s.full_grad);
  j["p"] = matrix_json(s.p);
  j["q"] = matrix_json(s.q);
  j["momentum"] = matrix_json(s.momentum);
  return j.dump();
}

Snapshot snapshot_from_json_line(const std::string& line) {
  const json j = json::parse(line);
  Snapshot s;
  s.step = j.at("step").get<long>();
  s.param = j.at("param").get<std::size_t>();
  s.eta = j.at("eta").get<double>();
  s.beta = j.at("beta").get<double>();
  s.gamma = j.at("gamma").get<double>();
  s.mu = j.at("mu").get<double>();
  s.loss_prev = j.at("loss_prev").get<double>();
  s.loss = j.at("loss").get<double>();
  s.weights_prev = matrix_from_json(j.at("weights_prev"));
  s.weights = matrix_from_json(j.at("weights"));
  s.grad = matrix_from_json(j.at("grad"));
  s.full_grad = matrix_from_json(j.at("full_grad"));
  s.p = matrix_from_json(j.at("p"));
  s.q = matrix_from_json(j.at("q"));
  s.momentum = matrix_from_json(j.at("momentum"));
  return s;
}

std::string checksum_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// --------------------------------------------------------------------- run

namespace {

OptimizerState make_state(const OptimizerConfig& c, Matrix w, double eta) {
  switch (c.kind) {
    case OptimizerKind::fismo: {
      FismoHyper h;
      h.eta = eta;
      h.beta = c.beta;
      h.mu = c.mu;
      h.c_gamma = c.c_gamma;
      h.gamma = c.gamma;
      h.weight_decay = c.weight_decay;
      h.polar_backend = c.polar_backend;
      h.ns = c.ns;
      return FismoState::init(std::move(w), h);
    }
    case OptimizerKind::muon: {
      BaselineHyper h;
      h.kind = BaselineKind::muon;
      h.lr = eta;
      h.momentum = c.beta;
      h.weight_decay = c.weight_decay;
      h.polar_backend = c.polar_backend;
      h.ns = c.ns;
      return BaselineState::init(std::move(w), h);
    }
    case OptimizerKind::adamw: {
      BaselineHyper h;
      h.kind = BaselineKind::adamw;
      h.lr = eta;
      h.beta1 = c.beta1;
      h.beta2 = c.beta2;
      h.eps = c.eps;
      h.weight_decay = c.weight_decay;
      return BaselineState::init(std::move(w), h);
    }
    case OptimizerKind::sgd: {
      BaselineHyper h;
      h.kind = BaselineKind::sgd_momentum;
      h.lr = eta;
      h.momentum = c.momentum;
      h.weight_decay = c.weight_decay;
      return BaselineState::init(std::move(w), h);
    }
  }
  throw InvalidInput("make_state: unknown optimizer kind");
}

// Vector parameters: SGD keeps its own rule, every other optimizer falls back
// to element-wise AdamW.
OptimizerState make_vector_state(const OptimizerConfig& c, Matrix w, double eta) {
  if (c.kind == OptimizerKind::sgd) return make_state(c, std::move(w), eta);
  BaselineHyper h;
  h.kind = BaselineKind::adamw;
  h.lr = c.kind == OptimizerKind::adamw ? eta : c.bias_lr;
  h.beta1 = c.beta1;
  h.beta2 = c.beta2;
  h.eps = c.eps;
  return BaselineState::init(std::move(w), h);
}

std::optional<double> tracking_of(const OptimizerState& s, const StepTrace& trace) {
  if (trace.whitened_grad.empty()) return std::nullopt;
  if (const auto* f = std::get_if<FismoState>(&s)) {
    return nuclear_norm(trace.whitened_grad - f->momentum);
  }
  const auto& b = std::get<BaselineState>(s);
  if (b.hyper.kind != BaselineKind::muon) return std::nullopt;
  return nuclear_norm(trace.whitened_grad - b.first);
}

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string cell_stem(const std::string& label, std::uint64_t seed) {
  return label + "__seed" + std::to_string(seed);
}

}  // namespace

CellResult run_cell(const RunConfig& cfg, const OptimizerConfig& opt, std::uint64_t seed) {
  CellResult cell;
  cell.label = opt.label;
  cell.seed = seed;
  cell.status = "OK";

  const auto problem = make_problem(cfg.problem, seed);
  const auto specs = problem->params();
  Params w = problem->initial_params();
  const double eta = opt.resolved_lr(cfg.horizon);
  std::vector<OptimizerState> states;
  for (std::size_t k = 0; k < specs.size(); ++k) {
    states.push_back(specs[k].is_matrix ? make_state(opt, w[k], eta)
                                        : make_vector_state(opt, w[k], eta));
  }

  const bool full = cfg.full_batch || problem->deterministic();
  const bool snapshots = cfg.snapshot_every > 0 && opt.kind == OptimizerKind::fismo;
  const std::uint64_t batch_stream = mix_seed(seed, 0x62617463ULL);
  auto [loss_prev, grad_prev] = problem->evaluate(w);

  for (long t = 1; t <= cfg.horizon; ++t) {
    const auto start = std::chrono::steady_clock::now();
    const Params g = full ? grad_prev
                          : problem->minibatch_gradient(w, cfg.batch_size,
                                                        mix_seed(batch_stream, t));
    const Params w_prev = w;
    std::vector<StepTrace> traces(specs.size());
    try {
      for (std::size_t k = 0; k < specs.size(); ++k) {
        auto r = step(states[k], g[k]);
        states[k] = std::move(r.state);
        traces[k] = std::move(r.trace);
        w[k] = weights_of(states[k]);
      }
    } catch (const Error& e) {
      cell.status = "FAILED";
      cell.failure = "step " + std::to_string(t) + ": " + e.what();
      break;
    }
    const auto elapsed = std::chrono::steady_clock::now() - start;

    MetricsRecord rec;
    rec.step = t;
    auto [loss_now, grad_now] = problem->evaluate(w);
    rec.loss = loss_now;
    const bool finite = std::isfinite(rec.loss);
    if (finite) {
      double fro2 = 0.0;
      for (const Matrix& gk : grad_now) {
        rec.grad_nuclear += nuclear_norm(gk);
        const double f = frobenius_norm(gk);
        fro2 += f * f;
      }
      rec.grad_frobenius = std::sqrt(fro2);
    } else {
      rec.grad_nuclear = rec.grad_frobenius = std::numeric_limits<double>::quiet_NaN();
    }
    std::vector<double> kappas, kpqs, tracks;
    for (std::size_t k = 0; k < specs.size(); ++k) {
      if (!specs[k].is_matrix) continue;
      if (!traces[k].skipped && frobenius_norm(traces[k].direction) > 0.0) {
        kappas.push_back(condition_number(traces[k].direction));
      }
      if (auto v = kpq_of(states[k])) kpqs.push_back(*v);
      if (auto v = tracking_of(states[k], traces[k])) tracks.push_back(*v);
    }
    rec.update_kappa = mean_of(kappas).value_or(std::numeric_limits<double>::quiet_NaN());
    rec.kpq = mean_of(kpqs);
    rec.momentum_tracking = mean_of(tracks);
    rec.wall_ns =
        cfg.record_wall_time
            ? std::chrono::duration_cast<std::chrono::nanoseconds>(elapsed).count()
            : 0;
    cell.records.push_back(rec);

    if (snapshots && t % cfg.snapshot_every == 0) {
      for (std::size_t k = 0; k < specs.size(); ++k) {
        const auto* f = std::get_if<FismoState>(&states[k]);
        if (!f) continue;
        Snapshot s;
        s.step = t;
        s.param = k;
        s.eta = f->eta;
        s.beta = f->beta;
        s.gamma = f->precond.gamma();
        s.mu = f->precond.mu();
        s.loss_prev = loss_prev;
        s.loss = rec.loss;
        s.weights_prev = w_prev[k];
        s.weights = w[k];
        s.grad = g[k];
        s.full_grad = grad_prev[k];
        s.p = f->precond.p().matrix();
        s.q = f->precond.q().matrix();
        s.momentum = f->momentum;
        cell.snapshots.push_back(std::move(s));
      }
    }

    if (!finite) {
      cell.status = "FAILED";
      cell.failure = "non-finite loss at step " + std::to_string(t);
      break;
    }
    loss_prev = rec.loss;
    grad_prev = std::move(grad_now);
  }
  cell.final_loss = cell.records.empty() ? loss_prev : cell.records.back().loss;
  return cell;
}

RunResult run(const RunConfig& config) {
  RunResult result;
  result.config = config;
  struct Task {
    const OptimizerConfig* opt;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (const auto& o : config.optimizers) {
    for (auto s : config.seeds) tasks.push_back({&o, s});
  }
  result.cells.resize(tasks.size());
  std::vector<std::string> errors(tasks.size());

  unsigned workers = config.threads > 0 ? static_cast<unsigned>(config.threads)
                                        : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(tasks.size()));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        result.cells[i] = run_cell(config, *tasks[i].opt, tasks[i].seed);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < workers; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (!e.empty()) throw InvalidInput("run: " + e);
  }

  std::filesystem::create_directories(config.output_dir);
  const auto probe = make_problem(config.problem, config.seeds.front());
  json manifest;
  manifest["version"] = version_string();
  manifest["config"] = config_json(config);
  manifest["problem_info"] = {
      {"name", probe->name()},
      {"parameters", probe->params().size()},
      {"single_parameter", probe->params().size() == 1},
      {"deterministic", probe->deterministic()},
      {"smoothness_L_per_seed", json::array()},
  };
  json smooth = json::array();
  for (auto s : config.seeds) {
    const auto p = make_problem(config.problem, s);
    smooth.push_back(p->smoothness_L() ? json(*p->smoothness_L()) : json(nullptr));
  }
  manifest["problem_info"]["smoothness_L_per_seed"] = smooth;
  manifest["kappa_averaging"] = kKappaConvention;
  manifest["csv_header"] = kMetricsHeader;
  bool all_ok = true;
  json cells = json::array();
  for (auto& cell : result.cells) {
    const std::string stem = cell_stem(cell.label, cell.seed);
    cell.csv_path = config.output_dir / (stem + ".csv");
    const std::string csv = metrics_csv(cell.records);
    write_file(cell.csv_path, csv);
    json jc;
    jc["label"] = cell.label;
    jc["seed"] = cell.seed;
    jc["status"] = cell.status;
    if (!cell.failure.empty()) jc["failure"] = cell.failure;
    jc["steps_completed"] = cell.records.size();
    jc["final_loss"] = format_double(cell.final_loss);
    jc["csv"] = stem + ".csv";
    jc["csv_fnv1a64"] = checksum_hex(csv);
    if (!cell.snapshots.empty()) {
      std::string lines;
      for (const auto& s : cell.snapshots) lines += snapshot_to_json_line(s) + '\n';
      cell.snapshot_path = config.output_dir / (stem + ".snapshots.jsonl");
      write_file(cell.snapshot_path, lines);
      jc["snapshots"] = stem + ".snapshots.jsonl";
      jc["snapshots_fnv1a64"] = checksum_hex(lines);
    }
    if (cell.status != "OK") all_ok = false;
    cells.push_back(jc);
  }
  manifest["status"] = all_ok ? "OK" : "FAILED";
  manifest["cells"] = cells;
  result.manifest_path = config.output_dir / "manifest.json";
  write_file(result.manifest_path, manifest.dump(2) + "\n");
  return result;
}

// ----------------------------------------------------------------- compare

LoadedRun load_run(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) {
    throw InvalidInput("load_run: no manifest.json in " + dir.string());
  }
  const json m = json::parse(read_file(manifest_path));
  LoadedRun run;
  run.dir = dir;
  run.problem_key = m.at("config").at("problem").dump();
  run.horizon = m.at("config").at("horizon").get<long>();
  const json& info = m.at("problem_info");
  run.single_parameter = info.at("single_parameter").get<bool>();
  const json& smooth = info.at("smoothness_L_per_seed");
  if (!smooth.empty() && !smooth.front().is_null()) run.smoothness_L = smooth.front().get<double>();
  for (const json& c : m.at("cells")) {
    LoadedCell cell;
    cell.label = c.at("label").get<std::string>();
    cell.seed = c.at("seed").get<std::uint64_t>();
    cell.status = c.at("status").get<std::string>();
    const std::string csv = read_file(dir / c.at("csv").get<std::string>());
    if (checksum_hex(csv) != c.at("csv_fnv1a64").get<std::string>()) {
      throw InvalidInput("load_run: checksum mismatch for " + c.at("csv").get<std::string>());
    }
    cell.records = parse_metrics_csv(csv);
    if (c.contains("snapshots")) cell.snapshot_path = dir / c.at("snapshots").get<std::string>();
    run.cells.push_back(std::move(cell));
  }
  return run;
}

CompareSummary compare(std::span<const LoadedRun> runs) {
  if (runs.empty()) throw InvalidInput("compare: no runs given");
  for (const auto& r : runs) {
    if (r.problem_key != runs.front().problem_key) {
      throw InvalidInput("compare: runs use different problems (" + runs.front().problem_key +
                         " vs " + r.problem_key + ")");
    }
    if (r.horizon != runs.front().horizon) {
      throw InvalidInput("compare: runs use different horizons");
    }
  }
  std::vector<std::string> order;
  std::map<std::string, std::vector<const LoadedCell*>> by_label;
  for (const auto& r : runs) {
    for (const auto& c : r.cells) {
      if (!by_label.contains(c.label)) order.push_back(c.label);
      by_label[c.label].push_back(&c);
    }
  }
  CompareSummary out;
  for (const auto& label : order) {
    std::vector<double> finals, bests, kappas, avgs;
    for (const LoadedCell* c : by_label[label]) {
      if (c->records.empty()) continue;
      finals.push_back(c->records.back().loss);
      double best = std::numeric_limits<double>::infinity();
      double avg = 0.0;
      for (const auto& r : c->records) {
        best = std::min(best, r.loss);
        avg += r.grad_nuclear;
      }
      bests.push_back(best);
      avgs.push_back(avg / static_cast<double>(c->records.size()));
      kappas.push_back(run_median_kappa(c->records));
    }
    out.rows.push_back({label, by_label[label].size(), median(finals), median(bests),
                        median(kappas), median(avgs)});
  }
  return out;
}

std::string CompareSummary::to_json() const {
  json j = json::array();
  for (const auto& r : rows) {
    j.push_back({{"label", r.label},
                 {"seeds", r.seeds},
                 {"final_loss", format_double(r.final_loss)},
                 {"best_loss", format_double(r.best_loss)},
                 {"median_kappa", format_double(r.median_kappa)},
                 {"avg_grad_nuclear", format_double(r.avg_grad_nuclear)}});
  }
  return json{{"rows", j}, {"kappa_averaging", kKappaConvention}}.dump(2);
}

std::string CompareSummary::to_table() const {
  std::ostringstream os;
  os << std::left << std::setw(18) << "optimizer" << std::right << std::setw(6) << "seeds"
     << std::setw(15) << "final_loss" << std::setw(15) << "best_loss" << std::setw(15)
     << "median_kappa" << std::setw(17) << "avg_grad_nuc" << '\n';
  os << std::setprecision(6);
  for (const auto& r : rows) {
    os << std::left << std::setw(18) << r.label << std::right << std::setw(6) << r.seeds
       << std::setw(15) << r.final_loss << std::setw(15) << r.best_loss << std::setw(15)
       << r.median_kappa << std::setw(17) << r.avg_grad_nuclear << '\n';
  }
  return os.str();
}

std::vector<std::filesystem::path> expand_glob(const std::string& pattern) {
  glob_t g{};
  std::vector<std::filesystem::path> out;
  const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
  if (rc == 0) {
    for (std::size_t i = 0; i < g.gl_pathc; ++i) {
      std::filesystem::path p = g.gl_pathv[i];
      if (p.filename() == "manifest.json") p = p.parent_path();
      if (std::filesystem::exists(p / "manifest.json")) out.push_back(p);
    }
  }
  globfree(&g);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ------------------------------------------------------------------- audit

std::vector<CellAudit> audit_run(const std::filesystem::path& dir) {
  const LoadedRun run = load_run(dir);
  const json m = json::parse(read_file(dir / "manifest.json"));
  const auto seeds = m.at("config").at("seeds").get<std::vector<std::uint64_t>>();
  const json& smooth = m.at("problem_info").at("smoothness_L_per_seed");

  std::vector<CellAudit> out;
  bool any = false;
  for (const auto& cell : run.cells) {
    if (cell.snapshot_path.empty()) continue;
    any = true;
    std::optional<double> L;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      if (seeds[i] == cell.seed && !smooth[i].is_null()) L = smooth[i].get<double>();
    }
    std::map<std::size_t, std::vector<Snapshot>> by_param;
    std::istringstream in(read_file(cell.snapshot_path));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      Snapshot s = snapshot_from_json_line(line);
      by_param[s.param].push_back(std::move(s));
    }
    for (auto& [param, snaps] : by_param) {
      std::sort(snaps.begin(), snaps.end(),
                [](const Snapshot& a, const Snapshot& b) { return a.step < b.step; });
      AuditInputs inputs;
      inputs.smoothness_L = L;
      inputs.single_parameter = run.single_parameter;
      out.push_back({cell.label, cell.seed, param, lemma_audit(snaps, inputs)});
    }
  }
  if (!any) throw InsufficientData("audit: run has no snapshots (set snapshot_every = 1)");
  return out;
}

std::string audit_to_json(std::span<const CellAudit> audits) {
  json j = json::array();
  for (const auto& a : audits) {
    json checks = json::array();
    for (const auto& c : a.report.checks) {
      checks.push_back({{"lemma_id", c.lemma_id},
                        {"pass", c.pass},
                        {"worst_slack", format_double(c.worst_slack)},
                        {"step_of_worst", c.step_of_worst},
                        {"note", c.note}});
    }
    j.push_back({{"label", a.label},
                 {"seed", a.seed},
                 {"param", a.param},
                 {"all_pass", a.report.all_pass()},
                 {"checks", checks}});
  }
  return j.dump(2);
}

}  // namespace fismo
