#include "mapod/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mapod/berens.hpp"
#include "mapod/chaos.hpp"
#include "mapod/doe.hpp"
#include "mapod/error.hpp"
#include "mapod/features.hpp"
#include "mapod/kriging.hpp"
#include "mapod/sensitivity.hpp"
#include "mapod/stats.hpp"

namespace mapod {

using nlohmann::json;

namespace {

const std::vector<std::string> kMethodOrder{"berens", "binomial", "chaos", "kriging"};

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// ---- config parsing ----

const json* child(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() || it->is_null() ? nullptr : &*it;
}

double get_number(const json& j, const char* key, const std::string& field, double fallback) {
  const auto* v = child(j, key);
  if (!v) return fallback;
  if (!v->is_number()) throw ConfigError(field, "must be a number");
  return v->get<double>();
}

double require_number(const json& j, const char* key, const std::string& field) {
  const auto* v = child(j, key);
  if (!v) throw ConfigError(field, "is required");
  if (!v->is_number()) throw ConfigError(field, "must be a number");
  return v->get<double>();
}

std::size_t get_count(const json& j, const char* key, const std::string& field, std::size_t fallback) {
  const auto* v = child(j, key);
  if (!v) return fallback;
  if (!v->is_number_integer() || v->get<long long>() < 0) throw ConfigError(field, "must be a non-negative integer");
  return v->get<std::size_t>();
}

std::uint64_t get_seed(const json& j, const char* key, const std::string& field, std::uint64_t fallback) {
  const auto* v = child(j, key);
  if (!v) return fallback;
  if (!v->is_number_unsigned()) throw ConfigError(field, "must be an unsigned integer");
  return v->get<std::uint64_t>();
}

bool get_bool(const json& j, const char* key, const std::string& field, bool fallback) {
  const auto* v = child(j, key);
  if (!v) return fallback;
  if (!v->is_boolean()) throw ConfigError(field, "must be true or false");
  return v->get<bool>();
}

std::string get_string(const json& j, const char* key, const std::string& field, const std::string& fallback) {
  const auto* v = child(j, key);
  if (!v) return fallback;
  if (!v->is_string()) throw ConfigError(field, "must be a string");
  return v->get<std::string>();
}

std::vector<double> get_numbers(const json& j, const char* key, const std::string& field,
                                std::vector<double> fallback) {
  const auto* v = child(j, key);
  if (!v) return fallback;
  if (!v->is_array()) throw ConfigError(field, "must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : *v) {
    if (!e.is_number()) throw ConfigError(field, "must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

const json& object_or_empty(const json& j, const char* key, const std::string& field) {
  static const json empty = json::object();
  const auto* v = child(j, key);
  if (!v) return empty;
  if (!v->is_object()) throw ConfigError(field, "must be an object");
  return *v;
}

InputSpec parse_input(const json& j, std::size_t index) {
  const std::string field = "inputs[" + std::to_string(index) + "]";
  if (!j.is_object()) throw ConfigError(field, "must be an object");
  InputSpec spec;
  spec.name = get_string(j, "name", field + ".name", "");
  if (spec.name.empty()) throw ConfigError(field + ".name", "is required");
  const std::string law = get_string(j, "law", field + ".law", "");
  if (law == "gaussian") {
    spec.family = Gaussian{require_number(j, "mean", field + ".mean"), require_number(j, "sd", field + ".sd")};
  } else if (law == "uniform") {
    spec.family = Uniform{require_number(j, "lo", field + ".lo"), require_number(j, "hi", field + ".hi")};
  } else if (law == "conditional-uniform") {
    spec.family = ConditionalUniform{get_string(j, "source", field + ".source", ""),
                                     get_number(j, "lo_offset", field + ".lo_offset", 0.0),
                                     require_number(j, "hi", field + ".hi")};
  } else {
    throw ConfigError(field + ".law", "must be gaussian, uniform or conditional-uniform");
  }
  const std::string role = get_string(j, "role", field + ".role", "nuisance");
  if (role == "defect-size") {
    spec.role = InputRole::DefectSize;
  } else if (role == "nuisance") {
    spec.role = InputRole::Nuisance;
  } else {
    throw ConfigError(field + ".role", "must be defect-size or nuisance");
  }
  const auto flaw = get_count(j, "flaw", field + ".flaw", 0);
  if (flaw > 2) throw ConfigError(field + ".flaw", "must be 0, 1 or 2");
  spec.flaw = static_cast<int>(flaw);
  return spec;
}

SyntheticModelSpec parse_synthetic(const json& j, RunConfig& cfg) {
  SyntheticModelSpec s;
  try {
    s.kind = parse_synthetic_kind(get_string(j, "model", "synthetic.model", "linear-gaussian"));
  } catch (const SpecError& e) {
    throw ConfigError("synthetic.model", e.what());
  }
  s.beta0 = get_number(j, "beta0", "synthetic.beta0", s.beta0);
  s.beta1 = get_number(j, "beta1", "synthetic.beta1", s.beta1);
  s.sigma = get_number(j, "sigma", "synthetic.sigma", s.sigma);
  s.lambda = get_number(j, "lambda", "synthetic.lambda", s.lambda);
  s.input1 = get_string(j, "input1", "synthetic.input1", s.input1);
  s.input2 = get_string(j, "input2", "synthetic.input2", s.input2);
  s.c1 = get_number(j, "c1", "synthetic.c1", 0.0);
  s.c2 = get_number(j, "c2", "synthetic.c2", 0.0);
  s.c12 = get_number(j, "c12", "synthetic.c12", 0.0);
  cfg.synthetic_n = get_count(j, "n", "synthetic.n", cfg.synthetic_n);
  if (child(j, "seed")) cfg.synthetic_seed = get_seed(j, "seed", "synthetic.seed", 0);
  return s;
}

std::vector<std::string> parse_methods(const json& v, const std::string& field) {
  if (!v.is_array()) throw ConfigError(field, "must be an array of method names");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw ConfigError(field, "must be an array of method names");
    out.push_back(e.get<std::string>());
  }
  return out;
}

}  // namespace

void RunConfig::validate() const {
  if (!threshold) throw ConfigError("threshold", "is required");
  if (!(*threshold > 0.0) || !std::isfinite(*threshold)) throw ConfigError("threshold", "must be positive");
  if (methods.empty()) throw ConfigError("methods", "at least one method is required");
  std::set<std::string> seen;
  for (const auto& m : methods) {
    if (std::find(kMethodOrder.begin(), kMethodOrder.end(), m) == kMethodOrder.end()) {
      throw ConfigError("methods", "unknown method '" + m + "'");
    }
    if (!seen.insert(m).second) throw ConfigError("methods", "method '" + m + "' listed twice");
  }
  if (dataset && synthetic) throw ConfigError("data", "give either data.path or synthetic, not both");
  if (!dataset && !synthetic) throw ConfigError("data", "a dataset path or a synthetic model is required");
  if (synthetic) {
    try {
      synthetic->validate();
    } catch (const SpecError& e) {
      throw ConfigError("synthetic", e.what());
    }
    if (synthetic_n < 3) throw ConfigError("synthetic.n", "must be at least 3");
  }
  if (inputs.defect_size_inputs().empty()) throw ConfigError("inputs", "no input has role defect-size");
  if (grid_points < 2) throw ConfigError("grid.points", "must be at least 2");
  if (grid_lo && grid_hi && !(*grid_lo < *grid_hi)) throw ConfigError("grid", "lo must be below hi");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence", "must be in (0,1)");
  if (!(pod_level > 0.0 && pod_level < 1.0)) throw ConfigError("pod_level", "must be in (0,1)");
  if (berens_draws < 100) throw ConfigError("berens.n_draws", "must be at least 100");
  if (chaos_degrees.empty()) throw ConfigError("chaos.degrees", "at least one degree is required");
  if (chaos_n_mc < 1000) throw ConfigError("chaos.n_mc", "must be at least 1000");
  if (chaos_n_sets < 50) throw ConfigError("chaos.n_sets", "must be at least 50");
  if (kriging_n_mc < 1000) throw ConfigError("kriging.n_mc", "must be at least 1000");
  if (kriging_n_paths < 50) throw ConfigError("kriging.n_paths", "must be at least 50");
  if (kriging_band_points < 2 || kriging_band_points > kriging_n_mc) {
    throw ConfigError("kriging.band_points", "must be between 2 and kriging.n_mc");
  }
  if (kriging_starts < 1) throw ConfigError("kriging.starts", "must be at least 1");
  if (!(lambda_range.lo <= lambda_range.hi)) throw ConfigError("transform", "lambda_min must not exceed lambda_max");
  if (sensitivity.metamodel != "chaos" && sensitivity.metamodel != "kriging") {
    throw ConfigError("sensitivity.metamodel", "must be chaos or kriging");
  }
  if (sensitivity.n_base < 256) throw ConfigError("sensitivity.n_base", "must be at least 256");
  if (sensitivity.grid_points < 2) throw ConfigError("sensitivity.grid_points", "must be at least 2");
  for (double p : sensitivity.levels) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("sensitivity.levels", "must lie in (0,1)");
  }
}

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("<file>", "top level must be an object");
  RunConfig cfg;

  const auto& data = object_or_empty(j, "data", "data");
  if (child(data, "path")) {
    std::filesystem::path p = get_string(data, "path", "data.path", "");
    cfg.dataset = p.is_absolute() ? p : base_dir / p;
  }
  cfg.response = get_string(data, "response", "data.response", cfg.response);
  cfg.flaw_count = get_string(data, "flaw_count", "data.flaw_count", cfg.flaw_count);
  if (const auto* s = child(j, "synthetic")) {
    if (!s->is_object()) throw ConfigError("synthetic", "must be an object");
    cfg.synthetic = parse_synthetic(*s, cfg);
  }

  if (const auto* in = child(j, "inputs")) {
    if (!in->is_array()) throw ConfigError("inputs", "must be an array");
    std::vector<InputSpec> specs;
    for (std::size_t i = 0; i < in->size(); ++i) specs.push_back(parse_input((*in)[i], i));
    try {
      cfg.inputs = InputSet(std::move(specs));
    } catch (const Error& e) {
      throw ConfigError("inputs", e.what());
    }
  }

  if (const auto* t = child(j, "threshold")) {
    if (!t->is_number()) throw ConfigError("threshold", "must be a number");
    cfg.threshold = t->get<double>();
  }
  if (const auto* m = child(j, "methods")) cfg.methods = parse_methods(*m, "methods");

  const auto& tr = object_or_empty(j, "transform", "transform");
  const std::string mode = get_string(tr, "mode", "transform.mode", "fit");
  if (mode == "fit") {
    cfg.transform = TransformMode::Fit;
  } else if (mode == "fixed") {
    cfg.transform = TransformMode::Fixed;
    cfg.lambda = require_number(tr, "lambda", "transform.lambda");
  } else if (mode == "none") {
    cfg.transform = TransformMode::None;
  } else {
    throw ConfigError("transform.mode", "must be fit, fixed or none");
  }
  cfg.lambda_range.lo = get_number(tr, "lambda_min", "transform.lambda_min", cfg.lambda_range.lo);
  cfg.lambda_range.hi = get_number(tr, "lambda_max", "transform.lambda_max", cfg.lambda_range.hi);

  const auto& grid = object_or_empty(j, "grid", "grid");
  if (child(grid, "lo")) cfg.grid_lo = get_number(grid, "lo", "grid.lo", 0.0);
  if (child(grid, "hi")) cfg.grid_hi = get_number(grid, "hi", "grid.hi", 0.0);
  cfg.grid_points = get_count(grid, "points", "grid.points", cfg.grid_points);
  cfg.level = get_number(j, "confidence", "confidence", cfg.level);
  cfg.pod_level = get_number(j, "pod_level", "pod_level", cfg.pod_level);

  const auto& be = object_or_empty(j, "berens", "berens");
  cfg.berens_draws = get_count(be, "n_draws", "berens.n_draws", cfg.berens_draws);
  const auto& ch = object_or_empty(j, "chaos", "chaos");
  if (child(ch, "degrees")) {
    cfg.chaos_degrees.clear();
    for (double d : get_numbers(ch, "degrees", "chaos.degrees", {})) {
      if (d < 1 || d > 10 || d != std::floor(d)) throw ConfigError("chaos.degrees", "degrees must be integers in [1,10]");
      cfg.chaos_degrees.push_back(static_cast<unsigned>(d));
    }
  }
  cfg.chaos_n_mc = get_count(ch, "n_mc", "chaos.n_mc", cfg.chaos_n_mc);
  cfg.chaos_n_sets = get_count(ch, "n_sets", "chaos.n_sets", cfg.chaos_n_sets);
  const auto& kr = object_or_empty(j, "kriging", "kriging");
  cfg.kriging_n_mc = get_count(kr, "n_mc", "kriging.n_mc", cfg.kriging_n_mc);
  cfg.kriging_n_paths = get_count(kr, "n_paths", "kriging.n_paths", cfg.kriging_n_paths);
  cfg.kriging_band_points = get_count(kr, "band_points", "kriging.band_points", cfg.kriging_band_points);
  cfg.kriging_starts = get_count(kr, "starts", "kriging.starts", cfg.kriging_starts);
  cfg.kriging_nugget = get_bool(kr, "nugget", "kriging.nugget", cfg.kriging_nugget);
  const auto& doe = object_or_empty(j, "doe", "doe");
  cfg.doe_n = get_count(doe, "n", "doe.n", cfg.doe_n);

  const auto& se = object_or_empty(j, "sensitivity", "sensitivity");
  auto& ss = cfg.sensitivity;
  ss.enabled = get_bool(se, "enabled", "sensitivity.enabled", ss.enabled);
  ss.metamodel = get_string(se, "metamodel", "sensitivity.metamodel", ss.metamodel);
  ss.n_base = get_count(se, "n_base", "sensitivity.n_base", ss.n_base);
  ss.grid_points = get_count(se, "grid_points", "sensitivity.grid_points", ss.grid_points);
  ss.n_bootstrap = get_count(se, "bootstrap", "sensitivity.bootstrap", ss.n_bootstrap);
  ss.levels = get_numbers(se, "levels", "sensitivity.levels", ss.levels);
  ss.sizes = get_numbers(se, "sizes", "sensitivity.sizes", ss.sizes);
  if (const auto* g = child(se, "groups")) {
    if (!g->is_object()) throw ConfigError("sensitivity.groups", "must map group names to input lists");
    for (auto it = g->begin(); it != g->end(); ++it) {
      const std::string field = "sensitivity.groups." + it.key();
      if (!it->is_array() || it->empty()) throw ConfigError(field, "must be a non-empty array of input names");
      std::vector<std::string> members;
      for (const auto& e : *it) {
        if (!e.is_string()) throw ConfigError(field, "must be a non-empty array of input names");
        members.push_back(e.get<std::string>());
      }
      ss.groups.emplace_back(it.key(), std::move(members));
    }
  }

  cfg.seed = get_seed(j, "seed", "seed", cfg.seed);
  if (child(j, "out")) {
    std::filesystem::path o = get_string(j, "out", "out", "");
    cfg.out_dir = o.is_absolute() ? o : base_dir / o;
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path().empty() ? "." : path.parent_path());
}

std::uint64_t stream_seed(std::uint64_t seed, std::string_view stream) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : stream) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return mix_seed(seed, h);
}

namespace {

// ---- output helpers ----

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp + "'");
    out << content;
    if (!out) throw Error("write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

std::string curve_csv(const PodCurve& c) {
  std::ostringstream o;
  const bool se = !c.mc_stderr.empty();
  o << "a,pod" << (se ? ",mc_stderr" : "") << "\n";
  for (std::size_t j = 0; j < c.grid.size(); ++j) {
    o << num(c.grid[j]) << "," << num(c.pod[j]);
    if (se) o << "," << num(c.mc_stderr[j]);
    o << "\n";
  }
  return o.str();
}

void band_rows(std::ostringstream& o, const PodBand& b, const std::string& prefix) {
  for (std::size_t j = 0; j < b.curve.grid.size(); ++j) {
    o << prefix << num(b.curve.grid[j]) << "," << num(b.curve.pod[j]) << "," << num(b.lower[j]) << ","
      << num(b.upper[j]) << "," << num(b.lower_one_sided[j]) << "\n";
  }
}

std::string band_csv(const PodBand& b) {
  std::ostringstream o;
  o << "a,pod,lower,upper,lower_one_sided\n";
  band_rows(o, b, "");
  return o.str();
}

struct Prepared {
  SimulationDataset ds;
  std::vector<double> a;
  std::vector<double> y;  // regression scale
  double s = 0.0;         // regression-scale threshold
  double lambda = 1.0;
  double loglik = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> grid;
  std::string transform_note;
};

SimulationDataset load_or_synthesize(const RunConfig& cfg) {
  if (cfg.dataset) {
    DatasetSchema schema;
    schema.inputs = cfg.inputs.names();
    schema.response = cfg.response;
    schema.flaw_count = cfg.flaw_count;
    return load_dataset(*cfg.dataset, schema);
  }
  auto spec = *cfg.synthetic;
  spec.seed = cfg.synthetic_seed.value_or(stream_seed(cfg.seed, "synthetic"));
  return synthesize(spec, cfg.inputs, cfg.synthetic_n);
}

Prepared prepare(const RunConfig& cfg) {
  Prepared p{load_or_synthesize(cfg), {}, {}, 0.0, 1.0, std::numeric_limits<double>::quiet_NaN(), {}, {}};
  if (!p.ds.has_response()) throw DataError("dataset has no response column");
  const auto contributors = cfg.inputs.defect_size_inputs();
  p.a = derive_defect_size(p.ds, contributors).a;
  const auto resp = p.ds.response();
  const double s_raw = *cfg.threshold;
  switch (cfg.transform) {
    case TransformMode::None:
      p.y.assign(resp.begin(), resp.end());
      p.s = s_raw;
      p.lambda = 1.0;
      p.transform_note = "none";
      break;
    case TransformMode::Fixed:
      p.lambda = cfg.lambda;
      p.y = apply_boxcox(resp, p.lambda);
      p.s = apply_boxcox(s_raw, p.lambda);
      p.loglik = boxcox_profile_loglik(p.a, resp, p.lambda);
      p.transform_note = "fixed";
      break;
    case TransformMode::Fit: {
      const auto t = fit_boxcox(p.a, resp, s_raw, cfg.lambda_range);
      p.lambda = t.lambda;
      p.loglik = t.log_likelihood;
      p.y = apply_boxcox(resp, p.lambda);
      p.s = t.transformed_threshold;
      p.transform_note = "fit";
      break;
    }
  }
  const auto [mn, mx] = std::minmax_element(p.a.begin(), p.a.end());
  const double lo = cfg.grid_lo.value_or(*mn);
  const double hi = cfg.grid_hi.value_or(*mx);
  if (!(lo < hi)) throw DataError("defect-size grid is empty: lo = " + num(lo) + ", hi = " + num(hi));
  p.grid = make_grid(lo, hi, cfg.grid_points);
  return p;
}

FeatureMap feature_map(const RunConfig& cfg) { return FeatureMap(cfg.inputs, defect_size_range(cfg.inputs)); }

struct MethodReport {
  explicit MethodReport(std::string n) : name(std::move(n)) {}
  std::string name;
  bool ok = false;
  std::string error;
  std::vector<std::string> lines;  // fit and assumption checks
  std::vector<std::string> flags;  // violated assumptions
  std::string next;                // method recommended when flags are raised
  std::optional<DetectabilitySummary> summary;
};

void add_summary(MethodReport& r, const std::string& method, const PodCurve& curve, const PodBand& band,
                 double p) {
  DetectabilitySummary s;
  s.method = method;
  try {
    s = summarize(method, curve, band, p);
  } catch (const NotAttainedError& e) {
    s.a90 = std::numeric_limits<double>::quiet_NaN();
    s.a90_95 = std::numeric_limits<double>::quiet_NaN();
    try {
      s.a90 = a_at_level(curve, p);
    } catch (const NotAttainedError&) {
    }
    s.warnings.push_back(e.what());
  }
  r.summary = s;
}

void flag_test(MethodReport& r, const std::string& what, const TestResult& t) {
  if (t.p_value < 0.10) r.flags.push_back(what + " rejected (p = " + num(t.p_value) + ")");
}

MethodReport run_berens(const RunConfig& cfg, const Prepared& p, const std::filesystem::path& out) {
  MethodReport r{"berens"};
  const auto fit = fit_linear(p.a, p.y);
  std::ostringstream f;
  f << "method = berens\nn = " << fit.n << "\nbeta0 = " << num(fit.beta0) << "\nbeta1 = " << num(fit.beta1)
    << "\nsigma = " << num(fit.sigma) << "\nr_squared = " << num(fit.r_squared) << "\nlambda = " << num(p.lambda)
    << "\nthreshold = " << num(p.s) << "\n";
  r.lines.push_back("linearity: R^2 = " + num(fit.r_squared));
  std::string diag_text;
  if (fit.n >= 8) {
    const auto d = residual_diagnostics(fit);
    diag_text = format_diagnostics(d);
    r.lines.push_back("residual normality: KS p = " + num(d.kolmogorov_smirnov.p_value) +
                      ", AD p = " + num(d.anderson_darling.p_value));
    r.lines.push_back("homoscedasticity: Breusch-Pagan p = " + num(d.breusch_pagan.p_value));
    r.lines.push_back("independence: Durbin-Watson p = " + num(d.durbin_watson.p_value));
    flag_test(r, "normality (Kolmogorov-Smirnov)", d.kolmogorov_smirnov);
    flag_test(r, "normality (Anderson-Darling)", d.anderson_darling);
    flag_test(r, "homoscedasticity (Breusch-Pagan)", d.breusch_pagan);
    flag_test(r, "independence (Durbin-Watson)", d.durbin_watson);
  } else {
    diag_text = "skipped = fewer than 8 rows\n";
  }
  if (!r.flags.empty()) r.next = "binomial";
  const auto curve = berens_pod(fit, p.s, p.grid);
  const auto band = berens_pod_band(fit, p.s, p.grid,
                                    {cfg.berens_draws, cfg.level, stream_seed(cfg.seed, "berens")});
  write_atomic(out / "berens_fit.txt", f.str());
  write_atomic(out / "berens_diagnostics.txt", diag_text);
  write_atomic(out / "berens_curve.csv", curve_csv(curve));
  write_atomic(out / "berens_band.csv", band_csv(band));
  add_summary(r, "berens", curve, band, cfg.pod_level);
  r.ok = true;
  return r;
}

MethodReport run_binomial(const RunConfig& cfg, const Prepared& p, const std::filesystem::path& out) {
  MethodReport r{"binomial"};
  const auto fit = fit_linear(p.a, p.y);
  const auto pod = binomial_pod(fit, p.s, p.grid);
  const auto band = binomial_band(pod, cfg.level);
  std::ostringstream f;
  f << "method = binomial\nn = " << pod.n << "\nbeta0 = " << num(fit.beta0) << "\nbeta1 = " << num(fit.beta1)
    << "\nlambda = " << num(p.lambda) << "\nthreshold = " << num(p.s) << "\n";
  if (fit.n >= 8) {
    const auto d = residual_diagnostics(fit);
    r.lines.push_back("homoscedasticity: Breusch-Pagan p = " + num(d.breusch_pagan.p_value));
    r.lines.push_back("independence: Durbin-Watson p = " + num(d.durbin_watson.p_value));
    flag_test(r, "homoscedasticity (Breusch-Pagan)", d.breusch_pagan);
    flag_test(r, "independence (Durbin-Watson)", d.durbin_watson);
  }
  r.lines.push_back("linearity: R^2 = " + num(fit.r_squared));
  if (!r.flags.empty()) r.next = "chaos";
  std::ostringstream c;
  c << "a,pod,count\n";
  for (std::size_t j = 0; j < p.grid.size(); ++j) {
    c << num(p.grid[j]) << "," << num(pod.curve.pod[j]) << "," << pod.counts[j] << "\n";
  }
  write_atomic(out / "binomial_fit.txt", f.str());
  write_atomic(out / "binomial_curve.csv", c.str());
  write_atomic(out / "binomial_band.csv", band_csv(band));
  add_summary(r, "binomial", pod.curve, band, cfg.pod_level);
  r.ok = true;
  return r;
}

std::string term_label(const std::vector<unsigned>& t) {
  std::string s = "(";
  for (std::size_t k = 0; k < t.size(); ++k) s += (k ? " " : "") + std::to_string(t[k]);
  return s + ")";
}

MethodReport run_chaos(const RunConfig& cfg, const Prepared& p, const FeatureMap& fm, const ChaosFit& fit,
                       const std::filesystem::path& out) {
  MethodReport r{"chaos"};
  std::ostringstream f;
  f << "method = chaos\nn = " << fit.n << "\ndegree = " << fit.basis.degree << "\nbasis_size = " << fit.basis.size()
    << "\nq2 = " << num(fit.q2) << "\nsigma_eps = " << num(fit.sigma_eps) << "\nlambda = " << num(p.lambda)
    << "\nthreshold = " << num(p.s) << "\nfeatures =";
  for (const auto& n : fm.names()) f << " " << n;
  f << "\n";
  for (const auto& [d, q] : fit.q2_by_degree) f << "q2_degree_" << d << " = " << num(q) << "\n";
  for (std::size_t j = 0; j < fit.basis.size(); ++j) {
    f << "coef" << term_label(fit.basis.terms[j]) << " = " << num(fit.coefficients(static_cast<Eigen::Index>(j)))
      << "\n";
  }
  r.lines.push_back("predictivity: Q^2 = " + num(fit.q2) + " (degree " + std::to_string(fit.basis.degree) + ")");
  if (fit.q2 < 0.9) {
    r.flags.push_back("predictivity Q^2 = " + num(fit.q2) + " below 0.9");
    r.next = "kriging";
  }
  const auto band = chaos_pod_band(fit, p.s, p.grid,
                                   {cfg.chaos_n_sets, cfg.chaos_n_mc, cfg.level, stream_seed(cfg.seed, "chaos")});
  write_atomic(out / "chaos_fit.txt", f.str());
  write_atomic(out / "chaos_curve.csv", curve_csv(band.curve));
  write_atomic(out / "chaos_band.csv", band_csv(band));
  add_summary(r, "chaos", band.curve, band, cfg.pod_level);
  r.ok = true;
  return r;
}

MethodReport run_kriging(const RunConfig& cfg, const Prepared& p, const FeatureMap& fm, const KrigingFit& fit,
                         const std::filesystem::path& out) {
  MethodReport r{"kriging"};
  std::ostringstream f;
  f << "method = kriging\nn = " << fit.n() << "\nbeta0 = " << num(fit.beta0) << "\nbeta1 = " << num(fit.beta1)
    << "\nsigma2 = " << num(fit.sigma2) << "\nnugget = " << num(fit.nugget) << "\njitter = " << num(fit.jitter)
    << "\nlog_likelihood = " << num(fit.log_likelihood) << "\nq2 = " << num(fit.q2)
    << "\nconverged_starts = " << fit.converged_starts << "\nlambda = " << num(p.lambda)
    << "\nthreshold = " << num(p.s) << "\n";
  for (std::size_t k = 0; k < fit.theta.size(); ++k) {
    f << "theta[" << fm.names()[k] << "] = " << num(fit.theta[k]) << " (raw " << num(fit.theta_raw[k])
      << ", column sd " << num(fit.scale(static_cast<Eigen::Index>(k))) << ")\n";
  }
  r.lines.push_back("predictivity: Q^2 = " + num(fit.q2));
  if (fit.q2 < 0.9) r.flags.push_back("predictivity Q^2 = " + num(fit.q2) + " below 0.9");
  const auto band = kriging_pod_band(fit, p.s, p.grid,
                                     {cfg.kriging_n_mc, cfg.kriging_n_paths, cfg.kriging_band_points, cfg.level,
                                      stream_seed(cfg.seed, "kriging")});
  std::ostringstream b;
  b << "component,a,pod,lower,upper,lower_one_sided\n";
  band_rows(b, band.mc, "mc,");
  band_rows(b, band.gp, "gp,");
  band_rows(b, band.total, "total,");
  write_atomic(out / "kriging_fit.txt", f.str());
  write_atomic(out / "kriging_curve.csv", curve_csv(band.total.curve));
  write_atomic(out / "kriging_band.csv", b.str());
  add_summary(r, "kriging", band.total.curve, band.total, cfg.pod_level);
  r.ok = true;
  return r;
}

ChaosFit fit_chaos_model(const RunConfig& cfg, const Prepared& p, const FeatureMap& fm) {
  return fit_chaos(fm.features(p.ds, p.a), p.y, fm.laws(), cfg.chaos_degrees);
}

KrigingFit fit_kriging_model(const RunConfig& cfg, const Prepared& p, const FeatureMap& fm) {
  KrigingOptions ko;
  ko.n_starts = cfg.kriging_starts;
  ko.estimate_nugget = cfg.kriging_nugget;
  return fit_kriging(fm.features(p.ds, p.a), p.y, ko, fm.nuisance_laws());
}

std::vector<InputGroup> resolve_groups(const SensitivitySettings& ss, const std::vector<std::string>& names) {
  if (ss.groups.empty()) return {};
  auto find = [&](const std::string& input) -> std::size_t {
    for (std::size_t k = 0; k < names.size(); ++k) {
      if (names[k] == input || names[k] == input + "[u]") return k;
    }
    throw ConfigError("sensitivity.groups", "'" + input + "' is not a nuisance input");
  };
  std::vector<InputGroup> out;
  std::vector<bool> used(names.size(), false);
  for (const auto& [name, members] : ss.groups) {
    InputGroup g{name, {}};
    for (const auto& m : members) {
      const auto k = find(m);
      g.columns.push_back(k);
      used[k] = true;
    }
    out.push_back(std::move(g));
  }
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (!used[k]) out.push_back({names[k], {k}});
  }
  return out;
}

std::string index_csv(const SobolResult& r) {
  std::ostringstream o;
  o << "input,S,T,S_stderr,T_stderr\n";
  for (const auto& i : r.indices) {
    o << i.name << "," << num(i.first_order) << "," << num(i.total) << "," << num(i.first_order_stderr) << ","
      << num(i.total_stderr) << "\n";
  }
  return o.str();
}

std::vector<std::string> run_sensitivity(const RunConfig& cfg, const Prepared& p, const ConditionalPodModel& model,
                                         const std::filesystem::path& out, std::vector<std::string>& failures) {
  const auto& ss = cfg.sensitivity;
  std::vector<std::string> lines;
  SobolOptions o;
  o.n_base = ss.n_base;
  o.n_bootstrap = ss.n_bootstrap;
  o.groups = resolve_groups(ss, model.nuisance_names());
  const auto grid = make_grid(p.grid.front(), p.grid.back(), ss.grid_points);
  auto attempt = [&](const std::string& label, const std::string& file, const std::function<SobolResult()>& fn) {
    try {
      const auto r = fn();
      write_atomic(out / file, index_csv(r));
      std::string line = label + ":";
      for (const auto& i : r.indices) line += " " + i.name + " S=" + num(i.first_order) + " T=" + num(i.total);
      if (r.rejected_fraction > 0.0) line += " (rejected " + num(r.rejected_fraction) + ")";
      lines.push_back(line);
    } catch (const Error& e) {
      lines.push_back(label + ": FAILED " + e.what());
      failures.push_back(label + ": " + e.what());
    }
  };
  o.seed = stream_seed(cfg.seed, "sensitivity-pod");
  attempt("POD curve indices", "sensitivity_pod.csv", [&] { return pod_sobol_indices(model, grid, o); });
  for (double a : ss.sizes) {
    o.seed = stream_seed(cfg.seed, "sensitivity-size-" + num(a));
    attempt("POD(" + num(a) + ") indices", "sensitivity_pod_a" + num(a) + ".csv",
            [&] { return pod_value_sobol(model, a, o); });
  }
  for (double level : ss.levels) {
    o.seed = stream_seed(cfg.seed, "sensitivity-inverse-" + num(level));
    attempt("inverse POD(" + num(level) + ") indices", "sensitivity_inverse_p" + num(level) + ".csv",
            [&] { return inverse_pod_sobol(model, grid, level, o); });
  }
  return lines;
}

std::string summary_csv(const std::vector<MethodReport>& reports) {
  std::ostringstream o;
  o << "method,a90,a90_95,status,warnings\n";
  for (const auto& r : reports) {
    o << r.name << ",";
    if (r.summary) {
      o << num(r.summary->a90) << "," << num(r.summary->a90_95) << ",ok,";
      std::string w;
      for (const auto& s : r.summary->warnings) w += (w.empty() ? "" : "; ") + s;
      std::replace(w.begin(), w.end(), ',', ' ');
      std::replace(w.begin(), w.end(), '"', '\'');
      o << '"' << w << '"';
    } else {
      o << "nan,nan,failed,";
      std::string e = r.error;
      std::replace(e.begin(), e.end(), ',', ' ');
      std::replace(e.begin(), e.end(), '"', '\'');
      o << '"' << e << '"';
    }
    o << "\n";
  }
  return o.str();
}

std::string report_text(const RunConfig& cfg, const Prepared& p, const std::vector<MethodReport>& reports,
                        const std::vector<std::string>& sensitivity_lines) {
  std::ostringstream o;
  o << "MAPOD run report\n\n";
  o << "rows: " << p.ds.rows() << "\n";
  o << "threshold: " << num(*cfg.threshold) << " (regression scale " << num(p.s) << ")\n";
  o << "transform: " << p.transform_note << ", lambda = " << num(p.lambda) << "\n";
  o << "grid: " << num(p.grid.front()) << " to " << num(p.grid.back()) << ", " << p.grid.size() << " points\n";
  o << "confidence level: " << num(cfg.level) << ", POD level: " << num(cfg.pod_level) << "\n\n";
  int step = 1;
  for (const auto& r : reports) {
    o << step++ << ". " << r.name << "\n";
    if (!r.ok) {
      o << "   FAILED: " << r.error << "\n\n";
      continue;
    }
    for (const auto& l : r.lines) o << "   " << l << "\n";
    for (const auto& fl : r.flags) o << "   FLAG: " << fl << "\n";
    if (!r.next.empty()) o << "   recommendation: assumptions violated, continue with " << r.next << "\n";
    if (r.summary) {
      o << "   a90 = " << num(r.summary->a90) << ", a90/95 = " << num(r.summary->a90_95) << "\n";
      for (const auto& w : r.summary->warnings) o << "   warning: " << w << "\n";
    }
    o << "\n";
  }
  o << "Synthesis of detectable defect sizes\n";
  o << "   method      a90          a90/95\n";
  for (const auto& r : reports) {
    char buf[128];
    const double a = r.summary ? r.summary->a90 : std::numeric_limits<double>::quiet_NaN();
    const double b = r.summary ? r.summary->a90_95 : std::numeric_limits<double>::quiet_NaN();
    std::snprintf(buf, sizeof buf, "   %-10s  %-11s  %-11s\n", r.name.c_str(), num(a).c_str(), num(b).c_str());
    o << buf;
  }
  if (!sensitivity_lines.empty()) {
    o << "\nSensitivity (" << cfg.sensitivity.metamodel << " metamodel, quantile-space inputs)\n";
    for (const auto& l : sensitivity_lines) o << "   " << l << "\n";
  }
  return o.str();
}

std::string manifest_json(const RunConfig& cfg, const Prepared* p, const std::vector<MethodReport>& reports,
                          const std::vector<std::string>& sensitivity_failures) {
  json m;
  m["version"] = kVersion;
  m["seed"] = cfg.seed;
  json seeds;
  for (const char* s : {"berens", "chaos", "kriging", "sensitivity-pod"}) seeds[s] = stream_seed(cfg.seed, s);
  if (cfg.synthetic) seeds["synthetic"] = cfg.synthetic_seed.value_or(stream_seed(cfg.seed, "synthetic"));
  m["seeds"] = seeds;
  m["threshold"] = *cfg.threshold;
  m["transform"] = cfg.transform == TransformMode::Fit ? "fit" : cfg.transform == TransformMode::Fixed ? "fixed" : "none";
  if (p) {
    m["lambda"] = p->lambda;
    m["transformed_threshold"] = p->s;
    m["rows"] = p->ds.rows();
    m["grid"] = {{"lo", p->grid.front()}, {"hi", p->grid.back()}, {"points", p->grid.size()}};
  }
  if (cfg.dataset) m["dataset"] = cfg.dataset->filename().string();
  if (cfg.synthetic) {
    m["synthetic"] = {{"model", to_string(cfg.synthetic->kind)}, {"beta0", cfg.synthetic->beta0},
                      {"beta1", cfg.synthetic->beta1}, {"sigma", cfg.synthetic->sigma},
                      {"lambda", cfg.synthetic->lambda}, {"n", cfg.synthetic_n}};
  }
  m["settings"] = {{"confidence", cfg.level},          {"pod_level", cfg.pod_level},
                   {"berens_draws", cfg.berens_draws}, {"chaos_n_mc", cfg.chaos_n_mc},
                   {"chaos_n_sets", cfg.chaos_n_sets}, {"kriging_n_mc", cfg.kriging_n_mc},
                   {"kriging_n_paths", cfg.kriging_n_paths}, {"kriging_band_points", cfg.kriging_band_points},
                   {"kriging_starts", cfg.kriging_starts}, {"kriging_nugget", cfg.kriging_nugget}};
  json status = json::object();
  for (const auto& r : reports) status[r.name] = r.ok ? "ok" : "failed: " + r.error;
  m["status"] = status;
  if (!sensitivity_failures.empty()) m["sensitivity_failures"] = sensitivity_failures;
  return m.dump(2) + "\n";
}

void ensure_out_dir(const std::filesystem::path& out) {
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw ConfigError("out", "cannot create '" + out.string() + "': " + ec.message());
}

}  // namespace

RunOutcome execute(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  ensure_out_dir(cfg.out_dir);
  RunOutcome outcome;
  std::vector<MethodReport> reports;
  std::optional<Prepared> prep;
  try {
    prep = prepare(cfg);
  } catch (const Error& e) {
    for (const auto& m : kMethodOrder) {
      if (std::find(cfg.methods.begin(), cfg.methods.end(), m) == cfg.methods.end()) continue;
      MethodReport r{m};
      r.error = std::string("data preparation failed: ") + e.what();
      outcome.failures[m] = r.error;
      reports.push_back(r);
    }
    log << "data preparation failed: " << e.what() << "\n";
    write_atomic(cfg.out_dir / "summary.csv", summary_csv(reports));
    write_atomic(cfg.out_dir / "manifest.json", manifest_json(cfg, nullptr, reports, {}));
    outcome.exit_code = 1;
    return outcome;
  }
  const auto& p = *prep;
  outcome.lambda = p.lambda;
  outcome.transformed_threshold = p.s;
  if (cfg.synthetic) {
    write_atomic(cfg.out_dir / "dataset.csv", format_dataset(p.ds, cfg.response, cfg.flaw_count));
  }
  log << "rows " << p.ds.rows() << ", lambda " << num(p.lambda) << ", threshold " << num(p.s) << "\n";
  const auto fm = feature_map(cfg);
  std::optional<ChaosFit> chaos_fit;
  std::optional<KrigingFit> kriging_fit;

  for (const auto& m : kMethodOrder) {
    if (std::find(cfg.methods.begin(), cfg.methods.end(), m) == cfg.methods.end()) continue;
    log << "running " << m << "\n";
    MethodReport r{m};
    try {
      if (m == "berens") {
        r = run_berens(cfg, p, cfg.out_dir);
      } else if (m == "binomial") {
        r = run_binomial(cfg, p, cfg.out_dir);
      } else if (m == "chaos") {
        chaos_fit = fit_chaos_model(cfg, p, fm);
        r = run_chaos(cfg, p, fm, *chaos_fit, cfg.out_dir);
      } else {
        kriging_fit = fit_kriging_model(cfg, p, fm);
        r = run_kriging(cfg, p, fm, *kriging_fit, cfg.out_dir);
      }
    } catch (const std::exception& e) {
      r.ok = false;
      r.error = e.what();
      outcome.failures[m] = e.what();
      log << m << " failed: " << e.what() << "\n";
    }
    if (r.summary) outcome.summaries.push_back(*r.summary);
    reports.push_back(std::move(r));
  }

  std::vector<std::string> sens_lines, sens_failures;
  if (cfg.sensitivity.enabled) {
    log << "running sensitivity\n";
    try {
      std::unique_ptr<ConditionalPodModel> model;
      if (cfg.sensitivity.metamodel == "chaos") {
        if (!chaos_fit) chaos_fit = fit_chaos_model(cfg, p, fm);
        model = std::make_unique<ChaosConditionalPod>(*chaos_fit, p.s, fm.nuisance_names());
      } else {
        if (!kriging_fit) kriging_fit = fit_kriging_model(cfg, p, fm);
        model = std::make_unique<KrigingConditionalPod>(*kriging_fit, p.s, fm.nuisance_names());
      }
      sens_lines = run_sensitivity(cfg, p, *model, cfg.out_dir, sens_failures);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      sens_failures.push_back(std::string("metamodel: ") + e.what());
      sens_lines.push_back(std::string("FAILED ") + e.what());
    }
    for (const auto& f : sens_failures) outcome.failures["sensitivity: " + f] = f;
  }

  write_atomic(cfg.out_dir / "summary.csv", summary_csv(reports));
  write_atomic(cfg.out_dir / "report.txt", report_text(cfg, p, reports, sens_lines));
  write_atomic(cfg.out_dir / "manifest.json", manifest_json(cfg, &p, reports, sens_failures));
  outcome.exit_code = outcome.failures.empty() ? 0 : 1;
  return outcome;
}

RunOutcome execute_sensitivity(const RunConfig& cfg, std::ostream& log) {
  RunConfig c = cfg;
  c.sensitivity.enabled = true;
  c.methods = {c.sensitivity.metamodel};
  c.validate();
  ensure_out_dir(c.out_dir);
  RunOutcome outcome;
  const auto p = prepare(c);
  outcome.lambda = p.lambda;
  outcome.transformed_threshold = p.s;
  const auto fm = feature_map(c);
  std::unique_ptr<ConditionalPodModel> model;
  log << "fitting " << c.sensitivity.metamodel << " metamodel\n";
  if (c.sensitivity.metamodel == "chaos") {
    model = std::make_unique<ChaosConditionalPod>(fit_chaos_model(c, p, fm), p.s, fm.nuisance_names());
  } else {
    model = std::make_unique<KrigingConditionalPod>(fit_kriging_model(c, p, fm), p.s, fm.nuisance_names());
  }
  std::vector<std::string> failures;
  const auto lines = run_sensitivity(c, p, *model, c.out_dir, failures);
  std::ostringstream o;
  o << "Sensitivity (" << c.sensitivity.metamodel << " metamodel, quantile-space inputs)\n";
  for (const auto& l : lines) o << "   " << l << "\n";
  write_atomic(c.out_dir / "sensitivity_report.txt", o.str());
  for (const auto& f : failures) outcome.failures[f] = f;
  outcome.exit_code = failures.empty() ? 0 : 1;
  return outcome;
}

void write_design(const RunConfig& cfg) {
  if (cfg.doe_n < 1) throw ConfigError("doe.n", "must be positive");
  ensure_out_dir(cfg.out_dir);
  const auto ds = sample_inputs(cfg.inputs, cfg.doe_n);
  write_atomic(cfg.out_dir / "design.csv", format_dataset(ds, cfg.response, cfg.flaw_count));
}

void write_synthetic(const RunConfig& cfg) {
  if (!cfg.synthetic) throw ConfigError("synthetic", "is required for synth");
  try {
    cfg.synthetic->validate();
  } catch (const SpecError& e) {
    throw ConfigError("synthetic", e.what());
  }
  ensure_out_dir(cfg.out_dir);
  auto spec = *cfg.synthetic;
  spec.seed = cfg.synthetic_seed.value_or(stream_seed(cfg.seed, "synthetic"));
  const auto ds = synthesize(spec, cfg.inputs, cfg.synthetic_n);
  write_atomic(cfg.out_dir / "dataset.csv", format_dataset(ds, cfg.response, cfg.flaw_count));
}

}  // namespace mapod
