#include "scenario.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <regex>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "mincontrol/delay.h"
#include "mincontrol/errors.h"
#include "mincontrol/gramian.h"
#include "mincontrol/min_energy.h"
#include "mincontrol/riccati.h"
#include "mincontrol/shift.h"
#include "mincontrol/spectral.h"
#include "report_io.h"

namespace mincontrol::cli {
namespace {

namespace fs = std::filesystem;

// Every reported number is an object {"v": value, "eq": formula id}. The ids
// name the formula that produced the value, e.g. "value.pinv_sqrt" for
// V = 1/2 |(Q_t^{1/2})^+ x|^2.
Json Tag(double v, const char* eq) {
  Json j;
  j["eq"] = eq;
  j["v"] = NumberToJson(v);
  return j;
}

Json TagMatrix(const Matrix& m, const char* eq) {
  Json j;
  j["eq"] = eq;
  j["v"] = MatrixToJson(m);
  return j;
}

Json TagVector(const Vector& v, const char* eq) {
  Json j;
  j["eq"] = eq;
  j["v"] = VectorToJson(v);
  return j;
}

enum class ModelKind { kLinear, kSpectral, kDelay, kShift };

ModelKind KindOf(const Json& model) {
  if (model.is_object()) return ModelKind::kLinear;
  const std::string s = model.get<std::string>();
  if (s.rfind("spectral:", 0) == 0) return ModelKind::kSpectral;
  if (s.rfind("delay(", 0) == 0) return ModelKind::kDelay;
  if (s.rfind("shift(", 0) == 0) return ModelKind::kShift;
  throw ScenarioError("model: unknown preset '" + s +
                      "' (expected spectral:*, delay(a0,a1,b0,d), shift(m) or {A, B})");
}

const std::vector<std::string> kLinearTasks = {
    "gramian",           "min-energy",   "verify-riccati",      "verify-lyapunov",
    "commuting-family",  "recover-L",    "project-check",       "null-controllability",
    "sweep"};

const std::map<ModelKind, std::vector<std::string>>& SupportedTasks() {
  static const std::map<ModelKind, std::vector<std::string>> table = {
      {ModelKind::kLinear, kLinearTasks},
      {ModelKind::kSpectral, kLinearTasks},
      {ModelKind::kDelay, {"gramian", "min-energy", "null-controllability"}},
      {ModelKind::kShift, {"min-energy"}},
  };
  return table;
}

bool Contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

const Json& ModelField(const Json& sc) {
  return sc.contains("model") ? sc.at("model") : sc.at("system");
}

void RequirePositiveNumber(const Json& j, const std::string& path) {
  if (!j.is_number()) throw ScenarioError(path + ": expected a number");
  const double v = j.get<double>();
  if (!(v > 0.0) || !std::isfinite(v)) throw ScenarioError(path + ": expected a positive number");
}

void RequireInteger(const Json& j, const std::string& path, long long min_value) {
  if (!j.is_number_integer()) throw ScenarioError(path + ": expected an integer");
  if (j.get<long long>() < min_value) {
    throw ScenarioError(path + ": must be >= " + std::to_string(min_value));
  }
}

void RequireNumberArray(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ScenarioError(path + ": expected a non-empty array");
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) {
      throw ScenarioError(path + "[" + std::to_string(i) + "]: expected a number");
    }
  }
}

struct Model {
  ModelKind kind = ModelKind::kLinear;
  Json echo;
  std::optional<LinearSystem> linear;
  std::optional<SpectralSystem> spectral;
  std::optional<DelaySystem> delay;
  std::optional<ShiftSystem> shift;
  int state_dim = 0;
};

Model BuildModel(const Json& sc, const RunOptions& options) {
  const Json& m = ModelField(sc);
  Model model;
  model.kind = KindOf(m);
  const std::string path = sc.contains("model") ? "model" : "system";
  try {
    switch (model.kind) {
      case ModelKind::kLinear: {
        model.linear.emplace(LinearSystemFromJson(m, path));
        model.echo = LinearSystemToJson(*model.linear);
        model.echo["kind"] = "linear";
        model.state_dim = model.linear->state_dim();
        break;
      }
      case ModelKind::kSpectral: {
        const std::string name = m.get<std::string>();
        const SpectralPreset preset = ParseSpectralPreset(name);
        const int modes = sc.contains("modes") ? sc.at("modes").get<int>() : preset.default_modes;
        model.spectral.emplace(preset.Truncate(modes));
        model.linear.emplace(model.spectral->ToLinearSystem());
        model.state_dim = modes;
        const SpectralHClassification h = ClassifySpectralPreset(preset, modes);
        model.echo["kind"] = "spectral";
        model.echo["name"] = name;
        model.echo["modes"] = modes;
        model.echo["lambda"] = TagVector(model.spectral->lambdas(), "spectral.eigenvalues");
        model.echo["log_b"] = TagVector(model.spectral->log_bs(), "spectral.control_weights");
        Json hj;
        hj["finite_support"] = h.finite_support;
        hj["support_size"] = h.support_size;
        hj["slope"] = Tag(h.slope, "spectral.h_regression");
        hj["s_range"] = Tag(h.s_range, "spectral.h_regression");
        hj["s_half"] = Tag(h.s_half, "spectral.h_regression");
        hj["fit_residual"] = Tag(h.fit_residual, "spectral.h_regression");
        hj["tail_sensitivity"] = Tag(h.tail_sensitivity, "spectral.h_regression");
        hj["range_label"] = h.range_label;
        hj["half_label"] = h.half_label;
        model.echo["h_classification"] = hj;
        break;
      }
      case ModelKind::kDelay: {
        static const std::regex kDelay(
            R"(delay\(\s*([-+0-9.eE]+)\s*,\s*([-+0-9.eE]+)\s*,\s*([-+0-9.eE]+)\s*,\s*([-+0-9.eE]+)\s*\))");
        const std::string s = m.get<std::string>();
        std::smatch match;
        if (!std::regex_match(s, match, kDelay)) {
          throw ScenarioError(path + ": expected delay(a0,a1,b0,d), got '" + s + "'");
        }
        int mesh = sc.contains("mesh") ? sc.at("mesh").get<int>() : 32;
        if (options.mesh) mesh = *options.mesh;
        model.delay.emplace(std::stod(match[1]), std::stod(match[2]), std::stod(match[3]),
                            std::stod(match[4]), mesh);
        model.state_dim = model.delay->state_dim();
        model.echo["kind"] = "delay";
        model.echo["name"] = s;
        model.echo["a0"] = model.delay->a0();
        model.echo["a1"] = model.delay->a1();
        model.echo["b0"] = model.delay->b0();
        model.echo["d"] = model.delay->d();
        model.echo["mesh"] = mesh;
        break;
      }
      case ModelKind::kShift: {
        static const std::regex kShift(R"(shift\(\s*([0-9]+)\s*\))");
        const std::string s = m.get<std::string>();
        std::smatch match;
        if (!std::regex_match(s, match, kShift)) {
          throw ScenarioError(path + ": expected shift(m), got '" + s + "'");
        }
        model.shift.emplace(std::stoi(match[1]));
        model.state_dim = model.shift->cells();
        model.echo["kind"] = "shift";
        model.echo["name"] = s;
        model.echo["cells"] = model.shift->cells();
        break;
      }
    }
  } catch (const ScenarioError&) {
    throw;
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": model construction failed: " + e.what());
  }
  return model;
}

struct Context {
  fs::path out;
  std::uint64_t seed = 0;
  double tol = 1.0;
  QuadratureOptions quadrature;
  std::vector<double> horizons;
  std::vector<Vector> targets;
  int grid_points = 201;
  int oracle_steps = 2000;
  std::optional<double> t0;
  std::optional<Matrix> k;
  std::vector<std::vector<int>> projection_modes;
  std::vector<std::string> files;

  void Emit(const std::string& name, const CsvTable& table) {
    WriteFileAtomic(out / name, table.ToString());
    files.push_back(name);
  }

  double T0() const {
    if (t0) return *t0;
    if (horizons.empty()) throw ScenarioError("T0: required (or give horizons)");
    return *std::min_element(horizons.begin(), horizons.end());
  }
};

struct TaskOutcome {
  Json result;
  bool pass = true;
};

// ---------------------------------------------------------------------------
// Finite-dimensional and spectral models.

struct LinearModel {
  const Model& model;
  const LinearSystem& sys;
  std::shared_ptr<GramianFamily> family;
};

TaskOutcome TaskGramian(const LinearModel& lm, Context& ctx) {
  TaskOutcome out;
  Json rows = Json::array();
  for (double t : ctx.horizons) {
    const auto g = lm.family->At(t);
    const Gramian quad = GramianQuadrature(lm.sys, t, ctx.quadrature);
    const double scale = std::max(quad.matrix().norm(), 1e-300);
    const double rel = (g->matrix() - quad.matrix()).norm() / scale;
    Json row = GramianToJson(*g);
    row["Q"] = TagMatrix(g->matrix(), "gramian.integral");
    row["t"] = t;
    row["quadrature_rel_diff"] = Tag(rel, "gramian.integral");
    bool ok = rel <= 1e-8 * ctx.tol;
    if (lm.model.spectral) {
      const Gramian closed = SpectralGramian(*lm.model.spectral, t);
      const double rel_closed = (closed.matrix() - quad.matrix()).norm() / scale;
      row["closed_form_rel_diff"] = Tag(rel_closed, "spectral.gramian_diagonal");
      ok = ok && rel_closed <= 1e-8 * ctx.tol;
    }
    row["pass"] = ok;
    out.pass = out.pass && ok;
    rows.push_back(std::move(row));
  }
  out.result["horizons"] = std::move(rows);
  if (lm.family->has_infinite()) {
    Json inf = GramianToJson(lm.family->Infinite());
    inf["Q"] = TagMatrix(lm.family->Infinite().matrix(), "gramian.infinite_lyapunov");
    out.result["infinite"] = std::move(inf);
  }
  out.result["tolerance"] = 1e-8 * ctx.tol;
  return out;
}

TaskOutcome TaskMinEnergy(const LinearModel& lm, Context& ctx) {
  TaskOutcome out;
  if (ctx.targets.empty()) throw ScenarioError("targets: required by min-energy");
  Json rows = Json::array();
  for (std::size_t hi = 0; hi < ctx.horizons.size(); ++hi) {
    const double t = ctx.horizons[hi];
    const auto g = lm.family->At(t);
    for (std::size_t ti = 0; ti < ctx.targets.size(); ++ti) {
      const Vector& x = ctx.targets[ti];
      Json row;
      row["t"] = t;
      row["target_id"] = ti;
      const Reachability r = ClassifyTarget(*g, x);
      row["class"] = ToString(r.cls);
      row["defect"] = Tag(r.defect, "reachability.projection_defect");
      if (r.cls == ReachabilityClass::kUnreachable) {
        row["value"] = Tag(std::numeric_limits<double>::infinity(), "value.pinv_sqrt");
        row["pass"] = true;
        rows.push_back(std::move(row));
        continue;
      }
      const double v = ValueFunction(*g, x);
      row["value"] = Tag(v, "value.pinv_sqrt");
      bool ok = true;
      if (r.cls == ReachabilityClass::kInRangeQ) {
        const BruteForceResult bf = BruteForceMinEnergy(lm.sys, x, t, ctx.oracle_steps);
        const double rel = std::abs(bf.energy - v) / std::max(v, 1e-300);
        row["energy_oracle"] = Tag(bf.energy, "oracle.least_norm_discrete");
        row["oracle_rel_diff"] = Tag(rel, "oracle.least_norm_discrete");
        row["oracle_steps"] = ctx.oracle_steps;
        ok = ok && rel <= 1e-3 * ctx.tol;

        const Vector grid = UniformGrid(t, ctx.grid_points);
        const ControlSignal u = OptimalControl(lm.sys, *g, x, grid);
        const Matrix y = SimulateForward(lm.sys, u, Vector::Zero(lm.sys.state_dim()));
        const double endpoint =
            (y.col(y.cols() - 1) - x).norm() / std::max(x.norm(), 1e-300);
        row["energy_quadrature"] = Tag(u.Energy(), "control.optimal_open_loop");
        row["endpoint_rel_error"] = Tag(endpoint, "state.optimal_forward");
        ok = ok && endpoint <= 1e-3 * ctx.tol;

        std::vector<std::string> header = {"r"};
        for (int k = 0; k < u.input_dim(); ++k) header.push_back("u_" + std::to_string(k));
        for (int k = 0; k < lm.sys.state_dim(); ++k) header.push_back("y_" + std::to_string(k));
        CsvTable table(header);
        for (Eigen::Index c = 0; c < grid.size(); ++c) {
          std::vector<double> line = {grid(c)};
          for (int k = 0; k < u.input_dim(); ++k) line.push_back(u.values()(k, c));
          for (int k = 0; k < lm.sys.state_dim(); ++k) line.push_back(y(k, c));
          table.AddRow(line);
        }
        const std::string name =
            "control_h" + std::to_string(hi) + "_x" + std::to_string(ti) + ".csv";
        ctx.Emit(name, table);
        row["series"] = name;
      }
      row["pass"] = ok;
      out.pass = out.pass && ok;
      rows.push_back(std::move(row));
    }
  }
  out.result["rows"] = std::move(rows);
  out.result["oracle_tolerance"] = 1e-3 * ctx.tol;
  return out;
}

TaskOutcome TaskSweep(const LinearModel& lm, Context& ctx) {
  TaskOutcome out;
  if (ctx.targets.empty()) throw ScenarioError("targets: required by sweep");
  std::vector<double> times = ctx.horizons;
  std::sort(times.begin(), times.end());
  CsvTable table({"t", "target_id", "V", "V_oracle", "abs_diff"});
  Json rows = Json::array();
  std::vector<double> last(ctx.targets.size(), std::numeric_limits<double>::infinity());
  bool monotone = true;
  bool agree = true;
  for (double t : times) {
    const auto g = lm.family->At(t);
    const Gramian quad = GramianQuadrature(lm.sys, t, ctx.quadrature);
    for (std::size_t ti = 0; ti < ctx.targets.size(); ++ti) {
      const Vector& x = ctx.targets[ti];
      auto value = [&x](const Gramian& q) {
        return ClassifyTarget(q, x).cls == ReachabilityClass::kUnreachable
                   ? std::numeric_limits<double>::infinity()
                   : ValueFunction(q, x);
      };
      const double v = value(*g);
      const double vo = value(quad);
      const double diff = (std::isinf(v) && std::isinf(vo)) ? 0.0 : std::abs(v - vo);
      table.AddRow({t, static_cast<double>(ti), v, vo, diff});
      if (!(diff <= 1e-8 * ctx.tol * std::max(1.0, std::abs(v)))) agree = false;
      if (v > last[ti] * (1.0 + 1e-12)) monotone = false;
      last[ti] = v;
      Json row;
      row["t"] = t;
      row["target_id"] = ti;
      row["V"] = Tag(v, "value.pinv_sqrt");
      row["V_oracle"] = Tag(vo, "value.pinv_sqrt_quadrature");
      row["abs_diff"] = Tag(diff, "value.pinv_sqrt");
      rows.push_back(std::move(row));
    }
  }
  ctx.Emit("sweep.csv", table);
  out.result["rows"] = std::move(rows);
  out.result["series"] = "sweep.csv";
  out.result["monotone_non_increasing"] = monotone;
  out.result["oracle_agreement"] = agree;
  out.result["tolerance"] = 1e-8 * ctx.tol;
  out.pass = monotone && agree;
  return out;
}

void EmitResiduals(Context& ctx, const std::string& name, const ResidualReport& rep) {
  CsvTable table({"t", "probe_i", "probe_j", "lhs", "rhs", "residual"});
  for (const auto& s : rep.samples) {
    table.AddRow({s.t, static_cast<double>(s.probe_i), static_cast<double>(s.probe_j), s.lhs,
                  s.rhs, s.residual});
  }
  ctx.Emit(name, table);
}

Json ResidualToJson(const ResidualReport& rep, const char* eq) {
  Json j;
  j["equation"] = rep.equation;
  j["times"] = rep.times;
  Json per = Json::array();
  for (double v : rep.max_scaled_per_time) per.push_back(Tag(v, eq));
  j["max_scaled_per_time"] = std::move(per);
  j["max_scaled"] = Tag(rep.max_scaled, eq);
  j["tolerance"] = rep.tolerance;
  j["pass"] = rep.pass;
  return j;
}

std::vector<double> TimesFrom(const std::vector<double>& horizons, double t0) {
  std::vector<double> times;
  for (double t : horizons) {
    if (t >= t0) times.push_back(t);
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return times;
}

TaskOutcome TaskVerifyRiccati(const LinearModel& lm, Context& ctx) {
  TaskOutcome out;
  if (!lm.family->has_infinite()) {
    throw UnstableSystemError("verify-riccati: the Riccati families need a stable generator");
  }
  const double t0 = ctx.T0();
  const std::vector<double> times = TimesFrom(ctx.horizons, t0);
  if (times.empty()) throw ScenarioError("horizons: no horizon at or beyond T0");
  const HGeometry geom(lm.family->Infinite());
  const Matrix probes = RangeProbes(lm.family->At(t0)->psd(), 4, ctx.seed);
  ResidualOptions opts;
  opts.tolerance = 1e-6 * ctx.tol;

  const RiccatiCandidate pv = PvCandidate(lm.family, t0);
  const ResidualReport h = RiccatiResidualH(pv, lm.sys, geom, times, probes, opts);
  const ResidualReport x =
      RiccatiResidualX(InverseGramianCandidate(lm.family), lm.sys, times, probes, opts);
  ResidualOptions quiet = opts;
  quiet.keep_samples = false;
  const ResidualReport shifted =
      RiccatiResidualH(ShiftedCandidate(pv, 1.0), lm.sys, geom, times, probes, quiet);

  EmitResiduals(ctx, "riccati_H.csv", h);
  EmitResiduals(ctx, "riccati_X.csv", x);
  out.result["T0"] = t0;
  out.result["probes"] = probes.cols();
  out.result["H"] = ResidualToJson(h, "riccati.h_space");
  out.result["H"]["series"] = "riccati_H.csv";
  out.result["X"] = ResidualToJson(x, "riccati.x_space");
  out.result["X"]["series"] = "riccati_X.csv";
  out.result["shifted_control"] = ResidualToJson(shifted, "riccati.h_space");
  out.result["shifted_control"]["rejected"] = !shifted.pass;
  out.pass = h.pass && x.pass && !shifted.pass;
  return out;
}

TaskOutcome TaskVerifyLyapunov(const LinearModel& lm, Context& ctx) {
  TaskOutcome out;
  std::vector<double> times = ctx.horizons;
  std::sort(times.begin(), times.end());
  const double tol = 1e-7 * ctx.tol;
  auto family = lm.family;
  const LyapunovReport diff = LyapunovResidualDifferential(
      [family](double t) { return family->MatrixAt(t); }, lm.sys, times, tol);
  // A time-independent perturbation of Q_t must be rejected.
  const double bump = 1e-3 * lm.sys.control_weight().norm();
  const int n = lm.sys.state_dim();
  const LyapunovReport perturbed = LyapunovResidualDifferential(
      [family, bump, n](double t) {
        return Matrix(family->MatrixAt(t) + bump * Matrix::Identity(n, n));
      },
      lm.sys, times, tol);

  CsvTable table({"t", "residual"});
  Json per = Json::array();
  for (std::size_t i = 0; i < diff.times.size(); ++i) {
    table.AddRow({diff.times[i], diff.residuals[i]});
    per.push_back(Tag(diff.residuals[i], "lyapunov.differential"));
  }
  ctx.Emit("lyapunov.csv", table);

  Json d;
  d["times"] = diff.times;
  d["residuals"] = std::move(per);
  d["max_scaled"] = Tag(diff.max_scaled, "lyapunov.differential");
  d["tolerance"] = diff.tolerance;
  d["pass"] = diff.pass;
  d["series"] = "lyapunov.csv";
  out.result["differential"] = std::move(d);

  Json p;
  p["max_scaled"] = Tag(perturbed.max_scaled, "lyapunov.differential");
  p["rejected"] = !perturbed.pass;
  out.result["perturbed_control"] = std::move(p);
  out.pass = diff.pass && !perturbed.pass;

  if (lm.family->has_infinite()) {
    const LyapunovReport alg =
        LyapunovResidualAlgebraic(lm.family->Infinite().matrix(), lm.sys, 1e-10 * ctx.tol);
    Json a;
    a["max_scaled"] = Tag(alg.max_scaled, "lyapunov.algebraic");
    a["tolerance"] = alg.tolerance;
    a["pass"] = alg.pass;
    out.result["algebraic"] = std::move(a);
    out.pass = out.pass && alg.pass;
  }
  return out;
}

// Eigenvectors of the symmetric generator, slowest mode first.
Matrix ModeBasis(const LinearSystem& sys) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(Symmetrize(sys.a()));
  return es.eigenvectors().rowwise().reverse();
}

Matrix CommutingK(const LinearSystem& sys, Context& ctx) {
  if (ctx.k) {
    if (ctx.k->rows() != sys.state_dim() || ctx.k->cols() != sys.state_dim()) {
      throw ScenarioError("K: expected a " + std::to_string(sys.state_dim()) + "x" +
                          std::to_string(sys.state_dim()) + " matrix");
    }
    return *ctx.k;
  }
  std::mt19937_64 gen(ctx.seed);
  std::uniform_real_distribution<double> unif(0.0, 2.0);
  const Matrix v = ModeBasis(sys);
  Vector d(sys.state_dim());
  for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = unif(gen);
  return v * d.asDiagonal() * v.transpose();
}

void RequireCommuting(const LinearSystem& sys, const char* task) {
  if (!sys.is_symmetric() || !sys.is_commuting()) {
    throw PreconditionError(std::string(task) +
                            ": needs a symmetric generator commuting with B B^T");
  }
  if (!sys.is_stable()) throw UnstableSystemError(std::string(task) + ": needs a stable generator");
}

TaskOutcome TaskCommutingFamily(const LinearModel& lm, Context& ctx) {
  TaskOutcome out;
  RequireCommuting(lm.sys, "commuting-family");
  const HGeometry geom(lm.family->Infinite());
  const Matrix k = CommutingK(lm.sys, ctx);
  const T1Estimate t1 = DetectT1(lm.sys, geom, k);
  const RiccatiCandidate cand = CommutingCandidate(lm.sys, geom, k, 0.0, t1.t1);
  std::vector<double> times;
  for (double h : ctx.horizons) times.push_back(t1.t1 + h);
  std::sort(times.begin(), times.end());
  const Matrix probes = RangeProbes(geom.q_inf().psd(), 4, ctx.seed);
  ResidualOptions opts;
  opts.tolerance = 1e-6 * ctx.tol;
  const ResidualReport rep = RiccatiResidualCommuting(cand, lm.sys, geom, times, probes, opts);
  EmitResiduals(ctx, "commuting_family.csv", rep);
  out.result["K"] = TagMatrix(k, "commuting.family");
  out.result["T1"] = Tag(t1.t1, "commuting.family_threshold");
  out.result["margin_at_T1"] = Tag(t1.margin_at_t1, "commuting.family_threshold");
  out.result["residual"] = ResidualToJson(rep, "riccati.commuting");
  out.result["residual"]["series"] = "commuting_family.csv";
  out.pass = rep.pass;
  return out;
}

TaskOutcome TaskRecoverL(const LinearModel& lm, Context& ctx) {
  TaskOutcome out;
  RequireCommuting(lm.sys, "recover-L");
  const HGeometry geom(lm.family->Infinite());
  const Matrix k = CommutingK(lm.sys, ctx);
  const T1Estimate t1 = DetectT1(lm.sys, geom, k);
  const RiccatiCandidate cand = CommutingCandidate(lm.sys, geom, k, 0.0, t1.t1);
  std::vector<double> offsets = ctx.horizons;
  std::sort(offsets.begin(), offsets.end());
  const double t_star = t1.t1 + offsets.front();
  std::vector<double> grid;
  for (double h : offsets) grid.push_back(t_star + h);
  const RecoverLReport rep = RecoverL(cand, lm.sys, geom, t_star, grid, 1e-6 * ctx.tol);
  const Matrix e = Expm(lm.sys.a(), t_star);
  const Matrix expected = e * k * e;
  const double l_err =
      (rep.l - expected).norm() / std::max(expected.norm(), 1e-300);
  out.result["T_star"] = t_star;
  out.result["L"] = TagMatrix(rep.l, "commuting.recover_l");
  out.result["L_rel_error"] = Tag(l_err, "commuting.recover_l");
  Json errs = Json::array();
  for (double v : rep.errors) errs.push_back(Tag(v, "commuting.recover_l"));
  out.result["grid"] = rep.grid;
  out.result["errors"] = std::move(errs);
  out.result["max_error"] = Tag(rep.max_error, "commuting.recover_l");
  out.result["tolerance"] = 1e-6 * ctx.tol;
  out.pass = rep.pass && l_err <= 1e-6 * ctx.tol;
  return out;
}

TaskOutcome TaskProjectCheck(const LinearModel& lm, Context& ctx) {
  TaskOutcome out;
  RequireCommuting(lm.sys, "project-check");
  const HGeometry geom(lm.family->Infinite());
  const double t0 = ctx.T0();
  std::vector<double> times = TimesFrom(ctx.horizons, t0);
  if (times.empty()) times.push_back(t0);
  const RiccatiCandidate pv = PvCandidate(lm.family, t0);
  const Matrix probes = RangeProbes(geom.q_inf().psd(), 4, ctx.seed);
  const Matrix modes = ModeBasis(lm.sys);
  const int n = lm.sys.state_dim();

  std::vector<std::vector<int>> sets = ctx.projection_modes;
  if (sets.empty()) {
    for (int i = 0; i < std::min(n, 3); ++i) sets.push_back({i});
    std::vector<int> half;
    for (int i = 0; i < (n + 1) / 2; ++i) half.push_back(i);
    sets.push_back(half);
  }
  ResidualOptions opts;
  opts.tolerance = 1e-6 * ctx.tol;
  Json rows = Json::array();
  for (std::size_t si = 0; si < sets.size(); ++si) {
    Matrix basis(n, static_cast<Eigen::Index>(sets[si].size()));
    for (std::size_t c = 0; c < sets[si].size(); ++c) {
      const int idx = sets[si][c];
      if (idx < 0 || idx >= n) {
        throw ScenarioError("projection_modes[" + std::to_string(si) + "][" +
                            std::to_string(c) + "]: mode index out of range");
      }
      basis.col(static_cast<Eigen::Index>(c)) = modes.col(idx);
    }
    const Matrix p = basis * basis.transpose();
    const ProjectedCheckReport rep =
        ProjectedSolutionCheck(pv, p, lm.sys, geom, times, probes, opts);
    Json row;
    row["modes"] = sets[si];
    row["range_condition"] = rep.range_condition;
    row["range_defect"] = Tag(rep.range_defect, "commuting.projected_range");
    row["is_solution"] = rep.is_solution;
    row["residual"] = Tag(rep.residual, "riccati.commuting");
    row["consistent"] = rep.consistent;
    out.pass = out.pass && rep.consistent;
    rows.push_back(std::move(row));
  }
  out.result["T0"] = t0;
  out.result["projections"] = std::move(rows);
  return out;
}

TaskOutcome TaskNullControllability(const LinearModel& lm, Context& ctx) {
  TaskOutcome out;
  const double t0 = ctx.T0();
  const NullControllability nc = NullControllabilityTest(lm.sys, t0);
  out.result["T0"] = t0;
  out.result["satisfied"] = nc.satisfied;
  out.result["constant"] = Tag(nc.constant, "null_controllability.range_inclusion");
  out.result["residual"] = Tag(nc.residual, "null_controllability.range_inclusion");
  out.pass = nc.satisfied;
  if (lm.model.spectral) {
    const SpectralNullControllability s = SpectralNullControllabilityTest(*lm.model.spectral, t0);
    Json sj;
    sj["satisfied"] = s.satisfied;
    sj["constant"] = Tag(s.constant, "spectral.null_controllability_ratio");
    sj["log_constant"] = Tag(s.log_constant, "spectral.null_controllability_ratio");
    sj["argmax_mode"] = s.argmax_mode;
    out.result["spectral_criterion"] = std::move(sj);
    out.result["verdicts_agree"] = s.satisfied == nc.satisfied;
    // For the diagonal model the verdict itself is the finding; what must
    // hold is agreement between the two tests.
    out.pass = s.satisfied == nc.satisfied;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Delay and shift models.

Vector DelayTarget(const Model& model, const Context& ctx, std::size_t i) {
  const Vector& x = ctx.targets[i];
  if (x.size() != model.state_dim) {
    throw ScenarioError("targets[" + std::to_string(i) + "]: expected length " +
                        std::to_string(model.state_dim));
  }
  return x;
}

TaskOutcome TaskDelay(const std::string& task, const Model& model, Context& ctx) {
  TaskOutcome out;
  const DelaySystem& sys = *model.delay;
  if (task == "gramian") {
    Json rows = Json::array();
    for (double t : ctx.horizons) {
      const Gramian g = DelayGramian(sys, t);
      const double asym = MaxAbs(g.matrix() - g.matrix().transpose());
      const double min_eig = g.psd().eigenvalues()(0);
      Json row = GramianToJson(g);
      row["Q"] = TagMatrix(g.matrix(), "delay.gramian");
      row["t"] = t;
      row["asymmetry"] = Tag(asym, "delay.gramian");
      row["min_eigenvalue"] = Tag(min_eig, "delay.gramian");
      row["boundary_residual"] = Tag(DelayBoundaryResidual(sys, g), "delay.boundary_condition");
      const bool ok = asym <= 1e-9 * std::max(1.0, MaxAbs(g.matrix())) && min_eig >= 0.0;
      row["pass"] = ok;
      out.pass = out.pass && ok;
      rows.push_back(std::move(row));
    }
    out.result["horizons"] = std::move(rows);
    return out;
  }
  if (task == "null-controllability") {
    const double t0 = ctx.t0 ? *ctx.t0 : 2.0 * sys.d();
    const DelayNullControllability nc = DelayNullControllabilityTest(sys, t0);
    out.result["T0"] = t0;
    out.result["satisfied"] = nc.satisfied;
    out.result["expected"] = nc.expected;
    out.result["constant"] = Tag(nc.constant, "null_controllability.range_inclusion");
    out.result["residual"] = Tag(nc.residual, "null_controllability.range_inclusion");
    out.pass = nc.satisfied == nc.expected;
    return out;
  }
  // min-energy: default target is the unit present state with zero history.
  std::vector<Vector> targets;
  if (ctx.targets.empty()) {
    targets.push_back(Vector::Unit(model.state_dim, 0));
  } else {
    for (std::size_t i = 0; i < ctx.targets.size(); ++i) targets.push_back(DelayTarget(model, ctx, i));
  }
  Json rows = Json::array();
  for (double t : ctx.horizons) {
    const Gramian g = DelayGramian(sys, t);
    for (std::size_t ti = 0; ti < targets.size(); ++ti) {
      const Reachability r = ClassifyTarget(g, targets[ti]);
      Json row;
      row["t"] = t;
      row["target_id"] = ti;
      row["class"] = ToString(r.cls);
      row["defect"] = Tag(r.defect, "reachability.projection_defect");
      row["value"] = Tag(r.cls == ReachabilityClass::kUnreachable
                             ? std::numeric_limits<double>::infinity()
                             : ValueFunction(g, targets[ti]),
                         "value.pinv_sqrt");
      rows.push_back(std::move(row));
    }
  }
  out.result["rows"] = std::move(rows);
  return out;
}

TaskOutcome TaskShift(const Model& model, Context& ctx) {
  TaskOutcome out;
  const ShiftSystem& sys = *model.shift;
  std::vector<Vector> targets;
  if (ctx.targets.empty()) {
    targets.push_back(ShiftRampTarget(sys.cells()));
  } else {
    for (std::size_t i = 0; i < ctx.targets.size(); ++i) {
      if (ctx.targets[i].size() != sys.cells()) {
        throw ScenarioError("targets[" + std::to_string(i) + "]: expected " +
                            std::to_string(sys.cells()) + " cell averages");
      }
      targets.push_back(ctx.targets[i]);
    }
  }
  CsvTable table({"t", "target_id", "defect", "tail_norm"});
  Json rows = Json::array();
  for (double t : ctx.horizons) {
    for (std::size_t ti = 0; ti < targets.size(); ++ti) {
      const ShiftDefect d = ShiftReachableDefect(sys, t, targets[ti]);
      table.AddRow({t, static_cast<double>(ti), d.defect, d.tail_norm});
      Json row;
      row["t"] = t;
      row["target_id"] = ti;
      row["defect"] = Tag(d.defect, "shift.reachable_defect");
      row["tail_norm"] = Tag(d.tail_norm, "shift.reachable_defect");
      rows.push_back(std::move(row));
    }
  }
  ctx.Emit("shift_defect.csv", table);
  out.result["rows"] = std::move(rows);
  out.result["series"] = "shift_defect.csv";
  return out;
}

std::vector<std::string> TaskList(const Json& sc) {
  std::vector<std::string> tasks;
  if (!sc.contains("tasks")) return tasks;
  for (const auto& t : sc.at("tasks")) tasks.push_back(t.get<std::string>());
  return tasks;
}

bool NeedsHorizons(const std::string& task) {
  return task != "null-controllability" && task != "project-check";
}

}  // namespace

const std::vector<std::string>& KnownTasks() { return kLinearTasks; }

void ValidateScenario(const Json& sc) {
  if (!sc.is_object()) throw ScenarioError("(root): expected an object");
  const bool has_model = sc.contains("model");
  const bool has_system = sc.contains("system");
  if (has_model == has_system) throw ScenarioError("model: give exactly one of model or system");
  const Json& m = ModelField(sc);
  const std::string mpath = has_model ? "model" : "system";
  if (!m.is_string() && !m.is_object()) {
    throw ScenarioError(mpath + ": expected a preset name or {\"A\", \"B\"}");
  }
  const ModelKind kind = KindOf(m);
  if (kind == ModelKind::kSpectral) {
    try {
      ParseSpectralPreset(m.get<std::string>());
    } catch (const std::exception& e) {
      throw ScenarioError(mpath + ": " + e.what());
    }
  }

  if (!sc.contains("tasks")) throw ScenarioError("tasks: required");
  {
    const Json& tasks = sc.at("tasks");
    if (!tasks.is_array()) throw ScenarioError("tasks: expected an array");
    if (tasks.empty()) throw ScenarioError("tasks: at least one task is required");
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const std::string path = "tasks[" + std::to_string(i) + "]";
      if (!tasks[i].is_string()) throw ScenarioError(path + ": expected a task name");
      const std::string name = tasks[i].get<std::string>();
      if (!Contains(kLinearTasks, name)) throw ScenarioError(path + ": unknown task '" + name + "'");
      if (!Contains(SupportedTasks().at(kind), name)) {
        throw ScenarioError(path + ": task '" + name + "' is not available for this model");
      }
    }
  }
  if (sc.contains("horizons") && sc.contains("horizon")) {
    throw ScenarioError("horizons: give either horizons or horizon");
  }
  if (sc.contains("horizons")) {
    RequireNumberArray(sc.at("horizons"), "horizons");
    for (std::size_t i = 0; i < sc.at("horizons").size(); ++i) {
      RequirePositiveNumber(sc.at("horizons")[i], "horizons[" + std::to_string(i) + "]");
    }
  }
  if (sc.contains("horizon")) RequirePositiveNumber(sc.at("horizon"), "horizon");
  if (sc.contains("targets") && sc.contains("target")) {
    throw ScenarioError("targets: give either targets or target");
  }
  if (sc.contains("targets")) {
    const Json& t = sc.at("targets");
    if (!t.is_array() || t.empty()) throw ScenarioError("targets: expected a non-empty array");
    for (std::size_t i = 0; i < t.size(); ++i) {
      RequireNumberArray(t[i], "targets[" + std::to_string(i) + "]");
    }
  }
  if (sc.contains("target")) RequireNumberArray(sc.at("target"), "target");
  if (sc.contains("grid_points")) RequireInteger(sc.at("grid_points"), "grid_points", 2);
  if (sc.contains("oracle_steps")) RequireInteger(sc.at("oracle_steps"), "oracle_steps", 1);
  if (sc.contains("seed")) RequireInteger(sc.at("seed"), "seed", 0);
  if (sc.contains("modes")) RequireInteger(sc.at("modes"), "modes", 1);
  if (sc.contains("mesh")) RequireInteger(sc.at("mesh"), "mesh", 1);
  if (sc.contains("T0")) RequirePositiveNumber(sc.at("T0"), "T0");
  if (sc.contains("output") && !sc.at("output").is_string()) {
    throw ScenarioError("output: expected a directory path");
  }
  if (sc.contains("K")) {
    try {
      MatrixFromJson(sc.at("K"), "K");
    } catch (const std::exception& e) {
      throw ScenarioError(e.what());
    }
  }
  if (sc.contains("projection_modes")) {
    const Json& p = sc.at("projection_modes");
    if (!p.is_array()) throw ScenarioError("projection_modes: expected an array of index lists");
    for (std::size_t i = 0; i < p.size(); ++i) {
      const std::string path = "projection_modes[" + std::to_string(i) + "]";
      if (!p[i].is_array() || p[i].empty()) throw ScenarioError(path + ": expected a non-empty array");
      for (std::size_t c = 0; c < p[i].size(); ++c) {
        RequireInteger(p[i][c], path + "[" + std::to_string(c) + "]", 0);
      }
    }
  }

  const bool has_horizons = sc.contains("horizons") || sc.contains("horizon");
  const bool has_targets = sc.contains("targets") || sc.contains("target");
  const std::vector<std::string> tasks = TaskList(sc);
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const std::string& task = tasks[i];
    const std::string path = "tasks[" + std::to_string(i) + "]";
    if (NeedsHorizons(task) && !has_horizons) {
      throw ScenarioError("horizons: required by " + path + " (" + task + ")");
    }
    if (!NeedsHorizons(task) && !has_horizons && !sc.contains("T0") &&
        kind != ModelKind::kDelay) {
      throw ScenarioError("T0: required by " + path + " (" + task + ") when horizons are absent");
    }
    const bool linear_like = kind == ModelKind::kLinear || kind == ModelKind::kSpectral;
    if ((task == "min-energy" || task == "sweep") && linear_like && !has_targets) {
      throw ScenarioError("targets: required by " + path + " (" + task + ")");
    }
  }
}

RunResult RunScenario(const Json& sc, const RunOptions& options) {
  ValidateScenario(sc);
  const Model model = BuildModel(sc, options);

  Context ctx;
  ctx.seed = sc.contains("seed") ? sc.at("seed").get<std::uint64_t>() : 0;
  if (options.seed) ctx.seed = *options.seed;
  ctx.tol = options.tol_scale;
  if (!(ctx.tol > 0.0)) throw ScenarioError("--tol: must be positive");
  if (options.nodes) ctx.quadrature.nodes = *options.nodes;
  if (sc.contains("horizons")) {
    ctx.horizons = sc.at("horizons").get<std::vector<double>>();
  } else if (sc.contains("horizon")) {
    ctx.horizons = {sc.at("horizon").get<double>()};
  }
  const bool linear_like = model.linear.has_value();
  auto read_target = [&](const Json& j, const std::string& path) {
    Vector x = VectorFromJson(j, path);
    if (linear_like && x.size() != model.state_dim) {
      throw ScenarioError(path + ": expected length " + std::to_string(model.state_dim));
    }
    return x;
  };
  if (sc.contains("targets")) {
    for (std::size_t i = 0; i < sc.at("targets").size(); ++i) {
      ctx.targets.push_back(read_target(sc.at("targets")[i], "targets[" + std::to_string(i) + "]"));
    }
  } else if (sc.contains("target")) {
    ctx.targets.push_back(read_target(sc.at("target"), "target"));
  }
  if (sc.contains("grid_points")) ctx.grid_points = sc.at("grid_points").get<int>();
  if (sc.contains("oracle_steps")) ctx.oracle_steps = sc.at("oracle_steps").get<int>();
  if (sc.contains("T0")) ctx.t0 = sc.at("T0").get<double>();
  if (sc.contains("K")) ctx.k = MatrixFromJson(sc.at("K"), "K");
  if (sc.contains("projection_modes")) {
    ctx.projection_modes = sc.at("projection_modes").get<std::vector<std::vector<int>>>();
  }

  fs::path out_dir = sc.contains("output") ? fs::path(sc.at("output").get<std::string>())
                                           : fs::path("mincontrol_out");
  if (options.out) out_dir = *options.out;
  fs::create_directories(out_dir);
  ctx.out = out_dir;

  std::optional<LinearModel> lm;
  if (model.linear) {
    lm.emplace(LinearModel{model, *model.linear, std::make_shared<GramianFamily>(*model.linear)});
  }

  RunResult result;
  result.output_dir = out_dir;
  Json tasks_json = Json::array();
  using Runner = std::function<TaskOutcome(const LinearModel&, Context&)>;
  static const std::map<std::string, Runner> kRunners = {
      {"gramian", TaskGramian},
      {"min-energy", TaskMinEnergy},
      {"sweep", TaskSweep},
      {"verify-riccati", TaskVerifyRiccati},
      {"verify-lyapunov", TaskVerifyLyapunov},
      {"commuting-family", TaskCommutingFamily},
      {"recover-L", TaskRecoverL},
      {"project-check", TaskProjectCheck},
      {"null-controllability", TaskNullControllability},
  };
  const std::vector<std::string> tasks = TaskList(sc);
  for (const std::string& task : tasks) {
    Json entry;
    entry["task"] = task;
    try {
      TaskOutcome outcome;
      if (lm) {
        outcome = kRunners.at(task)(*lm, ctx);
      } else if (model.delay) {
        outcome = TaskDelay(task, model, ctx);
      } else {
        outcome = TaskShift(model, ctx);
      }
      entry["result"] = std::move(outcome.result);
      entry["pass"] = outcome.pass;
    } catch (const ScenarioError&) {
      throw;
    } catch (const std::exception& e) {
      entry["pass"] = false;
      entry["error"] = task + ": " + e.what();
    }
    result.pass = result.pass && entry["pass"].get<bool>();
    tasks_json.push_back(std::move(entry));
  }

  Json report;
  report["scenario"] = sc;
  report["model"] = model.echo;
  report["seed"] = ctx.seed;
  report["tolerance_scale"] = ctx.tol;
  report["tasks"] = std::move(tasks_json);
  report["pass"] = result.pass;
  report["files"] = ctx.files;
  WriteFileAtomic(out_dir / "report.json", report.dump(2) + "\n");
  result.files = ctx.files;
  result.files.push_back("report.json");
  result.report = std::move(report);
  return result;
}

}  // namespace mincontrol::cli
