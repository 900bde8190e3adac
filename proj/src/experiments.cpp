// experiments.cpp -- config parsing, run drivers, file writers behind the CLI
#include "bosecool/experiments.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include "bosecool/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace bosecool {

namespace {

std::string g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

VacuumLabel parse_label(const std::string& s) {
  VacuumLabel w;
  char extra = 0;
  if (std::sscanf(s.c_str(), "%d.%d.%d%c", &w.l, &w.s, &w.v, &extra) != 3)
    throw std::invalid_argument("malformed vacuum label '" + s +
                                "' (expected l.s.v)");
  return w;
}

void expect_keys(const json& j, const std::set<std::string>& allowed,
                 const std::string& where) {
  if (!j.is_object())
    throw std::invalid_argument(where + ": expected a JSON object");
  for (const auto& item : j.items())
    if (!allowed.count(item.key()))
      throw std::invalid_argument(where + ": unknown key '" + item.key() + "'");
}

double get_num(const json& j, const std::string& key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number())
    throw std::invalid_argument("config: '" + key + "' must be a number");
  return j.at(key).get<double>();
}

int get_int(const json& j, const std::string& key, int fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer())
    throw std::invalid_argument("config: '" + key + "' must be an integer");
  return j.at(key).get<int>();
}

bool get_bool(const json& j, const std::string& key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean())
    throw std::invalid_argument("config: '" + key + "' must be a boolean");
  return j.at(key).get<bool>();
}

std::string get_str(const json& j, const std::string& key,
                    const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string())
    throw std::invalid_argument("config: '" + key + "' must be a string");
  return j.at(key).get<std::string>();
}

void ensure_dir(const std::string& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  return out;
}

std::string sanitize_cell(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

}  // namespace

RunConfig parse_config(const json& j) {
  expect_keys(j,
              {"N", "L_max", "eta", "beta_hw", "beta_mu", "dispersion",
               "gamma_down_target", "terms", "exact_gamma", "dt", "t_final",
               "record_every", "initial_state", "seed", "output_dir", "format",
               "leak_abort", "positivity_abort", "tail_tol", "sweep"},
              "config");
  RunConfig cfg;
  cfg.N = get_int(j, "N", cfg.N);
  cfg.L_max = get_int(j, "L_max", cfg.L_max);
  cfg.eta = get_num(j, "eta", cfg.eta);
  cfg.beta_hw = get_num(j, "beta_hw", cfg.beta_hw);
  cfg.beta_mu = get_num(j, "beta_mu", cfg.beta_mu);
  cfg.dispersion = get_str(j, "dispersion", cfg.dispersion);
  cfg.gamma_down_target = get_num(j, "gamma_down_target", cfg.gamma_down_target);
  if (j.contains("terms")) {
    if (!j.at("terms").is_array())
      throw std::invalid_argument("config: 'terms' must be an array");
    cfg.l0 = cfg.l11 = cfg.l12 = false;
    for (const auto& t : j.at("terms")) {
      const std::string s = t.get<std::string>();
      if (s == "L0")
        cfg.l0 = true;
      else if (s == "L11")
        cfg.l11 = true;
      else if (s == "L12")
        cfg.l12 = true;
      else
        throw std::invalid_argument("config: unknown term '" + s + "'");
    }
  }
  cfg.exact_gamma = get_bool(j, "exact_gamma", cfg.exact_gamma);
  cfg.dt = get_num(j, "dt", cfg.dt);
  cfg.t_final = get_num(j, "t_final", cfg.t_final);
  cfg.record_every = get_int(j, "record_every", cfg.record_every);
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_integer())
      throw std::invalid_argument("config: 'seed' must be an integer");
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }
  cfg.output_dir = get_str(j, "output_dir", cfg.output_dir);
  cfg.format = get_str(j, "format", cfg.format);
  cfg.leak_abort = get_num(j, "leak_abort", cfg.leak_abort);
  cfg.positivity_abort = get_num(j, "positivity_abort", cfg.positivity_abort);
  cfg.tail_tol = get_num(j, "tail_tol", cfg.tail_tol);

  if (j.contains("initial_state")) {
    const json& is = j.at("initial_state");
    InitialStateSpec& spec = cfg.initial;
    spec.type = get_str(is, "type", "thermal");
    if (spec.type == "occupation") {
      expect_keys(is, {"type", "occupations"}, "initial_state");
      if (!is.contains("occupations") || !is.at("occupations").is_array())
        throw std::invalid_argument(
            "initial_state: occupation needs an 'occupations' array");
      spec.occupations = is.at("occupations").get<std::vector<int>>();
      for (int n : spec.occupations)
        if (n < 0)
          throw std::invalid_argument(
              "initial_state: occupations must be nonnegative");
    } else if (spec.type == "vacuum") {
      expect_keys(is, {"type", "label"}, "initial_state");
      if (!is.contains("label"))
        throw std::invalid_argument("initial_state: vacuum needs a 'label'");
      if (is.at("label").is_string()) {
        spec.label = parse_label(is.at("label").get<std::string>());
      } else {
        const auto v = is.at("label").get<std::vector<int>>();
        if (v.size() != 3)
          throw std::invalid_argument("initial_state: label needs [l, s, v]");
        spec.label = {v[0], v[1], v[2]};
      }
    } else if (spec.type == "coarse") {
      expect_keys(is, {"type", "populations", "coherences"}, "initial_state");
      if (!is.contains("populations") || !is.at("populations").is_object())
        throw std::invalid_argument(
            "initial_state: coarse needs a 'populations' object");
      for (const auto& item : is.at("populations").items()) {
        parse_label(item.key());
        spec.populations[item.key()] = item.value().get<double>();
      }
      if (is.contains("coherences")) {
        for (const auto& c : is.at("coherences")) {
          expect_keys(c, {"w", "w2", "re", "im"}, "coherence");
          InitialStateSpec::Coherence coh;
          coh.w = c.at("w").get<std::string>();
          coh.w2 = c.at("w2").get<std::string>();
          coh.re = get_num(c, "re", 0.0);
          coh.im = get_num(c, "im", 0.0);
          parse_label(coh.w);
          parse_label(coh.w2);
          spec.coherences.push_back(coh);
        }
      }
    } else if (spec.type == "thermal") {
      expect_keys(is, {"type", "beta"}, "initial_state");
      spec.beta = get_num(is, "beta", -1.0);
    } else if (spec.type == "random_coarse") {
      expect_keys(is, {"type"}, "initial_state");
    } else {
      throw std::invalid_argument("initial_state: unknown type '" + spec.type +
                                  "'");
    }
  }

  if (j.contains("sweep")) {
    const json& sw = j.at("sweep");
    expect_keys(sw, {"eta", "beta_hw", "beta_mu", "N"}, "sweep");
    for (const auto& item : sw.items()) {
      if (!item.value().is_array() || item.value().empty())
        throw std::invalid_argument("sweep: '" + item.key() +
                                    "' must be a non-empty array");
      cfg.sweep[item.key()] = item.value().get<std::vector<double>>();
    }
  }

  // Range validation.
  if (cfg.N < 1) throw std::invalid_argument("config: N must be >= 1");
  if (cfg.L_max < 0) throw std::invalid_argument("config: L_max must be >= 0");
  if (cfg.eta <= 0) throw std::invalid_argument("config: eta must be positive");
  if (cfg.beta_hw <= 0)
    throw std::invalid_argument("config: beta_hw must be positive");
  if (cfg.beta_mu > 0)
    throw std::invalid_argument("config: beta_mu must be <= 0");
  if (cfg.gamma_down_target <= 0)
    throw std::invalid_argument("config: gamma_down_target must be positive");
  dispersion_from_string(cfg.dispersion);
  if (cfg.dt < 0) throw std::invalid_argument("config: dt must be >= 0");
  if (cfg.t_final <= 0)
    throw std::invalid_argument("config: t_final must be positive");
  if (cfg.record_every < 1)
    throw std::invalid_argument("config: record_every must be >= 1");
  if (cfg.format != "csv" && cfg.format != "json")
    throw std::invalid_argument("config: format must be 'csv' or 'json'");
  if (cfg.tail_tol <= 0)
    throw std::invalid_argument("config: tail_tol must be positive");
  for (const auto& [key, vals] : cfg.sweep) {
    if (key == "N")
      for (double v : vals)
        if (v < 1 || v != std::floor(v))
          throw std::invalid_argument("sweep: N values must be integers >= 1");
    if (key == "eta")
      for (double v : vals)
        if (v <= 0) throw std::invalid_argument("sweep: eta values must be positive");
    if (key == "beta_hw")
      for (double v : vals)
        if (v <= 0)
          throw std::invalid_argument("sweep: beta_hw values must be positive");
    if (key == "beta_mu")
      for (double v : vals)
        if (v > 0) throw std::invalid_argument("sweep: beta_mu values must be <= 0");
  }
  return cfg;
}

json config_to_json(const RunConfig& cfg) {
  json j;
  j["N"] = cfg.N;
  j["L_max"] = cfg.L_max;
  j["eta"] = cfg.eta;
  j["beta_hw"] = cfg.beta_hw;
  j["beta_mu"] = cfg.beta_mu;
  j["dispersion"] = cfg.dispersion;
  j["gamma_down_target"] = cfg.gamma_down_target;
  json terms = json::array();
  if (cfg.l0) terms.push_back("L0");
  if (cfg.l11) terms.push_back("L11");
  if (cfg.l12) terms.push_back("L12");
  j["terms"] = terms;
  j["exact_gamma"] = cfg.exact_gamma;
  j["dt"] = cfg.dt;
  j["t_final"] = cfg.t_final;
  j["record_every"] = cfg.record_every;
  json is;
  is["type"] = cfg.initial.type;
  if (cfg.initial.type == "occupation") is["occupations"] = cfg.initial.occupations;
  if (cfg.initial.type == "vacuum")
    is["label"] = std::vector<int>{cfg.initial.label.l, cfg.initial.label.s,
                                   cfg.initial.label.v};
  if (cfg.initial.type == "coarse") {
    is["populations"] = cfg.initial.populations;
    json cohs = json::array();
    for (const auto& c : cfg.initial.coherences)
      cohs.push_back({{"w", c.w}, {"w2", c.w2}, {"re", c.re}, {"im", c.im}});
    is["coherences"] = cohs;
  }
  if (cfg.initial.type == "thermal") is["beta"] = cfg.initial.beta;
  j["initial_state"] = is;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  j["format"] = cfg.format;
  j["leak_abort"] = cfg.leak_abort;
  j["positivity_abort"] = cfg.positivity_abort;
  j["tail_tol"] = cfg.tail_tol;
  if (!cfg.sweep.empty()) j["sweep"] = cfg.sweep;
  return j;
}

RunConfig load_config(const std::string& path,
                      const std::vector<std::string>& overrides) {
  json j;
  if (path.empty()) {
    j = config_to_json(RunConfig{});
    j.erase("sweep");
  } else {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read config file " + path);
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw std::invalid_argument("config parse error in " + path + ": " +
                                  e.what());
    }
  }
  for (const std::string& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0)
      throw std::invalid_argument("override must look like key=value: " + ov);
    const std::string key = ov.substr(0, eq);
    const std::string val = ov.substr(eq + 1);
    json parsed = json::parse(val, nullptr, false);
    if (parsed.is_discarded()) parsed = val;  // fall back to a raw string
    // Retyping the initial state switches schema; drop the old type's fields
    // so they do not linger and fail key validation later.
    if (key == "initial_state.type") {
      j["initial_state"] = json{{"type", parsed}};
      continue;
    }
    json* node = &j;
    size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(
          start, dot == std::string::npos ? std::string::npos : dot - start);
      if (part.empty())
        throw std::invalid_argument("override has an empty path segment: " + ov);
      if (dot == std::string::npos) {
        (*node)[part] = parsed;
        break;
      }
      node = &(*node)[part];
      start = dot + 1;
    }
  }
  return parse_config(j);
}

std::unique_ptr<Workspace> build_workspace(const RunConfig& cfg) {
  auto ws = std::make_unique<Workspace>();
  ws->basis = build_basis(cfg.N, cfg.L_max);
  ws->ops = build_collective_ops(ws->basis);
  ws->table = classify_vacua(ws->basis, ws->ops.A, ws->ops.D);
  ws->ladders = build_ladders(ws->basis, ws->table, ws->ops.Adag);
  ws->ftable = build_ftable(ws->table);
  ws->bath = bath_from_target(cfg.gamma_down_target, cfg.eta, cfg.beta_hw,
                              cfg.beta_mu, cfg.N,
                              dispersion_from_string(cfg.dispersion));
  ws->rates = compute_rates(ws->bath);
  if (cfg.eta * std::sqrt(2.0) >= 1.0)
    std::cerr << "warning: sqrt(2) * eta = " << cfg.eta * std::sqrt(2.0)
              << " >= 1, the small-parameter expansion is uncontrolled\n";
  return ws;
}

EvolutionConfig evolution_config(const RunConfig& cfg) {
  EvolutionConfig ec;
  ec.l0 = cfg.l0;
  ec.l11 = cfg.l11;
  ec.l12 = cfg.l12;
  ec.exact_gamma = cfg.exact_gamma;
  ec.dt = cfg.dt;
  ec.t_final = cfg.t_final;
  ec.record_every = cfg.record_every;
  ec.leak_abort = cfg.leak_abort;
  ec.positivity_abort = cfg.positivity_abort;
  ec.tail_tol = cfg.tail_tol;
  return ec;
}

namespace {

// Direct coarse-variable form of a "coarse" or "random_coarse" initial state.
CoarseState initial_coarse_state(const Workspace& ws, const RunConfig& cfg) {
  const InitialStateSpec& spec = cfg.initial;
  if (spec.type == "random_coarse") {
    std::mt19937_64 rng(cfg.seed);
    return random_coarse_state(ws.ftable.labels, rng);
  }
  CoarseState cs;
  cs.labels = ws.ftable.labels;
  cs.n = Eigen::VectorXd::Zero(cs.labels.size());
  cs.r = Eigen::MatrixXcd::Zero(cs.labels.size(), cs.labels.size());
  for (const auto& [key, weight] : spec.populations) {
    const int i = ws.ftable.index_of(parse_label(key));
    if (i < 0)
      throw std::invalid_argument("initial_state: no ladder labelled " + key);
    cs.n(i) = weight;
  }
  if (std::abs(cs.n.sum() - 1.0) > 1e-6)
    throw std::invalid_argument("initial_state: populations sum to " +
                                std::to_string(cs.n.sum()) + ", expected 1");
  for (const auto& c : spec.coherences) {
    const int i = ws.ftable.index_of(parse_label(c.w));
    const int jdx = ws.ftable.index_of(parse_label(c.w2));
    if (i < 0 || jdx < 0)
      throw std::invalid_argument(
          "initial_state: coherence references an unknown label");
    if (i == jdx)
      throw std::invalid_argument(
          "initial_state: coherence needs two distinct labels");
    cs.r(i, jdx) = cplx(c.re, c.im);
    cs.r(jdx, i) = cplx(c.re, -c.im);
  }
  return cs;
}

}  // namespace

Eigen::MatrixXcd initial_density(const Workspace& ws, const RunConfig& cfg) {
  const InitialStateSpec& spec = cfg.initial;
  const double q = std::exp(-ws.rates.beta_e);
  if (spec.type == "occupation") {
    OccupationState st{spec.occupations};
    while (!st.nu.empty() && st.nu.back() == 0) st.nu.pop_back();
    if (st.particles() != cfg.N)
      throw std::invalid_argument("initial_state: occupations carry " +
                                  std::to_string(st.particles()) +
                                  " atoms, config says " + std::to_string(cfg.N));
    const int idx = ws.basis.find(st);
    if (idx < 0)
      throw std::invalid_argument("initial_state: occupation state " + st.str() +
                                  " lies outside the cutoff");
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(ws.basis.dim);
    psi(idx) = 1.0;
    return pure_state(psi);
  }
  if (spec.type == "vacuum") {
    const VacuumState* vac = ws.table.find(spec.label);
    if (!vac)
      throw std::invalid_argument("initial_state: no vacuum labelled " +
                                  spec.label.str());
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(ws.basis.dim);
    const auto& sh = ws.basis.shells[spec.label.l];
    psi.segment(sh.offset, sh.dim()) = vac->coeffs.cast<cplx>();
    return pure_state(psi);
  }
  if (spec.type == "coarse" || spec.type == "random_coarse") {
    // The truncated geometric profile undershoots unit trace by its tail.
    Eigen::MatrixXcd rho =
        lift(ws.ladders, initial_coarse_state(ws, cfg), q, cfg.tail_tol);
    rho /= rho.trace().real();
    return rho;
  }
  if (spec.type == "thermal")
    return thermal_state(ws.basis, spec.beta < 0 ? ws.rates.beta_e : spec.beta);
  throw std::invalid_argument("initial_state: unknown type '" + spec.type + "'");
}

double fit_exponential_rate(const std::vector<double>& times,
                            const std::vector<double>& values, double asymptote,
                            double t_lo, double t_hi) {
  std::vector<double> ts, ys;
  double ymax = 0;
  for (size_t i = 0; i < times.size() && i < values.size(); ++i) {
    if (times[i] < t_lo || times[i] > t_hi) continue;
    const double y = std::abs(values[i] - asymptote);
    ymax = std::max(ymax, y);
    ts.push_back(times[i]);
    ys.push_back(y);
  }
  std::vector<double> tk, lk;
  for (size_t i = 0; i < ts.size(); ++i) {
    if (ys[i] <= std::max(ymax * 1e-3, 1e-14)) continue;
    tk.push_back(ts[i]);
    lk.push_back(std::log(ys[i]));
  }
  if (tk.size() < 4) return std::numeric_limits<double>::quiet_NaN();
  double st = 0, sl = 0, stt = 0, stl = 0;
  const double n = static_cast<double>(tk.size());
  for (size_t i = 0; i < tk.size(); ++i) {
    st += tk[i];
    sl += lk[i];
    stt += tk[i] * tk[i];
    stl += tk[i] * lk[i];
  }
  const double denom = n * stt - st * st;
  if (std::abs(denom) < 1e-300) return std::numeric_limits<double>::quiet_NaN();
  return -(n * stl - st * sl) / denom;
}

namespace {

std::vector<std::string> trajectory_columns(const std::vector<VacuumLabel>& labels) {
  std::vector<std::string> cols = {"t", "trace_drift", "leak_top2"};
  for (const auto& w : labels) cols.push_back("n_" + w.str());
  for (size_t i = 0; i < labels.size(); ++i)
    for (size_t j = i + 1; j < labels.size(); ++j) {
      const std::string base =
          "r_" + labels[i].str() + "__" + labels[j].str();
      cols.push_back(base + "_re");
      cols.push_back(base + "_im");
    }
  return cols;
}

std::vector<double> trajectory_row(double t, double drift, double leak,
                                   const Eigen::VectorXd& n,
                                   const Eigen::MatrixXcd& r) {
  std::vector<double> row = {t, drift, leak};
  for (int i = 0; i < n.size(); ++i) row.push_back(n(i));
  for (int i = 0; i < n.size(); ++i)
    for (int j = i + 1; j < n.size(); ++j) {
      row.push_back(r(i, j).real());
      row.push_back(r(i, j).imag());
    }
  return row;
}

void write_table(const fs::path& path, const std::string& format,
                 const std::vector<std::string>& cols,
                 const std::vector<std::vector<double>>& rows) {
  auto out = open_out(path);
  if (format == "json") {
    json j;
    j["columns"] = cols;
    j["rows"] = rows;
    out << j.dump(2) << "\n";
    return;
  }
  for (size_t i = 0; i < cols.size(); ++i)
    out << (i ? "," : "") << cols[i];
  out << "\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << g17(row[i]);
    out << "\n";
  }
}

void write_full_trajectory(const fs::path& path, const std::string& format,
                           const Trajectory& traj,
                           const std::vector<VacuumLabel>& labels) {
  std::vector<std::vector<double>> rows;
  for (const auto& s : traj.samples)
    rows.push_back(
        trajectory_row(s.t, s.trace_drift, s.leak_top2, s.coarse.n, s.coarse.r));
  write_table(path, format, trajectory_columns(labels), rows);
}

void write_coarse_trajectory(const fs::path& path, const std::string& format,
                             const CoarseTrajectory& traj) {
  std::vector<std::vector<double>> rows;
  const double total0 =
      traj.n.rows() > 0 ? traj.n.row(0).sum() : 0.0;
  for (size_t i = 0; i < traj.times.size(); ++i)
    rows.push_back(trajectory_row(traj.times[i],
                                  std::abs(traj.n.row(i).sum() - total0), 0.0,
                                  traj.n.row(i).transpose(), traj.r[i]));
  write_table(path, format, trajectory_columns(traj.labels), rows);
}

json rates_json(const Workspace& ws) {
  json j;
  j["gamma_down"] = ws.rates.gamma_down;
  j["gamma_up"] = ws.rates.gamma_up;
  j["gamma1_down"] = ws.rates.gamma1_down;
  j["gamma1_up"] = ws.rates.gamma1_up;
  j["beta_e"] = ws.rates.beta_e;
  j["beta_e_prime"] = ws.rates.beta_e_prime;
  j["kappa_scale"] = ws.bath.kappa_scale;
  return j;
}

std::vector<double> sample_grid(double t_final, double dt, int record_every) {
  std::vector<double> times = {0.0};
  const double stride = dt * record_every;
  for (double t = stride; t < t_final - 1e-12 * t_final; t += stride)
    times.push_back(t);
  times.push_back(t_final);
  return times;
}

}  // namespace

json vacuum_table_report(const Workspace& ws) {
  json j;
  j["N"] = ws.basis.N;
  j["L_max"] = ws.basis.L_max;
  json census = json::array();
  for (const auto& c : ws.table.census)
    census.push_back({{"l", c.l},
                      {"p", c.p},
                      {"n_vacua", c.n_vacua},
                      {"n_new_families", c.n_new_families}});
  j["census"] = census;
  json vacua = json::array();
  for (const auto& vac : ws.table.vacua) {
    json v;
    v["label"] = vac.label.str();
    v["l"] = vac.label.l;
    v["s"] = vac.label.s;
    v["v"] = vac.label.v;
    v["base_m"] = vac.base_m;
    v["base_v"] = vac.base_v;
    v["ddag_d_numeric"] = vac.ddag_d_numeric;
    const double fc = f_closed(vac.label.l, vac.label.s, ws.basis.N);
    v["ddag_d_closed"] = fc * fc;
    v["f_closed"] = fc;
    v["f_numeric"] = f_numeric(ws.basis, ws.ops.B, ws.table, vac.label);
    v["coefficients"] = std::vector<double>(
        vac.coeffs.data(), vac.coeffs.data() + vac.coeffs.size());
    vacua.push_back(v);
  }
  j["vacua"] = vacua;
  json overlaps = json::array();
  for (int l = 0; l <= std::min(ws.basis.N, ws.basis.L_max); ++l) {
    if (l == 1) continue;
    const Eigen::VectorXd c = closed_form_vacuum(ws.basis.N, l);
    const Eigen::MatrixXd K = kernel_of_A(ws.basis, ws.ops.A, l);
    overlaps.push_back(
        {{"l", l}, {"overlap", (K.transpose() * c).norm()}});
  }
  j["closed_form_overlap"] = overlaps;
  return j;
}

namespace {

// Slowest nonzero decay rate of the one-quantum rung chain, minimized over
// ladders. Within a ladder the collective jump acts as oscillator lowering,
// so rung populations follow a birth-death chain truncated at k_max.
double fast_gap(const LadderSet& ladders, const RateSet& rates) {
  double gap = std::numeric_limits<double>::infinity();
  for (const auto& lad : ladders.ladders) {
    const int K = lad.k_max;
    if (K < 1) continue;
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(K + 1, K + 1);
    for (int k = 0; k <= K; ++k) {
      if (k > 0) {
        M(k - 1, k) += 2.0 * rates.gamma_down * k;
        M(k, k) -= 2.0 * rates.gamma_down * k;
      }
      if (k < K) {
        M(k + 1, k) += 2.0 * rates.gamma_up * (k + 1);
        M(k, k) -= 2.0 * rates.gamma_up * (k + 1);
      }
    }
    const Eigen::EigenSolver<Eigen::MatrixXd> es(M, false);
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
      const double re = -es.eigenvalues()(i).real();
      if (re > 1e-10) gap = std::min(gap, re);
    }
  }
  if (!std::isfinite(gap)) return 2.0 * (rates.gamma_down - rates.gamma_up);
  return gap;
}

}  // namespace

CompareResult compare_run(const RunConfig& cfg, const Workspace& ws) {
  CompareResult res;
  res.labels = ws.ftable.labels;

  const Eigen::MatrixXcd rho0 = initial_density(ws, cfg);
  res.full = evolve(ws.basis, ws.ops, ws.bath, ws.rates, evolution_config(cfg),
                    rho0, ws.ladders);

  const CoarseState cs0 = project(ws.ladders, rho0);
  std::vector<double> times;
  for (const auto& s : res.full.samples) times.push_back(s.t);
  res.coarse = evolve_coarse(ws.ftable, ws.rates, cs0, times);
  res.stationary = stationary_populations(ws.ftable, ws.rates, cs0);

  const int nlab = static_cast<int>(res.labels.size());
  res.max_abs_dn = 0;
  for (size_t i = 0; i < res.full.samples.size(); ++i)
    for (int w = 0; w < nlab; ++w)
      res.max_abs_dn = std::max(
          res.max_abs_dn,
          std::abs(res.full.samples[i].coarse.n(w) - res.coarse.n(i, w)));

  // Predicted scales, both for the truncated model: slowest relaxation of the
  // one-quantum rung chains and of the ladder-weight generator. The infinite
  // chain relaxes at 2(gamma_down - gamma_up); the cutoff lifts that gap.
  res.predicted_fast = fast_gap(ws.ladders, ws.rates);
  const Eigen::MatrixXd Gn = population_generator(ws.ftable, ws.rates);
  {
    Eigen::EigenSolver<Eigen::MatrixXd> es(Gn, false);
    double scale = 0;
    for (int i = 0; i < Gn.rows(); ++i)
      scale = std::max(scale, std::abs(Gn(i, i)));
    double gap = std::numeric_limits<double>::infinity();
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
      const double re = -es.eigenvalues()(i).real();
      if (re > 1e-10 * std::max(scale, 1e-300)) gap = std::min(gap, re);
    }
    res.predicted_slow = std::isfinite(gap) ? gap : 0.0;
  }

  // Fast fit: decay of the distance to the slaved-profile manifold. The
  // reference level is the slaving residual sampled once the fast sector has
  // died but before the slow flow has moved it; the late window keeps the
  // higher chain modes out of the fit.
  {
    std::vector<double> qd;
    for (const auto& s : res.full.samples) qd.push_back(s.qdist);
    double plateau = qd.back();
    for (size_t i = 0; i < times.size(); ++i)
      if (times[i] >= 12.0 / res.predicted_fast) {
        plateau = qd[i];
        break;
      }
    res.fitted_fast =
        qd.front() > 1e-10
            ? fit_exponential_rate(times, qd, plateau, 1.5 / res.predicted_fast,
                                   4.5 / res.predicted_fast)
            : std::numeric_limits<double>::quiet_NaN();
  }

  // Slow fit: relaxation of the ladder weight farthest from stationarity.
  {
    int wstar = 0;
    double best = -1;
    for (int w = 0; w < nlab; ++w) {
      const double d = std::abs(cs0.n(w) - res.stationary(w));
      if (d > best) {
        best = d;
        wstar = w;
      }
    }
    std::vector<double> nw;
    for (const auto& s : res.full.samples) nw.push_back(s.coarse.n(wstar));
    res.fitted_slow =
        res.predicted_slow > 0 && best > 1e-8
            ? fit_exponential_rate(times, nw, res.stationary(wstar),
                                   0.5 / res.predicted_slow,
                                   2.5 / res.predicted_slow)
            : std::numeric_limits<double>::quiet_NaN();
  }
  return res;
}

int run_check_algebra(const RunConfig& cfg, const std::string& dump_dir,
                      std::ostream& log) {
  const TruncatedBasis basis = build_basis(cfg.N, cfg.L_max);
  const AlgebraReport report = check_algebra(basis);
  log << "operator algebra on N=" << report.N << " L_max=" << report.L_max
      << " (guard shell " << report.guard_shell << ", dim " << basis.dim
      << ")\n";
  for (const auto& rel : report.relations)
    log << "  " << rel.name << "  residual " << g17(rel.residual) << "\n";
  log << "max residual " << g17(report.max_residual) << " in "
      << g17(report.seconds) << " s\n";
  if (!dump_dir.empty()) {
    ensure_dir(dump_dir);
    const CollectiveOps ops = build_collective_ops(basis);
    const SparseOperator* dumps[] = {&ops.A, &ops.B, &ops.C, &ops.D, &ops.E};
    for (const SparseOperator* op : dumps) {
      auto out = open_out(fs::path(dump_dir) / ("op_" + op->name() + ".txt"));
      write_operator_dump(*op, out);
    }
    log << "operator dumps written to " << dump_dir << "\n";
  }
  return report.max_residual < 1e-10 ? 0 : 3;
}

int run_vacua(const RunConfig& cfg, const std::string& out_path,
              std::ostream& log) {
  const auto ws = build_workspace(cfg);
  const json j = vacuum_table_report(*ws);
  log << "vacuum census for N=" << cfg.N << " L_max=" << cfg.L_max << ":\n";
  for (const auto& c : ws->table.census)
    log << "  l=" << c.l << "  p=" << c.p << "  vacua=" << c.n_vacua
        << "  new families=" << c.n_new_families << "\n";
  fs::path path = out_path.empty()
                      ? fs::path(cfg.output_dir) / "vacua.json"
                      : fs::path(out_path);
  ensure_dir(path.parent_path().string());
  auto out = open_out(path);
  out << j.dump(2) << "\n";
  log << "vacuum table written to " << path.string() << "\n";
  return 0;
}

int run_rates(const RunConfig& cfg, const std::string& out_path,
              std::ostream& log) {
  const BathSpec bath =
      bath_from_target(cfg.gamma_down_target, cfg.eta, cfg.beta_hw, cfg.beta_mu,
                       cfg.N, dispersion_from_string(cfg.dispersion));
  const RateSet rates = compute_rates(bath);
  json j;
  j["bath"] = {{"eta", bath.eta},
               {"beta_hw", bath.beta_hw},
               {"beta_mu", bath.beta_mu},
               {"N", bath.N},
               {"kappa_scale", bath.kappa_scale},
               {"dispersion", to_string(bath.dispersion)}};
  j["occupations"] = {{"n1", bose_occupation(1, bath.beta_hw, bath.beta_mu)},
                      {"n2", bose_occupation(2, bath.beta_hw, bath.beta_mu)}};
  j["rates"] = {{"gamma_down", rates.gamma_down},
                {"gamma_up", rates.gamma_up},
                {"gamma1_down", rates.gamma1_down},
                {"gamma1_up", rates.gamma1_up}};
  j["effective"] = {{"beta_e", rates.beta_e},
                    {"beta_e_prime", rates.beta_e_prime},
                    {"ladder_ratio", std::exp(-rates.beta_e)},
                    {"pair_ratio", std::exp(-2.0 * rates.beta_e_prime)}};
  j["ratios"] = {{"up_over_down", rates.gamma_up / rates.gamma_down},
                 {"two_over_one", rates.gamma1_down / rates.gamma_down}};
  log << "gamma_down    " << g17(rates.gamma_down) << "\n"
      << "gamma_up      " << g17(rates.gamma_up) << "\n"
      << "gamma1_down   " << g17(rates.gamma1_down) << "\n"
      << "gamma1_up     " << g17(rates.gamma1_up) << "\n"
      << "beta_e        " << g17(rates.beta_e) << "\n"
      << "beta_e_prime  " << g17(rates.beta_e_prime) << "\n";
  fs::path path = out_path.empty() ? fs::path(cfg.output_dir) / "rates.json"
                                   : fs::path(out_path);
  ensure_dir(path.parent_path().string());
  auto out = open_out(path);
  out << j.dump(2) << "\n";
  return 0;
}

int run_evolve(const RunConfig& cfg, std::ostream& log) {
  const auto ws = build_workspace(cfg);
  const Eigen::MatrixXcd rho0 = initial_density(*ws, cfg);
  const Trajectory traj = evolve(ws->basis, ws->ops, ws->bath, ws->rates,
                                 evolution_config(cfg), rho0, ws->ladders);
  ensure_dir(cfg.output_dir);
  write_full_trajectory(
      fs::path(cfg.output_dir) /
          (cfg.format == "json" ? "trajectory.json" : "trajectory.csv"),
      cfg.format, traj, ws->ftable.labels);

  json summary;
  summary["command"] = "evolve";
  summary["parameters"] = config_to_json(cfg);
  summary["rates"] = rates_json(*ws);
  summary["dt"] = traj.dt;
  summary["steps"] = traj.steps;
  summary["aborted"] = traj.aborted;
  summary["abort_reason"] = traj.abort_reason;
  double min_eig = 0;
  json qt = json::array(), qv = json::array();
  for (const auto& s : traj.samples) {
    min_eig = std::min(min_eig, s.min_eig);
    qt.push_back(s.t);
    qv.push_back(s.qdist);
  }
  summary["min_eig_min"] = min_eig;
  summary["trace_drift_total"] = traj.samples.back().trace_drift;
  summary["leak_top2_final"] = traj.samples.back().leak_top2;
  summary["qdist"] = {{"t", qt}, {"value", qv}};
  json finals;
  const CoarseState& last = traj.samples.back().coarse;
  for (size_t i = 0; i < last.labels.size(); ++i)
    finals[last.labels[i].str()] = last.n(i);
  summary["final_populations"] = finals;
  auto out = open_out(fs::path(cfg.output_dir) / "summary.json");
  out << summary.dump(2) << "\n";

  log << "evolve: " << traj.steps << " steps of dt=" << g17(traj.dt) << ", "
      << traj.samples.size() << " samples\n";
  if (traj.aborted) {
    log << "aborted: " << traj.abort_reason << "\n";
    return 2;
  }
  return 0;
}

int run_coarse(const RunConfig& cfg, std::ostream& log) {
  const auto ws = build_workspace(cfg);
  const CoarseState cs0 =
      (cfg.initial.type == "coarse" || cfg.initial.type == "random_coarse")
          ? initial_coarse_state(*ws, cfg)
          : project(ws->ladders, initial_density(*ws, cfg));

  const Eigen::MatrixXd Gn = population_generator(ws->ftable, ws->rates);
  const CoherenceGenerator cg = coherence_generator(ws->ftable, ws->rates);
  double maxdiag = 0;
  for (int i = 0; i < Gn.rows(); ++i)
    maxdiag = std::max(maxdiag, std::abs(Gn(i, i)));
  for (int p = 0; p < cg.full.rows(); ++p)
    maxdiag = std::max(maxdiag, std::abs(cg.full(p, p)));
  const double dt =
      cfg.dt > 0 ? cfg.dt : (maxdiag > 0 ? 0.02 / maxdiag : cfg.t_final);
  const auto times = sample_grid(cfg.t_final, dt, cfg.record_every);
  const CoarseTrajectory traj =
      evolve_coarse(ws->ftable, ws->rates, cs0, times, dt);

  ensure_dir(cfg.output_dir);
  write_coarse_trajectory(
      fs::path(cfg.output_dir) / (cfg.format == "json"
                                      ? "coarse_trajectory.json"
                                      : "coarse_trajectory.csv"),
      cfg.format, traj);

  const Eigen::VectorXd stat = stationary_populations(ws->ftable, ws->rates, cs0);
  json summary;
  summary["command"] = "coarse";
  summary["parameters"] = config_to_json(cfg);
  summary["rates"] = rates_json(*ws);
  summary["beta_e_prime"] = ws->rates.beta_e_prime;
  json statj, finals, families;
  std::map<std::string, double> fam_mass;
  for (size_t i = 0; i < traj.labels.size(); ++i) {
    statj[traj.labels[i].str()] = stat(i);
    finals[traj.labels[i].str()] = traj.n(traj.times.size() - 1, i);
    const VacuumLabel w = traj.labels[i];
    char key[32];
    std::snprintf(key, sizeof(key), "%d.%d", w.l - 2 * w.s, w.v);
    fam_mass[key] += traj.n(traj.times.size() - 1, i);
  }
  for (const auto& [k, v] : fam_mass) families[k] = v;
  summary["stationary"] = statj;
  summary["final_populations"] = finals;
  summary["family_masses"] = families;
  summary["mass_drift"] =
      std::abs(traj.n.row(traj.times.size() - 1).sum() - traj.n.row(0).sum());
  auto out = open_out(fs::path(cfg.output_dir) / "coarse_summary.json");
  out << summary.dump(2) << "\n";
  log << "coarse: " << traj.times.size() << " samples to t=" << g17(cfg.t_final)
      << "\n";
  return 0;
}

int run_compare(const RunConfig& cfg, std::ostream& log) {
  const auto ws = build_workspace(cfg);
  const CompareResult res = compare_run(cfg, *ws);

  ensure_dir(cfg.output_dir);
  write_full_trajectory(
      fs::path(cfg.output_dir) /
          (cfg.format == "json" ? "trajectory.json" : "trajectory.csv"),
      cfg.format, res.full, res.labels);
  write_coarse_trajectory(
      fs::path(cfg.output_dir) / (cfg.format == "json"
                                      ? "coarse_trajectory.json"
                                      : "coarse_trajectory.csv"),
      cfg.format, res.coarse);

  // Per-time deviation table.
  {
    std::vector<std::string> cols = {"t", "max_abs_dn"};
    for (const auto& w : res.labels) cols.push_back("dn_" + w.str());
    std::vector<std::vector<double>> rows;
    for (size_t i = 0; i < res.full.samples.size(); ++i) {
      std::vector<double> row = {res.full.samples[i].t, 0.0};
      double worst = 0;
      for (int w = 0; w < static_cast<int>(res.labels.size()); ++w) {
        const double d = res.full.samples[i].coarse.n(w) - res.coarse.n(i, w);
        worst = std::max(worst, std::abs(d));
        row.push_back(d);
      }
      row[1] = worst;
      rows.push_back(row);
    }
    write_table(fs::path(cfg.output_dir) /
                    (cfg.format == "json" ? "deviation.json" : "deviation.csv"),
                cfg.format, cols, rows);
  }

  json summary;
  summary["command"] = "compare";
  summary["parameters"] = config_to_json(cfg);
  summary["rates"] = rates_json(*ws);
  summary["predicted_fast"] = res.predicted_fast;
  summary["predicted_slow"] = res.predicted_slow;
  summary["fitted_fast"] = res.fitted_fast;
  summary["fitted_slow"] = res.fitted_slow;
  summary["ratio_predicted"] = res.predicted_fast / res.predicted_slow;
  summary["ratio_fitted"] = res.fitted_fast / res.fitted_slow;
  summary["max_abs_dn"] = res.max_abs_dn;
  summary["aborted"] = res.full.aborted;
  summary["abort_reason"] = res.full.abort_reason;
  json statj;
  for (size_t i = 0; i < res.labels.size(); ++i)
    statj[res.labels[i].str()] = res.stationary(i);
  summary["stationary"] = statj;
  auto out = open_out(fs::path(cfg.output_dir) / "compare_summary.json");
  out << summary.dump(2) << "\n";

  log << "compare: max |dn| = " << g17(res.max_abs_dn) << ", fast "
      << g17(res.fitted_fast) << " (predicted " << g17(res.predicted_fast)
      << "), slow " << g17(res.fitted_slow) << " (predicted "
      << g17(res.predicted_slow) << ")\n";
  if (res.full.aborted) {
    log << "aborted: " << res.full.abort_reason << "\n";
    return 2;
  }
  return 0;
}

int run_sweep(const RunConfig& cfg, std::ostream& log) {
  if (cfg.sweep.empty())
    throw std::invalid_argument("sweep: config carries no sweep grid");

  // Fixed axis order keeps row order independent of map iteration details.
  const std::vector<std::string> axis_order = {"eta", "beta_hw", "beta_mu", "N"};
  std::vector<std::string> axes;
  std::vector<std::vector<double>> grids;
  for (const auto& a : axis_order)
    if (cfg.sweep.count(a)) {
      axes.push_back(a);
      grids.push_back(cfg.sweep.at(a));
    }
  size_t total = 1;
  for (const auto& g : grids) total *= g.size();

  struct Row {
    RunConfig point;
    bool ok = false;
    std::string status = "pending";
    RateSet rates{};
    double predicted_fast = 0, predicted_slow = 0;
    double fitted_fast = 0, fitted_slow = 0;
    double max_abs_dn = 0;
  };
  std::vector<Row> rows(total);
  for (size_t idx = 0; idx < total; ++idx) {
    RunConfig point = cfg;
    point.sweep.clear();
    size_t rem = idx;
    for (size_t a = axes.size(); a-- > 0;) {
      const double val = grids[a][rem % grids[a].size()];
      rem /= grids[a].size();
      if (axes[a] == "eta") point.eta = val;
      if (axes[a] == "beta_hw") point.beta_hw = val;
      if (axes[a] == "beta_mu") point.beta_mu = val;
      if (axes[a] == "N") point.N = static_cast<int>(val);
    }
    rows[idx].point = point;
  }

  int workers = 1;
  if (const char* env = std::getenv("BOSECOOL_WORKERS")) {
    workers = std::atoi(env);
    if (workers < 1)
      throw std::invalid_argument("BOSECOOL_WORKERS must be a positive integer");
  }
  workers = std::min<int>(workers, static_cast<int>(total));

  std::atomic<size_t> next{0};
  auto work = [&]() {
    while (true) {
      const size_t idx = next.fetch_add(1);
      if (idx >= total) break;
      Row& row = rows[idx];
      try {
        const auto ws = build_workspace(row.point);
        const CompareResult res = compare_run(row.point, *ws);
        row.rates = ws->rates;
        row.predicted_fast = res.predicted_fast;
        row.predicted_slow = res.predicted_slow;
        row.fitted_fast = res.fitted_fast;
        row.fitted_slow = res.fitted_slow;
        row.max_abs_dn = res.max_abs_dn;
        if (res.full.aborted) {
          row.status = "aborted: " + res.full.abort_reason;
        } else {
          row.ok = true;
          row.status = "ok";
        }
      } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();

  ensure_dir(cfg.output_dir);
  auto out = open_out(fs::path(cfg.output_dir) / "sweep.csv");
  out << "idx,eta,beta_hw,beta_mu,N,gamma_down,gamma_up,gamma1_down,gamma1_up,"
         "beta_e,beta_e_prime,predicted_fast,predicted_slow,fitted_fast,"
         "fitted_slow,ratio_predicted,ratio_fitted,max_abs_dn,status\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (size_t idx = 0; idx < total; ++idx) {
    const Row& row = rows[idx];
    const RunConfig& p = row.point;
    out << idx << "," << g17(p.eta) << "," << g17(p.beta_hw) << ","
        << g17(p.beta_mu) << "," << p.N;
    if (row.ok || row.status.rfind("aborted", 0) == 0) {
      out << "," << g17(row.rates.gamma_down) << "," << g17(row.rates.gamma_up)
          << "," << g17(row.rates.gamma1_down) << ","
          << g17(row.rates.gamma1_up) << "," << g17(row.rates.beta_e) << ","
          << g17(row.rates.beta_e_prime) << "," << g17(row.predicted_fast)
          << "," << g17(row.predicted_slow) << "," << g17(row.fitted_fast)
          << "," << g17(row.fitted_slow) << ","
          << g17(row.predicted_fast / row.predicted_slow) << ","
          << g17(row.fitted_fast / row.fitted_slow) << ","
          << g17(row.max_abs_dn);
    } else {
      for (int c = 0; c < 13; ++c) out << "," << g17(nan);
    }
    out << "," << sanitize_cell(row.status) << "\n";
  }
  size_t ok = 0;
  for (const auto& row : rows) ok += row.ok ? 1 : 0;
  log << "sweep: " << ok << "/" << total << " points ok, "
      << (fs::path(cfg.output_dir) / "sweep.csv").string() << "\n";
  return 0;
}

}  // namespace bosecool
