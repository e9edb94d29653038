#include "cliplab/harness/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "cliplab/harness/workers.hpp"
#include "cliplab/objectives.hpp"
#include "cliplab/theory.hpp"

namespace cliplab::harness {

namespace fs = std::filesystem;

Problem build_problem(const ExperimentConfig& cfg) {
  const auto& o = cfg.objective;
  if (o.kind == "quartic") return {make_quartic(), std::pair{16.0, 1.0}};
  if (o.kind == "poly2d") return {make_poly2d(), std::pair{20.0, 30.0}};
  if (o.kind == "noisy_quadratic") return {make_noisy_quadratic(), std::pair{1.0, 0.0}};
  // exp_loss
  const auto& ds = o.dataset;
  Dataset data;
  if (ds.source == "synthetic") {
    RngStream rng(ds.seed, 0);
    data = gen_synthetic_dataset(static_cast<std::size_t>(ds.n), static_cast<std::size_t>(ds.d),
                                 ds.radius, ds.margin, rng);
  } else {
    data = load_idx_dataset(ds.images, ds.labels, ds.digit_a, ds.digit_b, ds.radius);
  }
  std::optional<std::pair<double, double>> certified;
  if (o.lambda < data.radius) {
    const auto k = exp_loss_constants(data.radius, data.d, o.lambda, data.n, cfg.smoothness.rho1,
                                      cfg.smoothness.rho2);
    certified = std::pair{k.l0, k.l1};
  }
  ExpLossOptions opts;
  opts.batch_size = static_cast<std::size_t>(o.batch_size);
  return {make_exp_loss(std::move(data), o.lambda, opts), certified};
}

ResolvedSmoothness resolve_smoothness(const ExperimentConfig& cfg, const Problem& problem) {
  const auto& k = cfg.smoothness;
  if (k.source == "explicit") return {"explicit", *k.l0, *k.l1};
  if (k.source == "certified") {
    if (!problem.certified) {
      throw Error(ErrorKind::capability,
                  "smoothness.source: no certified constants for " + problem.objective.name());
    }
    return {"certified", problem.certified->first, problem.certified->second};
  }
  const std::size_t dim = problem.objective.dim();
  if (k.low.size() != dim || k.high.size() != dim) {
    throw Error(ErrorKind::dimension_mismatch, "smoothness.low/high must have " +
                                                   std::to_string(dim) + " entries");
  }
  double count = 1.0;
  for (std::size_t i = 0; i < dim; ++i) count *= static_cast<double>(k.per_dim);
  if (count > 1e6) throw Error(ErrorKind::invalid_input, "smoothness grid exceeds 1e6 points");
  const auto points = grid_points(k.low, k.high, static_cast<std::size_t>(k.per_dim));
  const auto samples = sample_landscape(problem.objective, points);
  const auto fit = fit_l0_l1(samples, static_cast<std::size_t>(k.bins));
  return {"fit", fit.l0, fit.l1};
}

SeedPlan plan_seed(const ExperimentConfig& cfg, const Problem& problem,
                   const std::optional<ResolvedSmoothness>& smoothness, std::uint64_t seed) {
  const Objective& obj = problem.objective;
  SeedPlan plan;
  plan.seed = seed;
  if (cfg.init.kind == "explicit") {
    plan.x0 = ParamVector(cfg.init.x0);
  } else if (cfg.init.kind == "zero") {
    plan.x0 = ParamVector(obj.dim());
  } else {
    RngStream rng(seed, 1);
    plan.x0 = ParamVector(cfg.init.low.size());
    for (std::size_t i = 0; i < plan.x0.size(); ++i) {
      plan.x0[i] = rng.uniform(cfg.init.low[i], cfg.init.high[i]);
    }
  }
  require_same_dim(plan.x0.size(), obj.dim(), "initial point");
  plan.delta = std::max(0.0, obj.value(plan.x0.span()) - obj.f_star().value_or(0.0));

  const auto& p = cfg.optimizer;
  ClipConfig& clip = plan.clip;
  clip.beta = p.beta;
  clip.nu = p.nu;
  clip.mode = p.mode;
  std::int64_t auto_steps = 0;
  const double sigma = p.sigma.value_or(obj.noise_bound_sigma().value_or(0.0));
  const BudgetInputs inputs{plan.delta, p.epsilon.value_or(0.0), sigma};
  switch (p.schedule) {
    case Schedule::explicit_:
      clip.eta = *p.eta;
      clip.gamma = p.gamma.value_or(std::numeric_limits<double>::infinity());
      break;
    case Schedule::auto_theorem31: {
      const auto ss = theorem31_step_sizes(smoothness->l0, smoothness->l1, p.beta);
      clip.eta = ss.eta;
      clip.gamma = ss.gamma;
      auto_steps = theorem31_budget(inputs, ss.eta, ss.gamma);
      break;
    }
    case Schedule::auto_theorem32: {
      const auto t = theorem32_params(inputs, p.beta, smoothness->l0, smoothness->l1, p.constants);
      clip.eta = t.eta;
      clip.gamma = t.gamma;
      auto_steps = t.steps;
      break;
    }
    case Schedule::auto_snm: {
      const auto s = snm_params(inputs, smoothness->l0, smoothness->l1);
      clip.eta = s.eta;
      clip.gamma = std::numeric_limits<double>::infinity();
      clip.beta = 1.0 - s.alpha;
      clip.nu = 1.0;
      clip.mode = ClipMode::normalized;
      auto_steps = s.steps;
      break;
    }
  }
  plan.steps = cfg.run.steps ? *cfg.run.steps : std::max<std::int64_t>(1, auto_steps);
  if (plan.steps > kMaxSteps) {
    throw Error(ErrorKind::overflow, "step budget " + std::to_string(plan.steps) +
                                         " exceeds the limit of 1e9; set run.steps explicitly");
  }
  if (cfg.run.burn_in >= plan.steps) {
    throw Error(ErrorKind::invalid_input, "run.burn_in must be below the step count " +
                                              std::to_string(plan.steps));
  }
  clip.validate();
  return plan;
}

std::int64_t record_stride(std::int64_t steps) {
  constexpr std::int64_t kCap = 100000;
  return steps <= kCap ? 1 : (steps + kCap - 1) / kCap;
}

std::vector<std::string> ExperimentResult::summary_header() {
  return {"seed",          "steps",           "eta",           "gamma",
          "beta",          "nu",              "mode",          "delta",
          "avg_grad_norm", "final_loss",      "final_grad_norm", "tail_loss_mean",
          "initial_lyapunov", "final_lyapunov", "max_step_norm", "completed"};
}

std::vector<std::string> ExperimentResult::aggregate_header() {
  return {"metric", "mean", "std_err", "count"};
}

namespace {

struct Stats {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std_err = std::numeric_limits<double>::quiet_NaN();
  std::int64_t count = 0;
};

Stats stats(const std::vector<double>& v) {
  Stats s;
  s.count = static_cast<std::int64_t>(v.size());
  if (v.empty()) return s;
  double sum = 0.0;
  for (double a : v) sum += a;
  s.mean = sum / static_cast<double>(v.size());
  if (v.size() < 2) {
    s.std_err = 0.0;
    return s;
  }
  double ss = 0.0;
  for (double a : v) ss += (a - s.mean) * (a - s.mean);
  s.std_err = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  return s;
}

CsvTable trajectory_table(const Trajectory& traj, std::size_t dim, bool with_x) {
  std::vector<std::string> header{"t", "loss", "grad_norm", "lyapunov", "step_norm"};
  if (with_x) {
    for (std::size_t i = 0; i < dim; ++i) header.push_back("x" + std::to_string(i));
  }
  CsvTable table(header);
  for (const auto& r : traj.records) {
    std::vector<std::string> row{cell(r.t), cell(r.loss), cell(r.grad_norm), cell(r.lyapunov),
                                 cell(r.step_norm)};
    if (with_x) {
      for (std::size_t i = 0; i < dim; ++i) row.push_back(cell(r.x ? (*r.x)[i] : 0.0));
    }
    table.add_row(std::move(row));
  }
  return table;
}

std::optional<ResolvedSmoothness> smoothness_if_needed(const ExperimentConfig& cfg,
                                                       const Problem& problem) {
  if (cfg.optimizer.schedule == Schedule::explicit_) return std::nullopt;
  return resolve_smoothness(cfg, problem);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t workers,
                                bool write_files) {
  const Problem problem = build_problem(cfg);
  ExperimentResult result;
  result.smoothness = smoothness_if_needed(cfg, problem);
  const fs::path dir(cfg.output.dir);
  if (write_files) {
    fs::create_directories(dir);
    fs::remove(dir / "errors.csv");
  }

  const bool with_x = cfg.output.record == "full";
  result.seeds.resize(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), workers, [&](std::size_t i) {
    SeedOutcome& out = result.seeds[i];
    out.plan.seed = cfg.seeds[i];
    try {
      out.plan = plan_seed(cfg, problem, result.smoothness, cfg.seeds[i]);
      RunOptions opts;
      if (cfg.init.m0) opts.m0 = ParamVector(*cfg.init.m0);
      opts.record_stride = record_stride(out.plan.steps);
      opts.record_x = with_x;
      opts.tail_start = cfg.run.burn_in;
      if (cfg.run.stochastic) {
        RngStream rng(cfg.seeds[i], 0);
        out.trajectory = run_stochastic(problem.objective, out.plan.clip, out.plan.x0,
                                        out.plan.steps, rng, opts);
      } else {
        out.trajectory =
            run_deterministic(problem.objective, out.plan.clip, out.plan.x0, out.plan.steps, opts);
      }
      if (!out.trajectory->completed) {
        out.error_kind = "aborted";
        out.error = out.trajectory->abort_reason;
      }
      if (write_files && cfg.output.record != "none") {
        trajectory_table(*out.trajectory, problem.objective.dim(), with_x)
            .write(dir / ("trajectory_seed" + std::to_string(cfg.seeds[i]) + ".csv"));
      }
    } catch (const Error& e) {
      out.error_kind = to_string(e.kind());
      out.error = e.what();
    } catch (const std::exception& e) {
      out.error_kind = "runtime";
      out.error = e.what();
    }
  });

  std::vector<double> avg, final_loss, final_grad, tail, drop;
  CsvTable errors({"seed", "kind", "message"});
  for (const auto& s : result.seeds) {
    if (!s.error.empty()) errors.add_row({cell(s.plan.seed), s.error_kind, s.error});
    if (!s.trajectory) continue;
    const auto& sum = s.trajectory->summary;
    const auto& c = s.plan.clip;
    result.summary.add_row({cell(s.plan.seed), cell(sum.steps), cell(c.eta), cell(c.gamma),
                            cell(c.beta), cell(c.nu), cell(to_string(c.mode)), cell(s.plan.delta),
                            cell(sum.avg_grad_norm()), cell(sum.final_loss),
                            cell(sum.final_grad_norm), cell(sum.tail_loss_mean),
                            cell(sum.initial_lyapunov), cell(sum.final_lyapunov),
                            cell(sum.max_step_norm), cell(s.trajectory->completed)});
    if (!s.trajectory->completed) continue;
    avg.push_back(sum.avg_grad_norm());
    final_loss.push_back(sum.final_loss);
    final_grad.push_back(sum.final_grad_norm);
    if (sum.tail_count > 0) tail.push_back(sum.tail_loss_mean);
    drop.push_back(sum.initial_lyapunov - sum.final_lyapunov);
  }
  const std::pair<const char*, const std::vector<double>*> metrics[] = {
      {"avg_grad_norm", &avg},     {"final_loss", &final_loss}, {"final_grad_norm", &final_grad},
      {"tail_loss_mean", &tail},   {"lyapunov_drop", &drop}};
  for (const auto& [name, values] : metrics) {
    const Stats st = stats(*values);
    result.aggregate.add_row({name, cell(st.mean), cell(st.std_err), cell(st.count)});
  }
  result.exit_code = errors.rows().empty() ? 0 : 3;

  if (write_files) {
    result.summary.write(dir / "summary.csv");
    result.aggregate.write(dir / "aggregate.csv");
    if (result.smoothness) {
      CsvTable k({"source", "l0", "l1"});
      k.add_row({result.smoothness->source, cell(result.smoothness->l0),
                 cell(result.smoothness->l1)});
      k.write(dir / "smoothness.csv");
    }
    if (!errors.rows().empty()) errors.write(dir / "errors.csv");
  }
  return result;
}

GridSpec parse_grid(const std::string& text) {
  GridSpec grid;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ';');) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorKind::format, "grid: expected key=v1,v2,... in '" + item + "'");
    }
    std::string key = item.substr(0, eq);
    key.erase(0, key.find_first_not_of(" \t"));
    key.erase(key.find_last_not_of(" \t") + 1);
    std::vector<std::string> values;
    std::stringstream vs(item.substr(eq + 1));
    for (std::string v; std::getline(vs, v, ',');) {
      v.erase(0, v.find_first_not_of(" \t"));
      v.erase(v.find_last_not_of(" \t") + 1);
      if (v.empty()) throw Error(ErrorKind::format, "grid: empty value for '" + key + "'");
      values.push_back(v);
    }
    if (values.empty()) throw Error(ErrorKind::format, "grid: no values for '" + key + "'");
    grid.emplace_back(key, std::move(values));
  }
  if (grid.empty()) throw Error(ErrorKind::invalid_input, "grid: empty grid");
  return grid;
}

SweepResult sweep(const ExperimentConfig& base, const GridSpec& grid, std::size_t workers,
                  bool write_files) {
  if (grid.empty()) throw Error(ErrorKind::invalid_input, "sweep: empty grid");
  std::size_t n_cells = 1;
  for (const auto& [key, values] : grid) {
    if (values.empty()) throw Error(ErrorKind::invalid_input, "sweep: no values for " + key);
    n_cells *= values.size();
  }
  std::vector<std::string> header{"cell"};
  for (const auto& kv : grid) header.push_back(kv.first);
  for (const char* h : {"seeds", "failed", "avg_grad_norm_mean", "final_loss_mean",
                        "tail_loss_mean", "tail_loss_std_err"}) {
    header.emplace_back(h);
  }
  SweepResult out;
  out.table = CsvTable(header);

  // Build (and validate) every cell before running any of them.
  std::vector<std::vector<std::string>> labels(n_cells);
  for (std::size_t c = 0; c < n_cells; ++c) {
    ExperimentConfig cell_cfg = base;
    std::size_t rem = c;
    std::vector<std::string> picked(grid.size());
    for (std::size_t k = grid.size(); k-- > 0;) {
      picked[k] = grid[k].second[rem % grid[k].second.size()];
      rem /= grid[k].second.size();
    }
    for (std::size_t k = 0; k < grid.size(); ++k) {
      cell_cfg = with_override(cell_cfg, grid[k].first, picked[k]);
    }
    cell_cfg.output.dir = (fs::path(base.output.dir) / ("cell_" + std::to_string(c))).string();
    out.cells.push_back(std::move(cell_cfg));
    labels[c] = std::move(picked);
  }

  std::vector<std::optional<ExperimentResult>> results(n_cells);
  std::vector<std::string> failures(n_cells);
  parallel_for(n_cells, workers, [&](std::size_t c) {
    try {
      results[c] = run_experiment(out.cells[c], 1, write_files);
    } catch (const std::exception& e) {
      failures[c] = e.what();
    }
  });

  CsvTable errors({"cell", "message"});
  for (std::size_t c = 0; c < n_cells; ++c) {
    std::vector<std::string> row{cell(static_cast<std::int64_t>(c))};
    row.insert(row.end(), labels[c].begin(), labels[c].end());
    if (!results[c]) {
      errors.add_row({cell(static_cast<std::int64_t>(c)), failures[c]});
      for (const char* v : {"0", "0", "nan", "nan", "nan", "nan"}) row.emplace_back(v);
      out.table.add_row(std::move(row));
      continue;
    }
    const auto& r = *results[c];
    std::int64_t failed = 0;
    for (const auto& s : r.seeds) failed += s.error.empty() ? 0 : 1;
    // aggregate rows: avg_grad_norm, final_loss, final_grad_norm, tail_loss_mean, ...
    const auto& agg = r.aggregate.rows();
    row.push_back(cell(static_cast<std::int64_t>(r.seeds.size())));
    row.push_back(cell(failed));
    row.push_back(agg[0][1]);
    row.push_back(agg[1][1]);
    row.push_back(agg[3][1]);
    row.push_back(agg[3][2]);
    out.table.add_row(std::move(row));
    if (r.exit_code != 0) out.exit_code = 3;
  }
  if (!errors.rows().empty()) out.exit_code = 3;
  if (write_files) {
    out.table.write(fs::path(base.output.dir) / "sweep.csv");
    if (!errors.rows().empty()) errors.write(fs::path(base.output.dir) / "sweep_errors.csv");
  }
  return out;
}

ProfileResult profile(const ExperimentConfig& cfg, bool trajectory, std::size_t workers,
                      bool write_files) {
  const Problem problem = build_problem(cfg);
  const Objective& obj = problem.objective;
  std::vector<ParamVector> points;
  std::vector<std::int64_t> tags;
  if (trajectory) {
    const auto smoothness = smoothness_if_needed(cfg, problem);
    const SeedPlan plan = plan_seed(cfg, problem, smoothness, cfg.seeds.front());
    RunOptions opts;
    if (cfg.init.m0) opts.m0 = ParamVector(*cfg.init.m0);
    opts.record_stride = record_stride(plan.steps);
    opts.record_x = true;
    Trajectory traj;
    if (cfg.run.stochastic) {
      RngStream rng(plan.seed, 0);
      traj = run_stochastic(obj, plan.clip, plan.x0, plan.steps, rng, opts);
    } else {
      traj = run_deterministic(obj, plan.clip, plan.x0, plan.steps, opts);
    }
    for (auto& r : traj.records) {
      points.push_back(std::move(*r.x));
      tags.push_back(r.t);
    }
  } else {
    const auto& k = cfg.smoothness;
    if (k.low.size() != obj.dim() || k.high.size() != obj.dim()) {
      throw Error(ErrorKind::invalid_input, "profile --grid needs smoothness.low/high of dimension " +
                                                std::to_string(obj.dim()));
    }
    points = grid_points(k.low, k.high, static_cast<std::size_t>(k.per_dim));
    for (std::size_t i = 0; i < points.size(); ++i) tags.push_back(static_cast<std::int64_t>(i));
  }

  ProfileResult res;
  res.samples.resize(points.size());
  parallel_for(points.size(), workers, [&](std::size_t i) {
    try {
      LandscapeSample s;
      s.grad_norm = l2_norm(obj.grad(points[i].span()).span());
      s.hess_norm = hessian_spectral_norm(obj, points[i].span());
      s.tag = tags[i];
      res.samples[i] = s;
    } catch (const Error& e) {
      throw Error(e.kind(), "landscape point " + std::to_string(i) + ": " + e.what());
    }
  });
  res.fit = fit_l0_l1(res.samples, static_cast<std::size_t>(cfg.smoothness.bins));
  try {
    res.rank_correlation = rank_correlation(res.samples);
  } catch (const Error&) {
    res.rank_correlation = std::numeric_limits<double>::quiet_NaN();
  }
  for (const auto& s : res.samples) {
    res.landscape.add_row({cell(s.tag), cell(s.grad_norm), cell(s.hess_norm)});
  }
  res.envelope.add_row({cell(res.fit.l0), cell(res.fit.l1), cell(res.fit.violations),
                        cell(res.fit.inflation), cell(res.rank_correlation),
                        cell(static_cast<std::int64_t>(res.samples.size()))});
  if (write_files) {
    const fs::path dir(cfg.output.dir);
    res.landscape.write(dir / "landscape.csv");
    res.envelope.write(dir / "envelope.csv");
  }
  return res;
}

}  // namespace cliplab::harness
