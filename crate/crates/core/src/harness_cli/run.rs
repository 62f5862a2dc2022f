use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use super::config::{
    CarlemanSection, ConvergenceSection, Experiment, ExperimentConfig, Gamma0Section, NonlinearSection,
    NullcontrolSection, SaddleSection,
};
use super::record::{Metrics, RunRecord};
use crate::carleman_weights::{
    check_lemma_integral, check_lemma_relationship, e_norm, eta_field, f_lambda, ln_family, midpoint_t_grid,
    observability_ratio, Family,
};
use crate::error::{Error, Result};
use crate::grid_fields::io::{write_csv, write_velocity};
use crate::grid_fields::ops::random_stream_velocity;
use crate::grid_fields::{Trajectory, VelocityField};
use crate::leader_control::{v_norm, LeaderProblem, PenaltyConfig};
use crate::robust_saddle::{estimate_gamma0, OneSided, SaddleProblem};
use crate::stokes_core::{CoupledData, FlowSolver, ManufacturedStokes};

/// Environment variable naming the output root; default `runs`.
pub const OUT_ENV: &str = "STACKELBERG_OUT";

const STREAM_DATA: u64 = 0;
const STREAM_PROBES: u64 = 1;
const STREAM_LEMMA: u64 = 2;
const STREAM_OBSERVABILITY: u64 = 3;

pub fn output_root() -> PathBuf {
    std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// `<root>/<experiment>-<first 12 hex digits of the config hash>`.
pub fn run_dir(root: &Path, cfg: &ExperimentConfig) -> PathBuf {
    root.join(format!("{}-{}", cfg.experiment, &cfg.hash()[..12]))
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Writes artifacts into the run directory and remembers their names.
struct Sink {
    dir: PathBuf,
    hash: String,
    artifacts: Vec<String>,
}

impl Sink {
    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        write_csv(&self.dir.join(name), &self.hash, header, rows)?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn field(&mut self, name: &str, f: &VelocityField) -> Result<()> {
        write_velocity(&self.dir.join(name), f)?;
        self.artifacts.push(name.to_string());
        Ok(())
    }
}

fn module_of(e: Experiment) -> &'static str {
    match e {
        Experiment::Saddle | Experiment::Gamma0Scan => "robust_saddle",
        Experiment::Nullcontrol | Experiment::NullcontrolNonlinear => "leader_control",
        Experiment::CarlemanCheck => "carleman_weights",
        Experiment::Convergence => "stokes_core",
    }
}

/// Runs under [`output_root`].
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunRecord> {
    run_experiment_in(cfg, &output_root())
}

/// Runs the configured pipeline and writes the manifest, CSV tables and
/// field files into [`run_dir`]. On a pipeline failure the manifest is
/// still written, flagged incomplete, and the error is returned tagged
/// with the failing module.
pub fn run_experiment_in(cfg: &ExperimentConfig, root: &Path) -> Result<RunRecord> {
    cfg.validate()?;
    let dir = run_dir(root, cfg);
    std::fs::create_dir_all(&dir)?;
    let hash = cfg.hash();
    let started_at = now();
    let mut sink = Sink {
        dir: dir.clone(),
        hash: hash.clone(),
        artifacts: Vec::new(),
    };
    let mut metrics = Metrics::default();
    let outcome = dispatch(cfg, &mut sink, &mut metrics);
    let record = RunRecord {
        experiment: cfg.experiment,
        config_hash: hash,
        seed: cfg.seed,
        started_at,
        finished_at: now(),
        complete: outcome.is_ok(),
        error: outcome.as_ref().err().map(|e| e.to_string()),
        metrics,
        artifacts: sink.artifacts,
        config: cfg.clone(),
    };
    record.save(&dir)?;
    match outcome {
        Ok(()) => Ok(record),
        Err(e) => Err(e.in_module(module_of(cfg.experiment))),
    }
}

fn section<T>(s: Option<&T>, e: Experiment) -> Result<&T> {
    s.ok_or_else(|| Error::Config(format!("missing section for {e}")))
}

fn dispatch(cfg: &ExperimentConfig, sink: &mut Sink, m: &mut Metrics) -> Result<()> {
    let e = cfg.experiment;
    match cfg.experiment {
        Experiment::Saddle => saddle(cfg, section(cfg.saddle.as_ref(), e)?, sink, m),
        Experiment::Nullcontrol => nullcontrol(cfg, section(cfg.nullcontrol.as_ref(), e)?, sink, m),
        Experiment::NullcontrolNonlinear => nonlinear(cfg, section(cfg.nonlinear.as_ref(), e)?, sink, m),
        Experiment::CarlemanCheck => carleman(cfg, section(cfg.carleman_check.as_ref(), e)?, sink, m),
        Experiment::Gamma0Scan => gamma0(cfg, section(cfg.gamma0.as_ref(), e)?, sink, m),
        Experiment::Convergence => convergence(section(cfg.convergence.as_ref(), e)?, sink, m),
    }
}

struct Data {
    y0: VelocityField,
    h: Option<Trajectory>,
    yd: Option<Trajectory>,
}

fn setup(cfg: &ExperimentConfig) -> Result<(FlowSolver, Data)> {
    let solver = FlowSolver::new(cfg.regions.geometry(&cfg.grid)?)?;
    let g = cfg.grid;
    let mut rng = cfg.rng(STREAM_DATA);
    let y0 = cfg.data.y0.build(&g, &mut rng);
    let h = (!cfg.data.leader.is_zero()).then(|| cfg.data.leader.build(&g, true, &mut rng));
    let yd = (!cfg.data.target.is_zero()).then(|| cfg.data.target.build(&g, false, &mut rng));
    Ok((solver, Data { y0, h, yd }))
}

fn rel_gap(a: &Trajectory, b: &Trajectory) -> f64 {
    let d = a.sub(b).norm();
    let s = a.norm().max(b.norm());
    if s > 0.0 {
        d / s
    } else {
        d
    }
}

fn saddle(cfg: &ExperimentConfig, sec: &SaddleSection, sink: &mut Sink, m: &mut Metrics) -> Result<()> {
    let (solver, d) = setup(cfg)?;
    let p = SaddleProblem::new(&solver, &d.y0, cfg.robust, cfg.solver)
        .with_h(d.h.as_ref())
        .with_yd(d.yd.as_ref());
    let coupled = p.saddle_from_coupled()?;
    let ascent = p.saddle_ascent_descent(&sec.ascent)?;
    if !ascent.converged {
        return Err(Error::NoConvergence {
            solver: "ascent-descent",
            iterations: ascent.iterations,
            residual: ascent.residual_psi.max(ascent.residual_v),
        });
    }
    let report = p.probe_saddle(&coupled, sec.probes, &mut cfg.rng(STREAM_PROBES))?;
    m.insert("j_bar", report.j_bar);
    m.insert("psi_bar_norm", coupled.psi_bar.norm());
    m.insert("v_bar_norm", coupled.v_bar.norm());
    m.insert("residual_psi", coupled.residual_psi);
    m.insert("residual_v", coupled.residual_v);
    m.insert("gap_psi", rel_gap(&ascent.psi_bar, &coupled.psi_bar));
    m.insert("gap_v", rel_gap(&ascent.v_bar, &coupled.v_bar));
    m.insert("probe_violations", report.violations as f64);

    let rows: Vec<Vec<f64>> = report
        .probes
        .iter()
        .map(|r| vec![r.index as f64, r.magnitude, r.psi_margin, r.v_margin])
        .collect();
    sink.csv("probes.csv", &["index", "magnitude", "psi_margin", "v_margin"], &rows)?;
    let mid = cfg.grid.nt / 2;
    sink.field("psi_bar_mid.skfd", &coupled.psi_bar.steps[mid])?;
    sink.field("v_bar_mid.skfd", &coupled.v_bar.steps[mid])?;
    sink.field("state_terminal.skfd", coupled.y.terminal())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Largest per-decade growth factor of `values` along decreasing `eps`.
pub fn growth_per_decade(eps: &[f64], values: &[f64]) -> f64 {
    eps.windows(2)
        .zip(values.windows(2))
        .map(|(e, v)| (v[1] / v[0]).powf(1.0 / (e[0] / e[1]).log10()))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn nullcontrol(cfg: &ExperimentConfig, sec: &NullcontrolSection, sink: &mut Sink, m: &mut Metrics) -> Result<()> {
    let (solver, d) = setup(cfg)?;
    let g = cfg.grid;
    let p = LeaderProblem::new(&solver, &d.y0, cfg.robust, cfg.solver).with_yd(d.yd.as_ref());
    let uncontrolled = p.control_to_terminal(&Trajectory::zeros(&g))?.norm();
    let penalty = PenaltyConfig {
        epsilon: *sec.epsilons.last().expect("validated non-empty"),
        epsilon_schedule: Some(sec.epsilons.clone()),
        ..cfg.penalty.clone()
    };
    let r = p.solve_null_control_cg(&penalty)?;
    m.insert("uncontrolled_terminal_norm", uncontrolled);
    let mut rows = Vec::new();
    for rec in &r.history {
        let e = rec.epsilon;
        m.insert(format!("terminal_norm_eps_{e:e}"), rec.terminal_norm);
        m.insert(format!("control_norm_eps_{e:e}"), rec.control_norm);
        m.insert(format!("cg_iters_eps_{e:e}"), rec.cg_iters as f64);
        rows.push(vec![e, rec.terminal_norm, rec.control_norm, rec.cg_iters as f64]);
    }
    let eps: Vec<f64> = r.history.iter().map(|h| h.epsilon).collect();
    let terminal: Vec<f64> = r.history.iter().map(|h| h.terminal_norm).collect();
    let control: Vec<f64> = r.history.iter().map(|h| h.control_norm).collect();
    let decreasing = terminal.windows(2).all(|w| w[1] < w[0]);
    m.insert("terminal_strictly_decreasing", if decreasing { 1.0 } else { 0.0 });
    if eps.len() >= 2 {
        m.insert("max_control_growth_per_decade", growth_per_decade(&eps, &control));
        m.insert("terminal_slope", log_log_slope(&eps, &terminal));
    }
    sink.csv("epsilon_sweep.csv", &["epsilon", "terminal_norm", "control_norm", "cg_iters"], &rows)?;

    // weighted norm of the final controlled tuple
    let data = CoupledData::new(&d.y0).with_h(&r.h);
    let data = match d.yd.as_ref() {
        Some(yd) => data.with_yd(yd),
        None => data,
    };
    let sol = solver.solve_coupled_linear(&data, &cfg.robust, &cfg.solver, None)?;
    let report = e_norm(&solver, &sol, Some(&r.h), d.yd.as_ref(), &cfg.carleman, &cfg.robust, sec.c0)?;
    for (name, v) in report.components() {
        m.insert(format!("enorm_ln_{name}"), v);
    }
    m.insert("enorm_ln_total", report.ln_total);
    sink.field("control_mid.skfd", &r.h.steps[g.nt / 2])?;
    sink.field("terminal.skfd", &r.terminal)
}

fn nonlinear(cfg: &ExperimentConfig, sec: &NonlinearSection, sink: &mut Sink, m: &mut Metrics) -> Result<()> {
    let (solver, d) = setup(cfg)?;
    let ns = cfg.solver.navier_stokes();
    let p = LeaderProblem::new(&solver, &d.y0, cfg.robust, ns).with_yd(d.yd.as_ref());
    let r = p.solve_null_control_nonlinear(&cfg.penalty, &sec.outer)?;
    let linear_opts = crate::stokes_core::SolverOptions {
        convection_on: false,
        ..cfg.solver
    };
    let lin = LeaderProblem::new(&solver, &d.y0, cfg.robust, linear_opts)
        .with_yd(d.yd.as_ref())
        .solve_null_control_cg(&cfg.penalty)?;
    m.insert("y0_v_norm", v_norm(&d.y0));
    m.insert("outer_iterations", r.outer_iterations as f64);
    m.insert("terminal_norm", r.terminal_norm);
    m.insert("control_norm", r.leader.control_norm);
    m.insert("linear_terminal_norm", lin.terminal_norm);
    m.insert(
        "terminal_ratio_to_linear",
        if lin.terminal_norm > 0.0 {
            r.terminal_norm / lin.terminal_norm
        } else {
            0.0
        },
    );
    let rows: Vec<Vec<f64>> = r
        .changes
        .iter()
        .enumerate()
        .map(|(i, c)| vec![(i + 1) as f64, *c])
        .collect();
    sink.csv("outer_iterations.csv", &["iteration", "relative_change"], &rows)?;
    sink.field("control_mid.skfd", &r.leader.h.steps[cfg.grid.nt / 2])
}

fn carleman(cfg: &ExperimentConfig, sec: &CarlemanSection, sink: &mut Sink, m: &mut Metrics) -> Result<()> {
    let (solver, _) = setup(cfg)?;
    let g = cfg.grid;
    let p = cfg.carleman;
    let horizon = g.horizon;

    let mut rows = Vec::new();
    for &l in &sec.f_lambdas {
        let f = f_lambda(l, p.eta_norm())?;
        m.insert(format!("f_lambda_{l:e}"), f);
        rows.push(vec![l, f]);
    }
    sink.csv("f_lambda.csv", &["lambda", "f"], &rows)?;

    let times = midpoint_t_grid(horizon, sec.table_points);
    let mut header = vec!["t".to_string()];
    header.extend(Family::ALL.iter().map(|f| format!("ln_{}", serde_json::to_value(f).expect("name").as_str().unwrap_or("?"))));
    let mut rows = Vec::with_capacity(times.len());
    for &t in &times {
        let mut row = vec![t];
        for f in Family::ALL {
            row.push(ln_family(f, &p, p.eta_norm(), t, horizon)?);
        }
        rows.push(row);
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    sink.csv("weight_table.csv", &header, &rows)?;

    let rel = &sec.relationship;
    let t_grid = midpoint_t_grid(horizon, rel.t_points);
    let mut rows = Vec::new();
    let mut maxima = Vec::new();
    for &l in &sec.lambdas {
        let c = check_lemma_relationship(&p.with_lambda(l)?, rel.m1, rel.m2, rel.epsilon, &t_grid, horizon)?;
        m.insert(format!("relationship_max_ln_ratio_lambda_{l:e}"), c.max_ln_ratio);
        maxima.push(c.max_ln_ratio);
        rows.extend(c.curve.iter().map(|&(t, r)| vec![l, t, r]));
    }
    let nonincreasing = maxima.windows(2).all(|w| w[1] <= w[0]);
    m.insert("relationship_nonincreasing", if nonincreasing { 1.0 } else { 0.0 });
    sink.csv("relationship.csv", &["lambda", "t", "ln_ratio"], &rows)?;

    let int = &sec.integral;
    let mut rng = cfg.rng(STREAM_LEMMA);
    let samples: Vec<_> = (0..int.samples)
        .map(|_| random_stream_velocity(&g, &mut rng, int.modes))
        .collect();
    let mask = &solver.geometry().omega_mask;
    let mut rows = Vec::new();
    let mut maxima = Vec::new();
    for &n in &int.t_cells {
        let c = check_lemma_integral(&p, int.m1, int.m2, &samples, mask, horizon, n)?;
        m.insert(format!("integral_max_ln_ratio_t{n}"), c.max_ln_ratio);
        maxima.push(c.max_ln_ratio);
        rows.extend(c.ln_ratios.iter().enumerate().map(|(i, &r)| vec![n as f64, i as f64, r]));
    }
    if maxima.len() >= 2 {
        m.insert("integral_relative_change", (maxima[maxima.len() - 1] - maxima[0]).exp() - 1.0);
    }
    sink.csv("integral.csv", &["t_cells", "sample", "ln_ratio"], &rows)?;

    let mut rows = Vec::new();
    let mut maxima = Vec::new();
    for &n in &sec.observability_samples {
        let r = observability_ratio(&solver, &p, &cfg.robust, &cfg.solver, n, &mut cfg.rng(STREAM_OBSERVABILITY))?;
        m.insert(format!("observability_max_ratio_n{n}"), r.max_ratio);
        m.insert(format!("observability_red_flags_n{n}"), r.red_flags as f64);
        maxima.push(r.max_ratio);
        rows.extend(
            r.samples
                .iter()
                .enumerate()
                .map(|(i, q)| vec![n as f64, i as f64, q.ln_lhs, q.ln_rhs, q.ratio]),
        );
    }
    if maxima.len() >= 2 {
        m.insert("observability_ratio_change", maxima[maxima.len() - 1] / maxima[0]);
    }
    sink.csv("observability.csv", &["sample_count", "sample", "ln_lhs", "ln_rhs", "ratio"], &rows)?;

    let eta = eta_field(&g, &solver.geometry().omega0)?;
    sink.field("eta.skfd", &eta.faces)
}

fn gamma0(cfg: &ExperimentConfig, sec: &Gamma0Section, sink: &mut Sink, m: &mut Metrics) -> Result<()> {
    let (solver, d) = setup(cfg)?;
    let p = SaddleProblem::new(&solver, &d.y0, cfg.robust, cfg.solver)
        .with_h(d.h.as_ref())
        .with_yd(d.yd.as_ref());
    let b = estimate_gamma0(&p, sec.ell, sec.mu, &sec.gammas, &sec.ascent)?;
    m.insert("gamma0_lower", b.lower);
    m.insert("gamma0_upper", b.upper);
    m.insert(
        "one_sided",
        match b.one_sided {
            None => 0.0,
            Some(OneSided::BelowGrid) => 1.0,
            Some(OneSided::AboveGrid) => 2.0,
        },
    );
    m.insert("evaluations", b.evaluations.len() as f64);
    let rows: Vec<Vec<f64>> = b
        .evaluations
        .iter()
        .map(|&(gamma, ok)| vec![gamma, if ok { 1.0 } else { 0.0 }])
        .collect();
    sink.csv("gamma0_evaluations.csv", &["gamma", "converged"], &rows)
}

fn convergence(sec: &ConvergenceSection, sink: &mut Sink, m: &mut Metrics) -> Result<()> {
    let mut rows = Vec::new();
    let mut prev: Option<f64> = None;
    let mut ratios = Vec::new();
    for (&n, &nt) in sec.sizes.iter().zip(&sec.steps) {
        let e = ManufacturedStokes::terminal_error(n, nt, sec.horizon)?;
        m.insert(format!("error_n{n}"), e);
        let ratio = prev.map_or(f64::NAN, |p| p / e);
        if prev.is_some() {
            m.insert(format!("ratio_n{n}"), ratio);
            ratios.push(ratio);
        }
        rows.push(vec![n as f64, nt as f64, e, ratio]);
        prev = Some(e);
    }
    m.insert("min_ratio", ratios.iter().copied().fold(f64::INFINITY, f64::min));
    m.insert("max_ratio", ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    sink.csv("convergence.csv", &["n", "nt", "error", "ratio"], &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_and_growth_of_power_laws() {
        let eps = [1e-2, 1e-3, 1e-4];
        let y: Vec<f64> = eps.iter().map(|e: &f64| 3.0 * e.powf(0.5)).collect();
        assert!((log_log_slope(&eps, &y) - 0.5).abs() < 1e-12);
        let c: Vec<f64> = eps.iter().map(|e: &f64| e.powf(-0.1)).collect();
        assert!((growth_per_decade(&eps, &c) - 10f64.powf(0.1)).abs() < 1e-12);
    }
}
