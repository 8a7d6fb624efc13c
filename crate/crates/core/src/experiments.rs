//! Named experiments: each turns a validated configuration into a flat list
//! of result rows. Runs are seed-deterministic; wall-clock time is recorded
//! per row but kept out of the deterministic CSV by the persist layer.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::commutator::{commutator_deficit, gradient_commutator_deficit};
use crate::error::{Error, Result};
use crate::field::{Space, SpectralField};
use crate::grid::Grid;
use crate::initial_data::{make_initial_data, DataKind};
use crate::morawetz::interaction_morawetz;
use crate::multiplier::{littlewood_paley, LpPiece};
use crate::norms::{lebesgue_norm, mass, modified_energy, sobolev_norm};
use crate::persist::ResultRow;
use crate::solver::{free_propagator, strang_evolve, SimConfig, Trajectory};
use crate::thresholds::s0_report;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Table1,
    IncrementScaling,
    CommutatorScaling,
    MorawetzBound,
    DispersiveDecay,
    ScatteringCauchy,
    BernsteinSweep,
    ConservationSuite,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Table1 => "table1",
            ExperimentKind::IncrementScaling => "increment_scaling",
            ExperimentKind::CommutatorScaling => "commutator_scaling",
            ExperimentKind::MorawetzBound => "morawetz_bound",
            ExperimentKind::DispersiveDecay => "dispersive_decay",
            ExperimentKind::ScatteringCauchy => "scattering_cauchy",
            ExperimentKind::BernsteinSweep => "bernstein_sweep",
            ExperimentKind::ConservationSuite => "conservation_suite",
        }
    }
}

/// Optional problem-parameter overrides; unset fields take the experiment's
/// pinned defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub n: Option<u32>,
    pub p: Option<f64>,
    pub s: Option<f64>,
    pub sigma: Option<f64>,
}

/// Optional simulation overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub m: Option<u32>,
    pub l_box: Option<f64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub snapshot_stride: Option<usize>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("imethod-out")
}

/// One experiment request. Sweep axes an experiment does not consume are
/// rejected at validation time rather than silently ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub problem: ProblemSpec,
    #[serde(default)]
    pub sim: SimSpec,
    /// Smoothing-cutoff sweep (increment_scaling, commutator_scaling's
    /// bilinear sweep, bernstein_sweep).
    #[serde(default)]
    pub n_list: Option<Vec<f64>>,
    /// Step-size sweep (conservation_suite).
    #[serde(default)]
    pub dt_list: Option<Vec<f64>>,
    /// Dilation sweep; reserved, no current experiment consumes it.
    #[serde(default)]
    pub lambda_list: Option<Vec<f64>>,
    #[serde(default)]
    pub seed_list: Option<Vec<u64>>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> ExperimentConfig {
        ExperimentConfig {
            experiment,
            problem: ProblemSpec::default(),
            sim: SimSpec::default(),
            n_list: None,
            dt_list: None,
            lambda_list: None,
            seed_list: None,
            output_dir: default_output_dir(),
        }
    }

    /// Hex digest of the canonical JSON form; stamped on every row.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut out = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            use std::fmt::Write as _;
            let _ = write!(out, "{byte:02x}");
        }
        out
    }

    /// Fail-fast validation: construct every parameter object the run would
    /// use, without running anything.
    pub fn validate(&self) -> Result<()> {
        self.reject_unused_axes()?;
        match self.experiment {
            ExperimentKind::Table1 => Ok(()),
            ExperimentKind::IncrementScaling => increment_setup(self).map(|_| ()),
            ExperimentKind::CommutatorScaling => commutator_setup(self).map(|_| ()),
            ExperimentKind::MorawetzBound => morawetz_setup(self).map(|_| ()),
            ExperimentKind::DispersiveDecay => dispersive_setup(self).map(|_| ()),
            ExperimentKind::ScatteringCauchy => scattering_setup(self).map(|_| ()),
            ExperimentKind::BernsteinSweep => bernstein_setup(self).map(|_| ()),
            ExperimentKind::ConservationSuite => conservation_setup(self).map(|_| ()),
        }
    }

    fn reject_unused_axes(&self) -> Result<()> {
        use ExperimentKind::*;
        let mut stray = Vec::new();
        if self.lambda_list.is_some() {
            stray.push("lambda_list");
        }
        if self.n_list.is_some()
            && !matches!(self.experiment, IncrementScaling | CommutatorScaling | BernsteinSweep)
        {
            stray.push("n_list");
        }
        if self.dt_list.is_some() && !matches!(self.experiment, ConservationSuite) {
            stray.push("dt_list");
        }
        if self.seed_list.is_some()
            && !matches!(
                self.experiment,
                IncrementScaling | CommutatorScaling | MorawetzBound | BernsteinSweep
            )
        {
            stray.push("seed_list");
        }
        if stray.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "{} does not consume: {}",
                self.experiment.as_str(),
                stray.join(", ")
            )))
        }
    }
}

/// Least-squares line fit artifacts on (ln x, ln y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<Fit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::param("xs", "fit needs >= 2 aligned samples".to_string()));
    }
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(Error::param("xs", "degenerate abscissa for fit".to_string()));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let mut rss = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let r = y - (slope * x + intercept);
        rss += r * r;
    }
    Ok(Fit {
        slope,
        intercept,
        residual: (rss / n).sqrt(),
    })
}

pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<Fit> {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    fit_line(&lx, &ly)
}

/// Run jobs with at most `workers` threads, preserving input order. Each job
/// is independent (no shared mutable state); with workers <= 1 this is a
/// plain serial map.
pub fn map_parallel<I, O, F>(mut inputs: Vec<I>, workers: usize, f: F) -> Vec<O>
where
    I: Send,
    O: Send,
    F: Fn(I) -> O + Sync,
{
    let w = workers.max(1).min(inputs.len().max(1));
    if w <= 1 {
        return inputs.into_iter().map(f).collect();
    }
    let chunk_size = inputs.len().div_ceil(w);
    let mut chunks: Vec<Vec<I>> = Vec::new();
    while !inputs.is_empty() {
        let tail = inputs.split_off(chunk_size.min(inputs.len()));
        chunks.push(std::mem::replace(&mut inputs, tail));
    }
    let f = &f;
    std::thread::scope(|scope| {
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|chunk| scope.spawn(move || chunk.into_iter().map(f).collect::<Vec<O>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

/// Row factory carrying the per-experiment provenance stamps.
struct Emitter {
    experiment: &'static str,
    config_hash: String,
    start: Instant,
    base: BTreeMap<String, String>,
    rows: Vec<ResultRow>,
}

impl Emitter {
    fn new(config: &ExperimentConfig) -> Emitter {
        Emitter {
            experiment: config.experiment.as_str(),
            config_hash: config.config_hash(),
            start: Instant::now(),
            base: BTreeMap::new(),
            rows: Vec::new(),
        }
    }

    fn base_param(&mut self, key: &str, value: impl ToString) {
        self.base.insert(key.to_string(), value.to_string());
    }

    fn blank(&self, metric: &str, value: f64) -> ResultRow {
        ResultRow {
            experiment: self.experiment.to_string(),
            metric: metric.to_string(),
            value,
            x: None,
            series: None,
            slope: None,
            intercept: None,
            residual: None,
            status: "ok".to_string(),
            parameters: self.base.clone(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: self.config_hash.clone(),
            runtime_s: self.start.elapsed().as_secs_f64(),
        }
    }

    fn push(&mut self, row: ResultRow) {
        self.rows.push(row);
    }

    fn value(&mut self, metric: &str, value: f64) {
        let row = self.blank(metric, value);
        self.push(row);
    }

    fn sweep(&mut self, metric: &str, x: f64, value: f64, series: Option<&str>) {
        let mut row = self.blank(metric, value);
        row.x = Some(x);
        row.series = series.map(str::to_string);
        self.push(row);
    }

    fn fit(&mut self, metric: &str, fit: Fit) {
        let mut row = self.blank(metric, fit.slope);
        row.slope = Some(fit.slope);
        row.intercept = Some(fit.intercept);
        row.residual = Some(fit.residual);
        self.push(row);
    }

    fn failed(&mut self, metric: &str, err: &Error) {
        let mut row = self.blank(metric, 0.0);
        row.status = "failed".to_string();
        row.parameters.insert("error".to_string(), err.to_string());
        self.push(row);
    }
}

/// Run one experiment serially.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    run_experiment_with_workers(config, 1)
}

/// Run one experiment, fanning independent sub-runs (seeds, step sizes)
/// across up to `workers` threads. Results are identical to a serial run.
pub fn run_experiment_with_workers(
    config: &ExperimentConfig,
    workers: usize,
) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let mut em = Emitter::new(config);
    match config.experiment {
        ExperimentKind::Table1 => run_table1(&mut em)?,
        ExperimentKind::IncrementScaling => run_increment(&mut em, increment_setup(config)?)?,
        ExperimentKind::CommutatorScaling => run_commutator(&mut em, commutator_setup(config)?)?,
        ExperimentKind::MorawetzBound => run_morawetz(&mut em, morawetz_setup(config)?, workers)?,
        ExperimentKind::DispersiveDecay => run_dispersive(&mut em, dispersive_setup(config)?)?,
        ExperimentKind::ScatteringCauchy => run_scattering(&mut em, scattering_setup(config)?)?,
        ExperimentKind::BernsteinSweep => run_bernstein(&mut em, bernstein_setup(config)?)?,
        ExperimentKind::ConservationSuite => {
            run_conservation(&mut em, conservation_setup(config)?, workers)?
        }
    }
    Ok(em.rows)
}

// ---- table1 ----------------------------------------------------------------

fn run_table1(em: &mut Emitter) -> Result<()> {
    for (n, p) in [(3u32, 2.0f64), (3, 3.0), (4, 1.5)] {
        let report = s0_report(n, p)?;
        let series = format!("n={n},p={p}");
        let mut row = em.blank("s_0", report.s_0.ok_or_else(|| {
            Error::Infeasible(format!("no threshold for n = {n}, p = {p}"))
        })?);
        row.series = Some(series.clone());
        row.parameters.insert("n".into(), n.to_string());
        row.parameters.insert("p".into(), p.to_string());
        if let Some(branch) = &report.binding_branch {
            row.parameters.insert("binding_branch".into(), branch.clone());
        }
        em.push(row);
        let mut row = em.blank("s_c", report.s_c);
        row.series = Some(series);
        row.parameters.insert("n".into(), n.to_string());
        row.parameters.insert("p".into(), p.to_string());
        em.push(row);
    }
    Ok(())
}

// ---- increment_scaling ------------------------------------------------------

struct IncrementSetup {
    sim: SimConfig,
    data: DataKind,
    seed: u64,
    s: f64,
    cutoffs: Vec<f64>,
}

fn increment_setup(config: &ExperimentConfig) -> Result<IncrementSetup> {
    let n = config.problem.n.unwrap_or(3);
    let p = config.problem.p.unwrap_or(2.0);
    let s = config.problem.s.unwrap_or(0.8);
    let m = config.sim.m.unwrap_or(64);
    // Unit box: M = 64 resolves per-axis frequencies to 32, so the cutoff
    // sweep has room to bite; a wide box would cap |xi| below the sweep.
    let l_box = config.sim.l_box.unwrap_or(1.0);
    let grid = Grid::new(n as usize, m as usize, l_box)?;
    let t_end = config.sim.t_end.unwrap_or(0.0125);
    let mut sim = SimConfig::new(grid, p, t_end)?;
    if let Some(dt) = config.sim.dt {
        sim.dt = dt;
    }
    sim.snapshot_stride = config
        .sim
        .snapshot_stride
        .unwrap_or_else(|| sim.total_steps());
    sim.validate()?;
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::param("s", format!("needs 0 < s < 1, got {s}")));
    }
    let seed = config.seed_list.as_deref().unwrap_or(&[7]).first().copied().unwrap();
    let cutoffs = config
        .n_list
        .clone()
        .unwrap_or_else(|| vec![4.0, 8.0, 16.0, 32.0]);
    if cutoffs.len() < 2 {
        return Err(Error::param("n_list", "cutoff sweep needs >= 2 values".to_string()));
    }
    Ok(IncrementSetup {
        sim,
        data: DataKind::RandomHs {
            s,
            delta: 0.05,
            target_norm: 1.0,
        },
        seed,
        s,
        cutoffs,
    })
}

fn run_increment(em: &mut Emitter, setup: IncrementSetup) -> Result<()> {
    let p = setup.sim.p;
    let s_c = crate::thresholds::critical_regularity(setup.sim.grid.dim() as u32, p);
    em.base_param("n", setup.sim.grid.dim());
    em.base_param("p", p);
    em.base_param("s", setup.s);
    em.base_param("m", setup.sim.grid.points_per_axis());
    em.base_param("l_box", setup.sim.grid.box_side());
    em.base_param("t_end", setup.sim.t_end);
    em.base_param("dt", setup.sim.dt);
    em.base_param("seed", setup.seed);
    let u0 = make_initial_data(setup.sim.grid, &setup.data, setup.seed)?;
    let traj = match strang_evolve(&setup.sim, &u0) {
        Ok(t) => t,
        Err(e @ Error::SolverAbort { .. }) => {
            em.failed("increment_run", &e);
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    record_warnings(em, &traj);
    let start = &traj.snapshots[0];
    let end = traj.snapshots.last().unwrap();
    let mut increments = Vec::new();
    for &n_cut in &setup.cutoffs {
        let e0 = modified_energy(start, p, n_cut, setup.s)?;
        let e1 = modified_energy(end, p, n_cut, setup.s)?;
        let inc = (e1 - e0).abs();
        em.sweep("increment", n_cut, inc, None);
        increments.push(inc);
    }
    let fit = fit_loglog(&setup.cutoffs, &increments)?;
    em.fit("increment_slope", fit);
    em.value("expected_rate", -p.min(1.0) * (setup.s - s_c));
    Ok(())
}

// ---- commutator_scaling ------------------------------------------------------

struct CommutatorSetup {
    s: f64,
    nu: f64,
    bilinear_cutoffs: Vec<f64>,
    seeds: (u64, u64, u64),
}

fn commutator_setup(config: &ExperimentConfig) -> Result<CommutatorSetup> {
    let s = config.problem.s.unwrap_or(0.8);
    let nu = 0.3;
    if !(nu > 0.0 && nu < s && s < 1.0) {
        return Err(Error::param("s", format!("needs nu = {nu} < s < 1, got s = {s}")));
    }
    let bilinear_cutoffs = config
        .n_list
        .clone()
        .unwrap_or_else(|| vec![4.0, 8.0, 16.0, 32.0, 64.0]);
    if bilinear_cutoffs.len() < 2 {
        return Err(Error::param("n_list", "cutoff sweep needs >= 2 values".to_string()));
    }
    let seeds = config.seed_list.as_deref().unwrap_or(&[11, 12, 21]);
    let pick = |i: usize, fallback: u64| seeds.get(i).copied().unwrap_or(fallback);
    Ok(CommutatorSetup {
        s,
        nu,
        bilinear_cutoffs,
        seeds: (pick(0, 11), pick(1, 12), pick(2, 21)),
    })
}

fn run_commutator(em: &mut Emitter, setup: CommutatorSetup) -> Result<()> {
    let (s, nu) = (setup.s, setup.nu);
    em.base_param("s", s);
    em.base_param("nu", nu);
    em.base_param("r_split", "2=4,4");
    // Bilinear deficit: 1-D lattice, full-lattice rough pair.
    let grid1 = Grid::new(1, 4096, 1.0)?;
    let rough = |seed: u64| {
        make_initial_data(
            grid1,
            &DataKind::RandomHs {
                s,
                delta: 0.05,
                target_norm: 1.0,
            },
            seed,
        )
    };
    let f = rough(setup.seeds.0)?;
    let g = rough(setup.seeds.1)?;
    let mut ratios = Vec::new();
    for &n_cut in &setup.bilinear_cutoffs {
        let d = commutator_deficit(&f, &g, n_cut, s, nu, 2.0, 4.0, 4.0)?;
        let ratio = d.lhs / d.rhs_product;
        em.sweep("bilinear_ratio", n_cut, ratio, None);
        ratios.push(ratio);
    }
    em.fit("bilinear_slope", fit_loglog(&setup.bilinear_cutoffs, &ratios)?);
    em.value("expected_rate", -(1.0 - s + nu));
    // Trivial case: band-limited product inside the cutoff.
    let f_low = littlewood_paley(&f, 4.0, LpPiece::Le)?;
    let g_low = littlewood_paley(&g, 4.0, LpPiece::Le)?;
    let d = commutator_deficit(&f_low, &g_low, 32.0, s, nu, 2.0, 4.0, 4.0)?;
    em.value(
        "bilinear_bandlimited_lhs_rel",
        d.lhs / lebesgue_norm(&f_low, 2.0)?.max(1e-300),
    );
    // Gradient deficit: n = 3 with the cubic kept alias-free by a low-pass
    // (support radius <= 10, tripled reach 30 < 32 = M/(2 L)).
    let grid3 = Grid::new(3, 64, 1.0)?;
    let u = littlewood_paley(
        &make_initial_data(
            grid3,
            &DataKind::RandomHs {
                s,
                delta: 0.05,
                target_norm: 1.0,
            },
            setup.seeds.2,
        )?,
        5.0,
        LpPiece::Le,
    )?;
    let gradient_cutoffs = [2.0, 3.0, 4.0, 6.0];
    let mut ratios = Vec::new();
    for &n_cut in &gradient_cutoffs {
        let d = gradient_commutator_deficit(&u, n_cut, s, nu, 2.0, 2.0, 4.0, 4.0)?;
        if let Some(caveat) = &d.caveat {
            em.base_param("caveat", caveat);
        }
        let ratio = d.lhs / d.rhs_product;
        em.sweep("gradient_ratio", n_cut, ratio, None);
        ratios.push(ratio);
    }
    em.fit("gradient_slope", fit_loglog(&gradient_cutoffs, &ratios)?);
    // Trivial case: cubic of a bandwidth-2 field stays inside cutoff 16.
    let u_low = littlewood_paley(&u, 2.0, LpPiece::Le)?;
    let d = gradient_commutator_deficit(&u_low, 16.0, s, nu, 2.0, 2.0, 4.0, 4.0)?;
    em.value(
        "gradient_bandlimited_lhs_rel",
        d.lhs / d.rhs_product.max(1e-300),
    );
    Ok(())
}

// ---- morawetz_bound ----------------------------------------------------------

struct MorawetzSetup {
    sim: SimConfig,
    seeds: Vec<u64>,
    slice_times: [f64; 3],
}

fn morawetz_setup(config: &ExperimentConfig) -> Result<MorawetzSetup> {
    let n = config.problem.n.unwrap_or(3);
    if n != 3 {
        return Err(Error::param("n", format!("interaction functionals need n = 3, got {n}")));
    }
    let p = config.problem.p.unwrap_or(2.0);
    let m = config.sim.m.unwrap_or(32);
    let l_box = config.sim.l_box.unwrap_or(16.0);
    let grid = Grid::new(3, m as usize, l_box)?;
    let t_end = config.sim.t_end.unwrap_or(2.0);
    let mut sim = SimConfig::new(grid, p, t_end)?;
    if let Some(dt) = config.sim.dt {
        sim.dt = dt;
    }
    // Snapshot stride chosen so the three slice horizons land on snapshots.
    let quarter = (t_end / 4.0 / sim.dt).round() as usize;
    sim.snapshot_stride = config.sim.snapshot_stride.unwrap_or(quarter.max(1));
    sim.validate()?;
    let slice_times = [t_end / 4.0, t_end / 2.0, t_end];
    let steps_per_quarter = t_end / 4.0 / sim.dt;
    if (steps_per_quarter - steps_per_quarter.round()).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "dt = {} does not divide the slice horizon {}",
            sim.dt,
            t_end / 4.0
        )));
    }
    let seeds = config
        .seed_list
        .clone()
        .unwrap_or_else(|| vec![1, 2, 3, 4, 5]);
    Ok(MorawetzSetup {
        sim,
        seeds,
        slice_times,
    })
}

fn seeded_bump(grid: Grid, seed: u64) -> Result<SpectralField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(17));
    let amplitude = 0.5 + rng.gen::<f64>();
    let width = 0.8 + 0.4 * rng.gen::<f64>();
    let wave: Vec<i64> = (0..3).map(|_| rng.gen_range(-1i64..=1)).collect();
    make_initial_data(
        grid,
        &DataKind::ModulatedGaussian {
            amplitude,
            width,
            wave,
            center: None,
        },
        seed,
    )
}

fn truncate_trajectory(traj: &Trajectory, horizon: f64) -> Result<Trajectory> {
    let keep = traj
        .times
        .iter()
        .take_while(|&&t| t <= horizon + 1e-9)
        .count();
    let mut sub = Trajectory::from_parts(
        traj.config.clone(),
        traj.times[..keep].to_vec(),
        traj.snapshots[..keep].to_vec(),
    )?;
    sub.warnings = traj.warnings.clone();
    Ok(sub)
}

fn run_morawetz(em: &mut Emitter, setup: MorawetzSetup, workers: usize) -> Result<()> {
    let p = setup.sim.p;
    em.base_param("p", p);
    em.base_param("m", setup.sim.grid.points_per_axis());
    em.base_param("l_box", setup.sim.grid.box_side());
    em.base_param("dt", setup.sim.dt);
    em.base_param("t_end", setup.sim.t_end);
    let sim = &setup.sim;
    let jobs: Vec<u64> = setup.seeds.clone();
    let outcomes = map_parallel(jobs, workers, |seed| -> (u64, Result<Trajectory>) {
        let traj = seeded_bump(sim.grid, seed).and_then(|u0| strang_evolve(sim, &u0));
        (seed, traj)
    });
    for (seed, outcome) in outcomes {
        let series = format!("seed={seed}");
        let traj = match outcome {
            Ok(t) => t,
            Err(e @ Error::SolverAbort { .. }) => {
                let mut row = em.blank("morawetz_run", 0.0);
                row.status = "failed".to_string();
                row.series = Some(series);
                row.parameters.insert("error".to_string(), e.to_string());
                em.push(row);
                continue;
            }
            Err(e) => return Err(e),
        };
        record_warnings(em, &traj);
        let mut lhs_by_slice = Vec::new();
        for &horizon in &setup.slice_times {
            let sub = truncate_trajectory(&traj, horizon)?;
            let result = interaction_morawetz(&sub, p)?;
            let lhs = result.term_cube + result.term_coulomb;
            em.sweep("term_cube", horizon, result.term_cube, Some(&series));
            em.sweep("term_coulomb", horizon, result.term_coulomb, Some(&series));
            em.sweep("lhs_total", horizon, lhs, Some(&series));
            em.sweep("rhs_bound", horizon, result.rhs_bound, Some(&series));
            em.sweep(
                "bound_constant",
                horizon,
                lhs / result.rhs_bound.max(1e-300),
                Some(&series),
            );
            lhs_by_slice.push(lhs);
        }
        let mut row = em.blank("saturation_ratio_2t", lhs_by_slice[1] / lhs_by_slice[0]);
        row.series = Some(series.clone());
        em.push(row);
        let mut row = em.blank("saturation_ratio_4t", lhs_by_slice[2] / lhs_by_slice[1]);
        row.series = Some(series);
        em.push(row);
    }
    Ok(())
}

// ---- dispersive_decay --------------------------------------------------------

struct DispersiveSetup {
    grid: Grid,
    width: f64,
    times: Vec<f64>,
}

fn dispersive_setup(config: &ExperimentConfig) -> Result<DispersiveSetup> {
    let n = config.problem.n.unwrap_or(3);
    let m = config.sim.m.unwrap_or(64);
    let l_box = config.sim.l_box.unwrap_or(16.0);
    let grid = Grid::new(n as usize, m as usize, l_box)?;
    for (name, some) in [
        ("dt", config.sim.dt.is_some()),
        ("t_end", config.sim.t_end.is_some()),
        ("snapshot_stride", config.sim.snapshot_stride.is_some()),
    ] {
        if some {
            return Err(Error::Config(format!(
                "dispersive_decay evaluates the free propagator at pinned times; {name} is not consumed"
            )));
        }
    }
    // Window chosen pre-wraparound where the periodic sup tracks the
    // whole-space power law.
    let times: Vec<f64> = (0..8).map(|i| 0.55 + 0.5 * i as f64 / 7.0).collect();
    Ok(DispersiveSetup {
        grid,
        width: 0.5,
        times,
    })
}

fn run_dispersive(em: &mut Emitter, setup: DispersiveSetup) -> Result<()> {
    let n = setup.grid.dim();
    em.base_param("n", n);
    em.base_param("m", setup.grid.points_per_axis());
    em.base_param("l_box", setup.grid.box_side());
    em.base_param("width", setup.width);
    let u0 = make_initial_data(
        setup.grid,
        &DataKind::Gaussian {
            amplitude: 1.0,
            width: setup.width,
            center: None,
        },
        0,
    )?;
    let mut sups = Vec::new();
    for &t in &setup.times {
        let sup = free_propagator(&u0, t).max_abs();
        em.sweep("sup_norm", t, sup, None);
        sups.push(sup);
    }
    let fit = fit_loglog(&setup.times, &sups)?;
    em.fit("decay_slope", fit);
    em.value("expected_rate", -(n as f64) / 2.0);
    Ok(())
}

// ---- scattering_cauchy --------------------------------------------------------

struct ScatteringSetup {
    sim: SimConfig,
    s: f64,
    amplitude: f64,
    width: f64,
    dyadic: Vec<f64>,
}

fn scattering_setup(config: &ExperimentConfig) -> Result<ScatteringSetup> {
    let n = config.problem.n.unwrap_or(3);
    let p = config.problem.p.unwrap_or(2.0);
    let s = config.problem.s.unwrap_or(0.8);
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::param("s", format!("needs 0 < s < 1, got {s}")));
    }
    let m = config.sim.m.unwrap_or(64);
    let l_box = config.sim.l_box.unwrap_or(16.0);
    let grid = Grid::new(n as usize, m as usize, l_box)?;
    let t_end = config.sim.t_end.unwrap_or(2.0);
    let mut sim = SimConfig::new(grid, p, t_end)?;
    sim.dt = config.sim.dt.unwrap_or(6.25e-3);
    let dyadic: Vec<f64> = [0.125, 0.25, 0.5].iter().map(|f| f * t_end).collect();
    let mut dyadic = dyadic;
    dyadic.push(t_end);
    // Stride so every dyadic time lands on a snapshot.
    let step_span = dyadic[0] / sim.dt;
    if (step_span - step_span.round()).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "dt = {} does not divide the first dyadic time {}",
            sim.dt, dyadic[0]
        )));
    }
    sim.snapshot_stride = config
        .sim
        .snapshot_stride
        .unwrap_or((step_span.round() as usize).max(1));
    sim.validate()?;
    Ok(ScatteringSetup {
        sim,
        s,
        amplitude: 0.3,
        width: 1.0,
        dyadic,
    })
}

fn run_scattering(em: &mut Emitter, setup: ScatteringSetup) -> Result<()> {
    em.base_param("p", setup.sim.p);
    em.base_param("s", setup.s);
    em.base_param("m", setup.sim.grid.points_per_axis());
    em.base_param("l_box", setup.sim.grid.box_side());
    em.base_param("dt", setup.sim.dt);
    em.base_param("amplitude", setup.amplitude);
    em.base_param("width", setup.width);
    let u0 = make_initial_data(
        setup.sim.grid,
        &DataKind::Gaussian {
            amplitude: setup.amplitude,
            width: setup.width,
            center: None,
        },
        0,
    )?;
    let h_s = sobolev_norm(&u0, setup.s, false)?;
    em.value("u0_hs_norm", h_s);
    let traj = match strang_evolve(&setup.sim, &u0) {
        Ok(t) => t,
        Err(e @ Error::SolverAbort { .. }) => {
            em.failed("scattering_run", &e);
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    record_warnings(em, &traj);
    for (i, &t) in setup.dyadic.iter().enumerate() {
        for &tau in &setup.dyadic[i + 1..] {
            let d = crate::norms::scattering_cauchy(&traj, setup.s, t, tau)?;
            em.sweep("cauchy_diff", t, d, Some(&format!("tau={tau}")));
        }
    }
    let mut final_pair = 0.0;
    for i in 0..setup.dyadic.len() - 1 {
        let t = setup.dyadic[i];
        let tau = setup.dyadic[i + 1];
        if (tau - 2.0 * t).abs() < 1e-9 {
            let d = crate::norms::scattering_cauchy(&traj, setup.s, t, tau)?;
            em.sweep("cauchy_dyadic", t, d, None);
            final_pair = d;
        }
    }
    em.value("final_fraction", final_pair / h_s.max(1e-300));
    Ok(())
}

// ---- bernstein_sweep -----------------------------------------------------------

struct BernsteinSetup {
    grid: Grid,
    seeds: Vec<u64>,
    cutoffs: Vec<f64>,
}

fn bernstein_setup(config: &ExperimentConfig) -> Result<BernsteinSetup> {
    let n = config.problem.n.unwrap_or(2);
    let m = config.sim.m.unwrap_or(256);
    let l_box = config.sim.l_box.unwrap_or(1.0);
    let grid = Grid::new(n as usize, m as usize, l_box)?;
    let cutoffs = config
        .n_list
        .clone()
        .unwrap_or_else(|| vec![4.0, 8.0, 16.0, 32.0, 64.0]);
    let max_cut = cutoffs.iter().fold(0.0f64, |a, &b| a.max(b));
    if 2.0 * max_cut > grid.max_axis_freq() {
        return Err(Error::Config(format!(
            "band at {} exceeds the grid's per-axis frequency range {}",
            max_cut,
            grid.max_axis_freq()
        )));
    }
    let seeds = config.seed_list.clone().unwrap_or_else(|| vec![1, 2, 3]);
    Ok(BernsteinSetup {
        grid,
        seeds,
        cutoffs,
    })
}

/// A few random point masses: the spectrum is a coherent sum of plane waves,
/// the family on which the L^2 -> L^infinity Bernstein constant is sharp and
/// cutoff-uniform.
fn point_mass_mixture(grid: Grid, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5eed));
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
    for _ in 0..3 {
        let idx = rng.gen_range(0..grid.len());
        let phase = rng.gen::<f64>() * std::f64::consts::TAU;
        values[idx] += Complex64::from_polar(1.0, phase);
    }
    SpectralField::from_values(grid, Space::Physical, values).unwrap()
}

fn run_bernstein(em: &mut Emitter, setup: BernsteinSetup) -> Result<()> {
    let n = setup.grid.dim() as f64;
    em.base_param("n", setup.grid.dim());
    em.base_param("m", setup.grid.points_per_axis());
    em.base_param("l_box", setup.grid.box_side());
    for &seed in &setup.seeds {
        let field = point_mass_mixture(setup.grid, seed);
        let series = format!("seed={seed}");
        let mut ratios = Vec::new();
        for &n_cut in &setup.cutoffs {
            let band = littlewood_paley(&field, n_cut, LpPiece::Band)?;
            let sup = band.max_abs();
            let l2 = mass(&band)?.sqrt();
            let ratio = sup / (n_cut.powf(n / 2.0) * l2.max(1e-300));
            em.sweep("bernstein_ratio", n_cut, ratio, Some(&series));
            ratios.push(ratio);
        }
        let max = ratios.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let min = ratios.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let mut row = em.blank("ratio_spread", max / min);
        row.series = Some(series);
        em.push(row);
    }
    Ok(())
}

// ---- conservation_suite ----------------------------------------------------------

struct ConservationSetup {
    base: SimConfig,
    data: DataKind,
    dts: Vec<f64>,
}

fn conservation_setup(config: &ExperimentConfig) -> Result<ConservationSetup> {
    let n = config.problem.n.unwrap_or(1);
    let p = config.problem.p.unwrap_or(2.0);
    let m = config.sim.m.unwrap_or(1024);
    let l_box = config.sim.l_box.unwrap_or(64.0);
    let grid = Grid::new(n as usize, m as usize, l_box)?;
    let dt = config.sim.dt.unwrap_or_else(|| SimConfig::default_dt(grid));
    let t_end = config.sim.t_end.unwrap_or(1000.0 * dt);
    let mut base = SimConfig::new_any_p(grid, p, t_end)?;
    base.dt = dt;
    base.snapshot_stride = config
        .sim
        .snapshot_stride
        .unwrap_or_else(|| base.total_steps());
    base.validate()?;
    let dts = config
        .dt_list
        .clone()
        .unwrap_or_else(|| vec![dt, dt / 2.0, dt / 4.0]);
    if dts.len() < 2 {
        return Err(Error::param("dt_list", "order fit needs >= 2 step sizes".to_string()));
    }
    Ok(ConservationSetup {
        base,
        data: DataKind::ModulatedGaussian {
            amplitude: 1.0,
            width: 2.0,
            wave: vec![1; n as usize],
            center: None,
        },
        dts,
    })
}

fn drift_stats(traj: &Trajectory) -> (f64, f64) {
    let log = &traj.conserved_log;
    let m0 = log[0].mass;
    let e0 = log[0].energy();
    let mut mass_drift = 0.0f64;
    let mut energy_drift = 0.0f64;
    for sample in log {
        mass_drift = mass_drift.max((sample.mass - m0).abs());
        energy_drift = energy_drift.max((sample.energy() - e0).abs());
    }
    // Relative when the baseline is nonzero; zero data reports exact zeros.
    if m0 > 0.0 {
        mass_drift /= m0;
    }
    if e0.abs() > 0.0 {
        energy_drift /= e0.abs();
    }
    (mass_drift, energy_drift)
}

fn conjugated(field: &SpectralField) -> SpectralField {
    let mut out = field.clone();
    for v in out.values_mut() {
        *v = v.conj();
    }
    out
}

fn run_conservation(em: &mut Emitter, setup: ConservationSetup, workers: usize) -> Result<()> {
    em.base_param("n", setup.base.grid.dim());
    em.base_param("p", setup.base.p);
    em.base_param("m", setup.base.grid.points_per_axis());
    em.base_param("l_box", setup.base.grid.box_side());
    em.base_param("t_end", setup.base.t_end);
    let u0 = make_initial_data(setup.base.grid, &setup.data, 0)?;
    // Energy-drift order: same horizon, refined steps.
    let jobs: Vec<f64> = setup.dts.clone();
    let base = &setup.base;
    let data_ref = &u0;
    let outcomes = map_parallel(jobs, workers, |dt| -> (f64, Result<Trajectory>) {
        let mut sim = base.clone();
        sim.dt = dt;
        sim.snapshot_stride = sim.total_steps();
        (dt, strang_evolve(&sim, data_ref))
    });
    let mut drifts = Vec::new();
    let mut oks = Vec::new();
    for (dt, outcome) in outcomes {
        match outcome {
            Ok(traj) => {
                let (m_drift, e_drift) = drift_stats(&traj);
                em.sweep("energy_drift", dt, e_drift, None);
                if dt == setup.dts[0] {
                    em.value("mass_drift_rel", m_drift);
                    em.value("steps", traj.conserved_log.len() as f64 - 1.0);
                    record_warnings(em, &traj);
                }
                drifts.push(e_drift);
                oks.push(dt);
            }
            Err(e @ Error::SolverAbort { .. }) => {
                let mut row = em.blank("energy_drift", 0.0);
                row.status = "failed".to_string();
                row.x = Some(dt);
                row.parameters.insert("error".to_string(), e.to_string());
                em.push(row);
            }
            Err(e) => return Err(e),
        }
    }
    if oks.len() >= 2 {
        em.fit("energy_order", fit_loglog(&oks, &drifts)?);
    }
    // Time reversal: evolve, conjugate, evolve, conjugate, compare.
    let fwd = strang_evolve(&setup.base, &u0)?;
    let back = strang_evolve(&setup.base, &conjugated(fwd.snapshots.last().unwrap()))?;
    let recovered = conjugated(back.snapshots.last().unwrap());
    let mut diff = recovered;
    for (v, w) in diff.values_mut().iter_mut().zip(u0.values()) {
        *v -= w;
    }
    let rel = mass(&diff)?.sqrt() / mass(&u0)?.sqrt().max(1e-300);
    em.value("reversal_residual_rel", rel);
    // Zero data: every drift is exactly zero.
    let zero = SpectralField::zeros(setup.base.grid, Space::Physical);
    let mut zsim = setup.base.clone();
    zsim.t_end = setup.base.dt * 50.0;
    zsim.snapshot_stride = 50;
    let ztraj = strang_evolve(&zsim, &zero)?;
    let (zm, ze) = drift_stats(&ztraj);
    em.value("zero_data_mass_drift", zm);
    em.value("zero_data_energy_drift", ze);
    let zback = strang_evolve(&zsim, &conjugated(ztraj.snapshots.last().unwrap()))?;
    em.value(
        "zero_data_reversal_residual",
        mass(&conjugated(zback.snapshots.last().unwrap()))?.sqrt(),
    );
    Ok(())
}

fn record_warnings(em: &mut Emitter, traj: &Trajectory) {
    if !traj.warnings.is_empty() {
        em.base_param("warnings", traj.warnings.join("; "));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table1_reproduces_threshold_rows() {
        let config = ExperimentConfig::new(ExperimentKind::Table1);
        let rows = run_experiment(&config).unwrap();
        assert_eq!(rows.len(), 6);
        let s0 = |n: &str, p: &str| {
            rows.iter()
                .find(|r| {
                    r.metric == "s_0"
                        && r.parameters.get("n").map(String::as_str) == Some(n)
                        && r.parameters.get("p").map(String::as_str) == Some(p)
                })
                .unwrap()
                .value
        };
        assert!((s0("3", "2") - 0.8956439237389600).abs() < 1e-9);
        assert!((s0("3", "3") - 0.9901619180111780).abs() < 1e-9);
        assert!((s0("4", "1.5") - 0.9581333793432110).abs() < 1e-9);
        let sc: Vec<f64> = rows.iter().filter(|r| r.metric == "s_c").map(|r| r.value).collect();
        assert_eq!(sc.len(), 3);
        for row in &rows {
            assert_eq!(row.status, "ok");
            assert!(!row.config_hash.is_empty());
            assert_eq!(row.code_version, env!("CARGO_PKG_VERSION"));
        }
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::new(ExperimentKind::Table1);
        let b = ExperimentConfig::new(ExperimentKind::Table1);
        assert_eq!(a.config_hash(), b.config_hash());
        let mut c = ExperimentConfig::new(ExperimentKind::Table1);
        c.output_dir = PathBuf::from("elsewhere");
        assert_ne!(a.config_hash(), c.config_hash());
    }

    #[test]
    fn stray_sweep_axes_are_rejected() {
        let mut config = ExperimentConfig::new(ExperimentKind::Table1);
        config.seed_list = Some(vec![1]);
        match config.validate() {
            Err(Error::Config(msg)) => assert!(msg.contains("seed_list"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let mut config = ExperimentConfig::new(ExperimentKind::ConservationSuite);
        config.lambda_list = Some(vec![2.0]);
        assert!(config.validate().is_err());
        // Valid configs validate without running.
        assert!(ExperimentConfig::new(ExperimentKind::IncrementScaling).validate().is_ok());
        assert!(ExperimentConfig::new(ExperimentKind::MorawetzBound).validate().is_ok());
        assert!(ExperimentConfig::new(ExperimentKind::DispersiveDecay).validate().is_ok());
        assert!(ExperimentConfig::new(ExperimentKind::ScatteringCauchy).validate().is_ok());
        assert!(ExperimentConfig::new(ExperimentKind::BernsteinSweep).validate().is_ok());
        assert!(ExperimentConfig::new(ExperimentKind::ConservationSuite).validate().is_ok());
        assert!(ExperimentConfig::new(ExperimentKind::CommutatorScaling).validate().is_ok());
    }

    #[test]
    fn bernstein_ratios_are_cutoff_uniform() {
        let config = ExperimentConfig::new(ExperimentKind::BernsteinSweep);
        let rows = run_experiment(&config).unwrap();
        let spreads: Vec<&ResultRow> =
            rows.iter().filter(|r| r.metric == "ratio_spread").collect();
        assert_eq!(spreads.len(), 3);
        for row in spreads {
            assert!(row.value < 4.0, "{} spread {}", row.series.as_deref().unwrap(), row.value);
        }
    }

    #[test]
    fn conservation_suite_drifts_and_reversal() {
        let mut config = ExperimentConfig::new(ExperimentKind::ConservationSuite);
        // Smaller than the acceptance run so the unit test stays fast.
        config.sim.m = Some(256);
        config.sim.l_box = Some(16.0);
        let rows = run_experiment_with_workers(&config, 3).unwrap();
        let get = |metric: &str| {
            rows.iter()
                .find(|r| r.metric == metric)
                .unwrap_or_else(|| panic!("missing {metric}"))
                .value
        };
        assert!(get("mass_drift_rel") < 1e-10);
        let order = get("energy_order");
        assert!((1.7..=2.3).contains(&order), "order = {order}");
        assert!(get("reversal_residual_rel") < 1e-6);
        assert_eq!(get("zero_data_mass_drift"), 0.0);
        assert_eq!(get("zero_data_energy_drift"), 0.0);
        assert_eq!(get("zero_data_reversal_residual"), 0.0);
        // Parallel and serial agree on the deterministic columns.
        let serial = run_experiment(&config).unwrap();
        let strip = |rows: &[ResultRow]| {
            let mut r = rows.to_vec();
            for row in &mut r {
                row.runtime_s = 0.0;
            }
            crate::persist::sort_rows(&mut r);
            r
        };
        assert_eq!(strip(&rows), strip(&serial));
    }

    #[test]
    fn dispersive_decay_matches_free_rate() {
        let config = ExperimentConfig::new(ExperimentKind::DispersiveDecay);
        let rows = run_experiment(&config).unwrap();
        let slope = rows
            .iter()
            .find(|r| r.metric == "decay_slope")
            .unwrap()
            .slope
            .unwrap();
        assert!((slope + 1.5).abs() < 0.075, "slope = {slope}");
    }

    #[test]
    fn map_parallel_preserves_order() {
        let inputs: Vec<usize> = (0..17).collect();
        let doubled = map_parallel(inputs.clone(), 4, |x| x * 2);
        assert_eq!(doubled, inputs.iter().map(|x| x * 2).collect::<Vec<_>>());
        let single = map_parallel(vec![5], 8, |x: usize| x + 1);
        assert_eq!(single, vec![6]);
        let empty: Vec<usize> = map_parallel(Vec::<usize>::new(), 3, |x| x);
        assert!(empty.is_empty());
    }

    #[test]
    fn fit_helpers_recover_power_laws() {
        let xs = [4.0, 8.0, 16.0, 32.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-0.7)).collect();
        let fit = fit_loglog(&xs, &ys).unwrap();
        assert!((fit.slope + 0.7).abs() < 1e-12);
        assert!((fit.intercept - 3.0f64.ln()).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
        assert!(fit_line(&[1.0], &[2.0]).is_err());
        assert!(fit_line(&[1.0, 1.0], &[2.0, 3.0]).is_err());
    }
}
