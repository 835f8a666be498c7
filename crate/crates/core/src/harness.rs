//! Ensembles, error metrics, parameter sweeps, convergence orders, cost
//! comparisons and energy-drift fits. Everything here runs in `f64`.

use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::integrators::{run, Method, SimParams, Trajectory};
use crate::io::{read_trajectory_csv, write_atomic, write_trajectory_csv, SweepRow};
use crate::linalg::{norm2, sub_vec};
use crate::model::ModelSpec;
use crate::solvers::{CostCounters, SolverKind};

/// Relative tolerance for matching sample times of two trajectories.
const TIME_MATCH_TOL: f64 = 1e-9;

/// Output stride that samples every `interval` time units at step `dt`.
pub fn stride_for(interval: f64, dt: f64) -> Result<usize> {
    if !(interval > 0.0 && dt > 0.0) {
        return Err(invalid("sample_interval", "interval and dt must be positive"));
    }
    let ratio = interval / dt;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio {
        return Err(invalid(
            "sample_interval",
            format!("{interval} is not a multiple of dt = {dt}"),
        ));
    }
    Ok(n as usize)
}

/// Sup-over-samples and final-time distances of one trajectory from a
/// reference.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PathErrors {
    pub sup_r: f64,
    pub sup_p: f64,
    pub end_r: f64,
    pub end_p: f64,
}

/// Compares `traj` with `reference` at every sample time of `traj`; each of
/// those times must also be a sample time of the reference.
pub fn trajectory_errors(traj: &Trajectory<f64>, reference: &Trajectory<f64>) -> Result<PathErrors> {
    if traj.is_empty() {
        return Err(Error::GridMismatch("trajectory has no samples".into()));
    }
    let mut out = PathErrors::default();
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let tol = TIME_MATCH_TOL * t.abs().max(1.0);
        let j = reference.times.partition_point(|&s| s < t - tol);
        if j >= reference.len() || (reference.times[j] - t).abs() > tol {
            return Err(Error::GridMismatch(format!("reference has no sample at t = {t}")));
        }
        let rs = &reference.states[j];
        if rs.r.len() != state.r.len() {
            return Err(Error::Dimension("reference and trajectory differ in d_r".into()));
        }
        let er = norm2(&sub_vec(&state.r, &rs.r));
        let ep = norm2(&sub_vec(&state.p, &rs.p));
        out.sup_r = out.sup_r.max(er);
        out.sup_p = out.sup_p.max(ep);
        out.end_r = er;
        out.end_p = ep;
    }
    let last_ref = *reference.times.last().expect("non-empty after matching");
    let last = *traj.times.last().expect("non-empty");
    if (last_ref - last).abs() > TIME_MATCH_TOL * last.abs().max(1.0) {
        return Err(Error::GridMismatch(format!(
            "trajectory ends at {last}, reference at {last_ref}"
        )));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedResult {
    pub stream: u64,
    pub errors: PathErrors,
    pub counters: CostCounters,
}

/// Ensemble of sup-time errors against a reference.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub sup_r_error: f64,
    pub sup_p_error: f64,
    pub end_r_error: f64,
    pub end_p_error: f64,
    pub ensemble_size: usize,
    pub per_seed: Vec<SeedResult>,
}

impl ErrorReport {
    fn from_seeds(per_seed: Vec<SeedResult>) -> Self {
        let n = per_seed.len() as f64;
        let mean = |f: fn(&PathErrors) -> f64| per_seed.iter().map(|s| f(&s.errors)).sum::<f64>() / n;
        Self {
            sup_r_error: mean(|e| e.sup_r),
            sup_p_error: mean(|e| e.sup_p),
            end_r_error: mean(|e| e.end_r),
            end_p_error: mean(|e| e.end_p),
            ensemble_size: per_seed.len(),
            per_seed,
        }
    }

    /// Counters of the first ensemble member.
    pub fn counters(&self) -> CostCounters {
        self.per_seed[0].counters
    }

    /// Counters averaged over the ensemble (integer division).
    pub fn mean_counters(&self) -> CostCounters {
        let mut total = CostCounters::default();
        for s in &self.per_seed {
            total += s.counters;
        }
        let n = self.per_seed.len() as u64;
        CostCounters {
            matvec_ax: total.matvec_ax / n,
            matvec_dax: total.matvec_dax / n,
            nonlinear_evals: total.nonlinear_evals / n,
            scf_iterations: total.scf_iterations / n,
        }
    }
}

fn is_stochastic(params: &SimParams<f64>) -> bool {
    params.method == Method::Sxlmd && params.temp > 0.0
}

/// Runs `n_seeds` trajectories on streams `0..n_seeds` of `params.seed` and
/// measures each against `reference`. Deterministic settings are run once
/// and the result is shared by all members.
pub fn run_ensemble(
    model: &ModelSpec<f64>,
    params: &SimParams<f64>,
    n_seeds: usize,
    reference: &Trajectory<f64>,
    out_stride: usize,
) -> Result<ErrorReport> {
    if n_seeds == 0 {
        return Err(invalid("n_seeds", "must be at least 1"));
    }
    params.validate()?;
    let one = |stream: u64| -> Result<SeedResult> {
        let p = SimParams {
            stream,
            ..params.clone()
        };
        let traj = run(model, &p, out_stride)?;
        Ok(SeedResult {
            stream,
            errors: trajectory_errors(&traj, reference)?,
            counters: traj.counters,
        })
    };
    let per_seed = if is_stochastic(params) {
        (0..n_seeds as u64).into_par_iter().map(one).collect::<Result<Vec<_>>>()?
    } else {
        let r = one(0)?;
        (0..n_seeds as u64)
            .map(|stream| SeedResult { stream, ..r.clone() })
            .collect()
    };
    Ok(ErrorReport::from_seeds(per_seed))
}

/// Least-squares slope of `log₁₀ error` against `log₁₀ value`, using the
/// points with `value ≤ threshold`.
pub fn order_estimate(values: &[f64], errors: &[f64], threshold: f64) -> Result<f64> {
    if values.len() != errors.len() {
        return Err(Error::Dimension("values and errors differ in length".into()));
    }
    let pts: Vec<(f64, f64)> = values
        .iter()
        .zip(errors)
        .filter(|(&v, &e)| v <= threshold && v > 0.0 && e > 0.0 && e.is_finite())
        .map(|(&v, &e)| (v.log10(), e.log10()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            found: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("values", "all usable values coincide"));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

/// Parameter varied by a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SweepParam {
    Eps,
    Temp,
    Gamma,
    /// Sets `eps` to the value and `temp` to its square root.
    EpsWithTempSqrt,
}

impl SweepParam {
    pub fn apply(self, base: &SimParams<f64>, value: f64) -> SimParams<f64> {
        let mut p = base.clone();
        match self {
            Self::Eps => p.eps = value,
            Self::Temp => p.temp = value,
            Self::Gamma => p.gamma = value,
            Self::EpsWithTempSqrt => {
                p.eps = value;
                p.temp = value.sqrt();
            }
        }
        p
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "eps" => Ok(Self::Eps),
            "temp" => Ok(Self::Temp),
            "gamma" => Ok(Self::Gamma),
            "eps_with_temp_sqrt" => Ok(Self::EpsWithTempSqrt),
            other => Err(invalid(
                "param",
                format!("expected eps, temp, gamma or eps_with_temp_sqrt, got `{other}`"),
            )),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Eps => "eps",
            Self::Temp => "temp",
            Self::Gamma => "gamma",
            Self::EpsWithTempSqrt => "eps_with_temp_sqrt",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub reports: Vec<ErrorReport>,
}

impl SweepResult {
    pub fn sup_r_errors(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.sup_r_error).collect()
    }

    pub fn sup_p_errors(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.sup_p_error).collect()
    }

    pub fn counters(&self) -> Vec<CostCounters> {
        self.reports.iter().map(ErrorReport::counters).collect()
    }

    /// Convergence orders of the r and p errors.
    pub fn orders(&self, threshold: f64) -> Result<(f64, f64)> {
        Ok((
            order_estimate(&self.values, &self.sup_r_errors(), threshold)?,
            order_estimate(&self.values, &self.sup_p_errors(), threshold)?,
        ))
    }

    /// Per-seed rows followed by a summary row, for each value.
    pub fn rows(&self) -> Vec<SweepRow> {
        let mut rows = Vec::new();
        for (&value, rep) in self.values.iter().zip(&self.reports) {
            for s in &rep.per_seed {
                rows.push(SweepRow {
                    value,
                    seed: Some(s.stream),
                    sup_r_err: s.errors.sup_r,
                    sup_p_err: s.errors.sup_p,
                    counters: s.counters,
                });
            }
            rows.push(SweepRow {
                value,
                seed: None,
                sup_r_err: rep.sup_r_error,
                sup_p_err: rep.sup_p_error,
                counters: rep.mean_counters(),
            });
        }
        rows
    }
}

/// Summary rows of a sweep table as `(values, r errors, p errors)`.
pub fn summary_columns(rows: &[SweepRow]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let summary = rows.iter().filter(|r| r.seed.is_none());
    let mut out = (Vec::new(), Vec::new(), Vec::new());
    for r in summary {
        out.0.push(r.value);
        out.1.push(r.sup_r_err);
        out.2.push(r.sup_p_err);
    }
    out
}

/// One ensemble per grid value.
pub fn sweep(
    model: &ModelSpec<f64>,
    base: &SimParams<f64>,
    param: SweepParam,
    grid: &[f64],
    n_seeds: usize,
    reference: &Trajectory<f64>,
    out_stride: usize,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(invalid("grid", "must not be empty"));
    }
    let increasing = grid.windows(2).all(|w| w[1] > w[0]);
    let decreasing = grid.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) {
        return Err(invalid("grid", "must be strictly monotone"));
    }
    let reports = grid
        .par_iter()
        .map(|&v| run_ensemble(model, &param.apply(base, v), n_seeds, reference, out_stride))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        param,
        values: grid.to_vec(),
        reports,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodCost {
    pub errors: PathErrors,
    pub counters: CostCounters,
    pub steps: usize,
}

/// Exact MD against Stochastic-XLMD on a shared reference.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub md: MethodCost,
    pub sxlmd: MethodCost,
    /// `1 − ax(sxlmd)/ax(md)`.
    pub ax_reduction: f64,
    /// Same for `ax + dax`.
    pub total_reduction: f64,
    /// Same for nonlinear evaluations, when exact MD made any.
    pub nonlinear_reduction: Option<f64>,
}

fn reduction(ours: u64, theirs: u64) -> f64 {
    if theirs == 0 {
        0.0
    } else {
        1.0 - ours as f64 / theirs as f64
    }
}

/// Runs both methods once, sampling every `sample_interval`.
pub fn efficiency_compare(
    model: &ModelSpec<f64>,
    md_params: &SimParams<f64>,
    sxlmd_params: &SimParams<f64>,
    reference: &Trajectory<f64>,
    sample_interval: f64,
) -> Result<Comparison> {
    if md_params.method != Method::Exact || sxlmd_params.method != Method::Sxlmd {
        return Err(invalid("method", "comparison needs exact and sxlmd parameter sets"));
    }
    if (md_params.t_f - sxlmd_params.t_f).abs() > TIME_MATCH_TOL * md_params.t_f {
        return Err(invalid("t_f", "both methods must target the same final time"));
    }
    let go = |p: &SimParams<f64>| -> Result<MethodCost> {
        let traj = run(model, p, stride_for(sample_interval, p.dt)?)?;
        Ok(MethodCost {
            errors: trajectory_errors(&traj, reference)?,
            counters: traj.counters,
            steps: traj.steps,
        })
    };
    let (md, sx) = rayon::join(|| go(md_params), || go(sxlmd_params));
    let (md, sxlmd) = (md?, sx?);
    let nonlinear_reduction = (md.counters.nonlinear_evals > 0)
        .then(|| reduction(sxlmd.counters.nonlinear_evals, md.counters.nonlinear_evals));
    Ok(Comparison {
        ax_reduction: reduction(sxlmd.counters.matvec_ax, md.counters.matvec_ax),
        total_reduction: reduction(
            sxlmd.counters.matvec_ax + sxlmd.counters.matvec_dax,
            md.counters.matvec_ax + md.counters.matvec_dax,
        ),
        nonlinear_reduction,
        md,
        sxlmd,
    })
}

/// Energy drift of a trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftReport {
    /// Slope of the least-squares line through the second half of the samples.
    pub rate: f64,
    pub intercept: f64,
    /// First sample time with `|E − reference| ≤ band`.
    pub first_entry: Option<f64>,
    /// Earliest time after which every sample stays in the band.
    pub settled_from: Option<f64>,
}

pub fn drift_analysis(traj: &Trajectory<f64>, reference_energy: f64, band: f64) -> Result<DriftReport> {
    let n = traj.energy.len();
    if n < 4 {
        return Err(Error::TooFewPoints { needed: 4, found: n });
    }
    let half = n / 2;
    let ts = &traj.times[half..];
    let es = &traj.energy[half..];
    let m = ts.len() as f64;
    let mt = ts.iter().sum::<f64>() / m;
    let me = es.iter().sum::<f64>() / m;
    let stt: f64 = ts.iter().map(|t| (t - mt).powi(2)).sum();
    let ste: f64 = ts.iter().zip(es).map(|(t, e)| (t - mt) * (e - me)).sum();
    let rate = ste / stt;
    let inside = |e: &f64| (e - reference_energy).abs() <= band;
    let first_entry = traj.energy.iter().position(inside).map(|i| traj.times[i]);
    let settled_from = match traj.energy.iter().rposition(|e| !inside(e)) {
        None => Some(traj.times[0]),
        Some(i) if i + 1 < n => Some(traj.times[i + 1]),
        Some(_) => None,
    };
    Ok(DriftReport {
        rate,
        intercept: me - rate * mt,
        first_entry,
        settled_from,
    })
}

/// How a reference trajectory is computed: exact MD at step `dt`, SCF
/// tolerance `scf_tol`, sampled every `sample_interval`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceSpec {
    pub dt: f64,
    pub scf_tol: f64,
    pub sample_interval: f64,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        Self {
            dt: 5e-6,
            scf_tol: 1e-10,
            sample_interval: 1e-3,
        }
    }
}

impl ReferenceSpec {
    /// Exact-MD parameters sharing the initial data, horizon and SCF solver
    /// of `base`.
    pub fn params(&self, base: &SimParams<f64>) -> SimParams<f64> {
        SimParams {
            method: Method::Exact,
            dt: self.dt,
            scf_tol: self.scf_tol,
            scf_max_iter: base.scf_max_iter.max(10_000),
            ..base.clone()
        }
    }

    pub fn stride(&self) -> Result<usize> {
        stride_for(self.sample_interval, self.dt)
    }

    pub fn compute(&self, model: &ModelSpec<f64>, base: &SimParams<f64>) -> Result<Trajectory<f64>> {
        run(model, &self.params(base), self.stride()?)
    }
}

/// On-disk cache of reference trajectories. Each entry is a trajectory CSV
/// plus a `.key` file holding the full description it was computed from.
#[derive(Clone, Debug)]
pub struct ReferenceCache {
    dir: PathBuf,
}

impl ReferenceCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Canonical description of a reference run.
    pub fn key(model: &ModelSpec<f64>, base: &SimParams<f64>, spec: &ReferenceSpec) -> String {
        let (r0, p0) = match (&base.r0, &base.p0, model.initial()) {
            (Some(r), Some(p), _) => (r.clone(), p.clone()),
            (r, p, init) => {
                let (ir, ip) = init.map(|(a, b)| (a.to_vec(), b.to_vec())).unwrap_or_default();
                (r.clone().unwrap_or(ir), p.clone().unwrap_or(ip))
            }
        };
        let anderson = match base.solver {
            SolverKind::Cg => String::new(),
            SolverKind::Anderson => format!(";alpha={:e};depth={}", base.anderson_alpha, base.anderson_depth),
        };
        format!(
            "model={};t_f={:e};dt={:e};scf_tol={:e};interval={:e};solver={}{anderson};r0={:?};p0={:?}",
            model.name(),
            base.t_f,
            spec.dt,
            spec.scf_tol,
            spec.sample_interval,
            base.solver,
            r0,
            p0
        )
    }

    fn paths(&self, key: &str) -> (PathBuf, PathBuf) {
        use std::hash::{DefaultHasher, Hash, Hasher};
        let mut h = DefaultHasher::new();
        key.hash(&mut h);
        let stem = format!("ref-{:016x}", h.finish());
        (self.dir.join(format!("{stem}.csv")), self.dir.join(format!("{stem}.key")))
    }

    /// Cached reference, if present and computed from the same description.
    pub fn load(&self, model: &ModelSpec<f64>, base: &SimParams<f64>, spec: &ReferenceSpec) -> Result<Option<Trajectory<f64>>> {
        let key = Self::key(model, base, spec);
        let (csv, key_path) = self.paths(&key);
        match std::fs::read_to_string(&key_path) {
            Ok(stored) if stored.trim() == key => {}
            _ => return Ok(None),
        }
        let mut traj = match File::open(&csv) {
            Ok(f) => read_trajectory_csv(f)?,
            Err(_) => return Ok(None),
        };
        traj.dt = spec.dt;
        traj.steps = spec.params(base).n_steps()?;
        Ok(Some(traj))
    }

    /// Loads the reference or computes and stores it.
    pub fn get_or_compute(&self, model: &ModelSpec<f64>, base: &SimParams<f64>, spec: &ReferenceSpec) -> Result<Trajectory<f64>> {
        if let Some(t) = self.load(model, base, spec)? {
            return Ok(t);
        }
        let traj = spec.compute(model, base)?;
        let key = Self::key(model, base, spec);
        let (csv, key_path) = self.paths(&key);
        write_atomic(&csv, |w| write_trajectory_csv(&traj, w))?;
        write_atomic(&key_path, |w| Ok(writeln!(w, "{key}")?))?;
        Ok(traj)
    }
}

/// Settings of the numerical experiments on the three builtin models.
pub mod presets {
    use super::ReferenceSpec;
    use crate::integrators::{LatentInit, Method, SimParams};
    use crate::solvers::SolverKind;

    /// Output interval on model A.
    pub const MODEL_A_INTERVAL: f64 = 1e-3;
    /// Output interval on models B and C.
    pub const PENTA_INTERVAL: f64 = 2e-3;

    /// Stochastic-XLMD on model A from `x(0) = x⋆(0) + (0.5, −0.5)`.
    pub fn model_a_offset() -> SimParams<f64> {
        SimParams {
            method: Method::Sxlmd,
            eps: 1e-4,
            temp: 1e-4,
            gamma: 0.1,
            dt: 5e-6,
            t_f: 5.0,
            x_init: LatentInit::Offset(vec![0.5, -0.5]),
            ..SimParams::default()
        }
    }

    pub fn model_a_reference() -> ReferenceSpec {
        ReferenceSpec {
            dt: 5e-6,
            scf_tol: 1e-10,
            sample_interval: MODEL_A_INTERVAL,
        }
    }

    /// Exact MD with CG on model B.
    pub fn model_b_md() -> SimParams<f64> {
        SimParams {
            method: Method::Exact,
            dt: 1.0 / 2500.0,
            t_f: 5.0,
            scf_tol: 1e-6,
            ..SimParams::default()
        }
    }

    pub fn model_b_sxlmd() -> SimParams<f64> {
        let eps: f64 = 5e-7;
        SimParams {
            method: Method::Sxlmd,
            eps,
            temp: eps.sqrt() / 1000.0,
            gamma: 0.5,
            dt: 1.0 / 2500.0,
            t_f: 5.0,
            ..SimParams::default()
        }
    }

    /// Exact MD with Anderson mixing on model C.
    pub fn model_c_md() -> SimParams<f64> {
        SimParams {
            method: Method::Exact,
            dt: 1.0 / 2000.0,
            t_f: 5.0,
            scf_tol: 1e-6,
            solver: SolverKind::Anderson,
            anderson_alpha: 0.1,
            anderson_depth: 5,
            ..SimParams::default()
        }
    }

    pub fn model_c_sxlmd() -> SimParams<f64> {
        let eps: f64 = 2.5e-7;
        SimParams {
            method: Method::Sxlmd,
            eps,
            temp: eps.sqrt() / 1e4,
            gamma: 0.1,
            dt: 1.0 / 2500.0,
            t_f: 5.0,
            solver: SolverKind::Anderson,
            anderson_alpha: 0.1,
            anderson_depth: 5,
            ..SimParams::default()
        }
    }

    pub fn penta_reference() -> ReferenceSpec {
        ReferenceSpec {
            dt: 2.5e-6,
            scf_tol: 1e-10,
            sample_interval: PENTA_INTERVAL,
        }
    }

    /// Same settings with the horizon cut to `t_f`.
    pub fn with_horizon(mut p: SimParams<f64>, t_f: f64) -> SimParams<f64> {
        p.t_f = t_f;
        p
    }
}

#[cfg(test)]
mod tests;
