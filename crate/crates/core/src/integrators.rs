//! Time stepping for exact MD, XL-BOMD, Stochastic-XLMD and the averaged
//! limit equation.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::linalg::{axpy, Mat};
use crate::model::{ExtendedState, ForceWorkspace, ModelSpec};
use crate::rng::GaussianStream;
use crate::scalar::Scalar;
use crate::solvers::{anderson_in_workspace, cg_solve_system, AndersonParams, CostCounters, SolveResult, SolverKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Exact,
    Xlbomd,
    Sxlmd,
    Averaged,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" | "md" => Ok(Self::Exact),
            "xlbomd" => Ok(Self::Xlbomd),
            "sxlmd" => Ok(Self::Sxlmd),
            "averaged" => Ok(Self::Averaged),
            other => Err(invalid("method", format!("unknown method `{other}`"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Exact => "exact",
            Self::Xlbomd => "xlbomd",
            Self::Sxlmd => "sxlmd",
            Self::Averaged => "averaged",
        })
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cg" => Ok(Self::Cg),
            "anderson" => Ok(Self::Anderson),
            other => Err(invalid("solver", format!("unknown solver `{other}`"))),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cg => "cg",
            Self::Anderson => "anderson",
        })
    }
}

/// Initial latent configuration for the extended dynamics.
#[derive(Clone, Debug, PartialEq)]
pub enum LatentInit<S> {
    /// Solve `∂Q/∂x = 0` at `r(0)`.
    ScfExact,
    /// Exact solution plus a fixed offset.
    Offset(Vec<S>),
    Explicit(Vec<S>),
}

/// Initial latent velocity `y(0)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum VelocityInit {
    #[default]
    Zero,
    /// `√ε ẋ(0)` from differentiating the constraint along `(r, p)`.
    Consistent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimParams<S> {
    pub method: Method,
    pub eps: S,
    pub temp: S,
    pub gamma: S,
    pub dt: S,
    pub t_f: S,
    pub scf_tol: S,
    pub scf_max_iter: usize,
    pub solver: SolverKind,
    pub anderson_alpha: S,
    pub anderson_depth: usize,
    pub seed: u64,
    /// Stream index within `seed`; ensembles use the member index.
    pub stream: u64,
    pub x_init: LatentInit<S>,
    pub y_init: VelocityInit,
    /// Overrides the model's default initial positions and momenta.
    pub r0: Option<Vec<S>>,
    pub p0: Option<Vec<S>>,
}

impl<S: Scalar> Default for SimParams<S> {
    fn default() -> Self {
        Self {
            method: Method::Sxlmd,
            eps: S::lit(1e-4),
            temp: S::lit(1e-4),
            gamma: S::lit(0.1),
            dt: S::lit(5e-6),
            t_f: S::lit(5.0),
            scf_tol: S::lit(1e-10),
            scf_max_iter: 1000,
            solver: SolverKind::Cg,
            anderson_alpha: S::lit(0.1),
            anderson_depth: 5,
            seed: 0,
            stream: 0,
            x_init: LatentInit::ScfExact,
            y_init: VelocityInit::Zero,
            r0: None,
            p0: None,
        }
    }
}

impl<S: Scalar> SimParams<S> {
    /// Number of steps; `t_f` must be an integer multiple of `dt`.
    pub fn n_steps(&self) -> Result<usize> {
        if !(self.dt > S::zero() && self.dt.is_finite()) {
            return Err(invalid("dt", "must be positive"));
        }
        if !(self.t_f > S::zero() && self.t_f.is_finite()) {
            return Err(invalid("t_f", "must be positive"));
        }
        let ratio = (self.t_f / self.dt).as_f64();
        let n = ratio.round();
        if (ratio - n).abs() > 1e-6 * ratio.max(1.0) || n < 1.0 {
            return Err(invalid("dt", "t_f must be an integer multiple of dt"));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.n_steps()?;
        if !(self.scf_tol > S::zero()) {
            return Err(invalid("scf_tol", "must be positive"));
        }
        if self.scf_max_iter == 0 {
            return Err(invalid("scf_max_iter", "must be at least 1"));
        }
        if !(self.temp >= S::zero() && self.temp.is_finite()) {
            return Err(invalid("temp", "must be non-negative"));
        }
        if matches!(self.method, Method::Xlbomd | Method::Sxlmd) {
            if !(self.eps > S::zero() && self.eps < S::one()) {
                return Err(invalid("eps", "must lie in (0, 1)"));
            }
            if !(self.gamma >= S::zero() && self.gamma.is_finite()) {
                return Err(invalid("gamma", "must be non-negative"));
            }
        }
        if self.solver == SolverKind::Anderson && !(self.anderson_alpha > S::zero() && self.anderson_alpha <= S::one()) {
            return Err(invalid("anderson_alpha", "must lie in (0, 1]"));
        }
        Ok(())
    }

    fn anderson(&self) -> AndersonParams<S> {
        AndersonParams {
            alpha: self.anderson_alpha,
            depth: self.anderson_depth,
            tol: self.scf_tol,
            max_iter: self.scf_max_iter,
        }
    }
}

/// Sampled trajectory with per-sample energies and the run's total cost.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<S> {
    pub times: Vec<S>,
    pub states: Vec<ExtendedState<S>>,
    /// `½|p|² + U(r) + Q(r, x)` at each sample.
    pub energy: Vec<S>,
    /// `½|y|²` at each sample.
    pub latent_ke: Vec<S>,
    pub counters: CostCounters,
    pub dt: S,
    pub steps: usize,
}

impl<S: Scalar> Trajectory<S> {
    fn new(dt: S, steps: usize) -> Self {
        Self {
            times: Vec::new(),
            states: Vec::new(),
            energy: Vec::new(),
            latent_ke: Vec::new(),
            counters: CostCounters::default(),
            dt,
            steps,
        }
    }

    fn record(&mut self, model: &ModelSpec<S>, state: ExtendedState<S>) {
        let (e, ke) = model.total_energy(&state);
        self.times.push(state.t);
        self.energy.push(e);
        self.latent_ke.push(ke);
        self.states.push(state);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &ExtendedState<S> {
        self.states.last().expect("trajectory has the initial sample")
    }
}

/// Runs the method selected by `params.method`.
pub fn run<S: Scalar>(model: &ModelSpec<S>, params: &SimParams<S>, out_stride: usize) -> Result<Trajectory<S>> {
    match params.method {
        Method::Exact => exact_md_run(model, params, out_stride),
        Method::Xlbomd => xlbomd_run(model, params, out_stride),
        Method::Sxlmd => sxlmd_run(model, params, out_stride),
        Method::Averaged => averaged_run(model, params, out_stride),
    }
}

fn initial_phase<S: Scalar>(model: &ModelSpec<S>, params: &SimParams<S>) -> Result<(Vec<S>, Vec<S>)> {
    let (r, p) = match (&params.r0, &params.p0, model.initial()) {
        (Some(r), Some(p), _) => (r.clone(), p.clone()),
        (None, None, Some((r, p))) => (r.to_vec(), p.to_vec()),
        (Some(r), None, Some((_, p))) => (r.clone(), p.to_vec()),
        (None, Some(p), Some((r, _))) => (r.to_vec(), p.clone()),
        _ => return Err(invalid("r0", "model has no default initial data; set r0 and p0")),
    };
    model.check_r(&r)?;
    model.check_r(&p)?;
    Ok((r, p))
}

fn check_stride(out_stride: usize) -> Result<()> {
    if out_stride == 0 {
        return Err(invalid("out_stride", "must be at least 1"));
    }
    Ok(())
}

fn should_record(step: usize, n: usize, stride: usize) -> bool {
    step.is_multiple_of(stride) || step == n
}

fn time_at<S: Scalar>(step: usize, dt: S) -> S {
    S::from_usize_lossy(step) * dt
}

/// One SCF solve at the configuration held in `ws`, warm-started from `x0`.
fn scf_in_workspace<S: Scalar>(
    model: &ModelSpec<S>,
    ws: &mut ForceWorkspace<S>,
    x0: &[S],
    params: &SimParams<S>,
) -> Result<SolveResult<S>> {
    match params.solver {
        SolverKind::Cg => {
            if !model.is_quadratic() {
                return Err(invalid("solver", "conjugate gradients need a quadratic interaction"));
            }
            cg_solve_system(ws.a(), ws.b(), x0, params.scf_tol, params.scf_max_iter)
        }
        SolverKind::Anderson => anderson_in_workspace(model, ws, x0, params.anderson()),
    }
}

fn scf_checked<S: Scalar>(
    model: &ModelSpec<S>,
    ws: &mut ForceWorkspace<S>,
    x0: &[S],
    params: &SimParams<S>,
    counters: &mut CostCounters,
    step: usize,
) -> Result<Vec<S>> {
    let res = scf_in_workspace(model, ws, x0, params)?;
    counters.record_solve(&res, !model.is_quadratic());
    if !res.converged {
        return Err(Error::ScfNotConverged {
            step,
            residual: res.residual_norm.as_f64(),
        });
    }
    Ok(res.x)
}

fn coupling_force<S: Scalar>(ws: &ForceWorkspace<S>, x: &[S], out: &mut [S], counters: &mut CostCounters) {
    ws.coupling_force_into(x, out);
    counters.matvec_dax += out.len() as u64;
}

/// Latent force `−∂Q/∂x` scaled by `1/√ε`.
fn latent_force<S: Scalar>(
    model: &ModelSpec<S>,
    ws: &mut ForceWorkspace<S>,
    x: &[S],
    inv_sqrt_eps: S,
    out: &mut [S],
    counters: &mut CostCounters,
) {
    ws.latent_force_into(model, x, out);
    out.iter_mut().for_each(|v| *v *= inv_sqrt_eps);
    counters.matvec_ax += 1;
    if !model.is_quadratic() {
        counters.nonlinear_evals += 1;
    }
}

fn all_finite<S: Scalar>(v: &[S]) -> bool {
    v.iter().all(|e| e.is_finite())
}

/// Velocity Verlet on `(r, p)` with the latent variables slaved to `r`
/// through an SCF solve at every force evaluation.
pub fn exact_md_run<S: Scalar>(model: &ModelSpec<S>, params: &SimParams<S>, out_stride: usize) -> Result<Trajectory<S>> {
    params.validate()?;
    check_stride(out_stride)?;
    let n = params.n_steps()?;
    let dt = params.dt;
    let half = S::lit(0.5) * dt;
    let (mut r, mut p) = initial_phase(model, params)?;
    let (d, m) = (model.dim_r(), model.dim_x());
    let mut traj = Trajectory::new(dt, n);
    let mut c = CostCounters::default();
    let mut ws = ForceWorkspace::at(model, &r);
    let mut x = scf_checked(model, &mut ws, &vec![S::zero(); m], params, &mut c, 0)?;
    let mut f = vec![S::zero(); d];
    coupling_force(&ws, &x, &mut f, &mut c);
    let y0 = vec![S::zero(); m];
    let snapshot = |t: S, r: &[S], p: &[S], x: &[S]| ExtendedState {
        t,
        r: r.to_vec(),
        p: p.to_vec(),
        x: x.to_vec(),
        y: y0.clone(),
    };
    traj.record(model, snapshot(S::zero(), &r, &p, &x));
    for step in 1..=n {
        axpy(half, &f, &mut p);
        axpy(dt, &p, &mut r);
        ws.update(model, &r);
        x = scf_checked(model, &mut ws, &x, params, &mut c, step)?;
        coupling_force(&ws, &x, &mut f, &mut c);
        axpy(half, &f, &mut p);
        if !(all_finite(&r) && all_finite(&p)) {
            return Err(Error::NonFinite { step });
        }
        if should_record(step, n, out_stride) {
            traj.record(model, snapshot(time_at(step, dt), &r, &p, &x));
        }
    }
    traj.counters = c;
    Ok(traj)
}

/// `ẋ(0) = H⁻¹ Σ_k p_k (∂b/∂r_k − (∂A/∂r_k) x)` where `H` is the x-Hessian of
/// `Q` (equal to `A` for quadratic models).
pub fn consistent_latent_velocity<S: Scalar>(model: &ModelSpec<S>, r: &[S], p: &[S], x: &[S]) -> Result<Vec<S>> {
    model.check_r(r)?;
    model.check_r(p)?;
    model.check_x(x)?;
    let m = model.dim_x();
    let mut rhs = vec![S::zero(); m];
    for (k, &pk) in p.iter().enumerate() {
        let dax = model.da_dr(r, k).mul_vec(x);
        let db = model.db_dr(r, k);
        for i in 0..m {
            rhs[i] += pk * (db[i] - dax[i]);
        }
    }
    Ok(model.hessian_x(r, x).cholesky()?.solve(&rhs))
}

/// State shared by the two extended-Lagrangian integrators.
struct Extended<S: Scalar> {
    r: Vec<S>,
    p: Vec<S>,
    x: Vec<S>,
    y: Vec<S>,
    fp: Vec<S>,
    fy: Vec<S>,
    ws: ForceWorkspace<S>,
    inv_sqrt_eps: S,
    counters: CostCounters,
}

impl<S: Scalar> Extended<S> {
    fn init(model: &ModelSpec<S>, params: &SimParams<S>) -> Result<Self> {
        let (r, p) = initial_phase(model, params)?;
        let m = model.dim_x();
        let mut counters = CostCounters::default();
        let mut ws = ForceWorkspace::at(model, &r);
        let x = match &params.x_init {
            LatentInit::Explicit(x) => {
                model.check_x(x)?;
                x.clone()
            }
            LatentInit::ScfExact => scf_checked(model, &mut ws, &vec![S::zero(); m], params, &mut counters, 0)?,
            LatentInit::Offset(off) => {
                model.check_x(off)?;
                let mut x = scf_checked(model, &mut ws, &vec![S::zero(); m], params, &mut counters, 0)?;
                axpy(S::one(), off, &mut x);
                x
            }
        };
        let y = match params.y_init {
            VelocityInit::Zero => vec![S::zero(); m],
            VelocityInit::Consistent => {
                let mut v = consistent_latent_velocity(model, &r, &p, &x)?;
                counters.matvec_dax += r.len() as u64;
                let s = params.eps.sqrt();
                v.iter_mut().for_each(|e| *e *= s);
                v
            }
        };
        let mut st = Self {
            fp: vec![S::zero(); r.len()],
            fy: vec![S::zero(); m],
            r,
            p,
            x,
            y,
            ws,
            inv_sqrt_eps: S::one() / params.eps.sqrt(),
            counters,
        };
        st.refresh_forces(model);
        Ok(st)
    }

    fn refresh_forces(&mut self, model: &ModelSpec<S>) {
        coupling_force(&self.ws, &self.x, &mut self.fp, &mut self.counters);
        latent_force(model, &mut self.ws, &self.x, self.inv_sqrt_eps, &mut self.fy, &mut self.counters);
    }

    fn kick(&mut self, h: S) {
        axpy(h, &self.fp, &mut self.p);
        axpy(h, &self.fy, &mut self.y);
    }

    fn drift(&mut self, h: S) {
        axpy(h, &self.p, &mut self.r);
        axpy(h * self.inv_sqrt_eps, &self.y, &mut self.x);
    }

    fn relocate(&mut self, model: &ModelSpec<S>) {
        self.ws.update(model, &self.r);
        self.refresh_forces(model);
    }

    fn finite(&self) -> bool {
        all_finite(&self.r) && all_finite(&self.p) && all_finite(&self.x) && all_finite(&self.y)
    }

    fn snapshot(&self, t: S) -> ExtendedState<S> {
        ExtendedState {
            t,
            r: self.r.clone(),
            p: self.p.clone(),
            x: self.x.clone(),
            y: self.y.clone(),
        }
    }
}

/// Velocity Verlet on the extended Hamiltonian system
/// `ṙ = p, ṗ = h(r, x), ẋ = y/√ε, ẏ = −∂Q/∂x / √ε`.
///
/// The drift is applied as two half steps so that the scheme coincides with
/// BAOAB whenever the thermostat is switched off.
pub fn xlbomd_run<S: Scalar>(model: &ModelSpec<S>, params: &SimParams<S>, out_stride: usize) -> Result<Trajectory<S>> {
    params.validate()?;
    check_stride(out_stride)?;
    extended_run(model, params, out_stride, None)
}

/// BAOAB splitting of Stochastic-XLMD. The Ornstein–Uhlenbeck step acts on
/// `y` only: `y ← c y + √(T(1 − c²)) ζ` with `c = exp(−γ dt/√ε)`.
pub fn sxlmd_run<S: Scalar>(model: &ModelSpec<S>, params: &SimParams<S>, out_stride: usize) -> Result<Trajectory<S>> {
    params.validate()?;
    check_stride(out_stride)?;
    let c = (-params.gamma * params.dt / params.eps.sqrt()).exp();
    let sigma = (params.temp * (S::one() - c * c)).sqrt();
    let rng = GaussianStream::new(params.seed, params.stream);
    extended_run(model, params, out_stride, Some(Thermostat { c, sigma, rng }))
}

struct Thermostat<S> {
    c: S,
    sigma: S,
    rng: GaussianStream,
}

fn extended_run<S: Scalar>(
    model: &ModelSpec<S>,
    params: &SimParams<S>,
    out_stride: usize,
    mut thermostat: Option<Thermostat<S>>,
) -> Result<Trajectory<S>> {
    let n = params.n_steps()?;
    let dt = params.dt;
    let half = S::lit(0.5) * dt;
    let mut st = Extended::init(model, params)?;
    let mut traj = Trajectory::new(dt, n);
    traj.record(model, st.snapshot(S::zero()));
    let mut noise = vec![S::zero(); model.dim_x()];
    for step in 1..=n {
        st.kick(half);
        st.drift(half);
        if let Some(th) = thermostat.as_mut() {
            th.rng.fill_normal(&mut noise);
            for (y, &z) in st.y.iter_mut().zip(&noise) {
                *y = th.c * *y + th.sigma * z;
            }
        }
        st.drift(half);
        st.relocate(model);
        st.kick(half);
        if !st.finite() {
            return Err(Error::NonFinite { step });
        }
        if should_record(step, n, out_stride) {
            traj.record(model, st.snapshot(time_at(step, dt)));
        }
    }
    traj.counters = st.counters;
    Ok(traj)
}

/// Classical RK4 on `ṙ = p, ṗ = hbar(r) − T g(r)`. Latent samples are the
/// exact `A⁻¹b` with zero velocity.
pub fn averaged_run<S: Scalar>(model: &ModelSpec<S>, params: &SimParams<S>, out_stride: usize) -> Result<Trajectory<S>> {
    params.validate()?;
    check_stride(out_stride)?;
    if !model.is_quadratic() {
        return Err(invalid("method", "the averaged equation needs a quadratic interaction"));
    }
    let n = params.n_steps()?;
    let dt = params.dt;
    let temp = params.temp;
    let (mut r, mut p) = initial_phase(model, params)?;
    let d = r.len();
    let mut traj = Trajectory::new(dt, n);
    let snapshot = |t: S, r: &[S], p: &[S]| -> Result<ExtendedState<S>> {
        let x = model.exact_latent(r)?;
        let y = vec![S::zero(); x.len()];
        Ok(ExtendedState {
            t,
            r: r.to_vec(),
            p: p.to_vec(),
            x,
            y,
        })
    };
    traj.record(model, snapshot(S::zero(), &r, &p)?);
    let two = S::lit(2.0);
    let sixth = dt / S::lit(6.0);
    let mut rt = vec![S::zero(); d];
    for step in 1..=n {
        let stage = |r: &[S]| model.averaged_force(r, temp);
        let k1r = p.clone();
        let k1p = stage(&r)?;
        lin(&r, S::lit(0.5) * dt, &k1r, &mut rt);
        let k2r: Vec<S> = p.iter().zip(&k1p).map(|(&a, &b)| a + S::lit(0.5) * dt * b).collect();
        let k2p = stage(&rt)?;
        lin(&r, S::lit(0.5) * dt, &k2r, &mut rt);
        let k3r: Vec<S> = p.iter().zip(&k2p).map(|(&a, &b)| a + S::lit(0.5) * dt * b).collect();
        let k3p = stage(&rt)?;
        lin(&r, dt, &k3r, &mut rt);
        let k4r: Vec<S> = p.iter().zip(&k3p).map(|(&a, &b)| a + dt * b).collect();
        let k4p = stage(&rt)?;
        for i in 0..d {
            r[i] += sixth * (k1r[i] + two * k2r[i] + two * k3r[i] + k4r[i]);
            p[i] += sixth * (k1p[i] + two * k2p[i] + two * k3p[i] + k4p[i]);
        }
        if !(all_finite(&r) && all_finite(&p)) {
            return Err(Error::NonFinite { step });
        }
        if should_record(step, n, out_stride) {
            traj.record(model, snapshot(time_at(step, dt), &r, &p)?);
        }
    }
    Ok(traj)
}

fn lin<S: Scalar>(base: &[S], h: S, dir: &[S], out: &mut [S]) {
    for ((o, &b), &v) in out.iter_mut().zip(base).zip(dir) {
        *o = b + h * v;
    }
}

/// Moments of the frozen-`r` latent Langevin dynamics
/// `ẋ = y, ẏ = −∂Q/∂x − γ y + √(2γT) Ẇ`.
#[derive(Clone, Debug)]
pub struct LatentSamples<S> {
    pub mean: Vec<S>,
    /// Covariance of the stacked vector `(x, y)`.
    pub covariance: Mat<S>,
    pub samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrozenSampling<S> {
    pub gamma: S,
    pub temp: S,
    pub dt: S,
    pub burn_in: usize,
    pub samples: usize,
    /// Steps between recorded samples.
    pub thin: usize,
    pub seed: u64,
    pub stream: u64,
}

/// Samples the latent Langevin dynamics at fixed `r` with the same BAOAB
/// kernel as [`sxlmd_run`] and returns running first and second moments.
pub fn sample_frozen_latent<S: Scalar>(
    model: &ModelSpec<S>,
    r: &[S],
    x0: &[S],
    cfg: &FrozenSampling<S>,
) -> Result<LatentSamples<S>> {
    model.check_r(r)?;
    model.check_x(x0)?;
    if cfg.samples < 2 || cfg.thin == 0 {
        return Err(invalid("samples", "need at least two samples and a positive thinning"));
    }
    let m = model.dim_x();
    let mut ws = ForceWorkspace::at(model, r);
    let mut x = x0.to_vec();
    let mut y = vec![S::zero(); m];
    let mut fy = vec![S::zero(); m];
    let mut noise = vec![S::zero(); m];
    let mut rng = GaussianStream::new(cfg.seed, cfg.stream);
    let half = S::lit(0.5) * cfg.dt;
    let c = (-cfg.gamma * cfg.dt).exp();
    let sigma = (cfg.temp * (S::one() - c * c)).sqrt();
    ws.latent_force_into(model, &x, &mut fy);
    // Moments are accumulated in f64 irrespective of `S`.
    let n2 = 2 * m;
    let mut sum = vec![0.0f64; n2];
    let mut sum2 = vec![0.0f64; n2 * n2];
    let mut z = vec![0.0f64; n2];
    let total = cfg.burn_in + cfg.samples * cfg.thin;
    for step in 1..=total {
        axpy(half, &fy, &mut y);
        axpy(half, &y, &mut x);
        rng.fill_normal(&mut noise);
        for (yi, &zi) in y.iter_mut().zip(&noise) {
            *yi = c * *yi + sigma * zi;
        }
        axpy(half, &y, &mut x);
        ws.latent_force_into(model, &x, &mut fy);
        axpy(half, &fy, &mut y);
        if step > cfg.burn_in && (step - cfg.burn_in).is_multiple_of(cfg.thin) {
            for i in 0..m {
                z[i] = x[i].as_f64();
                z[m + i] = y[i].as_f64();
            }
            for i in 0..n2 {
                sum[i] += z[i];
                for j in 0..=i {
                    sum2[i * n2 + j] += z[i] * z[j];
                }
            }
        }
    }
    if !(all_finite(&x) && all_finite(&y)) {
        return Err(Error::NonFinite { step: total });
    }
    let ns = cfg.samples as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / ns).collect();
    let cov = Mat::from_fn(n2, n2, |i, j| {
        let (a, b) = if j <= i { (i, j) } else { (j, i) };
        S::lit((sum2[a * n2 + b] - ns * mean[a] * mean[b]) / (ns - 1.0))
    });
    Ok(LatentSamples {
        mean: mean.into_iter().map(S::lit).collect(),
        covariance: cov,
        samples: cfg.samples,
    })
}
