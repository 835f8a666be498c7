//! Self-consistent-field solvers for `∂Q/∂x (r, x) = 0`.
//!
//! Conjugate gradients handle the linear case `A(r)x = b(r)`; Anderson mixing
//! handles models with a non-quadratic self-energy. Neither is preconditioned.
//! Both report exact work counts: one `A·v` (or one `∇ₓQ`) per iteration plus
//! one for the initial residual.

use std::ops::AddAssign;

use crate::error::{invalid, Result};
use crate::linalg::{axpy, dot, norm2, Mat};
use crate::model::{ForceWorkspace, ModelSpec};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult<S> {
    pub x: Vec<S>,
    pub residual_norm: S,
    pub iterations: usize,
    /// Products `A·v` (CG) or evaluations of `∇ₓQ` (Anderson).
    pub matvec_count: usize,
    pub converged: bool,
}

/// Work counters accumulated over a trajectory.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct CostCounters {
    /// Products `A·x`.
    pub matvec_ax: u64,
    /// Products `(∂A/∂r_k)·x`.
    pub matvec_dax: u64,
    /// Evaluations of `∇ₓQ` for models with a non-quadratic self-energy.
    pub nonlinear_evals: u64,
    pub scf_iterations: u64,
}

impl AddAssign for CostCounters {
    fn add_assign(&mut self, o: Self) {
        self.matvec_ax += o.matvec_ax;
        self.matvec_dax += o.matvec_dax;
        self.nonlinear_evals += o.nonlinear_evals;
        self.scf_iterations += o.scf_iterations;
    }
}

impl CostCounters {
    /// Records one SCF solve.
    pub fn record_solve<S>(&mut self, res: &SolveResult<S>, nonlinear: bool) {
        self.matvec_ax += res.matvec_count as u64;
        if nonlinear {
            self.nonlinear_evals += res.matvec_count as u64;
        }
        self.scf_iterations += res.iterations as u64;
    }

    pub fn as_pairs(&self) -> [(&'static str, u64); 4] {
        [
            ("matvec_ax", self.matvec_ax),
            ("matvec_dax", self.matvec_dax),
            ("nonlinear_evals", self.nonlinear_evals),
            ("scf_iterations", self.scf_iterations),
        ]
    }
}

/// Which SCF solver the exact dynamics uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Cg,
    Anderson,
}

/// Plain conjugate gradients on `A x = b` from `x0`, stopping once
/// `|b − Ax|₂ ≤ tol`. Returns the lowest-residual iterate when `max_iter`
/// runs out.
pub fn cg_solve_system<S: Scalar>(a: &Mat<S>, b: &[S], x0: &[S], tol: S, max_iter: usize) -> Result<SolveResult<S>> {
    if !(tol > S::zero()) {
        return Err(invalid("scf_tol", "must be positive"));
    }
    let n = b.len();
    let mut x = x0.to_vec();
    let mut r = a.mul_vec(&x);
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut matvecs = 1;
    let mut rr = dot(&r, &r);
    let mut res = rr.sqrt();
    if res <= tol {
        return Ok(SolveResult {
            x,
            residual_norm: res,
            iterations: 0,
            matvec_count: matvecs,
            converged: true,
        });
    }
    let mut best = (res, x.clone());
    let mut p = r.clone();
    let mut ap = vec![S::zero(); n];
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        matvecs += 1;
        let pap = dot(&p, &ap);
        if !(pap > S::zero()) {
            break;
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        res = rr_new.sqrt();
        if res <= tol {
            return Ok(SolveResult {
                x,
                residual_norm: res,
                iterations: it,
                matvec_count: matvecs,
                converged: true,
            });
        }
        if res < best.0 {
            best = (res, x.clone());
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, &ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }
    Ok(SolveResult {
        x: best.1,
        residual_norm: best.0,
        iterations: matvecs - 1,
        matvec_count: matvecs,
        converged: false,
    })
}

pub fn cg_solve<S: Scalar>(model: &ModelSpec<S>, r: &[S], x0: &[S], tol: S, max_iter: usize) -> Result<SolveResult<S>> {
    model.check_r(r)?;
    model.check_x(x0)?;
    let ws = ForceWorkspace::at(model, r);
    cg_solve_system(ws.a(), ws.b(), x0, tol, max_iter)
}

/// Anderson mixing settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AndersonParams<S> {
    /// Damping of the underlying fixed-point map `x ↦ x − α ∇ₓQ`.
    pub alpha: S,
    /// Number of stored residual differences; `0` is plain damped iteration.
    pub depth: usize,
    pub tol: S,
    pub max_iter: usize,
}

/// Tikhonov shift added to the normal equations when they are near-singular.
const ANDERSON_RIDGE: f64 = 1e-12;

/// Anderson acceleration for `g(x) = 0` where `g` is any residual map (here
/// `∇ₓQ`). Every call of `g` counts toward `matvec_count`.
pub fn anderson_fixed_point<S: Scalar>(
    mut g: impl FnMut(&[S], &mut [S]),
    x0: &[S],
    params: AndersonParams<S>,
) -> Result<SolveResult<S>> {
    let AndersonParams {
        alpha,
        depth,
        tol,
        max_iter,
    } = params;
    if !(tol > S::zero()) {
        return Err(invalid("scf_tol", "must be positive"));
    }
    if !(alpha > S::zero() && alpha <= S::one()) {
        return Err(invalid("anderson_alpha", "must lie in (0, 1]"));
    }
    let n = x0.len();
    let mut x = x0.to_vec();
    // f = −α ∇ₓQ(x) is the fixed-point residual G(x) − x.
    let mut grad = vec![S::zero(); n];
    g(&x, &mut grad);
    let mut evals = 1;
    let mut res = norm2(&grad);
    let mut f: Vec<S> = grad.iter().map(|&v| -alpha * v).collect();
    let mut best = (res, x.clone());
    let mut dx_hist: Vec<Vec<S>> = Vec::with_capacity(depth);
    let mut df_hist: Vec<Vec<S>> = Vec::with_capacity(depth);
    let mut iterations = 0;
    while res > tol && iterations < max_iter {
        let theta = least_squares_coefficients(&df_hist, &f);
        let mut x_new = x.clone();
        for (i, xi) in x_new.iter_mut().enumerate() {
            let mut corr = S::zero();
            for (m, &th) in theta.iter().enumerate() {
                corr += th * (dx_hist[m][i] + df_hist[m][i]);
            }
            *xi += f[i] - corr;
        }
        g(&x_new, &mut grad);
        evals += 1;
        iterations += 1;
        let f_new: Vec<S> = grad.iter().map(|&v| -alpha * v).collect();
        res = norm2(&grad);
        if depth > 0 {
            if dx_hist.len() == depth {
                dx_hist.remove(0);
                df_hist.remove(0);
            }
            dx_hist.push(x_new.iter().zip(&x).map(|(&a, &b)| a - b).collect());
            df_hist.push(f_new.iter().zip(&f).map(|(&a, &b)| a - b).collect());
        }
        x = x_new;
        f = f_new;
        if res < best.0 {
            best = (res, x.clone());
        }
    }
    let converged = res <= tol;
    let (residual_norm, x) = if converged { (res, x) } else { best };
    Ok(SolveResult {
        x,
        residual_norm,
        iterations,
        matvec_count: evals,
        converged,
    })
}

/// Minimizes `|f − ΔF θ|₂` through the normal equations. Falls back to a
/// ridge-regularized solve, then to dropping the oldest columns; an empty
/// history yields an empty coefficient vector.
fn least_squares_coefficients<S: Scalar>(df: &[Vec<S>], f: &[S]) -> Vec<S> {
    let mut start = 0;
    while start < df.len() {
        let cols = &df[start..];
        let m = cols.len();
        let mut gram = Mat::from_fn(m, m, |i, j| dot(&cols[i], &cols[j]));
        let rhs: Vec<S> = cols.iter().map(|c| dot(c, f)).collect();
        let scale = gram.trace() / S::from_usize_lossy(m);
        if scale > S::zero() && scale.is_finite() {
            let diag_min = (0..m).fold(S::infinity(), |acc, i| acc.min(gram[(i, i)]));
            let well_posed = diag_min > scale * S::lit(1e-14);
            if well_posed {
                if let Ok(ch) = gram.cholesky() {
                    let th = ch.solve(&rhs);
                    if th.iter().all(|v| v.is_finite()) {
                        return pad(df.len(), start, th);
                    }
                }
            }
            for i in 0..m {
                gram[(i, i)] += scale * S::lit(ANDERSON_RIDGE);
            }
            if let Ok(ch) = gram.cholesky() {
                let th = ch.solve(&rhs);
                if th.iter().all(|v| v.is_finite()) {
                    return pad(df.len(), start, th);
                }
            }
        }
        start += 1;
    }
    vec![S::zero(); df.len()]
}

fn pad<S: Scalar>(total: usize, start: usize, th: Vec<S>) -> Vec<S> {
    let mut out = vec![S::zero(); start];
    out.extend(th);
    debug_assert_eq!(out.len(), total);
    out
}

pub fn anderson_solve<S: Scalar>(
    model: &ModelSpec<S>,
    r: &[S],
    x0: &[S],
    tol: S,
    alpha: S,
    depth: usize,
    max_iter: usize,
) -> Result<SolveResult<S>> {
    model.check_r(r)?;
    model.check_x(x0)?;
    let mut ws = ForceWorkspace::at(model, r);
    anderson_in_workspace(model, &mut ws, x0, AndersonParams { alpha, depth, tol, max_iter })
}

/// Anderson on `∇ₓQ` with the `r`-dependent data already in `ws`.
pub fn anderson_in_workspace<S: Scalar>(
    model: &ModelSpec<S>,
    ws: &mut ForceWorkspace<S>,
    x0: &[S],
    params: AndersonParams<S>,
) -> Result<SolveResult<S>> {
    anderson_fixed_point(
        |x, out| {
            ws.latent_force_into(model, x, out);
            out.iter_mut().for_each(|v| *v = -*v);
        },
        x0,
        params,
    )
}
