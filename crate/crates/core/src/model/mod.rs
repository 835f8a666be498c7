//! Latent-variable force fields.
//!
//! A model couples atomic positions `r` to latent variables `x` (induced
//! dipoles, Drude charges) through an interaction energy
//!
//! ```text
//! Q(r, x) = ½ xᵀ A(r) x − b(r)ᵀ x + E(x)
//! ```
//!
//! where `A(r)` is symmetric positive definite and the optional separable
//! term `E(x) = Σ e(x_k)` makes `Q` non-quadratic in `x`. The exact dynamics
//! keeps `x` on the manifold `∂Q/∂x = 0`.

mod builtin;

use std::fmt;
use std::sync::Arc;

pub use builtin::{builtin_model, builtin_model_with, constant_coupling, BVariant, ModelTag};

use crate::error::{Error, Result};
use crate::linalg::{dot, Mat, SymmetricEigen};
use crate::scalar::Scalar;

/// Analytic description of a latent-variable force field.
///
/// Output buffers are pre-sized by the caller; implementations overwrite them.
pub trait LatentModel<S: Scalar>: Send + Sync {
    fn dim_r(&self) -> usize;
    fn dim_x(&self) -> usize;
    fn potential(&self, r: &[S]) -> S;
    /// `F = −∂U/∂r`.
    fn force(&self, r: &[S], out: &mut [S]);
    fn matrix_a(&self, r: &[S], out: &mut Mat<S>);
    fn vector_b(&self, r: &[S], out: &mut [S]);
    fn da_dr(&self, r: &[S], k: usize, out: &mut Mat<S>);
    fn db_dr(&self, r: &[S], k: usize, out: &mut [S]);
    /// Separable non-quadratic addition to `Q`, if any.
    fn separable(&self) -> Option<&dyn SeparableTerm<S>> {
        None
    }
}

/// One-dimensional term `e(x_k)` summed over all latent components.
pub trait SeparableTerm<S: Scalar>: Send + Sync {
    fn value(&self, xk: S) -> S;
    fn derivative(&self, xk: S) -> S;
    fn second_derivative(&self, xk: S) -> S;
    /// Global lower bound of `e''`.
    fn curvature_lower_bound(&self) -> S;
}

/// Phase point of the extended system. `y = √ε ẋ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedState<S> {
    pub t: S,
    pub r: Vec<S>,
    pub p: Vec<S>,
    pub x: Vec<S>,
    pub y: Vec<S>,
}

impl<S: Scalar> ExtendedState<S> {
    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && [&self.r, &self.p, &self.x, &self.y]
                .iter()
                .all(|v| v.iter().all(|e| e.is_finite()))
    }
}

/// Immutable, shareable model handle: the force field plus its curvature
/// bound and (for the builtin models) default initial data.
#[derive(Clone)]
pub struct ModelSpec<S: Scalar> {
    name: String,
    field: Arc<dyn LatentModel<S>>,
    kappa: S,
    initial: Option<(Vec<S>, Vec<S>)>,
}

impl<S: Scalar> fmt::Debug for ModelSpec<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("d_r", &self.dim_r())
            .field("d_x", &self.dim_x())
            .field("kappa", &self.kappa)
            .finish()
    }
}

/// Number of quasi-random samples used to estimate `kappa`.
pub const KAPPA_SAMPLES: u32 = 10_000;
/// Relative safety margin applied to the sampled minimum eigenvalue.
pub const KAPPA_MARGIN: f64 = 1e-3;

impl<S: Scalar> ModelSpec<S> {
    pub fn new(name: impl Into<String>, field: Arc<dyn LatentModel<S>>, kappa: S) -> Result<Self> {
        if !(kappa > S::zero()) {
            return Err(crate::error::invalid("kappa", "must be positive"));
        }
        Ok(Self {
            name: name.into(),
            field,
            kappa,
            initial: None,
        })
    }

    /// Builds a model whose `kappa` is the smallest x-Hessian eigenvalue over
    /// the centre and a scrambled Sobol sample of
    /// `[−half_width, half_width]^{d_r}`, shrunk
    /// by [`KAPPA_MARGIN`].
    pub fn with_sampled_kappa(
        name: impl Into<String>,
        field: Arc<dyn LatentModel<S>>,
        half_width: S,
    ) -> Result<Self> {
        let kappa = estimate_kappa(field.as_ref(), half_width, KAPPA_SAMPLES);
        let kappa = kappa * (S::one() - S::lit(KAPPA_MARGIN));
        Self::new(name, field, kappa)
    }

    pub fn with_initial(mut self, r0: Vec<S>, p0: Vec<S>) -> Self {
        assert_eq!(r0.len(), self.dim_r());
        assert_eq!(p0.len(), self.dim_r());
        self.initial = Some((r0, p0));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn field(&self) -> &dyn LatentModel<S> {
        self.field.as_ref()
    }

    pub fn dim_r(&self) -> usize {
        self.field.dim_r()
    }

    pub fn dim_x(&self) -> usize {
        self.field.dim_x()
    }

    pub fn kappa(&self) -> S {
        self.kappa
    }

    pub fn initial(&self) -> Option<(&[S], &[S])> {
        self.initial.as_ref().map(|(r, p)| (r.as_slice(), p.as_slice()))
    }

    pub fn is_quadratic(&self) -> bool {
        self.field.separable().is_none()
    }

    pub fn potential(&self, r: &[S]) -> S {
        self.field.potential(r)
    }

    pub fn force(&self, r: &[S]) -> Vec<S> {
        let mut f = vec![S::zero(); self.dim_r()];
        self.field.force(r, &mut f);
        f
    }

    pub fn matrix_a(&self, r: &[S]) -> Mat<S> {
        let n = self.dim_x();
        let mut a = Mat::zeros(n, n);
        self.field.matrix_a(r, &mut a);
        a
    }

    pub fn vector_b(&self, r: &[S]) -> Vec<S> {
        let mut b = vec![S::zero(); self.dim_x()];
        self.field.vector_b(r, &mut b);
        b
    }

    pub fn da_dr(&self, r: &[S], k: usize) -> Mat<S> {
        let n = self.dim_x();
        let mut a = Mat::zeros(n, n);
        self.field.da_dr(r, k, &mut a);
        a
    }

    pub fn db_dr(&self, r: &[S], k: usize) -> Vec<S> {
        let mut b = vec![S::zero(); self.dim_x()];
        self.field.db_dr(r, k, &mut b);
        b
    }

    pub(crate) fn check_r(&self, r: &[S]) -> Result<()> {
        if r.len() != self.dim_r() {
            return Err(Error::Dimension(format!(
                "r has length {}, model expects {}",
                r.len(),
                self.dim_r()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_x(&self, x: &[S]) -> Result<()> {
        if x.len() != self.dim_x() {
            return Err(Error::Dimension(format!(
                "x has length {}, model expects {}",
                x.len(),
                self.dim_x()
            )));
        }
        Ok(())
    }

    /// Force on the atoms at a given latent configuration:
    /// `h_k = F_k − ½ xᵀ(∂A/∂r_k)x + (∂b/∂r_k)ᵀx`.
    ///
    /// The separable term has no `r` dependence and does not enter.
    pub fn h_force(&self, r: &[S], x: &[S]) -> Result<Vec<S>> {
        self.check_r(r)?;
        self.check_x(x)?;
        let ws = ForceWorkspace::at(self, r);
        let mut h = vec![S::zero(); self.dim_r()];
        ws.coupling_force_into(x, &mut h);
        Ok(h)
    }

    /// Force of the exact (Born–Oppenheimer) dynamics with `x = A⁻¹b`
    /// eliminated: `F_k − ½ bᵀA⁻¹(∂A/∂r_k)A⁻¹b + (∂b/∂r_k)ᵀA⁻¹b`.
    pub fn hbar_force(&self, r: &[S]) -> Result<Vec<S>> {
        self.check_r(r)?;
        let a_inv = self.matrix_a(r).cholesky()?.inverse();
        let b = self.vector_b(r);
        let w = a_inv.mul_vec(&b);
        let mut out = self.force(r);
        for (k, o) in out.iter_mut().enumerate() {
            let da = self.da_dr(r, k);
            let db = self.db_dr(r, k);
            *o = *o - S::lit(0.5) * da.bilinear(&w, &w) + dot(&db, &w);
        }
        Ok(out)
    }

    /// `g_i = ½ Tr((∂A/∂r_i) A⁻¹)`.
    pub fn g_vector(&self, r: &[S]) -> Result<Vec<S>> {
        self.check_r(r)?;
        let a_inv = self.matrix_a(r).cholesky()?.inverse();
        Ok((0..self.dim_r())
            .map(|i| S::lit(0.5) * self.da_dr(r, i).trace_of_product(&a_inv))
            .collect())
    }

    /// `∂Q/∂x = A(r)x − b(r) + ∇E(x)`.
    pub fn grad_q_x(&self, r: &[S], x: &[S]) -> Result<Vec<S>> {
        self.check_r(r)?;
        self.check_x(x)?;
        let mut g = self.matrix_a(r).mul_vec(x);
        let b = self.vector_b(r);
        for (gi, bi) in g.iter_mut().zip(&b) {
            *gi -= *bi;
        }
        if let Some(sep) = self.field.separable() {
            for (gi, &xi) in g.iter_mut().zip(x) {
                *gi += sep.derivative(xi);
            }
        }
        Ok(g)
    }

    /// Interaction energy `Q(r, x)`.
    pub fn interaction_energy(&self, r: &[S], x: &[S]) -> S {
        let a = self.matrix_a(r);
        let b = self.vector_b(r);
        let mut q = S::lit(0.5) * a.bilinear(x, x) - dot(&b, x);
        if let Some(sep) = self.field.separable() {
            q += x.iter().map(|&xi| sep.value(xi)).sum::<S>();
        }
        q
    }

    /// Returns `(½|p|² + U(r) + Q(r, x), ½|y|²)`: the physical energy and the
    /// fictitious latent kinetic energy.
    pub fn total_energy(&self, s: &ExtendedState<S>) -> (S, S) {
        let kin = S::lit(0.5) * dot(&s.p, &s.p);
        let phys = kin + self.potential(&s.r) + self.interaction_energy(&s.r, &s.x);
        (phys, S::lit(0.5) * dot(&s.y, &s.y))
    }

    /// Conserved quantity of the extended Hamiltonian system.
    pub fn extended_energy(&self, s: &ExtendedState<S>) -> S {
        let (phys, latent) = self.total_energy(s);
        phys + latent
    }

    /// Smallest eigenvalue of the x-Hessian of `Q` at `(r, x)`.
    pub fn min_hessian_eigenvalue(&self, r: &[S], x: &[S]) -> S {
        SymmetricEigen::new(&self.hessian_x(r, x)).min_value()
    }

    /// Exact latent variables `x(r) = A(r)⁻¹ b(r)` of a quadratic model.
    pub fn exact_latent(&self, r: &[S]) -> Result<Vec<S>> {
        self.check_r(r)?;
        Ok(self.matrix_a(r).cholesky()?.solve(&self.vector_b(r)))
    }

    /// x-Hessian of `Q`: `A(r) + diag(e''(x_k))`.
    pub fn hessian_x(&self, r: &[S], x: &[S]) -> Mat<S> {
        let mut h = self.matrix_a(r);
        if let Some(sep) = self.field.separable() {
            for (i, &xi) in x.iter().enumerate() {
                h[(i, i)] += sep.second_derivative(xi);
            }
        }
        h
    }

    /// Right-hand side of the averaged momentum equation,
    /// `hbar(r) − T g(r)`, with a single factorization of `A(r)`.
    pub fn averaged_force(&self, r: &[S], temp: S) -> Result<Vec<S>> {
        self.check_r(r)?;
        let a_inv = self.matrix_a(r).cholesky()?.inverse();
        let w = a_inv.mul_vec(&self.vector_b(r));
        let mut out = self.force(r);
        let half = S::lit(0.5);
        for (k, o) in out.iter_mut().enumerate() {
            let da = self.da_dr(r, k);
            let db = self.db_dr(r, k);
            *o = *o - half * da.bilinear(&w, &w) + dot(&db, &w) - temp * half * da.trace_of_product(&a_inv);
        }
        Ok(out)
    }
}

fn estimate_kappa<S: Scalar>(field: &dyn LatentModel<S>, half_width: S, samples: u32) -> S {
    let d = field.dim_r();
    let n = field.dim_x();
    let mut r = vec![S::zero(); d];
    let mut a = Mat::zeros(n, n);
    // The box centre is included explicitly: for the builtin models the
    // spectrum of A(r) is smallest at r = 0.
    field.matrix_a(&r, &mut a);
    let mut kappa = SymmetricEigen::new(&a).min_value();
    for i in 0..samples {
        for (k, rk) in r.iter_mut().enumerate() {
            let u = S::lit(sobol_burley::sample(i, k as u32, 0x5eed) as f64);
            *rk = half_width * (S::lit(2.0) * u - S::one());
        }
        field.matrix_a(&r, &mut a);
        kappa = kappa.min(SymmetricEigen::new(&a).min_value());
    }
    if let Some(sep) = field.separable() {
        kappa += sep.curvature_lower_bound().min(S::zero());
    }
    kappa
}

/// Cached `r`-dependent quantities for repeated force evaluation at one
/// atomic configuration.
#[derive(Clone, Debug)]
pub struct ForceWorkspace<S> {
    a: Mat<S>,
    b: Vec<S>,
    da: Vec<Mat<S>>,
    db: Vec<Vec<S>>,
    force: Vec<S>,
    scratch: Vec<S>,
}

impl<S: Scalar> ForceWorkspace<S> {
    pub fn new(model: &ModelSpec<S>) -> Self {
        let (d, n) = (model.dim_r(), model.dim_x());
        Self {
            a: Mat::zeros(n, n),
            b: vec![S::zero(); n],
            da: vec![Mat::zeros(n, n); d],
            db: vec![vec![S::zero(); n]; d],
            force: vec![S::zero(); d],
            scratch: vec![S::zero(); n],
        }
    }

    pub fn at(model: &ModelSpec<S>, r: &[S]) -> Self {
        let mut ws = Self::new(model);
        ws.update(model, r);
        ws
    }

    /// Recomputes `A`, `b`, their `r`-derivatives and `F` at `r`.
    pub fn update(&mut self, model: &ModelSpec<S>, r: &[S]) {
        let f = model.field();
        f.matrix_a(r, &mut self.a);
        f.vector_b(r, &mut self.b);
        f.force(r, &mut self.force);
        for k in 0..self.da.len() {
            f.da_dr(r, k, &mut self.da[k]);
            f.db_dr(r, k, &mut self.db[k]);
        }
    }

    pub fn a(&self) -> &Mat<S> {
        &self.a
    }

    pub fn b(&self) -> &[S] {
        &self.b
    }

    pub fn da(&self, k: usize) -> &Mat<S> {
        &self.da[k]
    }

    pub fn db(&self, k: usize) -> &[S] {
        &self.db[k]
    }

    pub fn external_force(&self) -> &[S] {
        &self.force
    }

    /// Writes `h(r, x)` into `out`. Costs `d_r` products `(∂A/∂r_k)x`.
    pub fn coupling_force_into(&self, x: &[S], out: &mut [S]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.force[k] - S::lit(0.5) * self.da[k].bilinear(x, x) + dot(&self.db[k], x);
        }
    }

    /// Writes `−∂Q/∂x = b − Ax − ∇E(x)` into `out`. Costs one product `Ax`.
    pub fn latent_force_into(&mut self, model: &ModelSpec<S>, x: &[S], out: &mut [S]) {
        self.a.mul_vec_into(x, &mut self.scratch);
        for ((o, &bi), &ax) in out.iter_mut().zip(&self.b).zip(&self.scratch) {
            *o = bi - ax;
        }
        if let Some(sep) = model.field().separable() {
            for (o, &xi) in out.iter_mut().zip(x) {
                *o -= sep.derivative(xi);
            }
        }
    }
}

#[cfg(test)]
mod tests;
