//! Analysis of the frozen-`r` latent Langevin dynamics
//!
//! ```text
//! ẋ = y,   ẏ = b − A x − γ y + √(2γT) Ẇ
//! ```
//!
//! In the centred coordinates `z = (x − A⁻¹b, y)` the drift is `−𝔅 z` with
//! `𝔅 = [[0, −I], [A, γI]]`. Everything here is built on the eigenpairs of
//! `A`: in the orthogonal basis `𝔘` the matrix `𝔅` splits into 2×2 blocks
//! whose exponentials have closed forms.

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, solve_lyapunov, Mat, SymmetricEigen};
use crate::model::ModelSpec;
use crate::rng::GaussianStream;
use crate::scalar::Scalar;

/// Below this `|γ² − 4λ|` the critically damped formula is used.
pub const CRITICAL_THRESHOLD: f64 = 1e-8;
/// Absolute tolerance of the covariance quadrature.
pub const QUADRATURE_TOL: f64 = 1e-12;

/// Decay rate of the latent Langevin semigroup:
/// `γ/4` for `γ ≤ 2√κ`, else `(γ − √(γ² − 4κ))/4`.
pub fn spectral_gap<S: Scalar>(gamma: S, kappa: S) -> Result<S> {
    if !(gamma > S::zero()) {
        return Err(invalid("gamma", "must be positive"));
    }
    if !(kappa > S::zero()) {
        return Err(invalid("kappa", "must be positive"));
    }
    let four = S::lit(4.0);
    if gamma <= S::lit(2.0) * kappa.sqrt() {
        Ok(gamma / four)
    } else {
        Ok((gamma - (gamma * gamma - four * kappa).sqrt()) / four)
    }
}

/// Latent Langevin dynamics at one frozen atomic configuration.
#[derive(Clone, Debug)]
pub struct LangevinSystem<S> {
    a: Mat<S>,
    b: Vec<S>,
    gamma: S,
    temp: S,
    eigen: SymmetricEigen<S>,
}

impl<S: Scalar> LangevinSystem<S> {
    pub fn new(a: Mat<S>, b: Vec<S>, gamma: S, temp: S) -> Result<Self> {
        if !a.is_square() || a.rows() != b.len() {
            return Err(Error::Dimension("A must be square and match b".into()));
        }
        if !(gamma > S::zero() && gamma.is_finite()) {
            return Err(invalid("gamma", "must be positive"));
        }
        if !(temp >= S::zero() && temp.is_finite()) {
            return Err(invalid("temp", "must be non-negative"));
        }
        let scale = a.max_abs().max(S::one());
        if !a.is_symmetric(S::lit(1e-12) * scale) {
            return Err(invalid("a", "must be symmetric"));
        }
        let eigen = SymmetricEigen::new(&a);
        if !(eigen.min_value() > S::zero()) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self {
            a,
            b,
            gamma,
            temp,
            eigen,
        })
    }

    /// System at `A(r)`, `b(r)` of a model.
    pub fn from_model(model: &ModelSpec<S>, r: &[S], gamma: S, temp: S) -> Result<Self> {
        model.check_r(r)?;
        Self::new(model.matrix_a(r), model.vector_b(r), gamma, temp)
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn a_matrix(&self) -> &Mat<S> {
        &self.a
    }

    pub fn b_vec(&self) -> &[S] {
        &self.b
    }

    pub fn gamma(&self) -> S {
        self.gamma
    }

    pub fn temp(&self) -> S {
        self.temp
    }

    /// Eigenvalues of `A` in decreasing order.
    pub fn eigenvalues(&self) -> &[S] {
        &self.eigen.values
    }

    /// Orthonormal eigenvectors of `A` as columns.
    pub fn eigenvectors(&self) -> &Mat<S> {
        &self.eigen.vectors
    }

    /// `A⁻¹ b`, the mean of `x` under the invariant measure.
    pub fn center(&self) -> Vec<S> {
        let v = &self.eigen.vectors;
        let n = self.dim();
        let mut out = vec![S::zero(); n];
        for k in 0..n {
            let coef = (0..n).map(|i| v[(i, k)] * self.b[i]).sum::<S>() / self.eigen.values[k];
            for (i, o) in out.iter_mut().enumerate() {
                *o += coef * v[(i, k)];
            }
        }
        out
    }

    /// Spectral gap with `κ = λ_min(A)`.
    pub fn gap(&self) -> S {
        spectral_gap(self.gamma, self.eigen.min_value()).expect("validated at construction")
    }

    /// Noise covariance `diag(0, 2γT I)`.
    pub fn diffusion(&self) -> Mat<S> {
        let n = self.dim();
        let mut c = Mat::zeros(2 * n, 2 * n);
        let v = S::lit(2.0) * self.gamma * self.temp;
        for i in n..2 * n {
            c[(i, i)] = v;
        }
        c
    }
}

/// `𝔅 = [[0, −I], [A, γI]]`.
pub fn build_frak_b<S: Scalar>(sys: &LangevinSystem<S>) -> Mat<S> {
    let n = sys.dim();
    let mut m = Mat::zeros(2 * n, 2 * n);
    m.set_block(n, 0, &sys.a);
    for i in 0..n {
        m[(i, n + i)] = -S::one();
        m[(n + i, n + i)] = sys.gamma;
    }
    m
}

/// Orthogonal `𝔘 = (𝔘₁, …, 𝔘_d)` with `𝔘_k = [[v_k, v_k], [v_k, −v_k]]/√2`.
pub fn frak_u<S: Scalar>(sys: &LangevinSystem<S>) -> Mat<S> {
    let n = sys.dim();
    let v = &sys.eigen.vectors;
    let s = S::one() / S::lit(2.0).sqrt();
    let mut u = Mat::zeros(2 * n, 2 * n);
    for k in 0..n {
        for i in 0..n {
            let e = s * v[(i, k)];
            u[(i, 2 * k)] = e;
            u[(i, 2 * k + 1)] = e;
            u[(n + i, 2 * k)] = e;
            u[(n + i, 2 * k + 1)] = -e;
        }
    }
    u
}

/// 2×2 block `J_kk` of `𝔘ᵀ𝔅𝔘`, row-major.
fn j_block<S: Scalar>(lambda: S, gamma: S) -> [S; 4] {
    let h = S::lit(0.5);
    [
        h * (lambda + gamma - S::one()),
        h * (lambda - gamma + S::one()),
        h * (-lambda - gamma - S::one()),
        h * (-lambda + gamma + S::one()),
    ]
}

/// `exp(−J t)` for one eigenvalue, from the characteristic polynomial
/// `μ² − γμ + λ`.
fn exp_block<S: Scalar>(lambda: S, gamma: S, t: S) -> [S; 4] {
    let j = j_block(lambda, gamma);
    let id = [S::one(), S::zero(), S::zero(), S::one()];
    let half = S::lit(0.5);
    let disc = gamma * gamma - S::lit(4.0) * lambda;
    let mut out = [S::zero(); 4];
    if disc.abs() < S::lit(CRITICAL_THRESHOLD) {
        let damp = (-half * gamma * t).exp();
        let a = S::one() + half * gamma * t;
        for i in 0..4 {
            out[i] = damp * (a * id[i] - t * j[i]);
        }
    } else if disc < S::zero() {
        let root = (-disc).sqrt();
        let omega = half * root;
        let damp = (-half * gamma * t).exp();
        let (sn, cs) = (omega * t).sin_cos();
        for i in 0..4 {
            out[i] = damp * (cs * id[i] - (S::lit(2.0) * j[i] - gamma * id[i]) / root * sn);
        }
    } else {
        let root = disc.sqrt();
        let mu_minus = half * (gamma - root);
        let damp = (-mu_minus * t).exp();
        // (e^{−st} − 1)/s written through exp_m1 for accuracy at small st.
        let ratio = (-root * t).exp_m1() / root;
        for i in 0..4 {
            out[i] = damp * (id[i] + (j[i] - mu_minus * id[i]) * ratio);
        }
    }
    out
}

fn block_spectral_norm<S: Scalar>(m: &[S; 4]) -> S {
    // Largest singular value of a 2×2 matrix.
    let [a, b, c, d] = *m;
    let s1 = a * a + b * b + c * c + d * d;
    let det = a * d - b * c;
    let disc = (s1 * s1 - S::lit(4.0) * det * det).max(S::zero()).sqrt();
    (S::lit(0.5) * (s1 + disc)).sqrt()
}

/// `e^{−𝔅t}` assembled from the closed-form 2×2 blocks in the `𝔘` basis.
pub fn expm_neg_bt<S: Scalar>(sys: &LangevinSystem<S>, t: S) -> Result<Mat<S>> {
    if !(t >= S::zero()) {
        return Err(invalid("t", "must be non-negative"));
    }
    Ok(expm_unchecked(sys, t))
}

fn expm_unchecked<S: Scalar>(sys: &LangevinSystem<S>, t: S) -> Mat<S> {
    let n = sys.dim();
    if t == S::zero() {
        return Mat::identity(2 * n);
    }
    let v = &sys.eigen.vectors;
    // 𝔘 e^{−Jt} 𝔘ᵀ, with the 𝔘 structure expanded: for each k the block
    // contributes (1/2) [v;v | v;−v] E [v;v | v;−v]ᵀ.
    let mut out = Mat::zeros(2 * n, 2 * n);
    let half = S::lit(0.5);
    for k in 0..n {
        let e = exp_block(sys.eigen.values[k], sys.gamma, t);
        // Coefficients of v vᵀ in the four d×d quadrants.
        let xx = half * (e[0] + e[1] + e[2] + e[3]);
        let xy = half * (e[0] - e[1] + e[2] - e[3]);
        let yx = half * (e[0] + e[1] - e[2] - e[3]);
        let yy = half * (e[0] - e[1] - e[2] + e[3]);
        for i in 0..n {
            let vi = v[(i, k)];
            for j in 0..n {
                let vv = vi * v[(j, k)];
                out[(i, j)] += xx * vv;
                out[(i, n + j)] += xy * vv;
                out[(n + i, j)] += yx * vv;
                out[(n + i, n + j)] += yy * vv;
            }
        }
    }
    out
}

/// `‖e^{−𝔅t}‖₂ = max_k ‖exp(−J_kk t)‖₂`.
pub fn expm_norm<S: Scalar>(sys: &LangevinSystem<S>, t: S) -> S {
    sys.eigen
        .values
        .iter()
        .map(|&l| block_spectral_norm(&exp_block(l, sys.gamma, t)))
        .fold(S::zero(), S::max)
}

/// Stationary covariance: solves `𝔅 𝔖 + 𝔖 𝔅ᵀ = diag(0, 2γT I)`.
pub fn sigma_inf<S: Scalar>(sys: &LangevinSystem<S>) -> Result<Mat<S>> {
    solve_lyapunov(&build_frak_b(sys), &sys.diffusion())
}

/// `𝔖_t = ∫₀ᵗ e^{−𝔅s} C e^{−𝔅ᵀs} ds` by adaptive Gauss–Legendre quadrature.
pub fn sigma_t<S: Scalar>(sys: &LangevinSystem<S>, t: S) -> Result<Mat<S>> {
    if !(t >= S::zero() && t.is_finite()) {
        return Err(invalid("t", "must be non-negative and finite"));
    }
    let n2 = 2 * sys.dim();
    let mut total = Mat::zeros(n2, n2);
    if t == S::zero() || sys.temp == S::zero() {
        return Ok(total);
    }
    let integrand = |s: S| {
        let e = expm_unchecked(sys, s);
        let c = S::lit(2.0) * sys.gamma * sys.temp;
        // e C eᵀ with C = diag(0, c I): only the y-columns of e contribute.
        let n = sys.dim();
        Mat::from_fn(n2, n2, |i, j| c * (n..n2).map(|k| e[(i, k)] * e[(j, k)]).sum::<S>())
    };
    // Panels no wider than the fastest time scale of the dynamics.
    let lmax = sys.eigen.max_value();
    let rate = lmax.sqrt().max(sys.gamma).max(S::one());
    let panels = (t * rate).ceil().as_f64().max(1.0) as usize;
    let width = t / S::from_usize_lossy(panels);
    let tol_per_length = S::lit(QUADRATURE_TOL) / t;
    let rule = GaussLegendre::<S>::new(10);
    for i in 0..panels {
        let a = width * S::from_usize_lossy(i);
        let b = if i + 1 == panels { t } else { a + width };
        let coarse = rule.integrate(&integrand, a, b);
        adaptive(&rule, &integrand, a, b, coarse, tol_per_length, 0, &mut total)?;
    }
    Ok(total)
}

const MAX_DEPTH: usize = 30;

#[allow(clippy::too_many_arguments)]
fn adaptive<S: Scalar>(
    rule: &GaussLegendre<S>,
    f: &impl Fn(S) -> Mat<S>,
    a: S,
    b: S,
    whole: Mat<S>,
    tol_per_length: S,
    depth: usize,
    acc: &mut Mat<S>,
) -> Result<()> {
    let mid = S::lit(0.5) * (a + b);
    let left = rule.integrate(f, a, mid);
    let right = rule.integrate(f, mid, b);
    let refined = left.add(&right);
    let err = refined.sub(&whole).max_abs();
    if err <= tol_per_length * (b - a) {
        acc.add_scaled(S::one(), &refined);
        return Ok(());
    }
    if depth >= MAX_DEPTH {
        return Err(Error::Quadrature {
            a: a.as_f64(),
            b: b.as_f64(),
        });
    }
    adaptive(rule, f, a, mid, left, tol_per_length, depth + 1, acc)?;
    adaptive(rule, f, mid, b, right, tol_per_length, depth + 1, acc)
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
struct GaussLegendre<S> {
    nodes: Vec<S>,
    weights: Vec<S>,
}

impl<S: Scalar> GaussLegendre<S> {
    fn new(n: usize) -> Self {
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            // Newton iteration on P_n from the Chebyshev-like initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0f64, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes.push(S::lit(x));
            weights.push(S::lit(2.0 / ((1.0 - x * x) * dp * dp)));
        }
        Self { nodes, weights }
    }

    fn integrate(&self, f: &impl Fn(S) -> Mat<S>, a: S, b: S) -> Mat<S> {
        let half = S::lit(0.5) * (b - a);
        let mid = S::lit(0.5) * (a + b);
        let mut acc: Option<Mat<S>> = None;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let v = f(mid + half * x);
            match acc.as_mut() {
                Some(m) => m.add_scaled(w * half, &v),
                None => acc = Some(v.scale(w * half)),
            }
        }
        acc.expect("rule has nodes")
    }
}

/// Fitted decay constants on a time grid.
#[derive(Clone, Debug)]
pub struct DecayReport<S> {
    pub gap: S,
    pub times: Vec<S>,
    pub expm_norms: Vec<S>,
    pub sigma_gaps: Vec<S>,
    /// Smallest `C₁` with `‖e^{−𝔅t}‖₂ ≤ C₁ e^{−δt}` on the grid.
    pub c1: S,
    /// Smallest `C₂` with `‖𝔖_t − 𝔖∞‖₂ ≤ C₂ (γ/δ) T e^{−2δt}` on the grid.
    pub c2: S,
    /// Grid times in the second half of the grid at which a scaled norm
    /// exceeds its maximum over the first half, i.e. where the exponential
    /// envelope stops dominating.
    pub violations: Vec<S>,
}

impl<S: Scalar> DecayReport<S> {
    pub fn bounds_hold(&self) -> bool {
        self.c1.is_finite() && self.c2.is_finite() && self.violations.is_empty()
    }
}

/// Evaluates both decay bounds on `t_grid` (sorted, non-negative) at the
/// spectral gap of the system.
pub fn decay_bound_check<S: Scalar>(sys: &LangevinSystem<S>, t_grid: &[S]) -> Result<DecayReport<S>> {
    decay_bound_check_at_rate(sys, t_grid, sys.gap())
}

/// As [`decay_bound_check`] with an arbitrary positive rate `delta`.
pub fn decay_bound_check_at_rate<S: Scalar>(
    sys: &LangevinSystem<S>,
    t_grid: &[S],
    delta: S,
) -> Result<DecayReport<S>> {
    if !(delta > S::zero()) {
        return Err(invalid("delta", "must be positive"));
    }
    if t_grid.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, found: 0 });
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) || !(t_grid[0] >= S::zero()) {
        return Err(invalid("t_grid", "must be strictly increasing and non-negative"));
    }
    let s_inf = sigma_inf(sys)?;
    let prefactor = sys.gamma / delta * sys.temp;
    let mut expm_norms = Vec::with_capacity(t_grid.len());
    let mut sigma_gaps = Vec::with_capacity(t_grid.len());
    let mut r1 = Vec::with_capacity(t_grid.len());
    let mut r2 = Vec::with_capacity(t_grid.len());
    // 𝔖_t is accumulated panel by panel between grid points.
    let mut s_t = Mat::zeros(2 * sys.dim(), 2 * sys.dim());
    let mut prev = S::zero();
    for &t in t_grid {
        let en = expm_norm(sys, t);
        if t > prev {
            let inc = sigma_between(sys, prev, t)?;
            s_t.add_scaled(S::one(), &inc);
            prev = t;
        }
        let sg = s_t.sub(&s_inf).spectral_norm();
        expm_norms.push(en);
        sigma_gaps.push(sg);
        r1.push(en * (delta * t).exp());
        r2.push(if prefactor > S::zero() {
            sg / (prefactor * (-S::lit(2.0) * delta * t).exp())
        } else {
            S::zero()
        });
    }
    let max = |v: &[S]| v.iter().copied().fold(S::zero(), S::max);
    let half = t_grid.len().div_ceil(2);
    let mut violations = Vec::new();
    let slack = S::one() + S::lit(1e-8);
    if t_grid.len() >= 2 {
        let (h1, h2) = (max(&r1[..half]), max(&r2[..half]));
        for i in half..t_grid.len() {
            let noisy = sigma_gaps[i] <= S::lit(10.0 * QUADRATURE_TOL);
            if r1[i] > h1 * slack || (!noisy && r2[i] > h2 * slack) || !r1[i].is_finite() || !r2[i].is_finite() {
                violations.push(t_grid[i]);
            }
        }
    }
    Ok(DecayReport {
        gap: delta,
        times: t_grid.to_vec(),
        c1: max(&r1),
        c2: max(&r2),
        expm_norms,
        sigma_gaps,
        violations,
    })
}

/// `∫ₐᵇ e^{−𝔅s} C e^{−𝔅ᵀs} ds = e^{−𝔅a} 𝔖_{b−a} e^{−𝔅ᵀa}`.
fn sigma_between<S: Scalar>(sys: &LangevinSystem<S>, a: S, b: S) -> Result<Mat<S>> {
    let inner = sigma_t(sys, b - a)?;
    let e = expm_unchecked(sys, a);
    Ok(e.matmul(&inner).matmul(&e.transpose()))
}

/// Quadratic function `c + ℓ·z + zᵀ Q z` of the centred latent state.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticForm<S> {
    pub constant: S,
    pub linear: Vec<S>,
    /// Symmetric.
    pub quadratic: Mat<S>,
}

impl<S: Scalar> QuadraticForm<S> {
    pub fn eval(&self, z: &[S]) -> S {
        self.constant + dot(&self.linear, z) + self.quadratic.bilinear(z, z)
    }

    /// Expectation under a centred Gaussian with covariance `cov`.
    pub fn gaussian_mean(&self, cov: &Mat<S>) -> S {
        self.constant + self.quadratic.trace_of_product(cov)
    }

    /// `ℒ₀ψ = −(𝔅z)·∇ψ + γT Δ_y ψ` for the centred generator.
    pub fn apply_generator(&self, sys: &LangevinSystem<S>, z: &[S]) -> S {
        let n = sys.dim();
        let bz = build_frak_b(sys).mul_vec(z);
        let qz = self.quadratic.mul_vec(z);
        let grad: Vec<S> = self.linear.iter().zip(&qz).map(|(&l, &q)| l + S::lit(2.0) * q).collect();
        let lap_y: S = (n..2 * n).map(|i| S::lit(2.0) * self.quadratic[(i, i)]).sum();
        -dot(&bz, &grad) + sys.gamma * sys.temp * lap_y
    }
}

/// Solution of `ℒ₀ φ_k = h_k(r, x) − ⟨h_k⟩`, `⟨φ_k⟩ = 0`, one quadratic per
/// atomic coordinate, expressed in `z = (x − A⁻¹b, y)`.
#[derive(Clone, Debug)]
pub struct PoissonSolution<S> {
    pub components: Vec<QuadraticForm<S>>,
    /// `A⁻¹b`.
    pub center: Vec<S>,
}

impl<S: Scalar> PoissonSolution<S> {
    /// Centred coordinates of `(x, y)`.
    pub fn centred(&self, x: &[S], y: &[S]) -> Vec<S> {
        x.iter().zip(&self.center).map(|(&a, &c)| a - c).chain(y.iter().copied()).collect()
    }
}

/// Builds `φ_k = −∫₀^∞ v_k ds` in closed form:
///
/// - the constant from `𝔅R + R𝔅ᵀ = 𝔖∞`, since `∫(𝔖_s − 𝔖∞) ds = −R`;
/// - the linear term from `∫ e^{−𝔅s} ds = 𝔅⁻¹`;
/// - the quadratic term from `𝔅ᵀG + G𝔅 = diag(∂A/∂r_k, 0)`.
pub fn poisson_solution<S: Scalar>(sys: &LangevinSystem<S>, model: &ModelSpec<S>, r: &[S]) -> Result<PoissonSolution<S>> {
    check_model(sys, model, r)?;
    let n = sys.dim();
    let frak_b = build_frak_b(sys);
    let frak_bt = frak_b.transpose();
    let bt_lu = frak_bt.lu()?;
    let s_inf = sigma_inf(sys)?;
    let r_mat = solve_lyapunov(&frak_b, &s_inf)?;
    let center = sys.center();
    let half = S::lit(0.5);
    let mut components = Vec::with_capacity(model.dim_r());
    for k in 0..model.dim_r() {
        let da = model.da_dr(r, k);
        let db = model.db_dr(r, k);
        let constant = -half * da.trace_of_product(&r_mat.block(0, 0, n, n));
        // u = ∂b/∂r_k − (∂A/∂r_k) A⁻¹b; the linear part of v_k is [u;0]ᵀ e^{−𝔅s} z.
        let dac = da.mul_vec(&center);
        let mut u = vec![S::zero(); 2 * n];
        for i in 0..n {
            u[i] = db[i] - dac[i];
        }
        // φ linear coefficient: −𝔅⁻ᵀ [u; 0], solved as 𝔅ᵀ w = [u; 0].
        let linear: Vec<S> = bt_lu.solve(&u).iter().map(|&v| -v).collect();
        let mut m = Mat::zeros(2 * n, 2 * n);
        m.set_block(0, 0, &da);
        let g = solve_lyapunov(&frak_bt, &m)?;
        let quadratic = Mat::from_fn(2 * n, 2 * n, |i, j| half * half * (g[(i, j)] + g[(j, i)]));
        components.push(QuadraticForm {
            constant,
            linear,
            quadratic,
        });
    }
    Ok(PoissonSolution { components, center })
}

fn check_model<S: Scalar>(sys: &LangevinSystem<S>, model: &ModelSpec<S>, r: &[S]) -> Result<()> {
    model.check_r(r)?;
    if !model.is_quadratic() {
        return Err(invalid("model", "the closed forms need a quadratic interaction"));
    }
    if model.dim_x() != sys.dim() {
        return Err(Error::Dimension("system and model latent dimensions differ".into()));
    }
    Ok(())
}

/// Average of `h(r, ·)` under the invariant measure:
/// `F_k − ½Tr(∂A_k 𝔖∞¹¹) − ½ wᵀ ∂A_k w + ∂b_kᵀ w` with `w = A⁻¹b`.
pub fn averaged_rhs<S: Scalar>(sys: &LangevinSystem<S>, model: &ModelSpec<S>, r: &[S]) -> Result<Vec<S>> {
    check_model(sys, model, r)?;
    let n = sys.dim();
    let s11 = sigma_inf(sys)?.block(0, 0, n, n);
    let w = sys.center();
    let half = S::lit(0.5);
    let mut out = model.force(r);
    for (k, o) in out.iter_mut().enumerate() {
        let da = model.da_dr(r, k);
        *o = *o - half * da.trace_of_product(&s11) - half * da.bilinear(&w, &w) + dot(&model.db_dr(r, k), &w);
    }
    Ok(out)
}

/// Everything the analysis reports at one frozen configuration.
#[derive(Clone, Debug)]
pub struct LangevinReport<S> {
    pub gap: S,
    pub eigenvalues: Vec<S>,
    pub sigma_inf: Mat<S>,
    /// Frobenius norm of `𝔅𝔖∞ + 𝔖∞𝔅ᵀ − C`.
    pub lyapunov_residual: S,
    /// Max-entry distance of `𝔖∞` from `blockdiag(T A⁻¹, T I)`.
    pub blockdiag_error: S,
    pub decay: DecayReport<S>,
    pub poisson: PoissonSolution<S>,
    /// Largest `|ℒ₀φ_k − (h_k − ⟨h_k⟩)|` over the probe points.
    pub generator_residual: S,
    /// Largest `|⟨φ_k⟩|` under the invariant measure.
    pub poisson_mean: S,
    pub averaged_rhs: Vec<S>,
}

/// Runs the full analysis at `r`. `probes` random centred states (unit
/// Gaussian, stream `seed`) are used for the generator residual.
pub fn langevin_report<S: Scalar>(
    model: &ModelSpec<S>,
    r: &[S],
    gamma: S,
    temp: S,
    t_grid: &[S],
    probes: usize,
    seed: u64,
) -> Result<LangevinReport<S>> {
    let sys = LangevinSystem::from_model(model, r, gamma, temp)?;
    let s_inf = sigma_inf(&sys)?;
    let frak_b = build_frak_b(&sys);
    let lyapunov_residual = crate::linalg::lyapunov_residual(&frak_b, &s_inf, &sys.diffusion());
    let n = sys.dim();
    let a_inv = sys.a.cholesky()?.inverse();
    let mut expected = Mat::zeros(2 * n, 2 * n);
    expected.set_block(0, 0, &a_inv.scale(temp));
    expected.set_block(n, n, &Mat::identity(n).scale(temp));
    let blockdiag_error = s_inf.sub(&expected).max_abs();
    let decay = decay_bound_check(&sys, t_grid)?;
    let poisson = poisson_solution(&sys, model, r)?;
    let avg = averaged_rhs(&sys, model, r)?;
    let mut rng = GaussianStream::new(seed, 0);
    let mut z = vec![S::zero(); 2 * n];
    let mut generator_residual = S::zero();
    for _ in 0..probes {
        rng.fill_normal(&mut z);
        let x: Vec<S> = (0..n).map(|i| z[i] + poisson.center[i]).collect();
        let h = model.h_force(r, &x)?;
        for (k, phi) in poisson.components.iter().enumerate() {
            let res = (phi.apply_generator(&sys, &z) - (h[k] - avg[k])).abs();
            generator_residual = generator_residual.max(res);
        }
    }
    let poisson_mean = poisson
        .components
        .iter()
        .map(|c| c.gaussian_mean(&s_inf).abs())
        .fold(S::zero(), S::max);
    Ok(LangevinReport {
        gap: sys.gap(),
        eigenvalues: sys.eigenvalues().to_vec(),
        sigma_inf: s_inf,
        lyapunov_residual,
        blockdiag_error,
        decay,
        poisson,
        generator_residual,
        poisson_mean,
        averaged_rhs: avg,
    })
}
