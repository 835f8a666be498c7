//! Benchmark models: a 2-d toy with a 2-d latent field, a 3-atom-coordinate
//! system with a 20-site pentadiagonal polarization matrix, and the same
//! system with a non-quadratic latent self-energy.

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use super::{LatentModel, ModelSpec, SeparableTerm};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;

/// Half-width of the sampling box `[−2, 2]^{d_r}` used for `kappa`.
const KAPPA_BOX: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelTag {
    A,
    B,
    C,
}

impl FromStr for ModelTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" | "model_a" => Ok(Self::A),
            "b" | "model_b" => Ok(Self::B),
            "c" | "model_c" => Ok(Self::C),
            other => Err(Error::UnknownModel(other.to_string())),
        }
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::A => "a",
            Self::B => "b",
            Self::C => "c",
        })
    }
}

/// Which coordinate enters the first slot of `b_k` in models B and C.
///
/// `Verbatim` reads `sin(k r₂/10 + (1 − k/20) r₂ + r₃)`; `FirstSlotR1` swaps
/// the first `r₂` for `r₁`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum BVariant {
    #[default]
    Verbatim,
    FirstSlotR1,
}

impl FromStr for BVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "verbatim" => Ok(Self::Verbatim),
            "r1" | "first_slot_r1" => Ok(Self::FirstSlotR1),
            other => Err(crate::error::invalid(
                "b_variant",
                format!("expected `verbatim` or `r1`, got `{other}`"),
            )),
        }
    }
}

impl fmt::Display for BVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Verbatim => "verbatim",
            Self::FirstSlotR1 => "r1",
        })
    }
}

pub fn builtin_model<S: Scalar>(tag: ModelTag) -> ModelSpec<S> {
    builtin_model_with(tag, BVariant::Verbatim)
}

pub fn builtin_model_with<S: Scalar>(tag: ModelTag, variant: BVariant) -> ModelSpec<S> {
    let l = S::lit;
    let spec = match tag {
        ModelTag::A => ModelSpec::new("a", Arc::new(ModelA), l(cached_kappa(tag)))
            .map(|m| m.with_initial(vec![l(0.587), l(-0.810)], vec![l(-1.0), l(0.5)])),
        ModelTag::B | ModelTag::C => {
            let field = Pentadiagonal {
                variant,
                self_energy: (tag == ModelTag::C).then_some(SineQuadratic { weight: l(0.15) }),
            };
            let name = if variant == BVariant::Verbatim {
                tag.to_string()
            } else {
                format!("{tag}-r1")
            };
            ModelSpec::new(name, Arc::new(field), l(cached_kappa(tag)))
                .map(|m| m.with_initial(vec![l(0.0), l(0.5), l(1.0)], vec![l(1.0), l(0.5), l(-1.0)]))
        }
    };
    spec.expect("builtin models are positive definite")
}

/// Sampled `kappa` per builtin family, computed once in `f64`. Models B and C
/// share `A(r)` and the self-energy of C has non-negative curvature.
fn cached_kappa(tag: ModelTag) -> f64 {
    static MODEL_A: OnceLock<f64> = OnceLock::new();
    static PENTA: OnceLock<f64> = OnceLock::new();
    let sampled = |field: Arc<dyn LatentModel<f64>>| {
        ModelSpec::with_sampled_kappa("kappa", field, KAPPA_BOX)
            .expect("builtin models are positive definite")
            .kappa()
    };
    match tag {
        ModelTag::A => *MODEL_A.get_or_init(|| sampled(Arc::new(ModelA))),
        ModelTag::B | ModelTag::C => *PENTA.get_or_init(|| {
            sampled(Arc::new(Pentadiagonal::<f64> {
                variant: BVariant::Verbatim,
                self_energy: None,
            }))
        }),
    }
}

/// Model with constant `A`, constant `b` and a harmonic external potential
/// `U = ½ stiffness |r|²`. With `stiffness = 0` the atoms fly freely.
pub fn constant_coupling<S: Scalar>(a: Mat<S>, b: Vec<S>, dim_r: usize, stiffness: S) -> Result<ModelSpec<S>> {
    if !a.is_square() || a.rows() != b.len() {
        return Err(Error::Dimension("A must be square and match b".into()));
    }
    if !a.is_symmetric(S::zero()) {
        return Err(crate::error::invalid("a", "must be symmetric"));
    }
    let kappa = crate::linalg::SymmetricEigen::new(&a).min_value();
    ModelSpec::new(
        "constant",
        Arc::new(ConstantCoupling {
            a,
            b,
            dim_r,
            stiffness,
        }),
        kappa,
    )
}

struct ConstantCoupling<S> {
    a: Mat<S>,
    b: Vec<S>,
    dim_r: usize,
    stiffness: S,
}

impl<S: Scalar> LatentModel<S> for ConstantCoupling<S> {
    fn dim_r(&self) -> usize {
        self.dim_r
    }
    fn dim_x(&self) -> usize {
        self.b.len()
    }
    fn potential(&self, r: &[S]) -> S {
        S::lit(0.5) * self.stiffness * r.iter().map(|&v| v * v).sum::<S>()
    }
    fn force(&self, r: &[S], out: &mut [S]) {
        for (o, &v) in out.iter_mut().zip(r) {
            *o = -self.stiffness * v;
        }
    }
    fn matrix_a(&self, _r: &[S], out: &mut Mat<S>) {
        out.clone_from(&self.a);
    }
    fn vector_b(&self, _r: &[S], out: &mut [S]) {
        out.copy_from_slice(&self.b);
    }
    fn da_dr(&self, _r: &[S], _k: usize, out: &mut Mat<S>) {
        out.fill(S::zero());
    }
    fn db_dr(&self, _r: &[S], _k: usize, out: &mut [S]) {
        out.iter_mut().for_each(|v| *v = S::zero());
    }
}

/// `U = |r|²`, `A = [[2+|r|², |r|²], [|r|², 1+|r|²]]`,
/// `b = (sin(r₁+r₂), cos(r₁−2r₂))`.
struct ModelA;

impl<S: Scalar> LatentModel<S> for ModelA {
    fn dim_r(&self) -> usize {
        2
    }
    fn dim_x(&self) -> usize {
        2
    }
    fn potential(&self, r: &[S]) -> S {
        r[0] * r[0] + r[1] * r[1]
    }
    fn force(&self, r: &[S], out: &mut [S]) {
        out[0] = -S::lit(2.0) * r[0];
        out[1] = -S::lit(2.0) * r[1];
    }
    fn matrix_a(&self, r: &[S], out: &mut Mat<S>) {
        let s = r[0] * r[0] + r[1] * r[1];
        out[(0, 0)] = S::lit(2.0) + s;
        out[(0, 1)] = s;
        out[(1, 0)] = s;
        out[(1, 1)] = S::one() + s;
    }
    fn vector_b(&self, r: &[S], out: &mut [S]) {
        out[0] = (r[0] + r[1]).sin();
        out[1] = (r[0] - S::lit(2.0) * r[1]).cos();
    }
    fn da_dr(&self, r: &[S], k: usize, out: &mut Mat<S>) {
        out.fill(S::lit(2.0) * r[k]);
    }
    fn db_dr(&self, r: &[S], k: usize, out: &mut [S]) {
        let c = (r[0] + r[1]).cos();
        let s = (r[0] - S::lit(2.0) * r[1]).sin();
        out[0] = c;
        out[1] = if k == 0 { -s } else { S::lit(2.0) * s };
    }
}

const PENTA_DIM: usize = 20;

/// `U = ¼|r|⁴ + cos(400(r₁+r₂+r₃))/100`; pentadiagonal `A` with
/// `A_kk = 2+|r|²`, `A_{k,k±1} = −1`, `A_{k,k±2} = (1−|r|²)/2`;
/// `b_k = sin(k r₂/10 + (1−k/20) r₂ + r₃)`.
struct Pentadiagonal<S> {
    variant: BVariant,
    self_energy: Option<SineQuadratic<S>>,
}

impl<S: Scalar> Pentadiagonal<S> {
    /// Coefficients `(c₁, c₂, c₃)` of `b_k = sin(c₁r₁ + c₂r₂ + c₃r₃)`.
    fn b_coefficients(&self, k1: usize) -> [S; 3] {
        let k = S::from_usize_lossy(k1);
        let first = k / S::lit(10.0);
        let second = S::one() - k / S::lit(20.0);
        match self.variant {
            BVariant::Verbatim => [S::zero(), first + second, S::one()],
            BVariant::FirstSlotR1 => [first, second, S::one()],
        }
    }

    fn b_argument(&self, r: &[S], k1: usize) -> S {
        let c = self.b_coefficients(k1);
        c[0] * r[0] + c[1] * r[1] + c[2] * r[2]
    }
}

impl<S: Scalar> LatentModel<S> for Pentadiagonal<S> {
    fn dim_r(&self) -> usize {
        3
    }
    fn dim_x(&self) -> usize {
        PENTA_DIM
    }
    fn potential(&self, r: &[S]) -> S {
        let s: S = r.iter().map(|&v| v * v).sum();
        let u = r[0] + r[1] + r[2];
        S::lit(0.25) * s * s + (S::lit(400.0) * u).cos() / S::lit(100.0)
    }
    fn force(&self, r: &[S], out: &mut [S]) {
        let s: S = r.iter().map(|&v| v * v).sum();
        let osc = S::lit(4.0) * (S::lit(400.0) * (r[0] + r[1] + r[2])).sin();
        for (o, &v) in out.iter_mut().zip(r) {
            *o = -s * v + osc;
        }
    }
    fn matrix_a(&self, r: &[S], out: &mut Mat<S>) {
        let s: S = r.iter().map(|&v| v * v).sum();
        let second = (S::one() - s) / S::lit(2.0);
        out.fill(S::zero());
        for k in 0..PENTA_DIM {
            out[(k, k)] = S::lit(2.0) + s;
            if k + 1 < PENTA_DIM {
                out[(k, k + 1)] = -S::one();
                out[(k + 1, k)] = -S::one();
            }
            if k + 2 < PENTA_DIM {
                out[(k, k + 2)] = second;
                out[(k + 2, k)] = second;
            }
        }
    }
    fn vector_b(&self, r: &[S], out: &mut [S]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.b_argument(r, i + 1).sin();
        }
    }
    fn da_dr(&self, r: &[S], k: usize, out: &mut Mat<S>) {
        let ds = S::lit(2.0) * r[k];
        out.fill(S::zero());
        for i in 0..PENTA_DIM {
            out[(i, i)] = ds;
            if i + 2 < PENTA_DIM {
                out[(i, i + 2)] = -ds / S::lit(2.0);
                out[(i + 2, i)] = -ds / S::lit(2.0);
            }
        }
    }
    fn db_dr(&self, r: &[S], k: usize, out: &mut [S]) {
        for (i, o) in out.iter_mut().enumerate() {
            let c = self.b_coefficients(i + 1);
            *o = c[k] * self.b_argument(r, i + 1).cos();
        }
    }
    fn separable(&self) -> Option<&dyn SeparableTerm<S>> {
        self.self_energy.as_ref().map(|t| t as &dyn SeparableTerm<S>)
    }
}

/// `e(x) = w (x² + ½ sin 2x)`; `e''(x) = 2w(1 − sin 2x) ≥ 0`.
#[derive(Clone, Copy, Debug)]
struct SineQuadratic<S> {
    weight: S,
}

impl<S: Scalar> SeparableTerm<S> for SineQuadratic<S> {
    fn value(&self, x: S) -> S {
        self.weight * (x * x + S::lit(0.5) * (S::lit(2.0) * x).sin())
    }
    fn derivative(&self, x: S) -> S {
        self.weight * (S::lit(2.0) * x + (S::lit(2.0) * x).cos())
    }
    fn second_derivative(&self, x: S) -> S {
        self.weight * S::lit(2.0) * (S::one() - (S::lit(2.0) * x).sin())
    }
    fn curvature_lower_bound(&self) -> S {
        S::zero()
    }
}
