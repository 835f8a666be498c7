use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use super::*;
use crate::model::builtin::BVariant;

const TAGS: [ModelTag; 3] = [ModelTag::A, ModelTag::B, ModelTag::C];

fn model(tag: ModelTag) -> ModelSpec<f64> {
    builtin_model(tag)
}

fn dense_solve(a: &Mat<f64>, b: &[f64]) -> Vec<f64> {
    let na = DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice());
    na.lu().solve(&DVector::from_column_slice(b)).unwrap().iter().copied().collect()
}

fn dense_inverse(a: &Mat<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice()).try_inverse().unwrap()
}

fn shifted(r: &[f64], k: usize, h: f64) -> Vec<f64> {
    let mut v = r.to_vec();
    v[k] += h;
    v
}

fn r_strategy(d: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-2.0..2.0f64, d)
}

/// Central-difference derivative checks of `A`, `b` and `F` at `r`.
fn check_derivatives(m: &ModelSpec<f64>, r: &[f64]) -> Result<(), TestCaseError> {
    let h = 1e-5;
    for k in 0..m.dim_r() {
        let (rp, rm) = (shifted(r, k, h), shifted(r, k, -h));
        let fd_a = m.matrix_a(&rp).sub(&m.matrix_a(&rm)).scale(1.0 / (2.0 * h));
        let err_a = fd_a.sub(&m.da_dr(r, k)).frobenius_norm();
        prop_assert!(err_a <= 1e-6, "dA/dr_{k}: {err_a:e}");
        let fd_b: Vec<f64> = m
            .vector_b(&rp)
            .iter()
            .zip(m.vector_b(&rm))
            .map(|(p, q)| (p - q) / (2.0 * h))
            .collect();
        let err_b = crate::linalg::norm2(&crate::linalg::sub_vec(&fd_b, &m.db_dr(r, k)));
        prop_assert!(err_b <= 1e-6, "db/dr_{k}: {err_b:e}");
        // Five-point stencil: the cos(400 u) term of models B and C has a
        // third derivative near 6e5, which a plain central difference at
        // h = 1e-5 cannot resolve below 1e-5.
        let u = |s: f64| m.potential(&shifted(r, k, s * h));
        let fd_f = -(8.0 * (u(1.0) - u(-1.0)) - (u(2.0) - u(-2.0))) / (12.0 * h);
        let tol = 1e-6;
        let err_f = (fd_f - m.force(r)[k]).abs();
        prop_assert!(err_f <= tol, "F_{k}: {err_f:e}");
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn model_a_derivatives(r in r_strategy(2)) {
        check_derivatives(&model(ModelTag::A), &r)?;
    }

    #[test]
    fn model_b_derivatives(r in r_strategy(3)) {
        check_derivatives(&model(ModelTag::B), &r)?;
        check_derivatives(&builtin_model_with(ModelTag::B, BVariant::FirstSlotR1), &r)?;
    }

    #[test]
    fn kappa_bounds_spectrum(ra in r_strategy(2), rb in r_strategy(3), x in proptest::collection::vec(-3.0..3.0f64, 20)) {
        let a = model(ModelTag::A);
        prop_assert!(a.min_hessian_eigenvalue(&ra, &[0.0, 0.0]) >= a.kappa());
        prop_assert!(a.matrix_a(&ra).is_symmetric(0.0));
        let b = model(ModelTag::B);
        prop_assert!(b.min_hessian_eigenvalue(&rb, &x) >= b.kappa());
        let c = model(ModelTag::C);
        prop_assert!(c.min_hessian_eigenvalue(&rb, &x) >= c.kappa());
    }

    #[test]
    fn hbar_is_h_at_exact_latent(ra in r_strategy(2), rb in r_strategy(3)) {
        for (m, r) in [(model(ModelTag::A), ra), (model(ModelTag::B), rb)] {
            let x = dense_solve(&m.matrix_a(&r), &m.vector_b(&r));
            let h = m.h_force(&r, &x).unwrap();
            let hbar = m.hbar_force(&r).unwrap();
            for (u, v) in h.iter().zip(&hbar) {
                prop_assert!((u - v).abs() <= 1e-10 * (1.0 + v.abs()));
            }
        }
    }

    #[test]
    fn g_matches_entrywise_sum(ra in r_strategy(2), rb in r_strategy(3)) {
        for (m, r) in [(model(ModelTag::A), ra), (model(ModelTag::B), rb)] {
            let inv = dense_inverse(&m.matrix_a(&r));
            let g = m.g_vector(&r).unwrap();
            for (i, gi) in g.iter().enumerate() {
                let da = m.da_dr(&r, i);
                let mut s = 0.0;
                for k in 0..m.dim_x() {
                    for l in 0..m.dim_x() {
                        s += da[(k, l)] * inv[(k, l)];
                    }
                }
                prop_assert!((gi - 0.5 * s).abs() <= 1e-12 * (1.0 + s.abs()));
            }
        }
    }

    #[test]
    fn nonlinear_hessian_is_a_plus_diagonal(r in r_strategy(3), x in proptest::collection::vec(-3.0..3.0f64, 20)) {
        let c = model(ModelTag::C);
        let h = c.hessian_x(&r, &x);
        let a = c.matrix_a(&r);
        for i in 0..20 {
            for j in 0..20 {
                let extra = if i == j { 0.3 * (1.0 - (2.0 * x[i]).sin()) } else { 0.0 };
                prop_assert!((h[(i, j)] - a[(i, j)] - extra).abs() <= 1e-13);
            }
        }
    }
}

#[test]
fn h_vanishes_at_origin_for_model_a() {
    let h = model(ModelTag::A).h_force(&[0.0, 0.0], &[0.0, 0.0]).unwrap();
    assert_eq!(h, vec![0.0, 0.0]);
}

#[test]
fn constant_coupling_forces_reduce_to_external() {
    let a = Mat::from_rows(&[&[2.0, 0.5], &[0.5, 1.0]]);
    let m = constant_coupling(a, vec![1.0, -1.0], 2, 3.0).unwrap();
    let r = [0.4, -0.2];
    let f = m.force(&r);
    assert_eq!(m.h_force(&r, &[7.0, -3.0]).unwrap(), f);
    assert_eq!(m.hbar_force(&r).unwrap(), f);
    assert_eq!(m.g_vector(&r).unwrap(), vec![0.0, 0.0]);
}

#[test]
fn model_a_hbar_matches_energy_gradient() {
    // hbar = −∇W with W(r) = U(r) − ½ bᵀA⁻¹b, differentiated numerically.
    let m = model(ModelTag::A);
    let w = |r: &[f64]| {
        let b = m.vector_b(r);
        m.potential(r) - 0.5 * crate::linalg::dot(&b, &dense_solve(&m.matrix_a(r), &b))
    };
    let r = [1.0, 0.0];
    let hbar = m.hbar_force(&r).unwrap();
    let h = 1e-5;
    for k in 0..2 {
        let fd = -(w(&shifted(&r, k, h)) - w(&shifted(&r, k, -h))) / (2.0 * h);
        assert!((fd - hbar[k]).abs() < 1e-8, "component {k}: {fd} vs {}", hbar[k]);
    }
}

#[test]
fn g_scalar_case() {
    struct Scalar1;
    impl LatentModel<f64> for Scalar1 {
        fn dim_r(&self) -> usize {
            1
        }
        fn dim_x(&self) -> usize {
            1
        }
        fn potential(&self, _r: &[f64]) -> f64 {
            0.0
        }
        fn force(&self, _r: &[f64], out: &mut [f64]) {
            out[0] = 0.0;
        }
        fn matrix_a(&self, r: &[f64], out: &mut Mat<f64>) {
            out[(0, 0)] = 2.0 + r[0] * r[0];
        }
        fn vector_b(&self, _r: &[f64], out: &mut [f64]) {
            out[0] = 1.0;
        }
        fn da_dr(&self, r: &[f64], _k: usize, out: &mut Mat<f64>) {
            out[(0, 0)] = 2.0 * r[0];
        }
        fn db_dr(&self, _r: &[f64], _k: usize, out: &mut [f64]) {
            out[0] = 0.0;
        }
    }
    let m = ModelSpec::new("scalar", Arc::new(Scalar1), 2.0).unwrap();
    for r in [-1.5, 0.0, 0.3, 2.0] {
        let g = m.g_vector(&[r]).unwrap()[0];
        assert!((g - r / (2.0 + r * r)).abs() < 1e-15);
    }
}

#[test]
fn model_a_energies_at_initial_data() {
    let m = model(ModelTag::A);
    let (r, p) = m.initial().unwrap();
    let x = m.exact_latent(r).unwrap();
    let state = ExtendedState {
        t: 0.0,
        r: r.to_vec(),
        p: p.to_vec(),
        x: x.clone(),
        y: vec![0.0, 0.0],
    };
    let (e, ke) = m.total_energy(&state);
    assert!((e - 1.537).abs() < 1e-3, "exact energy {e}");
    assert_eq!(ke, 0.0);
    let offset = ExtendedState {
        x: vec![x[0] + 0.5, x[1] - 0.5],
        ..state
    };
    let (e, _) = m.total_energy(&offset);
    assert!((e - 1.912).abs() < 1e-3, "offset energy {e}");
}

#[test]
fn potential_only_energy() {
    let m = model(ModelTag::A);
    let s = ExtendedState {
        t: 0.0,
        r: vec![1.0, 0.0],
        p: vec![0.0, 0.0],
        x: vec![0.0, 0.0],
        y: vec![0.0, 0.0],
    };
    assert_eq!(m.total_energy(&s).0, 1.0);
}

#[test]
fn latent_gradient_examples() {
    let m = model(ModelTag::A);
    let r = [0.3, -0.4];
    let x = m.exact_latent(&r).unwrap();
    assert!(crate::linalg::norm2(&m.grad_q_x(&r, &x).unwrap()) < 1e-14);

    let id = constant_coupling(Mat::identity(4), vec![0.0; 4], 1, 0.0).unwrap();
    assert_eq!(id.grad_q_x(&[0.0], &[1.0; 4]).unwrap(), vec![1.0; 4]);

    let c = model(ModelTag::C);
    let r = [0.1, 0.5, -0.7];
    let g = c.grad_q_x(&r, &[0.0; 20]).unwrap();
    let b = c.vector_b(&r);
    for (gi, bi) in g.iter().zip(&b) {
        assert!((gi - (0.15 - bi)).abs() < 1e-15);
    }
    assert_eq!(c.interaction_energy(&r, &[0.0; 20]), 0.0);
}

#[test]
fn builtin_values_at_origin() {
    let a = model(ModelTag::A);
    let am = a.matrix_a(&[0.0, 0.0]);
    assert_eq!(am.as_slice(), &[2.0, 0.0, 0.0, 1.0]);
    assert_eq!(a.vector_b(&[0.0, 0.0]), vec![0.0, 1.0]);

    let b = model(ModelTag::B);
    let bm = b.matrix_a(&[0.0; 3]);
    for k in 0..20 {
        assert_eq!(bm[(k, k)], 2.0);
        if k + 1 < 20 {
            assert_eq!(bm[(k, k + 1)], -1.0);
        }
        if k + 2 < 20 {
            assert_eq!(bm[(k, k + 2)], 0.5);
        }
        if k + 3 < 20 {
            assert_eq!(bm[(k, k + 3)], 0.0);
        }
    }
    assert_eq!((b.dim_r(), b.dim_x()), (3, 20));
}

#[test]
fn b_vector_variants() {
    let r = [0.3, -0.2, 0.7];
    let verbatim = model(ModelTag::B).vector_b(&r);
    let swapped = builtin_model_with::<f64>(ModelTag::B, BVariant::FirstSlotR1).vector_b(&r);
    for k in 1..=20 {
        let kf = k as f64;
        let v = (kf * r[1] / 10.0 + (1.0 - kf / 20.0) * r[1] + r[2]).sin();
        let s = (kf * r[0] / 10.0 + (1.0 - kf / 20.0) * r[1] + r[2]).sin();
        assert!((verbatim[k - 1] - v).abs() < 1e-15);
        assert!((swapped[k - 1] - s).abs() < 1e-15);
    }
}

#[test]
fn tags_parse_and_reject() {
    assert_eq!("model_b".parse::<ModelTag>().unwrap(), ModelTag::B);
    assert_eq!("A".parse::<ModelTag>().unwrap(), ModelTag::A);
    assert!(matches!("d".parse::<ModelTag>(), Err(Error::UnknownModel(_))));
    for tag in TAGS {
        assert_eq!(tag.to_string().parse::<ModelTag>().unwrap(), tag);
    }
}

#[test]
fn dimension_errors() {
    let m = model(ModelTag::A);
    assert!(matches!(m.h_force(&[0.0], &[0.0, 0.0]), Err(Error::Dimension(_))));
    assert!(matches!(m.grad_q_x(&[0.0, 0.0], &[0.0; 3]), Err(Error::Dimension(_))));
}

#[test]
fn kappa_is_positive_and_below_origin_spectrum() {
    for tag in TAGS {
        let m = model(tag);
        assert!(m.kappa() > 0.0);
        let origin = vec![0.0; m.dim_r()];
        assert!(m.kappa() <= m.min_hessian_eigenvalue(&origin, &vec![0.0; m.dim_x()]));
    }
}

#[test]
fn f32_models_agree_with_f64() {
    let r64 = [0.587, -0.810];
    let r32 = [0.587f32, -0.810];
    let h64 = model(ModelTag::A).hbar_force(&r64).unwrap();
    let h32 = builtin_model::<f32>(ModelTag::A).hbar_force(&r32).unwrap();
    for (a, b) in h64.iter().zip(&h32) {
        assert!((a - *b as f64).abs() < 1e-5);
    }
}
