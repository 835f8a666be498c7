use super::*;
use crate::integrators::LatentInit;
use crate::model::{builtin_model, ModelTag};
use proptest::prelude::*;

fn model_a() -> ModelSpec<f64> {
    builtin_model(ModelTag::A)
}

/// Short model-A setting: t_f = 0.1, sampled every 1e-2.
fn short(method: Method) -> SimParams<f64> {
    SimParams {
        method,
        dt: 1e-4,
        t_f: 0.1,
        eps: 1e-3,
        temp: 1e-3,
        gamma: 0.1,
        ..SimParams::default()
    }
}

fn short_reference() -> Trajectory<f64> {
    let spec = ReferenceSpec {
        dt: 1e-5,
        scf_tol: 1e-12,
        sample_interval: 1e-2,
    };
    spec.compute(&model_a(), &short(Method::Exact)).unwrap()
}

#[test]
fn stride_arithmetic() {
    assert_eq!(stride_for(1e-3, 5e-6).unwrap(), 200);
    assert_eq!(stride_for(2e-3, 1.0 / 2500.0).unwrap(), 5);
    assert_eq!(stride_for(2e-3, 2.5e-6).unwrap(), 800);
    assert!(stride_for(1e-3, 3e-4).is_err());
    assert!(stride_for(0.0, 1e-3).is_err());
}

#[test]
fn exact_against_itself_is_zero() {
    let reference = short_reference();
    let rep = run_ensemble(&model_a(), &ReferenceSpec { dt: 1e-5, scf_tol: 1e-12, sample_interval: 1e-2 }.params(&short(Method::Exact)), 3, &reference, 1000).unwrap();
    assert_eq!(rep.sup_r_error, 0.0);
    assert_eq!(rep.sup_p_error, 0.0);
    assert_eq!(rep.ensemble_size, 3);
}

#[test]
fn deterministic_ensemble_repeats() {
    let reference = short_reference();
    let p = SimParams {
        temp: 0.0,
        gamma: 0.0,
        ..short(Method::Sxlmd)
    };
    let a = run_ensemble(&model_a(), &p, 1, &reference, 100).unwrap();
    let b = run_ensemble(&model_a(), &p, 1, &reference, 100).unwrap();
    assert_eq!(a, b);
}

#[test]
fn stochastic_ensemble_mean_and_reproducibility() {
    let reference = short_reference();
    let p = short(Method::Sxlmd);
    let rep = run_ensemble(&model_a(), &p, 4, &reference, 100).unwrap();
    let streams: Vec<u64> = rep.per_seed.iter().map(|s| s.stream).collect();
    assert_eq!(streams, vec![0, 1, 2, 3]);
    let sum: f64 = rep.per_seed.iter().map(|s| s.errors.sup_r).sum();
    assert_eq!(rep.sup_r_error, sum / 4.0);
    let lo = rep.per_seed.iter().map(|s| s.errors.sup_r).fold(f64::INFINITY, f64::min);
    let hi = rep.per_seed.iter().map(|s| s.errors.sup_r).fold(0.0, f64::max);
    assert!(lo <= rep.sup_r_error && rep.sup_r_error <= hi);
    assert!(rep.per_seed[0].errors != rep.per_seed[1].errors);
    assert_eq!(rep, run_ensemble(&model_a(), &p, 4, &reference, 100).unwrap());
}

#[test]
fn grid_mismatch_is_reported() {
    let reference = short_reference();
    // Stride 50 at dt 1e-4 samples at 5e-3, which the reference lacks.
    let err = run_ensemble(&model_a(), &short(Method::Exact), 1, &reference, 50).unwrap_err();
    assert!(matches!(err, Error::GridMismatch(_)));
    let longer = SimParams {
        t_f: 0.2,
        ..short(Method::Exact)
    };
    assert!(matches!(
        run_ensemble(&model_a(), &longer, 1, &reference, 100),
        Err(Error::GridMismatch(_))
    ));
    assert!(run_ensemble(&model_a(), &short(Method::Exact), 0, &reference, 100).is_err());
}

#[test]
fn errors_use_two_norm_and_endpoint() {
    let reference = short_reference();
    let mut shifted = reference.clone();
    for s in &mut shifted.states {
        s.r[0] += 3.0;
        s.r[1] += 4.0;
    }
    shifted.states.last_mut().unwrap().p[0] += 1.0;
    let e = trajectory_errors(&shifted, &reference).unwrap();
    assert!((e.sup_r - 5.0).abs() < 1e-12);
    assert!((e.end_r - 5.0).abs() < 1e-12);
    assert_eq!(e.sup_p, 1.0);
    assert_eq!(e.end_p, 1.0);
}

#[test]
fn order_of_power_laws() {
    let values = [1e-3, 5e-4, 1e-4, 5e-5, 1e-5];
    let half: Vec<f64> = values.iter().map(|v: &f64| 3.0 * v.sqrt()).collect();
    let one: Vec<f64> = values.iter().map(|v| 0.2 * v).collect();
    assert!((order_estimate(&values, &half, 1.0).unwrap() - 0.5).abs() < 1e-12);
    assert!((order_estimate(&values, &one, 1.0).unwrap() - 1.0).abs() < 1e-12);
    // Threshold keeps the three smallest values only.
    let kinked: Vec<f64> = values.iter().map(|&v| if v > 2e-4 { 1.0 } else { v }).collect();
    assert!((order_estimate(&values, &kinked, 1e-4).unwrap() - 1.0).abs() < 1e-12);
    assert!(matches!(
        order_estimate(&values, &one, 2e-5),
        Err(Error::TooFewPoints { needed: 2, found: 1 })
    ));
    assert!(order_estimate(&values, &one[..2], 1.0).is_err());
}

proptest! {
    #[test]
    fn order_is_scale_invariant(c in 1e-6f64..1e6, slope in -2.0f64..2.0, noise in prop::collection::vec(0.5f64..2.0, 5)) {
        let values: [f64; 5] = [1e-3, 3e-4, 1e-4, 3e-5, 1e-5];
        let errs: Vec<f64> = values.iter().zip(&noise).map(|(v, n)| n * v.powf(slope)).collect();
        let scaled: Vec<f64> = errs.iter().map(|e| c * e).collect();
        let a = order_estimate(&values, &errs, 1.0).unwrap();
        let b = order_estimate(&values, &scaled, 1.0).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn sweep_params_apply_and_parse() {
    let base = short(Method::Sxlmd);
    assert_eq!(SweepParam::Eps.apply(&base, 0.5).eps, 0.5);
    assert_eq!(SweepParam::Temp.apply(&base, 0.5).temp, 0.5);
    assert_eq!(SweepParam::Gamma.apply(&base, 0.5).gamma, 0.5);
    let c = SweepParam::EpsWithTempSqrt.apply(&base, 0.25);
    assert_eq!((c.eps, c.temp), (0.25, 0.5));
    for p in [SweepParam::Eps, SweepParam::Temp, SweepParam::Gamma, SweepParam::EpsWithTempSqrt] {
        assert_eq!(p.to_string().parse::<SweepParam>().unwrap(), p);
    }
    assert!("beta".parse::<SweepParam>().is_err());
}

#[test]
fn sweep_rows_and_validation() {
    let reference = short_reference();
    let model = model_a();
    let base = short(Method::Sxlmd);
    let res = sweep(&model, &base, SweepParam::Eps, &[1e-3, 1e-4], 2, &reference, 100).unwrap();
    assert_eq!(res.reports.len(), 2);
    let rows = res.rows();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows.iter().filter(|r| r.seed.is_none()).count(), 2);
    let (v, er, ep) = summary_columns(&rows);
    assert_eq!(v, vec![1e-3, 1e-4]);
    assert_eq!(er, res.sup_r_errors());
    assert_eq!(ep, res.sup_p_errors());
    assert!(sweep(&model, &base, SweepParam::Eps, &[1e-3, 1e-3], 1, &reference, 100).is_err());
    assert!(sweep(&model, &base, SweepParam::Eps, &[], 1, &reference, 100).is_err());
}

#[test]
fn comparison_counts_by_hand() {
    // Ten steps each; the sxlmd run makes one product per step plus the
    // products of its initial SCF solve.
    let model = model_a();
    let md = SimParams {
        dt: 1e-3,
        t_f: 1e-2,
        ..short(Method::Exact)
    };
    let sx = SimParams {
        dt: 1e-3,
        t_f: 1e-2,
        ..short(Method::Sxlmd)
    };
    let spec = ReferenceSpec {
        dt: 1e-4,
        scf_tol: 1e-12,
        sample_interval: 1e-3,
    };
    let reference = spec.compute(&model, &md).unwrap();
    let cmp = efficiency_compare(&model, &md, &sx, &reference, 1e-3).unwrap();
    assert_eq!(cmp.sxlmd.steps, 10);
    let initial = crate::solvers::cg_solve(&model, &[0.587, -0.810], &[0.0, 0.0], 1e-10, 1000).unwrap();
    assert_eq!(cmp.sxlmd.counters.matvec_ax, initial.matvec_count as u64 + 11);
    assert_eq!(cmp.sxlmd.counters.matvec_dax, 2 * 11);
    assert_eq!(cmp.md.counters.matvec_dax, 2 * 11);
    assert!(cmp.md.counters.matvec_ax > cmp.sxlmd.counters.matvec_ax);
    assert!(cmp.ax_reduction > 0.0 && cmp.ax_reduction < 1.0);
    assert!(cmp.nonlinear_reduction.is_none());
    assert_eq!(cmp, efficiency_compare(&model, &md, &sx, &reference, 1e-3).unwrap());
    assert!(efficiency_compare(&model, &sx, &md, &reference, 1e-3).is_err());
}

#[test]
fn drift_of_exact_md_is_negligible() {
    let model = model_a();
    let p = SimParams {
        dt: 1e-4,
        t_f: 1.0,
        scf_tol: 1e-12,
        ..short(Method::Exact)
    };
    let traj = run(&model, &p, 100).unwrap();
    let e0 = traj.energy[0];
    let rep = drift_analysis(&traj, e0, 1e-3).unwrap();
    assert!(rep.rate.abs() < 1e-6, "rate {}", rep.rate);
    assert_eq!(rep.first_entry, Some(0.0));
    assert_eq!(rep.settled_from, Some(0.0));
}

#[test]
fn drift_fit_recovers_a_line() {
    let mut traj = short_reference();
    for (i, e) in traj.energy.iter_mut().enumerate() {
        *e = 2.0 - 0.5 * traj.times[i];
    }
    traj.energy[0] = 5.0;
    let rep = drift_analysis(&traj, 1.97, 0.011).unwrap();
    assert!((rep.rate + 0.5).abs() < 1e-12);
    assert!((rep.intercept - 2.0).abs() < 1e-12);
    // Energies 2 − 0.5t enter [1.959, 1.981] at t = 0.04 and stay until 0.08.
    assert!((rep.first_entry.unwrap() - 0.04).abs() < 1e-12);
    assert_eq!(rep.settled_from, None);
    traj.energy.truncate(3);
    assert!(drift_analysis(&traj, 0.0, 1.0).is_err());
}

#[test]
fn reference_cache_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cache = ReferenceCache::new(dir.path());
    let model = model_a();
    let base = short(Method::Sxlmd);
    let spec = ReferenceSpec {
        dt: 1e-4,
        scf_tol: 1e-12,
        sample_interval: 1e-2,
    };
    assert!(cache.load(&model, &base, &spec).unwrap().is_none());
    let computed = cache.get_or_compute(&model, &base, &spec).unwrap();
    let loaded = cache.load(&model, &base, &spec).unwrap().unwrap();
    assert_eq!(loaded.times, computed.times);
    assert_eq!(loaded.states, computed.states);
    assert_eq!(loaded.steps, computed.steps);
    // A different description is a miss.
    let other = SimParams {
        x_init: LatentInit::Offset(vec![0.5, -0.5]),
        p0: Some(vec![0.0, 0.0]),
        ..base.clone()
    };
    assert!(cache.load(&model, &other, &spec).unwrap().is_none());
    let files = std::fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(files, 2);
}

#[test]
fn reference_key_ignores_method_settings() {
    let model = model_a();
    let spec = ReferenceSpec::default();
    let a = ReferenceCache::key(&model, &short(Method::Sxlmd), &spec);
    let b = ReferenceCache::key(&model, &SimParams { eps: 0.5, ..short(Method::Exact) }, &spec);
    assert_eq!(a, b);
    assert!(a.contains("model=a"));
}

#[test]
fn presets_are_valid() {
    for p in [
        presets::model_a_offset(),
        presets::model_b_md(),
        presets::model_b_sxlmd(),
        presets::model_c_md(),
        presets::model_c_sxlmd(),
    ] {
        p.validate().unwrap();
    }
    assert_eq!(presets::model_b_md().n_steps().unwrap(), 12500);
    assert_eq!(presets::model_c_md().n_steps().unwrap(), 10000);
    assert_eq!(presets::penta_reference().stride().unwrap(), 800);
    assert_eq!(presets::model_a_reference().stride().unwrap(), 200);
    assert_eq!(presets::with_horizon(presets::model_b_md(), 1.0).n_steps().unwrap(), 2500);
}
