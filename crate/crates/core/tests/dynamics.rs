use xlmd::integrators::{consistent_latent_velocity, run};
use xlmd::solvers::anderson_solve;
use xlmd::{builtin_model, LatentInit, Method, ModelSpecF64, ModelTag, SimParamsF64, VelocityInit};

fn model_a() -> ModelSpecF64 {
    builtin_model(ModelTag::A)
}

fn end_state(model: &ModelSpecF64, p: &SimParamsF64) -> (Vec<f64>, Vec<f64>) {
    let steps = p.n_steps().unwrap();
    let traj = run(model, p, steps).unwrap();
    let last = traj.last();
    (last.r.clone(), last.p.clone())
}

fn dist(a: &(Vec<f64>, Vec<f64>), b: &(Vec<f64>, Vec<f64>)) -> f64 {
    a.0.iter()
        .chain(&a.1)
        .zip(b.0.iter().chain(&b.1))
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn exact_md_is_second_order_in_dt() {
    let model = model_a();
    let at = |dt: f64| {
        let p = SimParamsF64 {
            method: Method::Exact,
            dt,
            t_f: 1.0,
            scf_tol: 1e-13,
            ..Default::default()
        };
        end_state(&model, &p)
    };
    let fine = at(1e-3 / 64.0);
    let errs: Vec<f64> = [1e-3, 5e-4, 2.5e-4].iter().map(|&dt| dist(&at(dt), &fine)).collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio - 4.0).abs() < 0.4, "halving dt gave ratio {ratio} ({errs:?})");
    }
}

#[test]
fn averaged_dynamics_shift_linearly_in_temperature() {
    let model = model_a();
    let at = |temp: f64| {
        let p = SimParamsF64 {
            method: Method::Averaged,
            temp,
            dt: 1e-3,
            t_f: 1.0,
            ..Default::default()
        };
        end_state(&model, &p)
    };
    let base = at(0.0);
    let one = dist(&at(1e-3), &base);
    let two = dist(&at(2e-3), &base);
    assert!(one > 0.0);
    assert!((two / one - 2.0).abs() < 0.2, "ratio {}", two / one);
}

#[test]
fn xlbomd_conserves_extended_energy() {
    let model = model_a();
    let p = SimParamsF64 {
        method: Method::Xlbomd,
        eps: 1e-4,
        temp: 0.0,
        dt: 5e-6,
        t_f: 0.5,
        x_init: LatentInit::Offset(vec![0.5, -0.5]),
        ..Default::default()
    };
    let traj = run(&model, &p, 1000).unwrap();
    let e: Vec<f64> = traj.states.iter().map(|s| model.extended_energy(s)).collect();
    let spread = e.iter().fold(f64::NEG_INFINITY, |m, &v| m.max((v - e[0]).abs()));
    assert!(spread < 1e-6 * e[0].abs(), "extended energy moved by {spread}");
}

#[test]
fn consistent_velocity_matches_finite_differences() {
    for tag in [ModelTag::A, ModelTag::B, ModelTag::C] {
        let model: ModelSpecF64 = builtin_model(tag);
        let (r, p) = model.initial().unwrap();
        let solve = |r: &[f64]| -> Vec<f64> {
            let guess = model.exact_latent(r).unwrap();
            anderson_solve(&model, r, &guess, 1e-13, 0.1, 5, 100_000).unwrap().x
        };
        let x = solve(r);
        let v = consistent_latent_velocity(&model, r, p, &x).unwrap();
        let h = 1e-5;
        let shifted = |s: f64| -> Vec<f64> {
            let rs: Vec<f64> = r.iter().zip(p).map(|(a, b)| a + s * h * b).collect();
            solve(&rs)
        };
        let (fwd, bwd) = (shifted(1.0), shifted(-1.0));
        for i in 0..x.len() {
            let fd = (fwd[i] - bwd[i]) / (2.0 * h);
            assert!((v[i] - fd).abs() < 1e-6 * (1.0 + fd.abs()), "{tag:?} component {i}: {} vs {fd}", v[i]);
        }
    }
}

#[test]
fn consistent_start_keeps_the_latent_velocity_small() {
    let model = model_a();
    let base = SimParamsF64 {
        method: Method::Xlbomd,
        eps: 1e-4,
        temp: 0.0,
        dt: 5e-6,
        t_f: 0.2,
        ..Default::default()
    };
    let ke_max = |y_init| {
        let p = SimParamsF64 {
            y_init,
            x_init: LatentInit::ScfExact,
            ..base.clone()
        };
        run(&model, &p, 100).unwrap().latent_ke.iter().cloned().fold(0.0, f64::max)
    };
    let zero = ke_max(VelocityInit::Zero);
    let consistent = ke_max(VelocityInit::Consistent);
    assert!(consistent < zero, "consistent {consistent} vs zero {zero}");
}
