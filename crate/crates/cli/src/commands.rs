use std::fmt::Write as _;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use xlmd::harness::{self, presets, ReferenceCache};
use xlmd::io::{self as xio, SWEEP_HEADER};
use xlmd::model::builtin_model_with;
use xlmd::{integrators, langevin, CostCounters, ModelSpecF64, ReferenceSpec, TrajectoryF64};

use crate::config::{Preset, RunConfig};

fn model_of(cfg: &RunConfig) -> ModelSpecF64 {
    builtin_model_with(cfg.model, cfg.b_variant)
}

/// Writes through `write` to the configured output file, or to stdout.
fn emit(cfg: &RunConfig, write: impl FnOnce(&mut dyn Write) -> xlmd::Result<()>) -> Result<()> {
    match &cfg.output {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            xio::write_atomic(path, write).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let stdout = io::stdout();
            let mut lock = BufWriter::new(stdout.lock());
            write(&mut lock)?;
            lock.flush()?;
            Ok(())
        }
    }
}

fn counter_lines(prefix: &str, c: &CostCounters) -> String {
    let mut s = String::new();
    for (k, v) in c.as_pairs() {
        let _ = writeln!(s, "{prefix}{k}={v}");
    }
    s
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    let model = model_of(cfg);
    let stride = cfg.stride_at(cfg.params.dt)?;
    let traj = integrators::run(&model, &cfg.params, stride)?;
    emit(cfg, |w| xio::write_trajectory_csv(&traj, w))?;
    let summary = format!("steps={}\n{}", traj.steps, counter_lines("", &traj.counters));
    if cfg.output.is_some() {
        print!("{summary}");
    } else {
        eprint!("{summary}");
    }
    Ok(())
}

fn reference(cfg: &RunConfig, model: &ModelSpecF64, spec: &ReferenceSpec) -> Result<TrajectoryF64> {
    let traj = match &cfg.cache_dir {
        Some(dir) => ReferenceCache::new(dir).get_or_compute(model, &cfg.params, spec)?,
        None => spec.compute(model, &cfg.params)?,
    };
    Ok(traj)
}

pub fn sweep(cfg: &RunConfig) -> Result<()> {
    let param = cfg.param.ok_or_else(|| anyhow!("key `param`: a sweep needs a parameter"))?;
    if cfg.grid.is_empty() {
        bail!("key `grid`: a sweep needs at least one value");
    }
    let model = model_of(cfg);
    let stride = cfg.stride_at(cfg.params.dt)?;
    let spec = ReferenceSpec {
        dt: cfg.ref_dt,
        scf_tol: cfg.ref_scf_tol,
        sample_interval: cfg.sample_interval.unwrap_or(stride as f64 * cfg.params.dt),
    };
    let reference = reference(cfg, &model, &spec)?;
    let result = harness::sweep(&model, &cfg.params, param, &cfg.grid, cfg.seeds, &reference, stride)?;
    let rows = result.rows();
    emit(cfg, |w| xio::write_sweep_csv(&rows, w))?;
    if let Ok((or, op)) = result.orders(cfg.threshold) {
        eprintln!("order_r={or:.6}\norder_p={op:.6}");
    }
    Ok(())
}

/// Reads either a sweep table or a `value,error` table.
pub fn order(input: &Path, threshold: f64) -> Result<()> {
    let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    if text.lines().next().map(str::trim) == Some(SWEEP_HEADER) {
        let rows = xio::read_sweep_csv(BufReader::new(text.as_bytes()))?;
        let (values, er, ep) = harness::summary_columns(&rows);
        let or = harness::order_estimate(&values, &er, threshold)?;
        let op = harness::order_estimate(&values, &ep, threshold)?;
        println!("order_r={or:.6}\norder_p={op:.6}");
        return Ok(());
    }
    let (mut values, mut errors) = (Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = match cols.as_slice() {
            [v, e] => v.parse::<f64>().ok().zip(e.parse::<f64>().ok()),
            _ => bail!("{}:{}: expected `value,error`", input.display(), i + 1),
        };
        match parsed {
            Some((v, e)) => {
                values.push(v);
                errors.push(e);
            }
            None if values.is_empty() && i == 0 => continue,
            None => bail!("{}:{}: expected two numbers", input.display(), i + 1),
        }
    }
    println!("{:.6}", harness::order_estimate(&values, &errors, threshold)?);
    Ok(())
}

pub fn compare(cfg: &RunConfig) -> Result<()> {
    let model = model_of(cfg);
    let (md, sx) = cfg.compare_params()?;
    let spec = match cfg.preset {
        Preset::Standard => presets::penta_reference(),
        Preset::None => ReferenceSpec {
            dt: cfg.ref_dt,
            scf_tol: cfg.ref_scf_tol,
            sample_interval: cfg.sample_interval.unwrap_or(ReferenceSpec::default().sample_interval),
        },
    };
    let reference = reference(cfg, &model, &spec)?;
    let c = harness::efficiency_compare(&model, &md, &sx, &reference, spec.sample_interval)?;
    let mut out = String::new();
    for (name, m) in [("md", &c.md), ("sxlmd", &c.sxlmd)] {
        let _ = writeln!(out, "{name}_steps={}", m.steps);
        let _ = writeln!(out, "{name}_sup_r_err={:e}", m.errors.sup_r);
        let _ = writeln!(out, "{name}_sup_p_err={:e}", m.errors.sup_p);
        let _ = writeln!(out, "{name}_end_r_err={:e}", m.errors.end_r);
        let _ = writeln!(out, "{name}_end_p_err={:e}", m.errors.end_p);
        out.push_str(&counter_lines(&format!("{name}_"), &m.counters));
    }
    let _ = writeln!(out, "ax_reduction_percent={:.2}", 100.0 * c.ax_reduction);
    let _ = writeln!(out, "total_reduction_percent={:.2}", 100.0 * c.total_reduction);
    if let Some(n) = c.nonlinear_reduction {
        let _ = writeln!(out, "nonlinear_reduction_percent={:.2}", 100.0 * n);
    }
    emit(cfg, |w| Ok(w.write_all(out.as_bytes())?))
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6e}")).collect::<Vec<_>>().join(" ")
}

pub fn langevin(cfg: &RunConfig) -> Result<()> {
    let model = model_of(cfg);
    let r: Vec<f64> = match (&cfg.r, &cfg.params.r0, model.initial()) {
        (Some(r), _, _) | (None, Some(r), _) => r.clone(),
        (None, None, Some((r, _))) => r.to_vec(),
        (None, None, None) => bail!("key `r`: model {} has no initial configuration", cfg.model),
    };
    if cfg.t_points < 2 {
        bail!("key `t_points`: need at least 2");
    }
    let n = cfg.t_points - 1;
    let grid: Vec<f64> = (0..=n).map(|i| cfg.t_max * i as f64 / n as f64).collect();
    let p = &cfg.params;
    let rep = langevin::langevin_report(&model, &r, p.gamma, p.temp, &grid, cfg.probes, p.seed)?;

    let mut out = String::new();
    let _ = writeln!(out, "{:<22}{:.6e}", "spectral gap", rep.gap);
    let _ = writeln!(out, "{:<22}{}", "eigenvalues of A", fmt_vec(&rep.eigenvalues));
    let _ = writeln!(out, "{:<22}{:.3e}", "lyapunov residual", rep.lyapunov_residual);
    let _ = writeln!(out, "{:<22}{:.3e}", "blockdiag error", rep.blockdiag_error);
    let _ = writeln!(out, "{:<22}{:.6e}", "C1", rep.decay.c1);
    let _ = writeln!(out, "{:<22}{:.6e}", "C2", rep.decay.c2);
    let _ = writeln!(out, "{:<22}{}", "decay violations", rep.decay.violations.len());
    let _ = writeln!(out, "{:<22}{:.3e}", "generator residual", rep.generator_residual);
    let _ = writeln!(out, "{:<22}{:.3e}", "poisson mean", rep.poisson_mean);
    let _ = writeln!(out, "{:<22}{}", "averaged rhs", fmt_vec(&rep.averaged_rhs));
    let _ = writeln!(out);
    let _ = writeln!(out, "{:>14}  {:>14}  {:>14}", "t", "|exp(-Bt)|", "|S_t - S_inf|");
    let d = &rep.decay;
    for ((t, e), s) in d.times.iter().zip(&d.expm_norms).zip(&d.sigma_gaps) {
        let _ = writeln!(out, "{t:>14.6e}  {e:>14.6e}  {s:>14.6e}");
    }
    emit(cfg, |w| Ok(w.write_all(out.as_bytes())?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counter_lines_have_prefix() {
        let c = CostCounters {
            matvec_ax: 3,
            ..Default::default()
        };
        let s = counter_lines("md_", &c);
        assert!(s.lines().any(|l| l == "md_matvec_ax=3"));
        assert_eq!(s.lines().count(), 4);
    }
}
