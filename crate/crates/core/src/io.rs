//! CSV formats shared by the library and the command-line front end.
//!
//! Floats are written with 17 significant digits so that every value reads
//! back bit-for-bit.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::integrators::Trajectory;
use crate::model::ExtendedState;
use crate::scalar::Scalar;
use crate::solvers::CostCounters;

/// Renders a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Header `t,r1..rD,p1..pD,x1..xM,y1..yM,energy,latent_ke`.
pub fn trajectory_header(dim_r: usize, dim_x: usize) -> String {
    let mut cols = vec!["t".to_string()];
    for (prefix, n) in [("r", dim_r), ("p", dim_r), ("x", dim_x), ("y", dim_x)] {
        cols.extend((1..=n).map(|i| format!("{prefix}{i}")));
    }
    cols.push("energy".into());
    cols.push("latent_ke".into());
    cols.join(",")
}

pub fn write_trajectory_csv<S: Scalar, W: Write>(traj: &Trajectory<S>, mut out: W) -> Result<()> {
    let (dr, dx) = traj
        .states
        .first()
        .map(|s| (s.r.len(), s.x.len()))
        .unwrap_or((0, 0));
    writeln!(out, "{}", trajectory_header(dr, dx))?;
    let mut line = String::new();
    for (i, s) in traj.states.iter().enumerate() {
        line.clear();
        line.push_str(&fmt_f64(traj.times[i].as_f64()));
        for v in s.r.iter().chain(&s.p).chain(&s.x).chain(&s.y) {
            line.push(',');
            line.push_str(&fmt_f64(v.as_f64()));
        }
        line.push(',');
        line.push_str(&fmt_f64(traj.energy[i].as_f64()));
        line.push(',');
        line.push_str(&fmt_f64(traj.latent_ke[i].as_f64()));
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

/// Counts columns of each block in a trajectory header.
fn parse_header(header: &str) -> Result<(usize, usize)> {
    let cols: Vec<&str> = header.trim().split(',').collect();
    let count = |prefix: char| {
        cols.iter()
            .filter(|c| c.starts_with(prefix) && c[1..].parse::<usize>().is_ok())
            .count()
    };
    let (dr, dx) = (count('r'), count('x'));
    if count('p') != dr || count('y') != dx {
        return Err(Error::Csv("r/p or x/y column counts differ".into()));
    }
    let expected = trajectory_header(dr, dx);
    if cols.join(",") != expected {
        return Err(Error::Csv(format!("unexpected header `{}`", header.trim())));
    }
    Ok((dr, dx))
}

pub(crate) fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Csv(format!("line {line}: `{field}` is not a number")))
}

/// Reads a trajectory CSV. The file stores neither the step size nor the
/// cost counters: `dt` is set to the spacing of the first two samples,
/// `steps` to the number of sample intervals and the counters to zero.
pub fn read_trajectory_csv<R: Read>(input: R) -> Result<Trajectory<f64>> {
    let mut lines = BufReader::new(input).lines();
    let header = lines.next().ok_or_else(|| Error::Csv("empty file".into()))??;
    let (dr, dx) = parse_header(&header)?;
    let width = 3 + 2 * dr + 2 * dx;
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        energy: Vec::new(),
        latent_ke: Vec::new(),
        counters: CostCounters::default(),
        dt: 0.0,
        steps: 0,
    };
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals = line
            .split(',')
            .map(|f| parse_f64(f, i + 2))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != width {
            return Err(Error::Csv(format!(
                "line {}: {} fields, header has {width}",
                i + 2,
                vals.len()
            )));
        }
        let t = vals[0];
        if traj.times.last().is_some_and(|&last| t <= last) {
            return Err(Error::Csv(format!("line {}: times not increasing", i + 2)));
        }
        let mut at = 1;
        let mut take = |n: usize| {
            let v = vals[at..at + n].to_vec();
            at += n;
            v
        };
        let state = ExtendedState {
            t,
            r: take(dr),
            p: take(dr),
            x: take(dx),
            y: take(dx),
        };
        traj.times.push(t);
        traj.states.push(state);
        traj.energy.push(vals[width - 2]);
        traj.latent_ke.push(vals[width - 1]);
    }
    if traj.times.len() >= 2 {
        traj.dt = traj.times[1] - traj.times[0];
    }
    traj.steps = traj.times.len().saturating_sub(1);
    Ok(traj)
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory and a rename.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        write(&mut buf)?;
        buf.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// One row of a sweep table. `seed` is `None` on summary rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub seed: Option<u64>,
    pub sup_r_err: f64,
    pub sup_p_err: f64,
    pub counters: CostCounters,
}

pub const SWEEP_HEADER: &str = "value,seed,sup_r_err,sup_p_err,matvec_ax,matvec_dax,nonlinear_evals";
/// Seed column of summary rows.
pub const SUMMARY_SEED: &str = "mean";

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for row in rows {
        let seed = row.seed.map_or_else(|| SUMMARY_SEED.to_string(), |s| s.to_string());
        writeln!(
            out,
            "{},{seed},{},{},{},{},{}",
            fmt_f64(row.value),
            fmt_f64(row.sup_r_err),
            fmt_f64(row.sup_p_err),
            row.counters.matvec_ax,
            row.counters.matvec_dax,
            row.counters.nonlinear_evals
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut lines = BufReader::new(input).lines();
    let header = lines.next().ok_or_else(|| Error::Csv("empty file".into()))??;
    if header.trim() != SWEEP_HEADER {
        return Err(Error::Csv(format!("unexpected header `{}`", header.trim())));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let n = i + 2;
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 7 {
            return Err(Error::Csv(format!("line {n}: {} fields, header has 7", f.len())));
        }
        let int = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| Error::Csv(format!("line {n}: `{s}` is not a count")))
        };
        let seed = if f[1] == SUMMARY_SEED { None } else { Some(int(f[1])?) };
        rows.push(SweepRow {
            value: parse_f64(f[0], n)?,
            seed,
            sup_r_err: parse_f64(f[2], n)?,
            sup_p_err: parse_f64(f[3], n)?,
            counters: CostCounters {
                matvec_ax: int(f[4])?,
                matvec_dax: int(f[5])?,
                nonlinear_evals: int(f[6])?,
                scf_iterations: 0,
            },
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::{run, SimParams};
    use crate::model::{builtin_model, ModelTag};
    use crate::Method;

    fn short_run() -> Trajectory<f64> {
        let model = builtin_model::<f64>(ModelTag::A);
        let params = SimParams {
            method: Method::Sxlmd,
            dt: 1e-3,
            t_f: 0.05,
            seed: 3,
            ..SimParams::default()
        };
        run(&model, &params, 10).unwrap()
    }

    #[test]
    fn header_layout() {
        assert_eq!(
            trajectory_header(2, 1),
            "t,r1,r2,p1,p2,x1,y1,energy,latent_ke"
        );
    }

    #[test]
    fn trajectory_round_trip_is_lossless() {
        let traj = short_run();
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let cols = text.lines().next().unwrap().split(',').count();
        assert!(text.lines().skip(1).all(|l| l.split(',').count() == cols));
        assert_eq!(text.lines().count(), traj.len() + 1);
        let back = read_trajectory_csv(buf.as_slice()).unwrap();
        assert_eq!(back.times, traj.times);
        assert_eq!(back.states, traj.states);
        assert_eq!(back.energy, traj.energy);
        assert_eq!(back.latent_ke, traj.latent_ke);
    }

    #[test]
    fn rejects_malformed_trajectories() {
        assert!(read_trajectory_csv("".as_bytes()).is_err());
        assert!(read_trajectory_csv("t,r1,p1,energy\n".as_bytes()).is_err());
        let bad_row = "t,r1,p1,x1,y1,energy,latent_ke\n0,1,2\n";
        assert!(matches!(read_trajectory_csv(bad_row.as_bytes()), Err(Error::Csv(_))));
        let bad_num = "t,r1,p1,x1,y1,energy,latent_ke\n0,1,2,3,4,5,abc\n";
        assert!(read_trajectory_csv(bad_num.as_bytes()).is_err());
        let backwards = "t,r1,p1,x1,y1,energy,latent_ke\n1,0,0,0,0,0,0\n0,0,0,0,0,0,0\n";
        assert!(read_trajectory_csv(backwards.as_bytes()).is_err());
    }

    #[test]
    fn sweep_round_trip() {
        let rows = vec![
            SweepRow {
                value: 1e-4,
                seed: Some(0),
                sup_r_err: 0.1 / 3.0,
                sup_p_err: 2.0f64.sqrt(),
                counters: CostCounters {
                    matvec_ax: 10,
                    matvec_dax: 22,
                    nonlinear_evals: 0,
                    scf_iterations: 0,
                },
            },
            SweepRow {
                value: 1e-4,
                seed: None,
                sup_r_err: 0.5,
                sup_p_err: 0.25,
                counters: CostCounters::default(),
            },
        ];
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        assert_eq!(read_sweep_csv(buf.as_slice()).unwrap(), rows);
        assert!(read_sweep_csv("value,seed\n".as_bytes()).is_err());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("out.csv");
        write_atomic(&path, |w| Ok(writeln!(w, "first")?)).unwrap();
        write_atomic(&path, |w| Ok(writeln!(w, "second")?)).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "second\n");
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }
}
