//! `key = value` run configuration with a closed schema.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use xlmd::harness::{presets, SweepParam};
use xlmd::{BVariant, LatentInit, Method, ModelTag, SimParamsF64, VelocityInit};

/// Every accepted key, in the order `dump` writes them.
pub const KEYS: &[&str] = &[
    "model",
    "b_variant",
    "method",
    "eps",
    "temp",
    "gamma",
    "dt",
    "t_f",
    "scf_tol",
    "scf_max_iter",
    "solver",
    "anderson_alpha",
    "anderson_depth",
    "seed",
    "stream",
    "x_init",
    "y_init",
    "r0",
    "p0",
    "output",
    "stride",
    "sample_interval",
    "seeds",
    "param",
    "grid",
    "threshold",
    "ref_dt",
    "ref_scf_tol",
    "cache_dir",
    "preset",
    "md_dt",
    "md_scf_tol",
    "r",
    "t_max",
    "t_points",
    "probes",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    None,
    Standard,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelTag,
    pub b_variant: BVariant,
    pub params: SimParamsF64,
    pub output: Option<PathBuf>,
    /// Output stride in steps; ignored when `sample_interval` is set.
    pub stride: usize,
    pub sample_interval: Option<f64>,
    pub seeds: usize,
    pub param: Option<SweepParam>,
    pub grid: Vec<f64>,
    pub threshold: f64,
    pub ref_dt: f64,
    pub ref_scf_tol: f64,
    pub cache_dir: Option<PathBuf>,
    pub preset: Preset,
    /// Step and SCF tolerance of the exact-MD side of `compare`.
    pub md_dt: Option<f64>,
    pub md_scf_tol: Option<f64>,
    /// Frozen configuration for `langevin`; the model's `r(0)` when unset.
    pub r: Option<Vec<f64>>,
    pub t_max: f64,
    pub t_points: usize,
    pub probes: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelTag::A,
            b_variant: BVariant::Verbatim,
            params: SimParamsF64::default(),
            output: None,
            stride: 200,
            sample_interval: None,
            seeds: 5,
            param: None,
            grid: Vec::new(),
            threshold: f64::INFINITY,
            ref_dt: 5e-6,
            ref_scf_tol: 1e-10,
            cache_dir: None,
            preset: Preset::None,
            md_dt: None,
            md_scf_tol: None,
            r: None,
            t_max: 50.0,
            t_points: 101,
            probes: 100,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| anyhow!("key `{key}`: `{v}` is not a number"))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|_| anyhow!("key `{key}`: `{v}` is not a non-negative integer"))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| parse_f64(key, s.trim())).collect()
}

fn parse_opt<T>(v: &str, f: impl FnOnce(&str) -> Result<T>) -> Result<Option<T>> {
    if v == "none" || v.is_empty() {
        Ok(None)
    } else {
        f(v).map(Some)
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn fmt_opt<T>(v: &Option<T>, f: impl FnOnce(&T) -> String) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), f)
}

impl RunConfig {
    /// Sets one key. Unknown keys and malformed values are errors naming
    /// the key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let p = &mut self.params;
        let with_key = |e: xlmd::Error| anyhow!("key `{key}`: {e}");
        match key {
            "model" => self.model = v.parse().map_err(with_key)?,
            "b_variant" => self.b_variant = v.parse().map_err(with_key)?,
            "method" => p.method = v.parse().map_err(with_key)?,
            "eps" => p.eps = parse_f64(key, v)?,
            "temp" => p.temp = parse_f64(key, v)?,
            "gamma" => p.gamma = parse_f64(key, v)?,
            "dt" => p.dt = parse_f64(key, v)?,
            "t_f" => p.t_f = parse_f64(key, v)?,
            "scf_tol" => p.scf_tol = parse_f64(key, v)?,
            "scf_max_iter" => p.scf_max_iter = parse_usize(key, v)?,
            "solver" => p.solver = v.parse().map_err(with_key)?,
            "anderson_alpha" => p.anderson_alpha = parse_f64(key, v)?,
            "anderson_depth" => p.anderson_depth = parse_usize(key, v)?,
            "seed" => {
                p.seed = v
                    .parse()
                    .map_err(|_| anyhow!("key `seed`: `{v}` is not a 64-bit unsigned integer"))?
            }
            "stream" => {
                p.stream = v
                    .parse()
                    .map_err(|_| anyhow!("key `stream`: `{v}` is not a 64-bit unsigned integer"))?
            }
            "x_init" => {
                p.x_init = match v.split_once(':') {
                    None if v == "scf_exact" => LatentInit::ScfExact,
                    Some(("offset", list)) => LatentInit::Offset(parse_list(key, list)?),
                    Some(("explicit", list)) => LatentInit::Explicit(parse_list(key, list)?),
                    _ => bail!("key `x_init`: expected scf_exact, offset:<list> or explicit:<list>, got `{v}`"),
                }
            }
            "y_init" => {
                p.y_init = match v {
                    "zero" => VelocityInit::Zero,
                    "consistent" => VelocityInit::Consistent,
                    _ => bail!("key `y_init`: expected zero or consistent, got `{v}`"),
                }
            }
            "r0" => p.r0 = parse_opt(v, |s| parse_list(key, s))?,
            "p0" => p.p0 = parse_opt(v, |s| parse_list(key, s))?,
            "output" => self.output = parse_opt(v, |s| Ok(PathBuf::from(s)))?,
            "stride" => self.stride = parse_usize(key, v)?,
            "sample_interval" => self.sample_interval = parse_opt(v, |s| parse_f64(key, s))?,
            "seeds" => self.seeds = parse_usize(key, v)?,
            "param" => self.param = parse_opt(v, |s| s.parse().map_err(with_key))?,
            "grid" => self.grid = parse_list(key, v)?,
            "threshold" => self.threshold = parse_f64(key, v)?,
            "ref_dt" => self.ref_dt = parse_f64(key, v)?,
            "ref_scf_tol" => self.ref_scf_tol = parse_f64(key, v)?,
            "cache_dir" => self.cache_dir = parse_opt(v, |s| Ok(PathBuf::from(s)))?,
            "preset" => {
                self.preset = match v {
                    "none" => Preset::None,
                    "standard" => Preset::Standard,
                    _ => bail!("key `preset`: expected none or standard, got `{v}`"),
                }
            }
            "md_dt" => self.md_dt = parse_opt(v, |s| parse_f64(key, s))?,
            "md_scf_tol" => self.md_scf_tol = parse_opt(v, |s| parse_f64(key, s))?,
            "r" => self.r = parse_opt(v, |s| parse_list(key, s))?,
            "t_max" => self.t_max = parse_f64(key, v)?,
            "t_points" => self.t_points = parse_usize(key, v)?,
            "probes" => self.probes = parse_usize(key, v)?,
            _ => bail!("unknown key `{key}`"),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{origin}:{}: expected `key = value`", i + 1))?;
            self.set(k.trim(), v).with_context(|| format!("{origin}:{}", i + 1))?;
        }
        Ok(())
    }

    #[cfg(test)]
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text, "<config>")?;
        Ok(c)
    }

    /// Value of `key` as written by `dump`.
    fn get(&self, key: &str) -> String {
        let p = &self.params;
        match key {
            "model" => self.model.to_string(),
            "b_variant" => self.b_variant.to_string(),
            "method" => p.method.to_string(),
            "eps" => p.eps.to_string(),
            "temp" => p.temp.to_string(),
            "gamma" => p.gamma.to_string(),
            "dt" => p.dt.to_string(),
            "t_f" => p.t_f.to_string(),
            "scf_tol" => p.scf_tol.to_string(),
            "scf_max_iter" => p.scf_max_iter.to_string(),
            "solver" => p.solver.to_string(),
            "anderson_alpha" => p.anderson_alpha.to_string(),
            "anderson_depth" => p.anderson_depth.to_string(),
            "seed" => p.seed.to_string(),
            "stream" => p.stream.to_string(),
            "x_init" => match &p.x_init {
                LatentInit::ScfExact => "scf_exact".into(),
                LatentInit::Offset(v) => format!("offset:{}", fmt_list(v)),
                LatentInit::Explicit(v) => format!("explicit:{}", fmt_list(v)),
            },
            "y_init" => match p.y_init {
                VelocityInit::Zero => "zero".into(),
                VelocityInit::Consistent => "consistent".into(),
            },
            "r0" => fmt_opt(&p.r0, |v| fmt_list(v)),
            "p0" => fmt_opt(&p.p0, |v| fmt_list(v)),
            "output" => fmt_opt(&self.output, |v| v.display().to_string()),
            "stride" => self.stride.to_string(),
            "sample_interval" => fmt_opt(&self.sample_interval, f64::to_string),
            "seeds" => self.seeds.to_string(),
            "param" => fmt_opt(&self.param, SweepParam::to_string),
            "grid" => fmt_list(&self.grid),
            "threshold" => self.threshold.to_string(),
            "ref_dt" => self.ref_dt.to_string(),
            "ref_scf_tol" => self.ref_scf_tol.to_string(),
            "cache_dir" => fmt_opt(&self.cache_dir, |v| v.display().to_string()),
            "preset" => match self.preset {
                Preset::None => "none".into(),
                Preset::Standard => "standard".into(),
            },
            "md_dt" => fmt_opt(&self.md_dt, f64::to_string),
            "md_scf_tol" => fmt_opt(&self.md_scf_tol, f64::to_string),
            "r" => fmt_opt(&self.r, |v| fmt_list(v)),
            "t_max" => self.t_max.to_string(),
            "t_points" => self.t_points.to_string(),
            "probes" => self.probes.to_string(),
            _ => unreachable!("key list and getter disagree on `{key}`"),
        }
    }

    /// Full configuration, one `key = value` line per key.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key));
        }
        out
    }

    /// Output stride for a run at step `dt`.
    pub fn stride_at(&self, dt: f64) -> Result<usize> {
        match self.sample_interval {
            Some(i) => xlmd::harness::stride_for(i, dt).context("key `sample_interval`"),
            None if self.stride == 0 => bail!("key `stride`: must be at least 1"),
            None => Ok(self.stride),
        }
    }

    /// Exact-MD and Stochastic-XLMD parameter sets for `compare`.
    pub fn compare_params(&self) -> Result<(SimParamsF64, SimParamsF64)> {
        if self.preset == Preset::Standard {
            let (md, sx) = match self.model {
                ModelTag::B => (presets::model_b_md(), presets::model_b_sxlmd()),
                ModelTag::C => (presets::model_c_md(), presets::model_c_sxlmd()),
                ModelTag::A => bail!("key `preset`: the standard preset exists for models b and c"),
            };
            let t_f = self.params.t_f;
            return Ok((presets::with_horizon(md, t_f), presets::with_horizon(sx, t_f)));
        }
        let sx = SimParamsF64 {
            method: Method::Sxlmd,
            ..self.params.clone()
        };
        let md = SimParamsF64 {
            method: Method::Exact,
            dt: self.md_dt.unwrap_or(self.params.dt),
            scf_tol: self.md_scf_tol.unwrap_or(self.params.scf_tol),
            ..self.params.clone()
        };
        Ok((md, sx))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_round_trips() {
        let mut c = RunConfig::default();
        let text = "model = c\nb_variant = r1\nmethod = exact\neps = 2.5e-7\ntemp=0.1\n\
                    x_init = offset:0.5,-0.5\ny_init = consistent\nr0 = 0.1,0.2,0.3\n\
                    grid = 1e-3, 1e-4\nparam = eps_with_temp_sqrt\noutput = out/traj.csv\n\
                    sample_interval = 0.002\npreset = standard\nmd_dt = 0.0005\nr = 0,0,0\nseed = 18446744073709551615\n";
        c.apply_text(text, "test").unwrap();
        let again = RunConfig::parse(&c.dump()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.dump(), c.dump());
        assert_eq!(RunConfig::parse(&RunConfig::default().dump()).unwrap(), RunConfig::default());
        assert_eq!(c.dump().lines().count(), KEYS.len());
    }

    #[test]
    fn comments_and_blank_lines() {
        let c = RunConfig::parse("# header\n\n eps = 1e-5   # trailing\n").unwrap();
        assert_eq!(c.params.eps, 1e-5);
    }

    #[test]
    fn errors_name_the_key() {
        let err = RunConfig::parse("epsilon = 1").unwrap_err();
        assert!(format!("{err:#}").contains("unknown key `epsilon`"));
        let err = RunConfig::parse("dt = fast").unwrap_err();
        assert!(format!("{err:#}").contains("key `dt`"));
        let err = RunConfig::parse("model = z").unwrap_err();
        assert!(format!("{err:#}").contains("key `model`"));
        assert!(RunConfig::parse("x_init = wobble").is_err());
        assert!(RunConfig::parse("just text").is_err());
    }

    #[test]
    fn strides() {
        let mut c = RunConfig::default();
        assert_eq!(c.stride_at(1e-3).unwrap(), 200);
        c.sample_interval = Some(2e-3);
        assert_eq!(c.stride_at(4e-4).unwrap(), 5);
        assert!(c.stride_at(3e-4).is_err());
    }

    #[test]
    fn compare_presets() {
        let mut c = RunConfig::parse("model = b\npreset = standard\nt_f = 1").unwrap();
        let (md, sx) = c.compare_params().unwrap();
        assert_eq!((md.method, sx.method), (Method::Exact, Method::Sxlmd));
        assert_eq!(md.t_f, 1.0);
        assert_eq!(sx.eps, 5e-7);
        c.model = ModelTag::A;
        assert!(c.compare_params().is_err());
        let c = RunConfig::parse("md_dt = 1e-4\nmd_scf_tol = 1e-6").unwrap();
        let (md, sx) = c.compare_params().unwrap();
        assert_eq!((md.dt, md.scf_tol, sx.dt), (1e-4, 1e-6, 5e-6));
    }
}
