//! Sweep and feasibility specifications.
//!
//! Both are plain `key = value` text files (`#` starts a comment). Command
//! line flags use the same keys and override the file.

use std::fmt;
use std::str::FromStr;

use dade_core::calibration::DEFAULT_SIGNIFICANCE;
use dade_core::estimator::{DEFAULT_ADSAMPLING_EPSILON, DEFAULT_DELTA_D};
use dade_core::{Error, Result, TransformKind};

fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexKind {
    Ivf,
    Hnsw,
    Linear,
}

impl IndexKind {
    pub fn name(self) -> &'static str {
        match self {
            IndexKind::Ivf => "ivf",
            IndexKind::Hnsw => "hnsw",
            IndexKind::Linear => "linear",
        }
    }
}

impl FromStr for IndexKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ivf" => Ok(IndexKind::Ivf),
            "hnsw" => Ok(IndexKind::Hnsw),
            "linear" => Ok(IndexKind::Linear),
            other => Err(config(format!(
                "unknown index kind {other:?} (expected ivf, hnsw or linear)"
            ))),
        }
    }
}

impl fmt::Display for IndexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcoKind {
    Fd,
    Ads,
    Dade,
    FixedPca,
    FixedRandom,
}

impl DcoKind {
    pub const ALL: [DcoKind; 5] = [
        DcoKind::Fd,
        DcoKind::Ads,
        DcoKind::Dade,
        DcoKind::FixedPca,
        DcoKind::FixedRandom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DcoKind::Fd => "fd",
            DcoKind::Ads => "ads",
            DcoKind::Dade => "dade",
            DcoKind::FixedPca => "fixed-pca",
            DcoKind::FixedRandom => "fixed-random",
        }
    }

    /// Transform the strategy is defined on; `None` accepts any.
    pub fn transform_kind(self) -> Option<TransformKind> {
        match self {
            DcoKind::Fd => None,
            DcoKind::Dade | DcoKind::FixedPca => Some(TransformKind::Pca),
            DcoKind::Ads | DcoKind::FixedRandom => Some(TransformKind::Random),
        }
    }

    /// Name of the strategy parameter a grid varies.
    pub fn param_name(self) -> &'static str {
        match self {
            DcoKind::Fd => "none",
            DcoKind::Ads => "eps0",
            DcoKind::Dade => "p_s",
            DcoKind::FixedPca | DcoKind::FixedRandom => "d_fixed",
        }
    }
}

impl FromStr for DcoKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        DcoKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                config(format!(
                    "unknown dco kind {s:?} (expected fd, ads, dade, fixed-pca or fixed-random)"
                ))
            })
    }
}

impl fmt::Display for DcoKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn scalar<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| config(format!("invalid value {value:?} for {key}")))
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(config(format!("invalid value {value:?} for {key}"))),
    }
}

/// Comma-separated integers; an item `a:b:step` expands to the inclusive
/// range `a, a+step, ..., <= b`.
pub fn parse_usize_list(key: &str, value: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [one] => out.push(scalar(key, one)?),
            [lo, hi, step] => {
                let (lo, hi, step): (usize, usize, usize) =
                    (scalar(key, lo)?, scalar(key, hi)?, scalar(key, step)?);
                if step == 0 || lo > hi {
                    return Err(config(format!("invalid range {item:?} for {key}")));
                }
                out.extend((lo..=hi).step_by(step));
            }
            _ => return Err(config(format!("invalid item {item:?} for {key}"))),
        }
    }
    if out.is_empty() {
        return Err(config(format!("{key} must not be empty")));
    }
    Ok(out)
}

pub fn parse_f64_list(key: &str, value: &str) -> Result<Vec<f64>> {
    let out: Vec<f64> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| scalar(key, s))
        .collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(config(format!("{key} must not be empty")));
    }
    Ok(out)
}

fn for_each_line(text: &str, mut f: impl FnMut(&str, &str) -> Result<()>) -> Result<()> {
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config(format!("line {}: expected `key = value`", lineno + 1)))?;
        f(key.trim(), value.trim()).map_err(|e| config(format!("line {}: {e}", lineno + 1)))?;
    }
    Ok(())
}

pub fn default_p_s_grid() -> Vec<f64> {
    vec![0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6]
}

pub fn default_eps0_grid() -> Vec<f64> {
    (1..=8).map(|i| i as f64 * 0.5).collect()
}

/// Eight evenly spaced prefix sizes ending at `dim`.
pub fn default_d_fixed_grid(dim: usize) -> Vec<usize> {
    let step = (dim / 8).max(1);
    let mut v: Vec<usize> = (1..=8).map(|i| (i * step).min(dim)).collect();
    v.dedup();
    if v.last() != Some(&dim) {
        v.push(dim);
    }
    v
}

/// One query sweep over a prepared index.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub index: IndexKind,
    pub dco: DcoKind,
    pub k: usize,
    /// HNSW beam widths.
    pub ef: Vec<usize>,
    /// IVF probe counts.
    pub n_probe: Vec<usize>,
    pub decoupled: bool,
    pub p_s: Vec<f64>,
    pub eps0: Vec<f64>,
    pub delta_d: usize,
    /// Empty means [`default_d_fixed_grid`].
    pub d_fixed: Vec<usize>,
    /// Calibration pairs when calibrating in memory; `None` uses the default.
    pub pairs: Option<usize>,
    pub seed: u64,
    /// Emit latency and QPS. Without timing the CSV is a pure function of
    /// the inputs.
    pub timing: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            index: IndexKind::Hnsw,
            dco: DcoKind::Fd,
            k: 10,
            ef: (100..=1500).step_by(100).collect(),
            n_probe: (20..=400).step_by(20).collect(),
            decoupled: false,
            p_s: vec![DEFAULT_SIGNIFICANCE],
            eps0: vec![DEFAULT_ADSAMPLING_EPSILON],
            delta_d: DEFAULT_DELTA_D,
            d_fixed: Vec::new(),
            pairs: None,
            seed: 0,
            timing: true,
        }
    }
}

impl SweepSpec {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "index" => self.index = value.parse()?,
            "dco" => self.dco = value.parse()?,
            "k" => self.k = scalar(key, value)?,
            "ef" => self.ef = parse_usize_list(key, value)?,
            "n_probe" => self.n_probe = parse_usize_list(key, value)?,
            "decoupled" => self.decoupled = boolean(key, value)?,
            "p_s" => self.p_s = parse_f64_list(key, value)?,
            "eps0" => self.eps0 = parse_f64_list(key, value)?,
            "delta_d" => self.delta_d = scalar(key, value)?,
            "d_fixed" => self.d_fixed = parse_usize_list(key, value)?,
            "pairs" => self.pairs = Some(scalar(key, value)?),
            "seed" => self.seed = scalar(key, value)?,
            "timing" => self.timing = boolean(key, value)?,
            other => return Err(config(format!("unknown sweep key {other:?}"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = SweepSpec::default();
        for_each_line(text, |k, v| spec.set(k, v))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(config("k must be at least 1"));
        }
        if self.delta_d == 0 {
            return Err(config("delta_d must be positive"));
        }
        match self.index {
            IndexKind::Hnsw if self.ef.is_empty() => return Err(config("ef grid is empty")),
            IndexKind::Hnsw => {
                if let Some(&ef) = self.ef.iter().find(|&&ef| ef < self.k) {
                    return Err(config(format!("ef={ef} is below k={}", self.k)));
                }
            }
            IndexKind::Ivf if self.n_probe.is_empty() => {
                return Err(config("n_probe grid is empty"))
            }
            _ => {}
        }
        if self.decoupled && self.index != IndexKind::Hnsw {
            return Err(config("decoupled candidate lists only apply to hnsw"));
        }
        match self.dco {
            DcoKind::Dade if self.p_s.is_empty() => Err(config("p_s grid is empty")),
            DcoKind::Ads if self.eps0.is_empty() => Err(config("eps0 grid is empty")),
            _ => Ok(()),
        }
    }
}

/// Linear-scan comparison of DCO strategies over their parameter grids.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilitySpec {
    pub strategies: Vec<DcoKind>,
    pub k: usize,
    pub p_s: Vec<f64>,
    pub eps0: Vec<f64>,
    /// Empty means [`default_d_fixed_grid`].
    pub d_fixed: Vec<usize>,
    /// Expansion steps for the adaptive strategies.
    pub delta_d: Vec<usize>,
    pub pairs: Option<usize>,
    pub seed: u64,
}

impl Default for FeasibilitySpec {
    fn default() -> Self {
        FeasibilitySpec {
            strategies: DcoKind::ALL.to_vec(),
            k: 10,
            p_s: default_p_s_grid(),
            eps0: default_eps0_grid(),
            d_fixed: Vec::new(),
            delta_d: vec![DEFAULT_DELTA_D],
            pairs: None,
            seed: 0,
        }
    }
}

impl FeasibilitySpec {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "strategies" => {
                self.strategies = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?
            }
            "k" => self.k = scalar(key, value)?,
            "p_s" => self.p_s = parse_f64_list(key, value)?,
            "eps0" => self.eps0 = parse_f64_list(key, value)?,
            "d_fixed" => self.d_fixed = parse_usize_list(key, value)?,
            "delta_d" => self.delta_d = parse_usize_list(key, value)?,
            "pairs" => self.pairs = Some(scalar(key, value)?),
            "seed" => self.seed = scalar(key, value)?,
            other => return Err(config(format!("unknown feasibility key {other:?}"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = FeasibilitySpec::default();
        for_each_line(text, |k, v| spec.set(k, v))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(config("k must be at least 1"));
        }
        if self.strategies.is_empty() {
            return Err(config("no strategies selected"));
        }
        if self.delta_d.is_empty() || self.delta_d.contains(&0) {
            return Err(config("delta_d values must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_expand_inclusively() {
        assert_eq!(
            parse_usize_list("ef", "100:500:100").unwrap(),
            vec![100, 200, 300, 400, 500]
        );
        assert_eq!(
            parse_usize_list("ef", "1, 4:9:4,20").unwrap(),
            vec![1, 4, 8, 20]
        );
        assert!(parse_usize_list("ef", "5:1:1").is_err());
        assert!(parse_usize_list("ef", "").is_err());
    }

    #[test]
    fn defaults_follow_the_reference_settings() {
        let s = SweepSpec::default();
        assert_eq!(s.ef.first(), Some(&100));
        assert_eq!(s.ef.last(), Some(&1500));
        assert_eq!(s.n_probe.len(), 20);
        assert_eq!(s.p_s, vec![0.1]);
        assert_eq!(s.eps0, vec![2.1]);
        assert_eq!(s.delta_d, 32);
        let f = FeasibilitySpec::default();
        assert_eq!(f.eps0.first(), Some(&0.5));
        assert_eq!(f.eps0.last(), Some(&4.0));
        assert_eq!(f.p_s.first(), Some(&0.05));
        assert_eq!(f.p_s.last(), Some(&0.6));
    }

    #[test]
    fn parses_a_spec_file() {
        let s = SweepSpec::parse(
            "# sweep\nindex = ivf\ndco = dade\nk = 5\nn_probe = 1,2,4\np_s = 0.1, 0.2\ntiming = false\n",
        )
        .unwrap();
        assert_eq!(s.index, IndexKind::Ivf);
        assert_eq!(s.dco, DcoKind::Dade);
        assert_eq!(s.n_probe, vec![1, 2, 4]);
        assert_eq!(s.p_s, vec![0.1, 0.2]);
        assert!(!s.timing);
    }

    #[test]
    fn invalid_specs_are_configuration_errors() {
        for text in [
            "k = 0",
            "index = tree",
            "dco = magic",
            "ef = 5\nk = 10",
            "index = ivf\ndecoupled = true",
            "bogus = 1",
            "no equals sign",
        ] {
            let err = SweepSpec::parse(text).unwrap_err();
            assert!(err.is_configuration(), "{text}: {err}");
        }
    }

    #[test]
    fn d_fixed_grid_ends_at_full_dimension() {
        assert_eq!(
            default_d_fixed_grid(64),
            vec![8, 16, 24, 32, 40, 48, 56, 64]
        );
        assert_eq!(default_d_fixed_grid(3), vec![1, 2, 3]);
        assert_eq!(default_d_fixed_grid(10).last(), Some(&10));
    }

    #[test]
    fn dco_names_round_trip() {
        for k in DcoKind::ALL {
            assert_eq!(k.name().parse::<DcoKind>().unwrap(), k);
        }
    }
}
