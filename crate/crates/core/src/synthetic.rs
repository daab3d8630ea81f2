//! Seeded Gaussian datasets with a configurable eigen-spectrum.
//!
//! Data are drawn from `N(0, R Λ Rᵀ)` where `Λ` follows the configured
//! spectrum and `R` is an optional random rotation that hides the principal
//! axes. With `clusters > 0` each vector is offset by one of that many
//! centers drawn from the same distribution scaled by `cluster_spread`.
//!
//! Configs can be read from a small `key = value` text file:
//!
//! ```text
//! # 10k anisotropic vectors
//! count = 10000
//! queries = 100
//! dim = 64
//! spectrum = power
//! exponent = 1.0
//! rotate = true
//! seed = 7
//! ```

use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::transform::random_orthogonal_matrix;
use crate::vectors::VectorSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Spectrum {
    /// `λ_k = 1`.
    Flat,
    /// `λ_k = k^-exponent` (1-based `k`).
    Power { exponent: f64 },
    /// `λ_k = ratio^(k-1)`.
    Geometric { ratio: f64 },
}

impl Spectrum {
    /// Variances normalized to sum to `dim`.
    pub fn variances(&self, dim: usize) -> Vec<f64> {
        let raw: Vec<f64> = (1..=dim)
            .map(|k| match *self {
                Spectrum::Flat => 1.0,
                Spectrum::Power { exponent } => (k as f64).powf(-exponent),
                Spectrum::Geometric { ratio } => ratio.powi(k as i32 - 1),
            })
            .collect();
        let total: f64 = raw.iter().sum();
        raw.iter().map(|v| v * dim as f64 / total).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub count: usize,
    pub queries: usize,
    pub dim: usize,
    pub spectrum: Spectrum,
    pub rotate: bool,
    pub clusters: usize,
    pub cluster_spread: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            count: 10_000,
            queries: 100,
            dim: 64,
            spectrum: Spectrum::Power { exponent: 1.0 },
            rotate: true,
            clusters: 0,
            cluster_spread: 2.0,
            seed: 7,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("invalid value {value:?} for {key}")))
}

impl SyntheticConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SyntheticConfig::default();
        let mut spectrum_name = "power".to_string();
        let mut exponent = 1.0;
        let mut ratio = 0.9;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "count" => cfg.count = parse_value(key, value)?,
                "queries" => cfg.queries = parse_value(key, value)?,
                "dim" => cfg.dim = parse_value(key, value)?,
                "spectrum" => spectrum_name = value.to_string(),
                "exponent" => exponent = parse_value(key, value)?,
                "ratio" => ratio = parse_value(key, value)?,
                "rotate" => cfg.rotate = parse_value(key, value)?,
                "clusters" => cfg.clusters = parse_value(key, value)?,
                "cluster_spread" => cfg.cluster_spread = parse_value(key, value)?,
                "seed" => cfg.seed = parse_value(key, value)?,
                other => {
                    return Err(Error::config(format!(
                        "line {}: unknown key {other:?}",
                        lineno + 1
                    )))
                }
            }
        }
        cfg.spectrum = match spectrum_name.as_str() {
            "flat" => Spectrum::Flat,
            "power" => Spectrum::Power { exponent },
            "geometric" => Spectrum::Geometric { ratio },
            other => return Err(Error::config(format!("unknown spectrum {other:?}"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 || self.dim == 0 {
            return Err(Error::config("count and dim must be positive"));
        }
        match self.spectrum {
            Spectrum::Geometric { ratio } if ratio.is_nan() || ratio <= 0.0 => {
                Err(Error::config("geometric ratio must be positive"))
            }
            Spectrum::Power { exponent } if !exponent.is_finite() => {
                Err(Error::config("power exponent must be finite"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub data: VectorSet,
    /// `None` when `queries = 0`.
    pub queries: Option<VectorSet>,
    /// Population variances along the generating axes, descending.
    pub variances: Vec<f64>,
}

struct Sampler {
    dim: usize,
    stddevs: Vec<f64>,
    rotation: Option<Vec<f64>>,
    centers: Vec<Vec<f64>>,
}

impl Sampler {
    fn draw(&self, rng: &mut ChaCha8Rng, out: &mut Vec<f32>, scratch: &mut [f64]) {
        for (z, s) in scratch.iter_mut().zip(&self.stddevs) {
            let n: f64 = StandardNormal.sample(rng);
            *z = n * s;
        }
        if !self.centers.is_empty() {
            let c = &self.centers[rng.random_range(0..self.centers.len())];
            for (z, c) in scratch.iter_mut().zip(c) {
                *z += c;
            }
        }
        match &self.rotation {
            Some(m) => {
                // x = R z with R column-major.
                let d = self.dim;
                for i in 0..d {
                    let v: f64 = (0..d).map(|k| m[k * d + i] * scratch[k]).sum();
                    out.push(v as f32);
                }
            }
            None => out.extend(scratch.iter().map(|&z| z as f32)),
        }
    }
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticDataset> {
    cfg.validate()?;
    let variances = cfg.spectrum.variances(cfg.dim);
    let stddevs: Vec<f64> = variances.iter().map(|v| v.sqrt()).collect();
    let mut center_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xc1_u64.rotate_left(56));
    let centers = (0..cfg.clusters)
        .map(|_| {
            stddevs
                .iter()
                .map(|s| {
                    let n: f64 = StandardNormal.sample(&mut center_rng);
                    n * s * cfg.cluster_spread
                })
                .collect()
        })
        .collect();
    let sampler = Sampler {
        dim: cfg.dim,
        rotation: cfg
            .rotate
            .then(|| random_orthogonal_matrix(cfg.dim, cfg.seed ^ 0x5eed)),
        stddevs,
        centers,
    };
    let mut scratch = vec![0.0; cfg.dim];

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut values = Vec::with_capacity(cfg.count * cfg.dim);
    for _ in 0..cfg.count {
        sampler.draw(&mut rng, &mut values, &mut scratch);
    }
    let data = VectorSet::new(cfg.dim, values)?;

    let queries = if cfg.queries > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
        let mut values = Vec::with_capacity(cfg.queries * cfg.dim);
        for _ in 0..cfg.queries {
            sampler.draw(&mut rng, &mut values, &mut scratch);
        }
        Some(VectorSet::new(cfg.dim, values)?)
    } else {
        None
    };
    Ok(SyntheticDataset {
        data,
        queries,
        variances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::{component_variances, fit_pca};

    #[test]
    fn spectra_are_normalized() {
        for s in [
            Spectrum::Flat,
            Spectrum::Power { exponent: 1.0 },
            Spectrum::Geometric { ratio: 0.8 },
        ] {
            let v = s.variances(10);
            assert!((v.iter().sum::<f64>() - 10.0).abs() < 1e-9);
            assert!(v.windows(2).all(|w| w[0] >= w[1]));
        }
        let p = Spectrum::Power { exponent: 1.0 }.variances(4);
        assert!((p[0] / p[3] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn parses_config_text() {
        let cfg = SyntheticConfig::parse(
            "# comment\ncount = 500\nqueries=5\n dim = 12 \nspectrum = geometric\nratio = 0.5\nrotate = false\nseed = 3 # trailing\n",
        )
        .unwrap();
        assert_eq!(cfg.count, 500);
        assert_eq!(cfg.queries, 5);
        assert_eq!(cfg.dim, 12);
        assert_eq!(cfg.spectrum, Spectrum::Geometric { ratio: 0.5 });
        assert!(!cfg.rotate);
        assert_eq!(cfg.seed, 3);
        assert!(SyntheticConfig::parse("bogus = 1").is_err());
        assert!(SyntheticConfig::parse("count").is_err());
        assert!(SyntheticConfig::parse("count = -4").is_err());
        assert!(SyntheticConfig::parse("spectrum = zigzag").is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SyntheticConfig {
            count: 200,
            queries: 10,
            dim: 8,
            ..Default::default()
        };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.data, b.data);
        assert_eq!(a.queries, b.queries);
        assert_ne!(a.data.row(0), a.queries.as_ref().unwrap().row(0));
    }

    #[test]
    fn unrotated_variances_follow_spectrum() {
        let cfg = SyntheticConfig {
            count: 20_000,
            queries: 0,
            dim: 6,
            rotate: false,
            spectrum: Spectrum::Power { exponent: 1.0 },
            ..Default::default()
        };
        let ds = generate(&cfg).unwrap();
        let emp = component_variances(&ds.data);
        for (e, v) in emp.iter().zip(&ds.variances) {
            assert!((e - v).abs() < 0.05 * v, "{e} vs {v}");
        }
    }

    #[test]
    fn pca_recovers_rotated_spectrum() {
        let cfg = SyntheticConfig {
            count: 20_000,
            queries: 0,
            dim: 8,
            spectrum: Spectrum::Geometric { ratio: 0.5 },
            ..Default::default()
        };
        let ds = generate(&cfg).unwrap();
        let t = fit_pca(&ds.data).unwrap();
        for (l, v) in t.eigenvalues().iter().zip(&ds.variances) {
            assert!((l - v).abs() < 0.05 * v + 1e-3, "{l} vs {v}");
        }
    }
}
