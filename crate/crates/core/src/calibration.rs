//! Empirical error bounds for the hypothesis test in [`crate::estimator::Dade`].
//!
//! For each checkpoint `d`, `ε_d` is the `(1 - p_s)` quantile of
//! `est_d / dist - 1` over uniformly sampled data pairs, where `est_d` is the
//! rescaled prefix distance. A candidate whose estimate exceeds
//! `(1 + ε_d) r` is then rejected with per-checkpoint error probability of
//! about `p_s`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::transform::{read_f64s, read_u32, OrthoTransform};
use crate::vectors::VectorSet;

pub const DEFAULT_SIGNIFICANCE: f64 = 0.1;
pub const DEFAULT_PAIR_COUNT: usize = 100_000;

/// Intermediate test points `Δ_d, 2Δ_d, ...` strictly below `dim`.
pub fn checkpoints(dim: usize, delta_d: usize) -> Vec<usize> {
    if delta_d == 0 {
        return Vec::new();
    }
    (1..)
        .map(|i| i * delta_d)
        .take_while(|&d| d < dim)
        .collect()
}

/// `min(100_000, N(N-1)/2)`.
pub fn default_pair_count(count: usize) -> usize {
    let all = count.saturating_mul(count.saturating_sub(1)) / 2;
    DEFAULT_PAIR_COUNT.min(all).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTable {
    p_s: f64,
    delta_d: usize,
    checkpoints: Vec<usize>,
    epsilons: Vec<f64>,
    /// Pairs that contributed ratios. Not persisted; zero after loading.
    sample_count: usize,
}

impl CalibrationTable {
    pub fn new(
        p_s: f64,
        delta_d: usize,
        checkpoints: Vec<usize>,
        epsilons: Vec<f64>,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&p_s) {
            return Err(Error::invalid(format!("p_s must lie in [0, 1), got {p_s}")));
        }
        if delta_d == 0 {
            return Err(Error::invalid("delta_d must be positive"));
        }
        if checkpoints.len() != epsilons.len() {
            return Err(Error::invalid(format!(
                "{} checkpoints but {} epsilons",
                checkpoints.len(),
                epsilons.len()
            )));
        }
        for (i, &d) in checkpoints.iter().enumerate() {
            if d != (i + 1) * delta_d {
                return Err(Error::invalid(format!(
                    "checkpoint {i} is {d}, expected {}",
                    (i + 1) * delta_d
                )));
            }
        }
        if let Some(e) = epsilons.iter().find(|e| e.is_nan() || **e <= -1.0) {
            return Err(Error::invalid(format!("error bound {e} must exceed -1")));
        }
        Ok(CalibrationTable {
            p_s,
            delta_d,
            checkpoints,
            epsilons,
            sample_count: 0,
        })
    }

    /// Infinite bounds at every checkpoint (the `p_s -> 0` limit): the
    /// adaptive DCO can only decide at full dimension.
    pub fn unbounded(dim: usize, delta_d: usize) -> Result<Self> {
        let cps = checkpoints(dim, delta_d);
        let eps = vec![f64::INFINITY; cps.len()];
        Self::new(0.0, delta_d, cps, eps)
    }

    pub fn p_s(&self) -> f64 {
        self.p_s
    }

    pub fn delta_d(&self) -> usize {
        self.delta_d
    }

    pub fn checkpoints(&self) -> &[usize] {
        &self.checkpoints
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    pub fn epsilon_at(&self, d: usize) -> Option<f64> {
        self.checkpoints
            .iter()
            .position(|&c| c == d)
            .map(|i| self.epsilons[i])
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    /// Same table with every bound multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        CalibrationTable {
            epsilons: self.epsilons.iter().map(|e| e * factor).collect(),
            ..self.clone()
        }
    }

    /// `p_s` f64, `delta_d` u32, count u32, then `(d u32, ε f64)` records,
    /// all little-endian.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&self.p_s.to_le_bytes())?;
        w.write_all(&(self.delta_d as u32).to_le_bytes())?;
        w.write_all(&(self.checkpoints.len() as u32).to_le_bytes())?;
        for (&d, &e) in self.checkpoints.iter().zip(&self.epsilons) {
            w.write_all(&(d as u32).to_le_bytes())?;
            w.write_all(&e.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let p_s = read_f64s(&mut r, 1)?[0];
        let delta_d = read_u32(&mut r)? as usize;
        let count = read_u32(&mut r)? as usize;
        let mut cps = Vec::with_capacity(count.min(1 << 16));
        let mut eps = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            cps.push(read_u32(&mut r)? as usize);
            eps.push(read_f64s(&mut r, 1)?[0]);
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::format("trailing bytes after calibration records"));
        }
        Self::new(p_s, delta_d, cps, eps).map_err(|e| Error::format(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

/// `n_pairs` index pairs `(i, j)` with `i != j`, uniform over ordered pairs.
pub fn sample_pairs(count: usize, n_pairs: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    if count < 2 {
        return Err(Error::invalid(format!(
            "pair sampling needs at least 2 vectors, got {count}"
        )));
    }
    if n_pairs == 0 {
        return Err(Error::invalid("n_pairs must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n_pairs)
        .map(|_| {
            let i = rng.random_range(0..count);
            let j = rng.random_range(0..count - 1);
            (i, if j >= i { j + 1 } else { j })
        })
        .collect())
}

/// Relative errors `est_d / dist - 1` for each checkpoint (outer) and each
/// pair with nonzero distance (inner), plus the number of skipped pairs.
/// Checkpoints whose leading components carry no variance get no ratios.
fn pair_ratios(
    t: &OrthoTransform,
    data: &VectorSet,
    pairs: &[(usize, usize)],
    cps: &[usize],
) -> Result<(Vec<Vec<f64>>, usize)> {
    if data.dim() != t.dim() {
        return Err(Error::DimensionMismatch {
            expected: t.dim(),
            found: data.dim(),
        });
    }
    let n = data.len();
    let scales: Vec<Option<f64>> = cps
        .iter()
        .map(|&d| crate::estimator::dade_scale(t, d))
        .collect();
    let mut ratios = vec![Vec::with_capacity(pairs.len()); cps.len()];
    let mut prefix = vec![0.0f64; cps.len()];
    let mut skipped = 0;
    for &(i, j) in pairs {
        if i >= n || j >= n {
            return Err(Error::invalid(format!(
                "pair ({i}, {j}) out of range for {n} vectors"
            )));
        }
        let (a, b) = (data.row(i), data.row(j));
        let mut acc = 0.0f64;
        let mut done = 0;
        for (slot, &d) in prefix.iter_mut().zip(cps) {
            for k in done..d {
                let diff = (a[k] - b[k]) as f64;
                acc += diff * diff;
            }
            done = d;
            *slot = acc;
        }
        for k in done..t.dim() {
            let diff = (a[k] - b[k]) as f64;
            acc += diff * diff;
        }
        if acc == 0.0 {
            skipped += 1;
            continue;
        }
        let dist = acc.sqrt();
        for ((out, &p), scale) in ratios.iter_mut().zip(&prefix).zip(&scales) {
            if let Some(s) = scale {
                out.push((s * p).sqrt() / dist - 1.0);
            }
        }
    }
    Ok((ratios, skipped))
}

/// Sort-based empirical quantile at 1-based rank `ceil(level * n)`, no
/// interpolation.
pub fn empirical_quantile(sorted: &[f64], level: f64) -> f64 {
    let n = sorted.len();
    let rank = ((level * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// Fits per-checkpoint error bounds on `data` (already rotated by `t`).
///
/// Raw quantiles are replaced by their running minimum over increasing `d`,
/// so the bounds never grow with more dimensions.
pub fn calibrate(
    t: &OrthoTransform,
    data: &VectorSet,
    p_s: f64,
    delta_d: usize,
    n_pairs: usize,
    seed: u64,
) -> Result<CalibrationTable> {
    if !(p_s > 0.0 && p_s < 1.0) {
        return Err(Error::invalid(format!("p_s must lie in (0, 1), got {p_s}")));
    }
    if delta_d == 0 {
        return Err(Error::invalid("delta_d must be positive"));
    }
    let pairs = sample_pairs(data.len(), n_pairs, seed)?;
    let cps = checkpoints(t.dim(), delta_d);
    let (mut ratios, skipped) = pair_ratios(t, data, &pairs, &cps)?;
    if 2 * skipped > pairs.len() || skipped == pairs.len() {
        return Err(Error::CalibrationImpossible {
            skipped,
            total: pairs.len(),
        });
    }
    let mut epsilons = Vec::with_capacity(cps.len());
    let mut running = f64::INFINITY;
    for r in ratios.iter_mut() {
        let raw = if r.is_empty() {
            f64::INFINITY
        } else {
            r.sort_by(f64::total_cmp);
            empirical_quantile(r, 1.0 - p_s)
        };
        running = running.min(raw);
        epsilons.push(running);
    }
    let mut table = CalibrationTable::new(p_s, delta_d, cps, epsilons)?;
    table.sample_count = pairs.len() - skipped;
    Ok(table)
}

/// Lower-tail counterpart of [`calibrate`]: the `level` quantile of the
/// relative error at each checkpoint, without monotone smoothing. Diagnostic
/// only; the DCO never uses it.
pub fn lower_error_quantiles(
    t: &OrthoTransform,
    data: &VectorSet,
    level: f64,
    delta_d: usize,
    pairs: &[(usize, usize)],
) -> Result<Vec<f64>> {
    let cps = checkpoints(t.dim(), delta_d);
    let (mut ratios, _) = pair_ratios(t, data, pairs, &cps)?;
    Ok(ratios
        .iter_mut()
        .map(|r| {
            if r.is_empty() {
                f64::NAN
            } else {
                r.sort_by(f64::total_cmp);
                empirical_quantile(r, level)
            }
        })
        .collect())
}

/// Fraction of `pairs` whose relative error exceeds `ε_d`, per checkpoint.
pub fn validate_calibration(
    cal: &CalibrationTable,
    t: &OrthoTransform,
    data: &VectorSet,
    pairs: &[(usize, usize)],
) -> Result<Vec<f64>> {
    let expected = checkpoints(t.dim(), cal.delta_d());
    if expected != cal.checkpoints() {
        return Err(Error::config(format!(
            "calibration checkpoints {:?} do not match D={} (expected {:?})",
            cal.checkpoints(),
            t.dim(),
            expected
        )));
    }
    let (ratios, _) = pair_ratios(t, data, pairs, cal.checkpoints())?;
    Ok(ratios
        .iter()
        .zip(cal.epsilons())
        .map(|(r, &eps)| {
            if r.is_empty() {
                0.0
            } else {
                r.iter().filter(|&&x| x > eps).count() as f64 / r.len() as f64
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::{fit_pca, TransformKind};
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, stddevs: &[f64], seed: u64) -> VectorSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::with_capacity(n * stddevs.len());
        for _ in 0..n {
            for s in stddevs {
                let z: f64 = StandardNormal.sample(&mut rng);
                values.push((z * s) as f32);
            }
        }
        VectorSet::new(stddevs.len(), values).unwrap()
    }

    #[test]
    fn checkpoint_grid() {
        assert_eq!(checkpoints(64, 32), vec![32]);
        assert_eq!(checkpoints(65, 32), vec![32, 64]);
        assert_eq!(checkpoints(10, 3), vec![3, 6, 9]);
        assert_eq!(checkpoints(4, 8), Vec::<usize>::new());
        assert_eq!(default_pair_count(10), 45);
        assert_eq!(default_pair_count(10_000), 100_000);
    }

    #[test]
    fn pairs_from_two_vectors() {
        let pairs = sample_pairs(2, 100, 1).unwrap();
        assert!(pairs.iter().all(|&p| p == (0, 1) || p == (1, 0)));
        assert!(pairs.contains(&(0, 1)) && pairs.contains(&(1, 0)));
        assert!(sample_pairs(1, 10, 1).is_err());
        assert!(sample_pairs(5, 0, 1).is_err());
    }

    #[test]
    fn pairs_are_seed_deterministic() {
        assert_eq!(
            sample_pairs(1000, 500, 9).unwrap(),
            sample_pairs(1000, 500, 9).unwrap()
        );
        assert_ne!(
            sample_pairs(1000, 500, 9).unwrap(),
            sample_pairs(1000, 500, 10).unwrap()
        );
    }

    #[test]
    fn first_indices_are_uniform() {
        // Chi-square over 10 buckets; 21.666 is the 0.99 quantile at 9 dof.
        let pairs = sample_pairs(1000, 100_000, 4).unwrap();
        let mut buckets = [0usize; 10];
        for (i, j) in &pairs {
            assert_ne!(i, j);
            buckets[i / 100] += 1;
        }
        let expected = 10_000.0;
        let chi2: f64 = buckets
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 21.666, "chi2 = {chi2}");
    }

    #[test]
    fn quantile_rank() {
        let v: Vec<f64> = (1..=10).map(|x| x as f64).collect();
        assert_eq!(empirical_quantile(&v, 0.9), 9.0);
        assert_eq!(empirical_quantile(&v, 0.91), 10.0);
        assert_eq!(empirical_quantile(&v, 0.0), 1.0);
        assert_eq!(empirical_quantile(&v, 0.5), 5.0);
    }

    #[test]
    fn median_bound_is_near_zero_on_isotropic_data() {
        let data = gaussian(5_000, &[1.0; 16], 2);
        let t = fit_pca(&data).unwrap();
        let rotated = t.apply(&data).unwrap();
        let cal = calibrate(&t, &rotated, 0.5, 4, 50_000, 3).unwrap();
        for e in cal.epsilons() {
            assert!(e.abs() < 0.05, "{:?}", cal.epsilons());
        }
    }

    #[test]
    fn quantile_property_on_calibration_sample() {
        let data = gaussian(2_000, &[3.0, 2.0, 1.0, 1.0, 0.5, 0.5, 0.2, 0.1], 5);
        let t = fit_pca(&data).unwrap();
        let rotated = t.apply(&data).unwrap();
        let n = 20_000;
        let p_s = 0.1;
        let cal = calibrate(&t, &rotated, p_s, 2, n, 6).unwrap();
        assert_eq!(cal.sample_count(), n);
        // Raw quantiles, before the running minimum over d.
        let pairs = sample_pairs(rotated.len(), n, 6).unwrap();
        let cps = checkpoints(8, 2);
        let (mut ratios, _) = pair_ratios(&t, &rotated, &pairs, &cps).unwrap();
        for r in ratios.iter_mut() {
            r.sort_by(f64::total_cmp);
            let eps = empirical_quantile(r, 1.0 - p_s);
            let frac = r.iter().filter(|&&x| x > eps).count() as f64 / n as f64;
            assert!(frac <= p_s && frac > p_s - 1.0 / n as f64, "{frac}");
        }
    }

    #[test]
    fn bounds_are_monotone_in_d_and_in_level() {
        let data = gaussian(
            3_000,
            &[4.0, 3.0, 2.0, 1.5, 1.0, 0.8, 0.5, 0.3, 0.2, 0.1],
            7,
        );
        let t = fit_pca(&data).unwrap();
        let rotated = t.apply(&data).unwrap();
        let loose = calibrate(&t, &rotated, 0.3, 1, 20_000, 1).unwrap();
        let tight = calibrate(&t, &rotated, 0.05, 1, 20_000, 1).unwrap();
        for w in tight.epsilons().windows(2) {
            assert!(w[0] >= w[1]);
        }
        for (a, b) in tight.epsilons().iter().zip(loose.epsilons()) {
            assert!(a >= b);
        }
    }

    #[test]
    fn full_dimension_ratio_is_zero() {
        let data = gaussian(500, &[2.0, 1.0, 0.5], 8);
        let t = fit_pca(&data).unwrap();
        let rotated = t.apply(&data).unwrap();
        let pairs = sample_pairs(500, 1000, 2).unwrap();
        let (ratios, _) = pair_ratios(&t, &rotated, &pairs, &[3]).unwrap();
        assert!(ratios[0].iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn doubled_bounds_lower_exceedance() {
        let data = gaussian(3_000, &[3.0, 2.0, 1.0, 1.0, 0.5, 0.5, 0.2, 0.1], 10);
        let t = fit_pca(&data).unwrap();
        let rotated = t.apply(&data).unwrap();
        let cal = calibrate(&t, &rotated, 0.1, 2, 20_000, 11).unwrap();
        let holdout = sample_pairs(rotated.len(), 20_000, 12).unwrap();
        let base = validate_calibration(&cal, &t, &rotated, &holdout).unwrap();
        let doubled = validate_calibration(&cal.scaled(2.0), &t, &rotated, &holdout).unwrap();
        for (b, d) in base.iter().zip(&doubled) {
            assert!(d < &0.1 && d < b, "{b} -> {d}");
        }
    }

    #[test]
    fn identical_vectors_cannot_calibrate() {
        let data = VectorSet::from_rows(&[[1.0f32, 2.0, 3.0]; 10]).unwrap();
        let t = OrthoTransform::identity(3);
        assert!(matches!(
            calibrate(&t, &data, 0.1, 1, 100, 0),
            Err(Error::CalibrationImpossible { .. })
        ));
    }

    #[test]
    fn deterministic_and_round_trips() {
        let data = gaussian(1_000, &[2.0, 1.0, 1.0, 0.5, 0.5], 13);
        let t = fit_pca(&data).unwrap();
        assert_eq!(t.kind(), TransformKind::Pca);
        let rotated = t.apply(&data).unwrap();
        let a = calibrate(&t, &rotated, 0.1, 2, 5_000, 1).unwrap();
        let b = calibrate(&t, &rotated, 0.1, 2, 5_000, 1).unwrap();
        assert_eq!(a, b);

        let mut bytes = Vec::new();
        a.write_to(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 8 + 4 + 4 + 2 * 12);
        assert_eq!(&bytes[..8], &0.1f64.to_le_bytes());
        assert_eq!(&bytes[12..16], &2u32.to_le_bytes());
        let back = CalibrationTable::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back.epsilons(), a.epsilons());
        assert_eq!(back.checkpoints(), a.checkpoints());
        assert_eq!(back.sample_count(), 0);
        assert!(CalibrationTable::read_from(&bytes[..bytes.len() - 3]).is_err());
    }

    #[test]
    fn table_validation() {
        assert!(CalibrationTable::new(1.0, 2, vec![], vec![]).is_err());
        assert!(CalibrationTable::new(0.1, 0, vec![], vec![]).is_err());
        assert!(CalibrationTable::new(0.1, 2, vec![2, 6], vec![0.1, 0.1]).is_err());
        assert!(CalibrationTable::new(0.1, 2, vec![2], vec![]).is_err());
        assert!(CalibrationTable::new(0.1, 2, vec![2], vec![-1.0]).is_err());
        let t = CalibrationTable::unbounded(10, 4).unwrap();
        assert_eq!(t.checkpoints(), &[4, 8]);
        assert_eq!(t.epsilon_at(8), Some(f64::INFINITY));
        assert_eq!(t.epsilon_at(5), None);
    }
}
