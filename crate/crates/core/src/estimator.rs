//! Distance comparison operations (DCOs).
//!
//! A DCO decides whether a candidate `o` lies within distance `r` of a query
//! `q` and, if so, reports the distance. All strategies here work on vectors
//! already rotated by an [`OrthoTransform`] and compare squared values
//! internally.
//!
//! The adaptive strategies ([`Dade`], [`AdSampling`]) accumulate the squared
//! difference over a growing prefix of components and stop as soon as the
//! rescaled prefix rules out `dist <= r` with the configured confidence. A
//! candidate is only ever accepted after the full-dimension comparison, so
//! candidates farther than `r` are never accepted.

use crate::calibration::{checkpoints, CalibrationTable};
use crate::error::{Error, Result};
use crate::transform::OrthoTransform;

/// ε₀ used by ADSampling when nothing else is configured.
pub const DEFAULT_ADSAMPLING_EPSILON: f64 = 2.1;
/// Dimension expansion step.
pub const DEFAULT_DELTA_D: usize = 32;

/// A candidate vector whose components may live in two separate buffers:
/// `head` holds components `0..head.len()` and `tail` the rest.
#[derive(Debug, Clone, Copy)]
pub struct SplitRow<'a> {
    head: &'a [f32],
    tail: &'a [f32],
}

impl<'a> SplitRow<'a> {
    pub fn new(head: &'a [f32], tail: &'a [f32]) -> Self {
        SplitRow { head, tail }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.head.len() + self.tail.len()
    }

    /// Continues a running sum of squared differences over components
    /// `lo..hi`. Terms are added one at a time in component order, so chained
    /// calls over adjacent ranges produce the same bits as one call.
    #[inline]
    pub fn accumulate(&self, q: &[f32], lo: usize, hi: usize, mut acc: f32) -> f32 {
        let h = self.head.len();
        if lo < h {
            let end = hi.min(h);
            acc = accumulate_sq(&self.head[lo..end], &q[lo..end], acc);
        }
        if hi > h {
            let start = lo.max(h);
            acc = accumulate_sq(&self.tail[start - h..hi - h], &q[start..hi], acc);
        }
        acc
    }

    pub fn to_vec(&self) -> Vec<f32> {
        let mut v = self.head.to_vec();
        v.extend_from_slice(self.tail);
        v
    }
}

impl<'a> From<&'a [f32]> for SplitRow<'a> {
    fn from(row: &'a [f32]) -> Self {
        SplitRow {
            head: row,
            tail: &[],
        }
    }
}

#[inline]
fn accumulate_sq(a: &[f32], b: &[f32], acc: f32) -> f32 {
    a.iter().zip(b).fold(acc, |s, (x, y)| {
        let d = x - y;
        s + d * d
    })
}

/// `Σ_{k in lo..hi} (o_k - q_k)²`.
pub fn partial_sqdist(o: &[f32], q: &[f32], lo: usize, hi: usize) -> Result<f32> {
    if o.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: o.len(),
            found: q.len(),
        });
    }
    if lo >= hi || hi > o.len() {
        return Err(Error::invalid(format!(
            "component range {lo}..{hi} is empty or exceeds dimension {}",
            o.len()
        )));
    }
    Ok(accumulate_sq(&o[lo..hi], &q[lo..hi], 0.0))
}

/// Squared Euclidean distance with the same summation order as every DCO.
pub fn squared_distance(o: &[f32], q: &[f32]) -> f32 {
    accumulate_sq(o, q, 0.0)
}

/// Result of one distance comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DcoOutcome {
    /// `distance <= r`. `distance` is exact for every strategy except
    /// [`FixedDim`], which only ever sees a prefix.
    Accepted { distance: f32, dims_used: usize },
    /// Ruled out. `estimate` is the rescaled distance at the checkpoint that
    /// rejected, or the exact distance when the final comparison did.
    Pruned { estimate: f32, dims_used: usize },
}

impl DcoOutcome {
    pub fn is_pruned(&self) -> bool {
        matches!(self, DcoOutcome::Pruned { .. })
    }

    pub fn distance(&self) -> Option<f32> {
        match *self {
            DcoOutcome::Accepted { distance, .. } => Some(distance),
            DcoOutcome::Pruned { .. } => None,
        }
    }

    pub fn dims_used(&self) -> usize {
        match *self {
            DcoOutcome::Accepted { dims_used, .. } | DcoOutcome::Pruned { dims_used, .. } => {
                dims_used
            }
        }
    }

    /// Exact distance if accepted, otherwise the estimate. Used as a
    /// traversal key for candidates that were pruned.
    pub fn key(&self) -> f32 {
        match *self {
            DcoOutcome::Accepted { distance, .. } => distance,
            DcoOutcome::Pruned { estimate, .. } => estimate,
        }
    }
}

/// Per-thread DCO counters; merge after a run.
///
/// Stats created with [`DcoStats::auditing`] also compute the exact distance
/// of every observed candidate to count failures. That costs a full distance
/// per DCO, so it is meant for diagnostic passes only.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DcoStats {
    pub total_dco: u64,
    pub dims_accumulated: u64,
    /// DCOs checked against the exact distance.
    pub audited: u64,
    /// Audited DCOs that pruned a candidate with `dist <= r`.
    pub failures: u64,
    audit: bool,
}

impl DcoStats {
    pub fn auditing() -> Self {
        DcoStats {
            audit: true,
            ..Default::default()
        }
    }

    pub fn is_auditing(&self) -> bool {
        self.audit
    }

    /// Records the outcome of comparing `o` against `q` at threshold `r`.
    #[inline]
    pub fn observe(&mut self, outcome: &DcoOutcome, r: f32, o: SplitRow<'_>, q: &[f32]) {
        if self.audit {
            let exact = o.accumulate(q, 0, o.dim(), 0.0).sqrt();
            self.record_audited(outcome, r, exact);
        } else {
            self.record(outcome);
        }
    }

    #[inline]
    pub fn record(&mut self, outcome: &DcoOutcome) {
        self.total_dco += 1;
        self.dims_accumulated += outcome.dims_used() as u64;
    }

    /// Records `outcome` and checks it against the exact distance.
    pub fn record_audited(&mut self, outcome: &DcoOutcome, r: f32, exact: f32) {
        self.record(outcome);
        self.audited += 1;
        if outcome.is_pruned() && exact <= r {
            self.failures += 1;
        }
    }

    pub fn merge(&mut self, other: &DcoStats) {
        self.total_dco += other.total_dco;
        self.dims_accumulated += other.dims_accumulated;
        self.audited += other.audited;
        self.failures += other.failures;
    }

    /// Mean fraction of the `dim` components touched per DCO.
    pub fn dimension_fraction(&self, dim: usize) -> f64 {
        if self.total_dco == 0 {
            return 0.0;
        }
        self.dims_accumulated as f64 / (self.total_dco as f64 * dim as f64)
    }

    pub fn failure_rate(&self) -> Option<f64> {
        (self.audited > 0).then(|| self.failures as f64 / self.audited as f64)
    }
}

/// A distance comparison strategy over rotated vectors.
pub trait DistanceComparator: Send + Sync {
    fn dim(&self) -> usize;

    /// Decides whether `o` lies within distance `r` of `q`. `r` may be
    /// `f32::INFINITY`, in which case every candidate is accepted.
    fn compare(&self, o: SplitRow<'_>, q: &[f32], r: f32) -> DcoOutcome;

    /// Components a split-layout index should place in the contiguous head
    /// region, if the strategy reads a fixed leading block first.
    fn leading_block(&self) -> Option<usize> {
        None
    }
}

impl<T: DistanceComparator + ?Sized> DistanceComparator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn compare(&self, o: SplitRow<'_>, q: &[f32], r: f32) -> DcoOutcome {
        (**self).compare(o, q, r)
    }
    fn leading_block(&self) -> Option<usize> {
        (**self).leading_block()
    }
}

impl<T: DistanceComparator + ?Sized> DistanceComparator for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn compare(&self, o: SplitRow<'_>, q: &[f32], r: f32) -> DcoOutcome {
        (**self).compare(o, q, r)
    }
    fn leading_block(&self) -> Option<usize> {
        (**self).leading_block()
    }
}

/// Exact comparison over all components.
#[derive(Debug, Clone, Copy)]
pub struct FdScanning {
    dim: usize,
}

impl FdScanning {
    pub fn new(dim: usize) -> Self {
        FdScanning { dim }
    }
}

impl DistanceComparator for FdScanning {
    fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn compare(&self, o: SplitRow<'_>, q: &[f32], r: f32) -> DcoOutcome {
        let sq = o.accumulate(q, 0, self.dim, 0.0);
        let distance = sq.sqrt();
        if sq <= r * r {
            DcoOutcome::Accepted {
                distance,
                dims_used: self.dim,
            }
        } else {
            DcoOutcome::Pruned {
                estimate: distance,
                dims_used: self.dim,
            }
        }
    }
}

pub fn fd_scanning_dco(o: &[f32], q: &[f32], r: f32) -> Result<DcoOutcome> {
    check_pair(o, q)?;
    Ok(FdScanning::new(o.len()).compare(o.into(), q, r))
}

fn check_pair(o: &[f32], q: &[f32]) -> Result<()> {
    if o.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: o.len(),
            found: q.len(),
        });
    }
    Ok(())
}

/// A DADE estimate of a squared distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub squared: f64,
    /// The first `d` components carry no variance, so the estimate fell
    /// back to the unscaled partial sum.
    pub degenerate: bool,
}

/// `Σλ / Σ_{k<=d} λ_k`, or `None` when the leading `d` components carry no
/// variance.
pub fn dade_scale(t: &OrthoTransform, d: usize) -> Option<f64> {
    let captured = t.lambda_prefix()[d];
    if captured > 0.0 {
        Some(t.total_variance() / captured)
    } else {
        None
    }
}

/// Rescales the squared partial distance over the first `d` components by the
/// share of total variance they carry.
pub fn dade_estimate(t: &OrthoTransform, partial: f64, d: usize) -> Result<Estimate> {
    if d == 0 || d > t.dim() {
        return Err(Error::invalid(format!(
            "estimate dimension {d} outside 1..={}",
            t.dim()
        )));
    }
    if d == t.dim() {
        return Ok(Estimate {
            squared: partial,
            degenerate: false,
        });
    }
    Ok(match dade_scale(t, d) {
        Some(scale) => Estimate {
            squared: scale * partial,
            degenerate: false,
        },
        None => {
            log::warn!("leading {d} components have zero variance; estimate left unscaled");
            Estimate {
                squared: partial,
                degenerate: true,
            }
        }
    })
}

/// The data-oblivious `D/d` rescaling used with random rotations.
pub fn adsampling_estimate(partial: f64, d: usize, dim: usize) -> Result<f64> {
    if d == 0 || d > dim {
        return Err(Error::invalid(format!(
            "estimate dimension {d} outside 1..={dim}"
        )));
    }
    Ok(partial * dim as f64 / d as f64)
}

/// One intermediate test of an adaptive DCO.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Checkpoint {
    d: usize,
    /// Reject when `partial > reject_factor * r²`; `None` never rejects.
    reject_factor: Option<f32>,
    /// Squared-distance scale applied to the partial sum.
    scale: f32,
}

#[inline]
fn adaptive_compare(
    checkpoints: &[Checkpoint],
    dim: usize,
    o: SplitRow<'_>,
    q: &[f32],
    r: f32,
) -> DcoOutcome {
    let r2 = r * r;
    let mut acc = 0.0f32;
    let mut done = 0;
    for cp in checkpoints {
        acc = o.accumulate(q, done, cp.d, acc);
        done = cp.d;
        if let Some(factor) = cp.reject_factor {
            if acc > factor * r2 {
                return DcoOutcome::Pruned {
                    estimate: (cp.scale * acc).sqrt(),
                    dims_used: cp.d,
                };
            }
        }
    }
    acc = o.accumulate(q, done, dim, acc);
    let distance = acc.sqrt();
    if acc <= r2 {
        DcoOutcome::Accepted {
            distance,
            dims_used: dim,
        }
    } else {
        DcoOutcome::Pruned {
            estimate: distance,
            dims_used: dim,
        }
    }
}

/// Data-aware adaptive DCO: PCA-rotated vectors, eigenvalue-ratio rescaling
/// and per-checkpoint calibrated error bounds.
///
/// At each checkpoint `d` the candidate is rejected when the estimated
/// distance exceeds `(1 + ε_d) r`.
#[derive(Debug, Clone)]
pub struct Dade {
    dim: usize,
    delta_d: usize,
    checkpoints: Vec<Checkpoint>,
}

impl Dade {
    pub fn new(t: &OrthoTransform, cal: &CalibrationTable) -> Result<Self> {
        let dim = t.dim();
        let expected = checkpoints(dim, cal.delta_d());
        if cal.checkpoints() != expected.as_slice() {
            return Err(Error::config(format!(
                "calibration checkpoints {:?} do not match D={dim}, delta_d={} (expected {:?})",
                cal.checkpoints(),
                cal.delta_d(),
                expected
            )));
        }
        let checkpoints = cal
            .checkpoints()
            .iter()
            .zip(cal.epsilons())
            .map(|(&d, &eps)| match dade_scale(t, d) {
                Some(scale) => {
                    let bound = (1.0 + eps) * (1.0 + eps) / scale;
                    Checkpoint {
                        d,
                        reject_factor: bound.is_finite().then_some(bound as f32),
                        scale: scale as f32,
                    }
                }
                None => Checkpoint {
                    d,
                    reject_factor: None,
                    scale: 1.0,
                },
            })
            .collect();
        Ok(Dade {
            dim,
            delta_d: cal.delta_d(),
            checkpoints,
        })
    }

    pub fn delta_d(&self) -> usize {
        self.delta_d
    }
}

impl DistanceComparator for Dade {
    fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn compare(&self, o: SplitRow<'_>, q: &[f32], r: f32) -> DcoOutcome {
        adaptive_compare(&self.checkpoints, self.dim, o, q, r)
    }

    fn leading_block(&self) -> Option<usize> {
        Some(self.delta_d.min(self.dim))
    }
}

pub fn dade_dco(
    o: &[f32],
    q: &[f32],
    r: f32,
    t: &OrthoTransform,
    cal: &CalibrationTable,
) -> Result<DcoOutcome> {
    check_pair(o, q)?;
    if o.len() != t.dim() {
        return Err(Error::DimensionMismatch {
            expected: t.dim(),
            found: o.len(),
        });
    }
    Ok(Dade::new(t, cal)?.compare(o.into(), q, r))
}

/// Random-rotation adaptive DCO: `D/d` rescaling with the `(1 + ε₀/√d)`
/// multiplicative bound.
#[derive(Debug, Clone)]
pub struct AdSampling {
    dim: usize,
    delta_d: usize,
    epsilon0: f64,
    checkpoints: Vec<Checkpoint>,
}

impl AdSampling {
    pub fn new(dim: usize, delta_d: usize, epsilon0: f64) -> Result<Self> {
        if dim == 0 || delta_d == 0 {
            return Err(Error::invalid("dimension and delta_d must be positive"));
        }
        if epsilon0.is_nan() || epsilon0 < 0.0 {
            return Err(Error::invalid(format!(
                "epsilon0 must be nonnegative, got {epsilon0}"
            )));
        }
        let checkpoints = checkpoints(dim, delta_d)
            .into_iter()
            .map(|d| {
                let scale = dim as f64 / d as f64;
                let bound = 1.0 + epsilon0 / (d as f64).sqrt();
                let factor = bound * bound / scale;
                Checkpoint {
                    d,
                    reject_factor: factor.is_finite().then_some(factor as f32),
                    scale: scale as f32,
                }
            })
            .collect();
        Ok(AdSampling {
            dim,
            delta_d,
            epsilon0,
            checkpoints,
        })
    }

    pub fn epsilon0(&self) -> f64 {
        self.epsilon0
    }
}

impl DistanceComparator for AdSampling {
    fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn compare(&self, o: SplitRow<'_>, q: &[f32], r: f32) -> DcoOutcome {
        adaptive_compare(&self.checkpoints, self.dim, o, q, r)
    }

    fn leading_block(&self) -> Option<usize> {
        Some(self.delta_d.min(self.dim))
    }
}

pub fn adsampling_dco(
    o: &[f32],
    q: &[f32],
    r: f32,
    delta_d: usize,
    epsilon0: f64,
) -> Result<DcoOutcome> {
    check_pair(o, q)?;
    Ok(AdSampling::new(o.len(), delta_d, epsilon0)?.compare(o.into(), q, r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleRule {
    /// Eigenvalue-ratio rescaling of a PCA rotation.
    PcaVariance,
    /// `D/d` rescaling of a random rotation.
    DimensionRatio,
}

/// Single-shot estimate over a fixed number of leading components, with no
/// expansion and no exact fallback. Accepted distances are estimates.
#[derive(Debug, Clone)]
pub struct FixedDim {
    dim: usize,
    d_fixed: usize,
    scale: f32,
}

impl FixedDim {
    pub fn new(t: &OrthoTransform, d_fixed: usize, rule: ScaleRule) -> Result<Self> {
        let dim = t.dim();
        if d_fixed == 0 || d_fixed > dim {
            return Err(Error::invalid(format!(
                "fixed dimension {d_fixed} outside 1..={dim}"
            )));
        }
        let scale = match rule {
            _ if d_fixed == dim => 1.0,
            ScaleRule::PcaVariance => dade_scale(t, d_fixed).unwrap_or(1.0),
            ScaleRule::DimensionRatio => dim as f64 / d_fixed as f64,
        };
        Ok(FixedDim {
            dim,
            d_fixed,
            scale: scale as f32,
        })
    }

    pub fn d_fixed(&self) -> usize {
        self.d_fixed
    }
}

impl DistanceComparator for FixedDim {
    fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn compare(&self, o: SplitRow<'_>, q: &[f32], r: f32) -> DcoOutcome {
        let partial = o.accumulate(q, 0, self.d_fixed, 0.0);
        let est = self.scale * partial;
        let distance = est.sqrt();
        if est <= r * r {
            DcoOutcome::Accepted {
                distance,
                dims_used: self.d_fixed,
            }
        } else {
            DcoOutcome::Pruned {
                estimate: distance,
                dims_used: self.d_fixed,
            }
        }
    }

    fn leading_block(&self) -> Option<usize> {
        Some(self.d_fixed)
    }
}

pub fn fixed_dim_dco(
    o: &[f32],
    q: &[f32],
    r: f32,
    t: &OrthoTransform,
    d_fixed: usize,
    rule: ScaleRule,
) -> Result<DcoOutcome> {
    check_pair(o, q)?;
    Ok(FixedDim::new(t, d_fixed, rule)?.compare(o.into(), q, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::TransformKind;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f32> {
        (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn diag_transform(eigenvalues: Vec<f64>) -> OrthoTransform {
        let d = eigenvalues.len();
        let mut m = vec![0.0; d * d];
        for k in 0..d {
            m[k * d + k] = 1.0;
        }
        OrthoTransform::from_parts(TransformKind::Pca, vec![0.0; d], eigenvalues, m).unwrap()
    }

    #[test]
    fn fd_identical_vectors() {
        let o = [0.5f32, -1.0, 2.0];
        let out = fd_scanning_dco(&o, &o, 0.0).unwrap();
        assert_eq!(
            out,
            DcoOutcome::Accepted {
                distance: 0.0,
                dims_used: 3
            }
        );
    }

    #[test]
    fn fd_three_four_five() {
        let out = fd_scanning_dco(&[3.0, 4.0], &[0.0, 0.0], 5.0).unwrap();
        assert_eq!(out.distance(), Some(5.0));
        let out = fd_scanning_dco(&[3.0, 4.0], &[0.0, 0.0], 4.99).unwrap();
        assert!(out.is_pruned());
        assert_eq!(out.key(), 5.0);
    }

    #[test]
    fn fd_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let o = random_vec(&mut rng, 32);
            let q = random_vec(&mut rng, 32);
            let mut naive = 0.0f64;
            for i in 0..32 {
                naive += ((o[i] - q[i]) as f64).powi(2);
            }
            let d = fd_scanning_dco(&o, &q, f32::INFINITY)
                .unwrap()
                .distance()
                .unwrap() as f64;
            assert!((d - naive.sqrt()).abs() <= 1e-6 * naive.sqrt());
        }
    }

    #[test]
    fn fd_dimension_mismatch() {
        assert!(matches!(
            fd_scanning_dco(&[1.0], &[1.0, 2.0], 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn partial_range_checks() {
        let o = [1.0f32, 5.0, 5.0];
        let q = [0.0f32, 0.0, 0.0];
        assert_eq!(partial_sqdist(&o, &q, 0, 1).unwrap(), 1.0);
        assert_eq!(
            partial_sqdist(&o, &q, 0, 3).unwrap(),
            squared_distance(&o, &q)
        );
        assert!(partial_sqdist(&o, &q, 1, 1).is_err());
        assert!(partial_sqdist(&o, &q, 2, 4).is_err());
    }

    proptest! {
        #[test]
        fn partial_sums_are_additive(
            pair in (2usize..64).prop_flat_map(|d| (
                prop::collection::vec(-10.0f32..10.0, d),
                prop::collection::vec(-10.0f32..10.0, d),
                1..d,
            ))
        ) {
            let (o, q, m) = pair;
            let d = o.len();
            let whole = partial_sqdist(&o, &q, 0, d).unwrap();
            let split = partial_sqdist(&o, &q, 0, m).unwrap() + partial_sqdist(&o, &q, m, d).unwrap();
            prop_assert!((whole - split).abs() <= 1e-5 * whole.max(1e-30));
        }

        #[test]
        fn split_rows_accumulate_like_contiguous(
            pair in (2usize..40).prop_flat_map(|d| (
                prop::collection::vec(-3.0f32..3.0, d),
                prop::collection::vec(-3.0f32..3.0, d),
                0..=d, 0..=d, 0..=d,
            ))
        ) {
            let (o, q, h, a, b) = pair;
            let (lo, hi) = (a.min(b), a.max(b));
            let split = SplitRow::new(&o[..h], &o[h..]);
            let whole = SplitRow::from(o.as_slice());
            prop_assert_eq!(split.accumulate(&q, lo, hi, 0.5), whole.accumulate(&q, lo, hi, 0.5));
            prop_assert_eq!(split.to_vec(), o);
        }
    }

    #[test]
    fn dade_estimate_formula() {
        let t = diag_transform(vec![3.0, 1.0]);
        assert_eq!(dade_estimate(&t, 6.0, 1).unwrap().squared, 8.0);
        assert_eq!(dade_estimate(&t, 6.0, 2).unwrap().squared, 6.0);
        assert!(dade_estimate(&t, 6.0, 0).is_err());
        assert!(dade_estimate(&t, 6.0, 3).is_err());
    }

    #[test]
    fn dade_estimate_degenerate_prefix() {
        let t = diag_transform(vec![0.0, 0.0, 0.0]);
        let e = dade_estimate(&t, 2.0, 1).unwrap();
        assert!(e.degenerate);
        assert_eq!(e.squared, 2.0);
    }

    #[test]
    fn adsampling_estimate_formula() {
        assert_eq!(adsampling_estimate(2.0, 8, 32).unwrap(), 8.0);
        assert_eq!(adsampling_estimate(2.0, 32, 32).unwrap(), 2.0);
        assert!(adsampling_estimate(2.0, 33, 32).is_err());
    }

    fn unbounded(dim: usize, delta: usize) -> CalibrationTable {
        CalibrationTable::unbounded(dim, delta).unwrap()
    }

    #[test]
    fn dade_identical_vectors_accepted_at_full_dimension() {
        let t = diag_transform(vec![4.0, 2.0, 1.0, 0.5, 0.25]);
        let cal = CalibrationTable::new(0.1, 2, vec![2, 4], vec![0.0, 0.0]).unwrap();
        let o = [1.0f32, 2.0, 3.0, 4.0, 5.0];
        for r in [0.0f32, 0.1, 10.0] {
            let out = dade_dco(&o, &o, r, &t, &cal).unwrap();
            assert_eq!(
                out,
                DcoOutcome::Accepted {
                    distance: 0.0,
                    dims_used: 5
                }
            );
        }
    }

    #[test]
    fn dade_prunes_at_first_checkpoint_and_final_check_is_exact() {
        let t = diag_transform(vec![1.0, 1.0, 1.0, 1.0]);
        let cal = CalibrationTable::new(0.1, 2, vec![2], vec![0.0]).unwrap();
        let q = [0.0f32; 4];
        // Prefix estimate 2 * (1 + 1) = 4 > 1.9².
        let far = [1.0f32, 1.0, 0.0, 0.0];
        let out = dade_dco(&far, &q, 1.9, &t, &cal).unwrap();
        assert_eq!(
            out,
            DcoOutcome::Pruned {
                estimate: 2.0,
                dims_used: 2
            }
        );
        // Prefix estimate is 0, exact distance 2 > r: pruned only at D.
        let hidden = [0.0f32, 0.0, 2.0, 0.0];
        let out = dade_dco(&hidden, &q, 1.9, &t, &cal).unwrap();
        assert_eq!(
            out,
            DcoOutcome::Pruned {
                estimate: 2.0,
                dims_used: 4
            }
        );
    }

    #[test]
    fn dade_unbounded_calibration_equals_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = diag_transform((0..37).map(|k| 1.0 / (k + 1) as f64).collect());
        let dade = Dade::new(&t, &unbounded(37, 8)).unwrap();
        let fd = FdScanning::new(37);
        for _ in 0..500 {
            let o = random_vec(&mut rng, 37);
            let q = random_vec(&mut rng, 37);
            let r = rng.random_range(0.0..4.0);
            assert_eq!(
                dade.compare(o.as_slice().into(), &q, r),
                fd.compare(o.as_slice().into(), &q, r)
            );
        }
    }

    #[test]
    fn dade_rejects_mismatched_calibration() {
        let t = diag_transform(vec![1.0; 10]);
        let cal = unbounded(10, 4);
        assert!(Dade::new(&t, &cal).is_ok());
        let other = unbounded(13, 4);
        assert!(matches!(Dade::new(&t, &other), Err(Error::Config(_))));
    }

    #[test]
    fn dade_degenerate_prefix_never_rejects_early() {
        let t = diag_transform(vec![0.0; 6]);
        let cal = CalibrationTable::new(0.1, 2, vec![2, 4], vec![0.0, 0.0]).unwrap();
        let out = dade_dco(&[5.0; 6], &[0.0; 6], 1.0, &t, &cal).unwrap();
        assert_eq!(out.dims_used(), 6);
        assert!(out.is_pruned());
    }

    #[test]
    fn dims_used_are_checkpoints_or_full() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ads = AdSampling::new(50, 16, 0.5).unwrap();
        for _ in 0..200 {
            let o = random_vec(&mut rng, 50);
            let q = random_vec(&mut rng, 50);
            let used = ads.compare(o.as_slice().into(), &q, 0.5).dims_used();
            assert!(used == 50 || used % 16 == 0, "{used}");
        }
    }

    #[test]
    fn adsampling_infinite_epsilon_equals_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ads = AdSampling::new(20, 4, f64::INFINITY).unwrap();
        let fd = FdScanning::new(20);
        for _ in 0..300 {
            let o = random_vec(&mut rng, 20);
            let q = random_vec(&mut rng, 20);
            let r = rng.random_range(0.0..3.0);
            assert_eq!(
                ads.compare(o.as_slice().into(), &q, r),
                fd.compare(o.as_slice().into(), &q, r)
            );
        }
    }

    #[test]
    fn adsampling_threshold() {
        // D=4, d=1: estimate 4 * 1 = 4 vs ((1 + 1) * r)² = 4r².
        let ads = AdSampling::new(4, 1, 1.0).unwrap();
        let q = [0.0f32; 4];
        let o = [1.0f32, 0.0, 0.0, 0.0];
        assert!(ads.compare(o.as_slice().into(), &q, 0.99).dims_used() == 1);
        // At r = 1 the first checkpoint does not fire and d=2 bound is looser.
        let out = ads.compare(o.as_slice().into(), &q, 1.0);
        assert_eq!(out.distance(), Some(1.0));
    }

    #[test]
    fn never_accepts_beyond_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let t = diag_transform((0..24).map(|k| 1.0 / (k + 1) as f64).collect());
        let cal = CalibrationTable::new(0.5, 5, vec![5, 10, 15, 20], vec![-0.5; 4]).unwrap();
        let dade = Dade::new(&t, &cal).unwrap();
        let ads = AdSampling::new(24, 5, 0.0).unwrap();
        for _ in 0..2000 {
            let o = random_vec(&mut rng, 24);
            let q = random_vec(&mut rng, 24);
            let exact = squared_distance(&o, &q).sqrt();
            let r = exact * rng.random_range(0.0..0.999);
            assert!(dade.compare(o.as_slice().into(), &q, r).is_pruned());
            assert!(ads.compare(o.as_slice().into(), &q, r).is_pruned());
        }
    }

    #[test]
    fn fixed_dim_full_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = diag_transform(vec![2.0, 1.0, 1.0, 0.5]);
        for rule in [ScaleRule::PcaVariance, ScaleRule::DimensionRatio] {
            let f = FixedDim::new(&t, 4, rule).unwrap();
            let fd = FdScanning::new(4);
            for _ in 0..100 {
                let o = random_vec(&mut rng, 4);
                let q = random_vec(&mut rng, 4);
                assert_eq!(
                    f.compare(o.as_slice().into(), &q, 1.0),
                    fd.compare(o.as_slice().into(), &q, 1.0)
                );
            }
        }
        assert!(FixedDim::new(&t, 0, ScaleRule::PcaVariance).is_err());
    }

    #[test]
    fn fixed_dim_scales() {
        let t = diag_transform(vec![3.0, 1.0]);
        let o = [2.0f32, 100.0];
        let q = [0.0f32, 0.0];
        // PCA: 4 * 4/3; random: 4 * 2.
        let p = fixed_dim_dco(&o, &q, 10.0, &t, 1, ScaleRule::PcaVariance).unwrap();
        assert!((p.distance().unwrap() - (16.0f32 / 3.0).sqrt()).abs() < 1e-6);
        let r = fixed_dim_dco(&o, &q, 10.0, &t, 1, ScaleRule::DimensionRatio).unwrap();
        assert!((r.distance().unwrap() - 8.0f32.sqrt()).abs() < 1e-6);
        assert_eq!(r.dims_used(), 1);
    }

    #[test]
    fn stats_accounting() {
        let mut s = DcoStats::default();
        s.record_audited(
            &DcoOutcome::Pruned {
                estimate: 3.0,
                dims_used: 8,
            },
            2.0,
            1.5,
        );
        s.record_audited(
            &DcoOutcome::Pruned {
                estimate: 3.0,
                dims_used: 8,
            },
            2.0,
            2.5,
        );
        s.record(&DcoOutcome::Accepted {
            distance: 1.0,
            dims_used: 32,
        });
        assert_eq!(s.total_dco, 3);
        assert_eq!(s.dims_accumulated, 48);
        assert_eq!(s.failures, 1);
        assert_eq!(s.failure_rate(), Some(0.5));
        assert!((s.dimension_fraction(32) - 0.5).abs() < 1e-12);
        let mut t = DcoStats::default();
        t.merge(&s);
        assert_eq!(t, s);
    }
}
