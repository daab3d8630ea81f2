//! Consistency checks between artifacts and construction of comparators.

use dade_core::calibration::{calibrate, default_pair_count};
use dade_core::{
    AdSampling, CalibrationTable, Dade, DistanceComparator, Error, FdScanning, FixedDim,
    OrthoTransform, Result, ScaleRule, VectorSet,
};

use crate::spec::DcoKind;

pub fn check_dim(what: &str, found: usize, against: &str, expected: usize) -> Result<()> {
    if found != expected {
        return Err(Error::Config(format!(
            "{what} has D={found} but {against} has D={expected}"
        )));
    }
    Ok(())
}

pub fn check_transform_kind(dco: DcoKind, t: &OrthoTransform) -> Result<()> {
    match dco.transform_kind() {
        Some(kind) if kind != t.kind() => Err(Error::Config(format!(
            "dco {dco} needs a {kind} transform but the transform is {}",
            t.kind()
        ))),
        _ => Ok(()),
    }
}

pub fn check_calibration(cal: &CalibrationTable, t: &OrthoTransform, delta_d: usize) -> Result<()> {
    if cal.delta_d() != delta_d {
        return Err(Error::Config(format!(
            "calibration has delta_d={} but delta_d={delta_d} was requested",
            cal.delta_d()
        )));
    }
    if cal.checkpoints().last().is_some_and(|&d| d >= t.dim()) {
        return Err(Error::Config(format!(
            "calibration checkpoints reach d={} but the transform has D={}",
            cal.checkpoints().last().unwrap(),
            t.dim()
        )));
    }
    Ok(())
}

/// Calibration for `p_s`: the loaded table when it matches, otherwise a
/// table fitted on `base` (rotated vectors).
pub fn calibration_for(
    loaded: Option<&CalibrationTable>,
    t: &OrthoTransform,
    base: &VectorSet,
    p_s: f64,
    delta_d: usize,
    pairs: Option<usize>,
    seed: u64,
) -> Result<CalibrationTable> {
    if let Some(cal) = loaded {
        check_calibration(cal, t, delta_d)?;
        if cal.p_s() != p_s {
            return Err(Error::Config(format!(
                "calibration has p_s={} but p_s={p_s} was requested",
                cal.p_s()
            )));
        }
        return Ok(cal.clone());
    }
    let n_pairs = pairs.unwrap_or_else(|| default_pair_count(base.len()));
    calibrate(t, base, p_s, delta_d, n_pairs, seed)
}

/// A strategy instance for one grid value: `p_s` for dade (through `cal`),
/// `eps0` for ads, `d_fixed` for the fixed strategies.
pub fn comparator(
    dco: DcoKind,
    t: &OrthoTransform,
    delta_d: usize,
    eps0: f64,
    d_fixed: usize,
    cal: Option<&CalibrationTable>,
) -> Result<Box<dyn DistanceComparator>> {
    check_transform_kind(dco, t)?;
    Ok(match dco {
        DcoKind::Fd => Box::new(FdScanning::new(t.dim())),
        DcoKind::Ads => Box::new(AdSampling::new(t.dim(), delta_d, eps0)?),
        DcoKind::Dade => {
            let cal = cal.ok_or_else(|| Error::Config("dade needs a calibration".into()))?;
            Box::new(Dade::new(t, cal)?)
        }
        DcoKind::FixedPca => Box::new(FixedDim::new(t, d_fixed, ScaleRule::PcaVariance)?),
        DcoKind::FixedRandom => Box::new(FixedDim::new(t, d_fixed, ScaleRule::DimensionRatio)?),
    })
}
