//! Shared fixtures for the criterion benches.

use dade_core::calibration::calibrate;
use dade_core::synthetic::{generate, SyntheticConfig};
use dade_core::{
    fit_pca, fit_random_orthogonal, AdSampling, CalibrationTable, Dade, FdScanning, OrthoTransform,
    Result, VectorSet,
};

/// Rotated base and query vectors for one transform.
pub struct Rotated {
    pub transform: OrthoTransform,
    pub base: VectorSet,
    pub queries: VectorSet,
}

pub struct Fixture {
    pub pca: Rotated,
    pub random: Rotated,
    pub calibration: CalibrationTable,
    pub delta_d: usize,
}

impl Fixture {
    /// Anisotropic synthetic data with both transforms fitted and a DADE table
    /// calibrated at `p_s`.
    pub fn new(count: usize, queries: usize, dim: usize, delta_d: usize, p_s: f64) -> Result<Self> {
        let ds = generate(&SyntheticConfig {
            count,
            queries,
            dim,
            seed: 11,
            ..Default::default()
        })?;
        let q = ds.queries.expect("queries requested");
        let rotate = |t: OrthoTransform| -> Result<Rotated> {
            Ok(Rotated {
                base: t.apply(&ds.data)?,
                queries: t.apply(&q)?,
                transform: t,
            })
        };
        let pca = rotate(fit_pca(&ds.data)?)?;
        let random = rotate(fit_random_orthogonal(dim, 12, &ds.data)?)?;
        let calibration = calibrate(&pca.transform, &pca.base, p_s, delta_d, 20_000, 13)?;
        Ok(Self {
            pca,
            random,
            calibration,
            delta_d,
        })
    }

    pub fn fd(&self) -> FdScanning {
        FdScanning::new(self.pca.base.dim())
    }

    pub fn dade(&self) -> Dade {
        Dade::new(&self.pca.transform, &self.calibration).expect("fixture calibration matches")
    }

    pub fn ads(&self, eps0: f64) -> AdSampling {
        AdSampling::new(self.random.base.dim(), self.delta_d, eps0).expect("valid ads parameters")
    }
}
