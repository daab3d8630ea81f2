//! Linear-scan comparison of DCO strategies: recall against the fraction of
//! dimensions each strategy reads.

use std::io::Write;

use dade_core::{
    compute_ground_truth, fit_pca, fit_random_orthogonal, linear_scan, recall, CalibrationTable,
    DcoStats, Error, GroundTruth, OrthoTransform, Result, VectorSet,
};

use crate::artifacts::{calibration_for, check_dim, comparator};
use crate::spec::{DcoKind, FeasibilitySpec};
use crate::sweep::{strategy_grid, ParamValue};

pub const FEASIBILITY_SCHEMA: &str = "# dade-feasibility v1";
pub const FEASIBILITY_COLUMNS: &str =
    "dco,delta_d,param_name,param,k,recall,dim_fraction,failure_rate";

/// Both rotations of one dataset plus exact neighbors.
#[derive(Debug, Clone)]
pub struct FeasibilityData {
    pub pca: OrthoTransform,
    pub random: OrthoTransform,
    pub pca_base: VectorSet,
    pub pca_queries: VectorSet,
    pub random_base: VectorSet,
    pub random_queries: VectorSet,
    pub truth: GroundTruth,
}

impl FeasibilityData {
    /// Fits both transforms on `data`. Ground truth is computed when not
    /// supplied.
    pub fn prepare(
        data: &VectorSet,
        queries: &VectorSet,
        truth: Option<GroundTruth>,
        k: usize,
        seed: u64,
    ) -> Result<Self> {
        check_dim("queries", queries.dim(), "data", data.dim())?;
        let pca = fit_pca(data)?;
        let random = fit_random_orthogonal(data.dim(), seed, data)?;
        Self::from_transforms(data, queries, truth, k, pca, random)
    }

    pub fn from_transforms(
        data: &VectorSet,
        queries: &VectorSet,
        truth: Option<GroundTruth>,
        k: usize,
        pca: OrthoTransform,
        random: OrthoTransform,
    ) -> Result<Self> {
        check_dim("pca transform", pca.dim(), "data", data.dim())?;
        check_dim("random transform", random.dim(), "data", data.dim())?;
        let truth = match truth {
            Some(g) => {
                if g.len() != queries.len() {
                    return Err(Error::Config(format!(
                        "ground truth has {} queries but {} queries were supplied",
                        g.len(),
                        queries.len()
                    )));
                }
                if g.k() < k {
                    return Err(Error::Config(format!(
                        "ground truth has k={} but k={k} was requested",
                        g.k()
                    )));
                }
                g.truncated(k)?
            }
            None => compute_ground_truth(data, queries, k)?,
        };
        Ok(FeasibilityData {
            pca_base: pca.apply(data)?,
            pca_queries: pca.apply(queries)?,
            random_base: random.apply(data)?,
            random_queries: random.apply(queries)?,
            pca,
            random,
            truth,
        })
    }

    fn rotated(&self, dco: DcoKind) -> (&OrthoTransform, &VectorSet, &VectorSet) {
        match dco {
            DcoKind::Ads | DcoKind::FixedRandom => {
                (&self.random, &self.random_base, &self.random_queries)
            }
            _ => (&self.pca, &self.pca_base, &self.pca_queries),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityRow {
    pub dco: DcoKind,
    /// `None` for strategies without dimension expansion.
    pub delta_d: Option<usize>,
    pub param: ParamValue,
    pub k: usize,
    pub recall: f64,
    pub dim_fraction: f64,
    pub failure_rate: f64,
}

impl FeasibilityRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{:.6},{:.6},{:.6}",
            self.dco,
            self.delta_d.map_or("NA".to_string(), |d| d.to_string()),
            self.dco.param_name(),
            self.param,
            self.k,
            self.recall,
            self.dim_fraction,
            self.failure_rate
        )
    }
}

pub fn write_feasibility_csv<W: Write>(mut w: W, rows: &[FeasibilityRow]) -> std::io::Result<()> {
    writeln!(w, "{FEASIBILITY_SCHEMA}")?;
    writeln!(w, "{FEASIBILITY_COLUMNS}")?;
    for row in rows {
        writeln!(w, "{}", row.to_csv())?;
    }
    Ok(())
}

/// Recall, dimension fraction and failure rate of one strategy instance
/// under linear scan. `truth` must list exactly `k` ids per query.
pub fn evaluate(
    data: &FeasibilityData,
    truth: &GroundTruth,
    dco: DcoKind,
    delta_d: usize,
    param: ParamValue,
    cal: Option<&CalibrationTable>,
    k: usize,
) -> Result<FeasibilityRow> {
    let (t, base, queries) = data.rotated(dco);
    let (eps0, d_fixed) = match param {
        ParamValue::Real(v) => (v, t.dim()),
        ParamValue::Count(d) => (0.0, d),
        ParamValue::None => (0.0, t.dim()),
    };
    let cmp = comparator(dco, t, delta_d, eps0, d_fixed, cal)?;
    let mut stats = DcoStats::auditing();
    let ids: Vec<Vec<u32>> = queries
        .rows()
        .map(|q| linear_scan(base, q, k, &*cmp, &mut stats).map(|r| r.ids()))
        .collect::<Result<_>>()?;
    let adaptive = matches!(dco, DcoKind::Ads | DcoKind::Dade);
    Ok(FeasibilityRow {
        dco,
        delta_d: adaptive.then_some(delta_d),
        param,
        k,
        recall: recall(&ids, truth)?,
        dim_fraction: stats.dimension_fraction(t.dim()),
        failure_rate: stats.failure_rate().unwrap_or(0.0),
    })
}

pub fn run_feasibility(
    data: &FeasibilityData,
    spec: &FeasibilitySpec,
) -> Result<Vec<FeasibilityRow>> {
    spec.validate()?;
    if data.truth.k() < spec.k {
        return Err(Error::Config(format!(
            "ground truth has k={} but k={} was requested",
            data.truth.k(),
            spec.k
        )));
    }
    let truth = data.truth.truncated(spec.k)?;
    let dim = data.pca.dim();
    let mut rows = Vec::new();
    for &dco in &spec.strategies {
        let grid = strategy_grid(dco, &spec.p_s, &spec.eps0, &spec.d_fixed, dim);
        let steps: &[usize] = match dco {
            DcoKind::Ads | DcoKind::Dade => &spec.delta_d,
            _ => &spec.delta_d[..1],
        };
        for &delta_d in steps {
            for &param in &grid {
                let cal = match (dco, param) {
                    (DcoKind::Dade, ParamValue::Real(p_s)) => Some(calibration_for(
                        None,
                        &data.pca,
                        &data.pca_base,
                        p_s,
                        delta_d,
                        spec.pairs,
                        spec.seed,
                    )?),
                    _ => None,
                };
                rows.push(evaluate(
                    data,
                    &truth,
                    dco,
                    delta_d,
                    param,
                    cal.as_ref(),
                    spec.k,
                )?);
            }
        }
    }
    Ok(rows)
}
