//! Query sweeps over one index and one DCO strategy.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use dade_core::{
    recall, CalibrationTable, DcoStats, DistanceComparator, Error, GroundTruth, HnswIndex,
    IvfIndex, OrthoTransform, Result, SearchResult, SearchScratch, VectorSet,
};

use crate::artifacts::{calibration_for, check_dim, comparator};
use crate::spec::{default_d_fixed_grid, DcoKind, IndexKind, SweepSpec};

pub const SWEEP_SCHEMA: &str = "# dade-sweep v1";
pub const SWEEP_COLUMNS: &str = "index,dco,decoupled,delta_d,param_name,param,traversal_name,traversal,k,recall,latency_us,qps,dim_fraction,failure_rate";

#[derive(Debug, Clone, Copy)]
pub enum IndexRef<'a> {
    Ivf(&'a IvfIndex),
    Hnsw(&'a HnswIndex),
    Linear,
}

impl IndexRef<'_> {
    pub fn kind(&self) -> IndexKind {
        match self {
            IndexRef::Ivf(_) => IndexKind::Ivf,
            IndexRef::Hnsw(_) => IndexKind::Hnsw,
            IndexRef::Linear => IndexKind::Linear,
        }
    }
}

/// Everything a sweep reads. `base` and `queries` are already rotated by
/// `transform`.
#[derive(Debug, Clone, Copy)]
pub struct SweepInputs<'a> {
    pub transform: &'a OrthoTransform,
    pub base: &'a VectorSet,
    pub queries: &'a VectorSet,
    pub truth: Option<&'a GroundTruth>,
    pub index: IndexRef<'a>,
    pub calibration: Option<&'a CalibrationTable>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamValue {
    None,
    Real(f64),
    Count(usize),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::None => f.write_str("NA"),
            ParamValue::Real(v) => write!(f, "{v}"),
            ParamValue::Count(v) => write!(f, "{v}"),
        }
    }
}

/// Strategy grid values in spec order.
pub fn strategy_grid(
    dco: DcoKind,
    p_s: &[f64],
    eps0: &[f64],
    d_fixed: &[usize],
    dim: usize,
) -> Vec<ParamValue> {
    match dco {
        DcoKind::Fd => vec![ParamValue::None],
        DcoKind::Dade => p_s.iter().map(|&v| ParamValue::Real(v)).collect(),
        DcoKind::Ads => eps0.iter().map(|&v| ParamValue::Real(v)).collect(),
        DcoKind::FixedPca | DcoKind::FixedRandom => {
            let grid = if d_fixed.is_empty() {
                default_d_fixed_grid(dim)
            } else {
                d_fixed.to_vec()
            };
            grid.into_iter().map(ParamValue::Count).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub index: IndexKind,
    pub dco: DcoKind,
    pub decoupled: bool,
    pub delta_d: usize,
    pub param: ParamValue,
    pub traversal: Option<usize>,
    pub k: usize,
    pub recall: Option<f64>,
    pub latency_us: Option<f64>,
    pub qps: Option<f64>,
    pub dim_fraction: f64,
    pub failure_rate: Option<f64>,
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.digits$}"))
}

impl SweepRow {
    pub fn to_csv(&self) -> String {
        let traversal_name = match self.index {
            IndexKind::Ivf => "n_probe",
            IndexKind::Hnsw => "ef",
            IndexKind::Linear => "none",
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{:.6},{}",
            self.index,
            self.dco,
            self.decoupled,
            self.delta_d,
            self.dco.param_name(),
            self.param,
            traversal_name,
            self.traversal.map_or("NA".to_string(), |t| t.to_string()),
            self.k,
            opt(self.recall, 6),
            opt(self.latency_us, 3),
            opt(self.qps, 1),
            self.dim_fraction,
            opt(self.failure_rate, 6),
        )
    }
}

pub fn write_sweep_csv<W: Write>(mut w: W, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(w, "{SWEEP_SCHEMA}")?;
    writeln!(w, "{SWEEP_COLUMNS}")?;
    for row in rows {
        writeln!(w, "{}", row.to_csv())?;
    }
    Ok(())
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, rows).expect("writing to memory");
    String::from_utf8(buf).expect("csv is ascii")
}

/// Answers every query; `traversal` is `n_probe` or `ef`.
pub fn run_queries(
    inputs: &SweepInputs<'_>,
    dco: &dyn DistanceComparator,
    traversal: Option<usize>,
    k: usize,
    decoupled: bool,
    stats: &mut DcoStats,
) -> Result<Vec<SearchResult>> {
    let queries = inputs.queries;
    match inputs.index {
        IndexRef::Ivf(idx) => {
            let n_probe = traversal.unwrap_or(idx.n_clusters());
            queries
                .rows()
                .map(|q| idx.search(q, k, n_probe, dco, stats))
                .collect()
        }
        IndexRef::Hnsw(idx) => {
            let ef = traversal.unwrap_or(k);
            let mut scratch = SearchScratch::new(idx.len());
            queries
                .rows()
                .map(|q| idx.search_with(&mut scratch, q, k, ef, dco, decoupled, stats))
                .collect()
        }
        IndexRef::Linear => queries
            .rows()
            .map(|q| dade_core::linear_scan(inputs.base, q, k, dco, stats))
            .collect(),
    }
}

fn check_inputs(inputs: &SweepInputs<'_>, spec: &SweepSpec) -> Result<()> {
    let dim = inputs.transform.dim();
    check_dim("base vectors", inputs.base.dim(), "transform", dim)?;
    check_dim("queries", inputs.queries.dim(), "transform", dim)?;
    if inputs.index.kind() != spec.index {
        return Err(Error::Config(format!(
            "spec asks for index {} but a {} index was supplied",
            spec.index,
            inputs.index.kind()
        )));
    }
    match inputs.index {
        IndexRef::Ivf(idx) => {
            check_dim("index", idx.dim(), "transform", dim)?;
            if let Some(&p) = spec.n_probe.iter().find(|&&p| p > idx.n_clusters()) {
                return Err(Error::Config(format!(
                    "n_probe={p} exceeds the index's n_clusters={}",
                    idx.n_clusters()
                )));
            }
        }
        IndexRef::Hnsw(idx) => check_dim("index", idx.dim(), "transform", dim)?,
        IndexRef::Linear => {}
    }
    if let Some(truth) = inputs.truth {
        if truth.len() != inputs.queries.len() {
            return Err(Error::Config(format!(
                "ground truth has {} queries but {} queries were supplied",
                truth.len(),
                inputs.queries.len()
            )));
        }
        if truth.k() < spec.k {
            return Err(Error::Config(format!(
                "ground truth has k={} but k={} was requested",
                truth.k(),
                spec.k
            )));
        }
    }
    Ok(())
}

/// One row per (strategy value, traversal value), in spec order.
pub fn run_sweep(inputs: &SweepInputs<'_>, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    check_inputs(inputs, spec)?;
    let t = inputs.transform;
    let truth = inputs.truth.map(|g| g.truncated(spec.k)).transpose()?;
    let traversals: Vec<Option<usize>> = match spec.index {
        IndexKind::Ivf => spec.n_probe.iter().map(|&p| Some(p)).collect(),
        IndexKind::Hnsw => spec.ef.iter().map(|&e| Some(e)).collect(),
        IndexKind::Linear => vec![None],
    };
    let mut rows = Vec::new();
    for param in strategy_grid(spec.dco, &spec.p_s, &spec.eps0, &spec.d_fixed, t.dim()) {
        let cal = match (spec.dco, param) {
            (DcoKind::Dade, ParamValue::Real(p_s)) => Some(calibration_for(
                inputs.calibration,
                t,
                inputs.base,
                p_s,
                spec.delta_d,
                spec.pairs,
                spec.seed,
            )?),
            _ => None,
        };
        let (eps0, d_fixed) = match param {
            ParamValue::Real(v) => (v, t.dim()),
            ParamValue::Count(d) => (0.0, d),
            ParamValue::None => (0.0, t.dim()),
        };
        let dco = comparator(spec.dco, t, spec.delta_d, eps0, d_fixed, cal.as_ref())?;
        for &traversal in &traversals {
            rows.push(measure(
                inputs,
                spec,
                &*dco,
                param,
                traversal,
                truth.as_ref(),
            )?);
        }
    }
    Ok(rows)
}

fn measure(
    inputs: &SweepInputs<'_>,
    spec: &SweepSpec,
    dco: &dyn DistanceComparator,
    param: ParamValue,
    traversal: Option<usize>,
    truth: Option<&GroundTruth>,
) -> Result<SweepRow> {
    let nq = inputs.queries.len();
    let mut latency_us = None;
    let mut qps = None;
    let mut stats = DcoStats::default();
    let mut results = None;
    if spec.timing {
        let start = Instant::now();
        results = Some(run_queries(
            inputs,
            dco,
            traversal,
            spec.k,
            spec.decoupled,
            &mut stats,
        )?);
        let secs = start.elapsed().as_secs_f64().max(1e-12);
        latency_us = Some(secs * 1e6 / nq as f64);
        qps = Some(nq as f64 / secs);
    }
    let mut failure_rate = None;
    if truth.is_some() || results.is_none() {
        let mut audit = if truth.is_some() {
            DcoStats::auditing()
        } else {
            DcoStats::default()
        };
        let audited = run_queries(inputs, dco, traversal, spec.k, spec.decoupled, &mut audit)?;
        failure_rate = audit.failure_rate();
        if results.is_none() {
            results = Some(audited);
            stats = audit;
        }
    }
    let results = results.unwrap();
    let recall = truth
        .map(|g| {
            let ids: Vec<Vec<u32>> = results.iter().map(SearchResult::ids).collect();
            recall(&ids, g)
        })
        .transpose()?;
    Ok(SweepRow {
        index: spec.index,
        dco: spec.dco,
        decoupled: spec.decoupled,
        delta_d: spec.delta_d,
        param,
        traversal,
        k: spec.k,
        recall,
        latency_us,
        qps,
        dim_fraction: stats.dimension_fraction(inputs.transform.dim()),
        failure_rate,
    })
}
