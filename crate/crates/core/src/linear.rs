//! Exhaustive scan: every stored vector is a candidate.

use crate::error::{Error, Result};
use crate::estimator::{DcoStats, DistanceComparator};
use crate::topk::{Neighbor, SearchResult, TopK};
use crate::vectors::VectorSet;

/// Runs one DCO per stored vector in id order, keeping the `k` best.
pub fn linear_scan<C: DistanceComparator + ?Sized>(
    data: &VectorSet,
    query: &[f32],
    k: usize,
    dco: &C,
    stats: &mut DcoStats,
) -> Result<SearchResult> {
    if query.len() != data.dim() || dco.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            found: if query.len() != data.dim() {
                query.len()
            } else {
                dco.dim()
            },
        });
    }
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    let mut top = TopK::new(k);
    for (id, row) in data.rows().enumerate() {
        let r = top.threshold();
        let outcome = dco.compare(row.into(), query, r);
        stats.observe(&outcome, r, row.into(), query);
        if let Some(distance) = outcome.distance() {
            top.push(Neighbor::new(id as u32, distance));
        }
    }
    let incomplete = top.len() < k;
    Ok(SearchResult {
        neighbors: top.into_sorted(),
        incomplete,
    })
}
