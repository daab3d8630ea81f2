//! `.fvecs` / `.ivecs` datasets, exact ground truth and recall.
//!
//! Both formats are a sequence of records: a little-endian `i32` dimension
//! followed by that many little-endian 32-bit payloads (`f32` or `i32`).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::vectors::VectorSet;

fn read_records<R: Read>(mut r: R) -> Result<(usize, Vec<[u8; 4]>)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut dim = None;
    let mut payload = Vec::new();
    let mut pos = 0;
    let mut record = 0usize;
    while pos < bytes.len() {
        if bytes.len() - pos < 4 {
            return Err(Error::format(format!(
                "record {record}: truncated dimension header"
            )));
        }
        let d = i32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap());
        pos += 4;
        if d <= 0 {
            return Err(Error::format(format!(
                "record {record}: dimension {d} is not positive"
            )));
        }
        let d = d as usize;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(Error::format(format!(
                    "record {record}: inconsistent dimension {d}, expected {expected}"
                )))
            }
            Some(_) => {}
        }
        if bytes.len() - pos < 4 * d {
            return Err(Error::format(format!(
                "record {record}: truncated payload ({} of {} bytes)",
                bytes.len() - pos,
                4 * d
            )));
        }
        payload.extend(
            bytes[pos..pos + 4 * d]
                .chunks_exact(4)
                .map(|c| <[u8; 4]>::try_from(c).unwrap()),
        );
        pos += 4 * d;
        record += 1;
    }
    let dim = dim.ok_or_else(|| Error::format("file contains no records"))?;
    Ok((dim, payload))
}

pub fn read_fvecs_from<R: Read>(r: R) -> Result<VectorSet> {
    let (dim, payload) = read_records(r)?;
    let values = payload.into_iter().map(f32::from_le_bytes).collect();
    VectorSet::new(dim, values)
}

pub fn read_fvecs(path: impl AsRef<Path>) -> Result<VectorSet> {
    read_fvecs_from(BufReader::new(File::open(path)?))
}

pub fn write_fvecs_to<W: Write>(mut w: W, v: &VectorSet) -> Result<()> {
    let header = (v.dim() as i32).to_le_bytes();
    for row in v.rows() {
        w.write_all(&header)?;
        for x in row {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn write_fvecs(path: impl AsRef<Path>, v: &VectorSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_fvecs_to(&mut w, v)?;
    w.flush()?;
    Ok(())
}

pub fn read_ivecs_from<R: Read>(r: R) -> Result<Vec<Vec<i32>>> {
    let (dim, payload) = read_records(r)?;
    Ok(payload
        .chunks_exact(dim)
        .map(|rec| rec.iter().map(|b| i32::from_le_bytes(*b)).collect())
        .collect())
}

pub fn read_ivecs(path: impl AsRef<Path>) -> Result<Vec<Vec<i32>>> {
    read_ivecs_from(BufReader::new(File::open(path)?))
}

pub fn write_ivecs_to<W: Write>(mut w: W, lists: &[Vec<i32>]) -> Result<()> {
    let dim = lists.first().map_or(0, Vec::len);
    if dim == 0 {
        return Err(Error::invalid("ivecs records must be nonempty"));
    }
    for list in lists {
        if list.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: list.len(),
            });
        }
        w.write_all(&(dim as i32).to_le_bytes())?;
        for x in list {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn write_ivecs(path: impl AsRef<Path>, lists: &[Vec<i32>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_ivecs_to(&mut w, lists)?;
    w.flush()?;
    Ok(())
}

/// Exact `k` nearest ids per query, by distance then id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    k: usize,
    ids: Vec<Vec<u32>>,
}

impl GroundTruth {
    pub fn new(k: usize, ids: Vec<Vec<u32>>) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("ground truth k must be positive"));
        }
        if let Some(bad) = ids.iter().find(|l| l.len() != k) {
            return Err(Error::invalid(format!(
                "ground-truth list has {} ids, expected {k}",
                bad.len()
            )));
        }
        Ok(GroundTruth { k, ids })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self, query: usize) -> &[u32] {
        &self.ids[query]
    }

    /// Keeps the first `k` ids of every list.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.k {
            return Err(Error::invalid(format!(
                "cannot truncate ground truth of k={} to k={k}",
                self.k
            )));
        }
        Ok(GroundTruth {
            k,
            ids: self.ids.iter().map(|l| l[..k].to_vec()).collect(),
        })
    }

    pub fn from_ivecs(lists: Vec<Vec<i32>>) -> Result<Self> {
        let k = lists.first().map_or(0, Vec::len);
        let ids = lists
            .into_iter()
            .map(|l| {
                l.into_iter()
                    .map(|x| {
                        u32::try_from(x)
                            .map_err(|_| Error::format(format!("negative id {x} in ground truth")))
                    })
                    .collect::<Result<Vec<u32>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(k, ids)
    }

    pub fn to_ivecs(&self) -> Vec<Vec<i32>> {
        self.ids
            .iter()
            .map(|l| l.iter().map(|&x| x as i32).collect())
            .collect()
    }
}

/// Brute-force `k` nearest neighbors with 64-bit accumulation.
pub fn compute_ground_truth(
    data: &VectorSet,
    queries: &VectorSet,
    k: usize,
) -> Result<GroundTruth> {
    if data.dim() != queries.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            found: queries.dim(),
        });
    }
    if k == 0 || k > data.len() {
        return Err(Error::invalid(format!(
            "k={k} must lie in 1..={}",
            data.len()
        )));
    }
    let mut scored: Vec<(f64, u32)> = Vec::with_capacity(data.len());
    let ids = queries
        .rows()
        .map(|q| {
            scored.clear();
            scored.extend(data.rows().enumerate().map(|(id, o)| {
                let d: f64 = o
                    .iter()
                    .zip(q)
                    .map(|(&a, &b)| {
                        let diff = a as f64 - b as f64;
                        diff * diff
                    })
                    .sum();
                (d, id as u32)
            }));
            let cmp = |a: &(f64, u32), b: &(f64, u32)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < scored.len() {
                scored.select_nth_unstable_by(k - 1, cmp);
                scored.truncate(k);
            }
            scored.sort_by(cmp);
            scored.iter().map(|&(_, id)| id).collect()
        })
        .collect();
    GroundTruth::new(k, ids)
}

/// Mean over queries of `|result ∩ truth| / k`.
pub fn recall<R: AsRef<[u32]>>(results: &[R], truth: &GroundTruth) -> Result<f64> {
    if results.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} result lists for {} ground-truth queries",
            results.len(),
            truth.len()
        )));
    }
    if results.is_empty() {
        return Ok(0.0);
    }
    let k = truth.k();
    let total: usize = results
        .iter()
        .zip(&truth.ids)
        .map(|(r, t)| r.as_ref().iter().filter(|id| t.contains(id)).count())
        .sum();
    Ok(total as f64 / (k * results.len()) as f64)
}
