//! Inverted-file index over rotated vectors.
//!
//! Vectors are clustered with k-means; a query probes the `n_probe` clusters
//! whose centroids are nearest and runs one DCO per member, keeping the `K`
//! best in a max-heap whose top is the DCO threshold.
//!
//! Two storage layouts are supported. [`Layout::Contiguous`] stores each
//! vector as one row. [`Layout::Split`] stores the leading `split_prefix_dims`
//! components of all vectors in one region and the remaining components in a
//! second region, both in cluster order, so adaptive DCOs that stop after the
//! first block never touch the second region.

mod kmeans;

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub use kmeans::{kmeans, KMeans};

use crate::error::{Error, Result};
use crate::estimator::{squared_distance, DcoStats, DistanceComparator, SplitRow};
use crate::topk::{Neighbor, SearchResult, TopK};
use crate::transform::read_u32;
use crate::vectors::VectorSet;

pub const IVF_MAGIC: &[u8; 4] = b"DIVF";
pub const IVF_VERSION: u32 = 1;
pub const DEFAULT_KMEANS_ITERS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Contiguous,
    Split,
}

/// `round(sqrt(N))`, at least 1.
pub fn default_cluster_count(n: usize) -> usize {
    ((n as f64).sqrt().round() as usize).clamp(1, n.max(1))
}

#[derive(Debug, Clone)]
pub struct IvfParams {
    /// Defaults to [`default_cluster_count`].
    pub n_clusters: Option<usize>,
    pub layout: Layout,
    /// Head width of the split layout.
    pub delta_d: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for IvfParams {
    fn default() -> Self {
        IvfParams {
            n_clusters: None,
            layout: Layout::Contiguous,
            delta_d: crate::estimator::DEFAULT_DELTA_D,
            max_iters: DEFAULT_KMEANS_ITERS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IvfIndex {
    dim: usize,
    layout: Layout,
    head_width: usize,
    centroids: VectorSet,
    /// Cluster `c` owns storage rows `offsets[c]..offsets[c + 1]`.
    offsets: Vec<u32>,
    ids: Vec<u32>,
    head: Vec<f32>,
    tail: Vec<f32>,
}

impl IvfIndex {
    pub fn build(data: &VectorSet, params: &IvfParams) -> Result<Self> {
        let n = data.len();
        let dim = data.dim();
        let n_clusters = params
            .n_clusters
            .unwrap_or_else(|| default_cluster_count(n));
        let km = kmeans(data, n_clusters, params.max_iters, params.seed)?;
        let head_width = match params.layout {
            Layout::Contiguous => dim,
            Layout::Split => {
                if params.delta_d == 0 {
                    return Err(Error::invalid("split layout needs a positive delta_d"));
                }
                params.delta_d.min(dim)
            }
        };

        let mut counts = vec![0u32; n_clusters];
        for &a in &km.assignments {
            counts[a as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n_clusters + 1);
        offsets.push(0u32);
        for c in &counts {
            offsets.push(offsets.last().unwrap() + c);
        }
        let mut cursor: Vec<u32> = offsets[..n_clusters].to_vec();
        let mut ids = vec![0u32; n];
        for (id, &a) in km.assignments.iter().enumerate() {
            let slot = &mut cursor[a as usize];
            ids[*slot as usize] = id as u32;
            *slot += 1;
        }
        let tail_width = dim - head_width;
        let mut head = Vec::with_capacity(n * head_width);
        let mut tail = Vec::with_capacity(n * tail_width);
        for &id in &ids {
            let row = data.row(id as usize);
            head.extend_from_slice(&row[..head_width]);
            tail.extend_from_slice(&row[head_width..]);
        }
        Ok(IvfIndex {
            dim,
            layout: params.layout,
            head_width,
            centroids: km.centroids,
            offsets,
            ids,
            head,
            tail,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn split_prefix_dims(&self) -> usize {
        self.head_width
    }

    pub fn n_clusters(&self) -> usize {
        self.centroids.len()
    }

    pub fn centroids(&self) -> &VectorSet {
        &self.centroids
    }

    pub fn posting_list(&self, cluster: usize) -> &[u32] {
        &self.ids[self.offsets[cluster] as usize..self.offsets[cluster + 1] as usize]
    }

    /// Storage row `pos` (in cluster order) as a possibly split vector.
    #[inline]
    pub fn stored_row(&self, pos: usize) -> SplitRow<'_> {
        let tw = self.dim - self.head_width;
        SplitRow::new(
            &self.head[pos * self.head_width..(pos + 1) * self.head_width],
            &self.tail[pos * tw..(pos + 1) * tw],
        )
    }

    /// Clusters ordered by centroid distance to `query`, ties by cluster id.
    pub fn probe_order(&self, query: &[f32]) -> Vec<usize> {
        let mut scored: Vec<(f32, usize)> = self
            .centroids
            .rows()
            .enumerate()
            .map(|(c, centroid)| (squared_distance(query, centroid), c))
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        scored.into_iter().map(|(_, c)| c).collect()
    }

    /// Top-`k` search over the `n_probe` nearest clusters.
    pub fn search<C: DistanceComparator + ?Sized>(
        &self,
        query: &[f32],
        k: usize,
        n_probe: usize,
        dco: &C,
        stats: &mut DcoStats,
    ) -> Result<SearchResult> {
        if query.len() != self.dim || dco.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: if query.len() != self.dim {
                    query.len()
                } else {
                    dco.dim()
                },
            });
        }
        if k == 0 {
            return Err(Error::invalid("k must be positive"));
        }
        if n_probe == 0 || n_probe > self.n_clusters() {
            return Err(Error::invalid(format!(
                "n_probe={n_probe} must lie in 1..={}",
                self.n_clusters()
            )));
        }
        let mut top = TopK::new(k);
        for &c in self.probe_order(query).iter().take(n_probe) {
            let (lo, hi) = (self.offsets[c] as usize, self.offsets[c + 1] as usize);
            for pos in lo..hi {
                let row = self.stored_row(pos);
                let r = top.threshold();
                let outcome = dco.compare(row, query, r);
                stats.observe(&outcome, r, row, query);
                if let Some(distance) = outcome.distance() {
                    top.push(Neighbor::new(self.ids[pos], distance));
                }
            }
        }
        let incomplete = top.len() < k;
        Ok(SearchResult {
            neighbors: top.into_sorted(),
            incomplete,
        })
    }

    /// Binary layout, little-endian:
    ///
    /// ```text
    /// "DIVF" | version u32 | layout u8 (0 contiguous, 1 split) | D u32 | N u32
    /// | n_clusters u32 | head_width u32
    /// | centroids  n_clusters*D f32
    /// | offsets    (n_clusters+1) u32
    /// | ids        N u32
    /// | head       N*head_width f32
    /// | tail       N*(D-head_width) f32
    /// ```
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(IVF_MAGIC)?;
        w.write_all(&IVF_VERSION.to_le_bytes())?;
        w.write_all(&[match self.layout {
            Layout::Contiguous => 0,
            Layout::Split => 1,
        }])?;
        for v in [self.dim, self.ids.len(), self.n_clusters(), self.head_width] {
            w.write_all(&(v as u32).to_le_bytes())?;
        }
        write_f32s(&mut w, self.centroids.as_slice())?;
        for v in self.offsets.iter().chain(&self.ids) {
            w.write_all(&v.to_le_bytes())?;
        }
        write_f32s(&mut w, &self.head)?;
        write_f32s(&mut w, &self.tail)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| Error::format("index file too short"))?;
        if &magic != IVF_MAGIC {
            return Err(Error::format("bad IVF index magic"));
        }
        let version = read_u32(&mut r)?;
        if version != IVF_VERSION {
            return Err(Error::format(format!("unsupported IVF version {version}")));
        }
        let mut layout = [0u8; 1];
        r.read_exact(&mut layout)
            .map_err(|_| Error::format("index file too short"))?;
        let layout = match layout[0] {
            0 => Layout::Contiguous,
            1 => Layout::Split,
            other => return Err(Error::format(format!("unknown layout {other}"))),
        };
        let dim = read_u32(&mut r)? as usize;
        let n = read_u32(&mut r)? as usize;
        let n_clusters = read_u32(&mut r)? as usize;
        let head_width = read_u32(&mut r)? as usize;
        if dim == 0 || n == 0 || n_clusters == 0 || n_clusters > n || head_width > dim {
            return Err(Error::format("inconsistent IVF header"));
        }
        let centroids = VectorSet::new(dim, read_f32s(&mut r, n_clusters * dim)?)
            .map_err(|e| Error::format(e.to_string()))?;
        let offsets = read_u32s(&mut r, n_clusters + 1)?;
        let ids = read_u32s(&mut r, n)?;
        if offsets[0] != 0
            || offsets[n_clusters] as usize != n
            || offsets.windows(2).any(|w| w[0] > w[1])
        {
            return Err(Error::format("IVF offsets are not a partition of the ids"));
        }
        let mut seen = vec![false; n];
        for &id in &ids {
            let slot = seen
                .get_mut(id as usize)
                .ok_or_else(|| Error::format(format!("id {id} out of range")))?;
            if std::mem::replace(slot, true) {
                return Err(Error::format(format!("id {id} stored twice")));
            }
        }
        let head = read_f32s(&mut r, n * head_width)?;
        let tail = read_f32s(&mut r, n * (dim - head_width))?;
        Ok(IvfIndex {
            dim,
            layout,
            head_width,
            centroids,
            offsets,
            ids,
            head,
            tail,
        })
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

pub(crate) fn write_f32s<W: Write>(w: &mut W, values: &[f32]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_f32s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f32>> {
    let mut buf = vec![0u8; n * 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::format("unexpected end of file"))?;
    Ok(buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub(crate) fn read_u32s<R: Read>(r: &mut R, n: usize) -> Result<Vec<u32>> {
    let mut buf = vec![0u8; n * 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::format("unexpected end of file"))?;
    Ok(buf
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
