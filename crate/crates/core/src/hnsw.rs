//! Hierarchical navigable small world graph.
//!
//! Construction uses exact distances, geometric level sampling with factor
//! `1/ln M` and the heuristic neighbor selection rule (keeping pruned
//! connections up to the degree cap). Queries descend the
//! upper layers greedily with exact distances, then run a beam search at
//! level 0 where every candidate goes through a [`DistanceComparator`].
//!
//! In coupled mode the DCO threshold is the worst distance in the result set
//! `R` of size `ef`. In decoupled mode a separate set `A` holds the `K` best
//! exact results and supplies the threshold, while `R` only steers traversal;
//! candidates pruned by the DCO enter `R` keyed by their estimated distance.

use std::collections::BinaryHeap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimator::{squared_distance, DcoStats, DistanceComparator};
use crate::ivf::{read_f32s, read_u32s, write_f32s};
use crate::topk::{Farthest, Nearest, Neighbor, SearchResult, TopK};
use crate::transform::read_u32;
use crate::vectors::VectorSet;

pub const HNSW_MAGIC: &[u8; 4] = b"DHNS";
pub const HNSW_VERSION: u32 = 1;
pub const DEFAULT_M: usize = 16;
pub const DEFAULT_EF_CONSTRUCTION: usize = 500;

#[derive(Debug, Clone)]
pub struct HnswParams {
    pub m: usize,
    pub ef_construction: usize,
    pub seed: u64,
}

impl Default for HnswParams {
    fn default() -> Self {
        HnswParams {
            m: DEFAULT_M,
            ef_construction: DEFAULT_EF_CONSTRUCTION,
            seed: 0,
        }
    }
}

/// Reusable per-thread query state.
#[derive(Debug, Clone, Default)]
pub struct SearchScratch {
    visited: Vec<u32>,
    epoch: u32,
}

impl SearchScratch {
    pub fn new(n: usize) -> Self {
        SearchScratch {
            visited: vec![0; n],
            epoch: 0,
        }
    }

    fn reset(&mut self, n: usize) {
        if self.visited.len() != n {
            self.visited = vec![0; n];
            self.epoch = 0;
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.visited.fill(0);
            self.epoch = 1;
        }
    }

    /// Marks `id` and reports whether it was unvisited.
    #[inline]
    fn visit(&mut self, id: u32) -> bool {
        let slot = &mut self.visited[id as usize];
        if *slot == self.epoch {
            false
        } else {
            *slot = self.epoch;
            true
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HnswIndex {
    data: VectorSet,
    m: usize,
    ef_construction: usize,
    entry: u32,
    max_level: usize,
    /// `links[id][level]` for `level` in `0..=level_of(id)`.
    links: Vec<Vec<Vec<u32>>>,
}

impl HnswIndex {
    pub fn build(data: VectorSet, params: &HnswParams) -> Result<Self> {
        if params.m < 2 {
            return Err(Error::invalid("m must be at least 2"));
        }
        if params.ef_construction == 0 {
            return Err(Error::invalid("ef_construction must be positive"));
        }
        let n = data.len();
        let level_mult = 1.0 / (params.m as f64).ln();
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut index = HnswIndex {
            data,
            m: params.m,
            ef_construction: params.ef_construction,
            entry: 0,
            max_level: 0,
            links: Vec::with_capacity(n),
        };
        let mut scratch = SearchScratch::new(n);
        for id in 0..n {
            let u: f64 = rng.random();
            let level = (-(1.0 - u).ln() * level_mult).floor() as usize;
            index.insert(id as u32, level, &mut scratch);
        }
        Ok(index)
    }

    fn max_degree(&self, level: usize) -> usize {
        if level == 0 {
            2 * self.m
        } else {
            self.m
        }
    }

    #[inline]
    fn dist(&self, a: &[f32], id: u32) -> f32 {
        squared_distance(a, self.data.row(id as usize))
    }

    fn insert(&mut self, id: u32, level: usize, scratch: &mut SearchScratch) {
        self.links.push(vec![Vec::new(); level + 1]);
        if id == 0 {
            self.entry = 0;
            self.max_level = level;
            return;
        }
        let q = self.data.row(id as usize).to_vec();
        let mut ep = self.entry;
        let mut ep_dist = self.dist(&q, ep);
        for lev in (level + 1..=self.max_level).rev() {
            (ep, ep_dist) = self.greedy(&q, ep, ep_dist, lev);
        }
        let mut entries = vec![(ep_dist, ep)];
        for lev in (0..=level.min(self.max_level)).rev() {
            let found = self.search_layer_exact(&q, &entries, self.ef_construction, lev, scratch);
            let chosen = self.select_neighbors(&found, self.m);
            for &(_, nb) in &chosen {
                self.link(nb, id, lev);
            }
            self.links[id as usize][lev] = chosen.iter().map(|&(_, nb)| nb).collect();
            entries = found;
        }
        if level > self.max_level {
            self.max_level = level;
            self.entry = id;
        }
    }

    /// Adds `to` to the adjacency of `from`, shrinking it if over capacity.
    fn link(&mut self, from: u32, to: u32, level: usize) {
        let cap = self.max_degree(level);
        let list = &mut self.links[from as usize][level];
        list.push(to);
        if list.len() <= cap {
            return;
        }
        let base = self.data.row(from as usize);
        let mut scored: Vec<(f32, u32)> = self.links[from as usize][level]
            .iter()
            .map(|&nb| (squared_distance(base, self.data.row(nb as usize)), nb))
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let kept = self.select_neighbors(&scored, cap);
        self.links[from as usize][level] = kept.into_iter().map(|(_, nb)| nb).collect();
    }

    /// Heuristic selection: walk candidates in ascending distance and keep
    /// one only if it is closer to the base than to every kept neighbor.
    /// Remaining slots are then filled with the nearest discarded candidates.
    fn select_neighbors(&self, sorted: &[(f32, u32)], cap: usize) -> Vec<(f32, u32)> {
        let mut kept: Vec<(f32, u32)> = Vec::with_capacity(cap);
        for &(d, cand) in sorted {
            if kept.len() >= cap {
                break;
            }
            let row = self.data.row(cand as usize);
            if kept
                .iter()
                .all(|&(_, k)| squared_distance(row, self.data.row(k as usize)) >= d)
            {
                kept.push((d, cand));
            }
        }
        for &(d, cand) in sorted {
            if kept.len() >= cap {
                break;
            }
            if !kept.iter().any(|&(_, k)| k == cand) {
                kept.push((d, cand));
            }
        }
        kept
    }

    fn greedy(&self, q: &[f32], mut ep: u32, mut ep_dist: f32, level: usize) -> (u32, f32) {
        loop {
            let mut improved = false;
            for &nb in &self.links[ep as usize][level] {
                let d = self.dist(q, nb);
                if d < ep_dist || (d == ep_dist && nb < ep) {
                    ep = nb;
                    ep_dist = d;
                    improved = true;
                }
            }
            if !improved {
                return (ep, ep_dist);
            }
        }
    }

    /// Standard beam search with exact squared distances, ascending output.
    fn search_layer_exact(
        &self,
        q: &[f32],
        entries: &[(f32, u32)],
        ef: usize,
        level: usize,
        scratch: &mut SearchScratch,
    ) -> Vec<(f32, u32)> {
        scratch.reset(self.data.len());
        let mut candidates = BinaryHeap::new();
        let mut results = BinaryHeap::new();
        for &(d, id) in entries {
            if scratch.visit(id) {
                candidates.push(Nearest(Neighbor::new(id, d)));
                results.push(Farthest(Neighbor::new(id, d)));
            }
        }
        while results.len() > ef {
            results.pop();
        }
        while let Some(Nearest(c)) = candidates.pop() {
            let worst = results.peek().map_or(f32::INFINITY, |w| w.0.distance);
            if c.distance > worst && results.len() >= ef {
                break;
            }
            for &nb in &self.links[c.id as usize][level] {
                if !scratch.visit(nb) {
                    continue;
                }
                let d = self.dist(q, nb);
                let worst = results.peek().map_or(f32::INFINITY, |w| w.0.distance);
                if results.len() < ef || d < worst {
                    candidates.push(Nearest(Neighbor::new(nb, d)));
                    results.push(Farthest(Neighbor::new(nb, d)));
                    if results.len() > ef {
                        results.pop();
                    }
                }
            }
        }
        let mut out: Vec<(f32, u32)> = results
            .into_iter()
            .map(|f| (f.0.distance, f.0.id))
            .collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn ef_construction(&self) -> usize {
        self.ef_construction
    }

    pub fn entry_point(&self) -> u32 {
        self.entry
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    pub fn level_of(&self, id: u32) -> usize {
        self.links[id as usize].len() - 1
    }

    pub fn neighbors(&self, id: u32, level: usize) -> &[u32] {
        self.links[id as usize]
            .get(level)
            .map_or(&[], |l| l.as_slice())
    }

    pub fn data(&self) -> &VectorSet {
        &self.data
    }

    pub fn search<C: DistanceComparator + ?Sized>(
        &self,
        query: &[f32],
        k: usize,
        ef: usize,
        dco: &C,
        decoupled: bool,
        stats: &mut DcoStats,
    ) -> Result<SearchResult> {
        let mut scratch = SearchScratch::new(self.len());
        self.search_with(&mut scratch, query, k, ef, dco, decoupled, stats)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn search_with<C: DistanceComparator + ?Sized>(
        &self,
        scratch: &mut SearchScratch,
        query: &[f32],
        k: usize,
        ef: usize,
        dco: &C,
        decoupled: bool,
        stats: &mut DcoStats,
    ) -> Result<SearchResult> {
        let dim = self.dim();
        if query.len() != dim || dco.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: if query.len() != dim {
                    query.len()
                } else {
                    dco.dim()
                },
            });
        }
        if k == 0 {
            return Err(Error::invalid("k must be positive"));
        }
        if k > ef {
            return Err(Error::invalid(format!("k={k} exceeds ef={ef}")));
        }

        let mut ep = self.entry;
        let mut ep_dist = self.dist(query, ep);
        for lev in (1..=self.max_level).rev() {
            (ep, ep_dist) = self.greedy(query, ep, ep_dist, lev);
        }

        scratch.reset(self.len());
        scratch.visit(ep);
        let start = Neighbor::new(ep, ep_dist.sqrt());
        let mut candidates = BinaryHeap::new();
        candidates.push(Nearest(start));
        // R: traversal set bounded by ef.
        let mut traversal = BinaryHeap::new();
        traversal.push(Farthest(start));
        // A: exact K best, only used in decoupled mode.
        let mut best = TopK::new(k);
        best.push(start);

        while let Some(Nearest(c)) = candidates.pop() {
            if traversal.len() >= ef {
                let worst: &Farthest = traversal.peek().unwrap();
                if c.distance > worst.0.distance {
                    break;
                }
            }
            for &nb in &self.links[c.id as usize][0] {
                if !scratch.visit(nb) {
                    continue;
                }
                let row = self.data.row(nb as usize);
                let r = if decoupled {
                    best.threshold()
                } else if traversal.len() >= ef {
                    traversal.peek().unwrap().0.distance
                } else {
                    f32::INFINITY
                };
                let outcome = dco.compare(row.into(), query, r);
                stats.observe(&outcome, r, row.into(), query);
                let key = match outcome.distance() {
                    Some(d) => {
                        if decoupled {
                            best.push(Neighbor::new(nb, d));
                        }
                        d
                    }
                    None if decoupled => outcome.key(),
                    None => continue,
                };
                let full = traversal.len() >= ef;
                if !full || key < traversal.peek().unwrap().0.distance {
                    let entry = Neighbor::new(nb, key);
                    candidates.push(Nearest(entry));
                    traversal.push(Farthest(entry));
                    if traversal.len() > ef {
                        traversal.pop();
                    }
                }
            }
        }

        let neighbors = if decoupled {
            best.into_sorted()
        } else {
            let mut all: Vec<Neighbor> = traversal.into_iter().map(|f| f.0).collect();
            all.sort_by(Neighbor::cmp_by_distance);
            all.truncate(k);
            all
        };
        Ok(SearchResult {
            incomplete: neighbors.len() < k,
            neighbors,
        })
    }

    /// Binary layout, little-endian:
    ///
    /// ```text
    /// "DHNS" | version u32 | D u32 | N u32 | m u32 | ef_construction u32
    /// | entry u32 | max_level u32
    /// | per node: level u32, then per level 0..=level: count u32, ids u32*count
    /// | vectors N*D f32
    /// ```
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(HNSW_MAGIC)?;
        let header = [
            HNSW_VERSION,
            self.dim() as u32,
            self.len() as u32,
            self.m as u32,
            self.ef_construction as u32,
            self.entry,
            self.max_level as u32,
        ];
        for v in header {
            w.write_all(&v.to_le_bytes())?;
        }
        for node in &self.links {
            w.write_all(&((node.len() - 1) as u32).to_le_bytes())?;
            for list in node {
                w.write_all(&(list.len() as u32).to_le_bytes())?;
                for id in list {
                    w.write_all(&id.to_le_bytes())?;
                }
            }
        }
        write_f32s(&mut w, self.data.as_slice())?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| Error::format("index file too short"))?;
        if &magic != HNSW_MAGIC {
            return Err(Error::format("bad HNSW index magic"));
        }
        let version = read_u32(&mut r)?;
        if version != HNSW_VERSION {
            return Err(Error::format(format!("unsupported HNSW version {version}")));
        }
        let dim = read_u32(&mut r)? as usize;
        let n = read_u32(&mut r)? as usize;
        let m = read_u32(&mut r)? as usize;
        let ef_construction = read_u32(&mut r)? as usize;
        let entry = read_u32(&mut r)?;
        let max_level = read_u32(&mut r)? as usize;
        if dim == 0 || n == 0 || m < 2 || entry as usize >= n {
            return Err(Error::format("inconsistent HNSW header"));
        }
        let mut links = Vec::with_capacity(n);
        for _ in 0..n {
            let level = read_u32(&mut r)? as usize;
            if level > max_level {
                return Err(Error::format("node level exceeds the graph's top level"));
            }
            let mut node = Vec::with_capacity(level + 1);
            for lev in 0..=level {
                let count = read_u32(&mut r)? as usize;
                let cap = if lev == 0 { 2 * m } else { m };
                if count > cap {
                    return Err(Error::format(format!(
                        "degree {count} exceeds the cap {cap} at level {lev}"
                    )));
                }
                let ids = read_u32s(&mut r, count)?;
                if ids.iter().any(|&id| id as usize >= n) {
                    return Err(Error::format("neighbor id out of range"));
                }
                node.push(ids);
            }
            links.push(node);
        }
        if links[entry as usize].len() != max_level + 1 {
            return Err(Error::format("entry point is not on the top level"));
        }
        let data = VectorSet::new(dim, read_f32s(&mut r, n * dim)?)
            .map_err(|e| Error::format(e.to_string()))?;
        Ok(HnswIndex {
            data,
            m,
            ef_construction,
            entry,
            max_level,
            links,
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::FdScanning;
    use crate::io::compute_ground_truth;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(n: usize, d: usize, seed: u64) -> VectorSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        VectorSet::new(d, (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn small_params() -> HnswParams {
        HnswParams {
            m: 8,
            ef_construction: 64,
            seed: 3,
        }
    }

    #[test]
    fn single_node_graph() {
        let idx = HnswIndex::build(random_set(1, 4, 1), &HnswParams::default()).unwrap();
        assert_eq!(idx.len(), 1);
        assert!(idx.neighbors(0, 0).is_empty());
        let fd = FdScanning::new(4);
        let mut s = DcoStats::default();
        let res = idx.search(&[0.0; 4], 1, 1, &fd, false, &mut s).unwrap();
        assert_eq!(res.ids(), vec![0]);
    }

    #[test]
    fn degrees_respect_caps() {
        let idx = HnswIndex::build(random_set(1000, 8, 2), &small_params()).unwrap();
        let mut total = 0;
        for id in 0..1000u32 {
            for lev in 0..=idx.level_of(id) {
                let deg = idx.neighbors(id, lev).len();
                assert!(deg <= if lev == 0 { 16 } else { 8 });
                if lev == 0 {
                    total += deg;
                }
            }
        }
        assert!(total as f64 / 1000.0 <= 16.0);
    }

    #[test]
    fn exhaustive_beam_is_exact() {
        let data = random_set(1000, 8, 4);
        let queries = random_set(20, 8, 5);
        let gt = compute_ground_truth(&data, &queries, 10).unwrap();
        let idx = HnswIndex::build(data, &small_params()).unwrap();
        let fd = FdScanning::new(8);
        for decoupled in [false, true] {
            for (qi, q) in queries.rows().enumerate() {
                let mut s = DcoStats::default();
                let res = idx.search(q, 10, 1000, &fd, decoupled, &mut s).unwrap();
                assert_eq!(res.ids(), gt.ids(qi), "decoupled={decoupled}");
            }
        }
    }

    #[test]
    fn stored_vectors_find_themselves() {
        let data = random_set(1000, 16, 6);
        let params = HnswParams {
            seed: 6,
            ..Default::default()
        };
        let idx = HnswIndex::build(data.clone(), &params).unwrap();
        let fd = FdScanning::new(16);
        let mut scratch = SearchScratch::new(idx.len());
        let mut hits = 0;
        for id in (0..1000).step_by(10) {
            let mut s = DcoStats::default();
            let res = idx
                .search_with(&mut scratch, data.row(id), 1, 1, &fd, false, &mut s)
                .unwrap();
            if res.neighbors[0] == Neighbor::new(id as u32, 0.0) {
                hits += 1;
            }
        }
        assert!(hits >= 99, "{hits}/100");
    }

    #[test]
    fn k_above_ef_is_rejected() {
        let idx = HnswIndex::build(random_set(20, 4, 7), &small_params()).unwrap();
        let fd = FdScanning::new(4);
        let mut s = DcoStats::default();
        assert!(matches!(
            idx.search(&[0.0; 4], 5, 4, &fd, false, &mut s),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn build_is_deterministic_and_round_trips() {
        let a = HnswIndex::build(random_set(300, 6, 8), &small_params()).unwrap();
        let b = HnswIndex::build(random_set(300, 6, 8), &small_params()).unwrap();
        assert_eq!(a, b);
        let mut bytes = Vec::new();
        a.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"DHNS");
        assert_eq!(HnswIndex::read_from(bytes.as_slice()).unwrap(), a);
        assert!(HnswIndex::read_from(&bytes[..bytes.len() - 1]).is_err());
    }
}
