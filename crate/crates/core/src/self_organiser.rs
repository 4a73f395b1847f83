//! The unsupervised loop: closest-link clustering, frequency-grid
//! sub-clusters, the merge test, centroid refresh and reassignment.
//!
//! Models are kept in a canonical form at every iteration boundary. Base
//! clusters are ordered by their smallest member and numbered from 0.
//! Sub-clusters are ordered the same way inside each cluster and numbered
//! globally across the model. Every "lowest id" tie rule refers to these
//! canonical ids.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::dataset::DataRow;
use crate::error::{Error, Result};
use crate::linkage::{closest_links, components, frequency_grid, subcluster};
use crate::metric::{centroid, Centroid, Metric};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfOrgConfig {
    pub exemplar_threshold: usize,
    pub max_iterations: usize,
    pub metric: Metric,
}

impl Default for SelfOrgConfig {
    fn default() -> Self {
        SelfOrgConfig {
            exemplar_threshold: 2,
            max_iterations: 50,
            metric: Metric::L2,
        }
    }
}

impl SelfOrgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if self.exemplar_threshold < 2 {
            return Err(Error::Config(
                "exemplar_threshold must be at least 2".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubCluster {
    pub id: usize,
    pub members: Vec<usize>,
    pub centroid: Centroid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: usize,
    pub members: Vec<usize>,
    pub centroid: Centroid,
    pub subclusters: Vec<SubCluster>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub cluster_count: usize,
    pub subcluster_count: usize,
    pub moved: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub clusters: Vec<Cluster>,
    pub iterations: usize,
    pub config: SelfOrgConfig,
    pub trace: Vec<TraceEntry>,
}

/// Nested membership: clusters of sub-clusters of row ids.
type Groups = Vec<Vec<Vec<usize>>>;

impl ClusterModel {
    /// Build a canonical model from raw groups. Empty sub-clusters and
    /// clusters are dropped, and every centroid is recomputed from the rows.
    pub fn from_groups(groups: Groups, rows: &[DataRow], config: SelfOrgConfig) -> Result<Self> {
        let mut groups: Groups = groups
            .into_iter()
            .map(|subs| {
                let mut subs: Vec<Vec<usize>> = subs
                    .into_iter()
                    .filter(|s| !s.is_empty())
                    .map(|mut s| {
                        s.sort_unstable();
                        s
                    })
                    .collect();
                subs.sort_by_key(|s| s[0]);
                subs
            })
            .filter(|subs| !subs.is_empty())
            .collect();
        groups.sort_by_key(|subs| subs.iter().map(|s| s[0]).min().expect("non-empty"));

        let mut clusters = Vec::with_capacity(groups.len());
        let mut next_sub = 0;
        for (cid, subs) in groups.into_iter().enumerate() {
            let mut members: Vec<usize> = subs.iter().flatten().copied().collect();
            members.sort_unstable();
            let cluster_centroid = centroid(members.iter().map(|&r| &rows[r].features))?;
            let mut subclusters = Vec::with_capacity(subs.len());
            for sub in subs {
                let c = centroid(sub.iter().map(|&r| &rows[r].features))?;
                subclusters.push(SubCluster {
                    id: next_sub,
                    members: sub,
                    centroid: c,
                });
                next_sub += 1;
            }
            clusters.push(Cluster {
                id: cid,
                members,
                centroid: cluster_centroid,
                subclusters,
            });
        }
        Ok(ClusterModel {
            clusters,
            iterations: 0,
            config,
            trace: Vec::new(),
        })
    }

    fn groups(&self) -> Groups {
        self.clusters
            .iter()
            .map(|c| c.subclusters.iter().map(|s| s.members.clone()).collect())
            .collect()
    }

    fn rebuilt(&self, groups: Groups, rows: &[DataRow]) -> Result<Self> {
        let mut m = ClusterModel::from_groups(groups, rows, self.config)?;
        m.iterations = self.iterations;
        m.trace = self.trace.clone();
        Ok(m)
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn subcluster_count(&self) -> usize {
        self.clusters.iter().map(|c| c.subclusters.len()).sum()
    }

    pub fn row_count(&self) -> usize {
        self.clusters.iter().map(|c| c.members.len()).sum()
    }

    pub fn subclusters(&self) -> impl Iterator<Item = &SubCluster> {
        self.clusters.iter().flat_map(|c| c.subclusters.iter())
    }

    pub fn subcluster(&self, id: usize) -> Option<&SubCluster> {
        self.subclusters().find(|s| s.id == id)
    }

    /// Sub-cluster id of every row, indexed by row id. Rows outside the model
    /// map to `None`.
    pub fn subcluster_of_rows(&self, n: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n];
        for sub in self.subclusters() {
            for &r in &sub.members {
                if r < n {
                    out[r] = Some(sub.id);
                }
            }
        }
        out
    }

    /// Cluster id of every row, indexed by row id.
    pub fn cluster_of_rows(&self, n: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n];
        for c in &self.clusters {
            for &r in &c.members {
                if r < n {
                    out[r] = Some(c.id);
                }
            }
        }
        out
    }

    /// Check that clusters and sub-clusters both partition `0..n` and that
    /// cluster membership is the union of its branches.
    pub fn check_partition(&self, n: usize) -> std::result::Result<(), String> {
        let mut cluster_seen = vec![false; n];
        let mut sub_seen = vec![false; n];
        for c in &self.clusters {
            if c.members.is_empty() {
                return Err(format!("cluster {} is empty", c.id));
            }
            for &r in &c.members {
                if r >= n || std::mem::replace(&mut cluster_seen[r], true) {
                    return Err(format!("row {r} repeated or out of range in clusters"));
                }
            }
            let mut union: Vec<usize> = c
                .subclusters
                .iter()
                .flat_map(|s| s.members.iter().copied())
                .collect();
            union.sort_unstable();
            if union != c.members {
                return Err(format!(
                    "cluster {} members differ from its sub-clusters",
                    c.id
                ));
            }
            for s in &c.subclusters {
                if s.members.is_empty() {
                    return Err(format!("sub-cluster {} is empty", s.id));
                }
                for &r in &s.members {
                    if std::mem::replace(&mut sub_seen[r], true) {
                        return Err(format!("row {r} in two sub-clusters"));
                    }
                }
            }
        }
        if let Some(r) = cluster_seen.iter().position(|&s| !s) {
            return Err(format!("row {r} not in any cluster"));
        }
        Ok(())
    }

    /// Largest absolute deviation between any stored centroid and the mean of
    /// its members recomputed from `rows`.
    pub fn max_centroid_error(&self, rows: &[DataRow]) -> f64 {
        let dev = |stored: &Centroid, members: &[usize]| -> f64 {
            let fresh = centroid(members.iter().map(|&r| &rows[r].features)).expect("non-empty");
            let count_off = if fresh.count == stored.count {
                0.0
            } else {
                f64::INFINITY
            };
            stored
                .values
                .iter()
                .zip(&fresh.values)
                .map(|(a, b)| (a - b).abs())
                .fold(count_off, f64::max)
        };
        self.clusters
            .iter()
            .flat_map(|c| {
                std::iter::once(dev(&c.centroid, &c.members))
                    .chain(c.subclusters.iter().map(|s| dev(&s.centroid, &s.members)))
            })
            .fold(0.0, f64::max)
    }
}

/// Initial clusters: connected components of the closest-link graph. Each
/// cluster starts with one branch covering all of it.
pub fn initial_model(rows: &[DataRow], config: SelfOrgConfig) -> Result<ClusterModel> {
    let links = closest_links(rows, config.metric)?;
    let groups = components(&links).into_iter().map(|c| vec![c]).collect();
    ClusterModel::from_groups(groups, rows, config)
}

/// Split every cluster with its frequency grid and pool all stranded
/// single rows into one new base cluster.
pub fn refine_subclusters(model: &ClusterModel, rows: &[DataRow]) -> Result<ClusterModel> {
    let metric = model.config.metric;
    let mut groups: Groups = Vec::with_capacity(model.clusters.len() + 1);
    let mut additional = Vec::new();
    for c in &model.clusters {
        if c.members.len() < 2 {
            groups.push(vec![c.members.clone()]);
            continue;
        }
        let grid = frequency_grid(&c.members, rows, metric)?;
        let set = subcluster(
            &c.members,
            &grid,
            rows,
            model.config.exemplar_threshold,
            metric,
        );
        additional.extend(set.additional);
        groups.push(set.subclusters);
    }
    if !additional.is_empty() {
        groups.push(vec![additional]);
    }
    model.rebuilt(groups, rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    x: f64,
    a: usize,
    b: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    // reversed so the BinaryHeap pops the smallest distance first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .x
            .total_cmp(&self.x)
            .then_with(|| other.a.cmp(&self.a))
            .then_with(|| other.b.cmp(&self.b))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Slot {
    subs: Vec<Vec<usize>>,
    centroid: Vec<f64>,
    sub_centroids: Vec<Vec<f64>>,
    /// Sum of pairwise distances among `sub_centroids`.
    intra: f64,
    alive: bool,
}

/// Average pairwise distance among the pooled sub-cluster centroids of two
/// clusters, or `None` when fewer than two are pooled.
fn pooled_spread(a: &Slot, b: &Slot, metric: Metric) -> Option<f64> {
    let p = a.sub_centroids.len() + b.sub_centroids.len();
    if p < 2 {
        return None;
    }
    let cross = cross_sum(a, b, metric);
    let pairs = (p * (p - 1) / 2) as f64;
    Some((a.intra + b.intra + cross) / pairs)
}

fn cross_sum(a: &Slot, b: &Slot, metric: Metric) -> f64 {
    a.sub_centroids
        .iter()
        .flat_map(|x| b.sub_centroids.iter().map(move |y| metric.eval(x, y)))
        .sum()
}

fn intra_sum(cents: &[Vec<f64>], metric: Metric) -> f64 {
    let mut s = 0.0;
    for i in 0..cents.len() {
        for j in i + 1..cents.len() {
            s += metric.eval(&cents[i], &cents[j]);
        }
    }
    s
}

/// Combine clusters whose centroid distance falls below the average spread
/// of their pooled sub-cluster centroids.
///
/// Pairs are tried in ascending centroid distance. After every merge the scan
/// restarts, which is equivalent to continuing from a heap that also holds
/// the merged cluster's new pairs: pairs of untouched clusters that already
/// failed the test would fail again.
pub fn merge_pass(model: &ClusterModel, rows: &[DataRow]) -> Result<ClusterModel> {
    let metric = model.config.metric;
    let mut slots: Vec<Slot> = model
        .clusters
        .iter()
        .map(|c| {
            let sub_centroids: Vec<Vec<f64>> = c
                .subclusters
                .iter()
                .map(|s| s.centroid.values.clone())
                .collect();
            Slot {
                subs: c.subclusters.iter().map(|s| s.members.clone()).collect(),
                centroid: c.centroid.values.clone(),
                intra: intra_sum(&sub_centroids, metric),
                sub_centroids,
                alive: true,
            }
        })
        .collect();

    let mut heap = BinaryHeap::new();
    for a in 0..slots.len() {
        for b in a + 1..slots.len() {
            heap.push(Candidate {
                x: metric.eval(&slots[a].centroid, &slots[b].centroid),
                a,
                b,
            });
        }
    }

    let mut merges = 0usize;
    while let Some(Candidate { x, a, b }) = heap.pop() {
        if !slots[a].alive || !slots[b].alive {
            continue;
        }
        let Some(spread) = pooled_spread(&slots[a], &slots[b], metric) else {
            continue;
        };
        if x >= spread {
            continue;
        }
        let cross = cross_sum(&slots[a], &slots[b], metric);
        slots[a].alive = false;
        slots[b].alive = false;
        let mut subs = std::mem::take(&mut slots[a].subs);
        subs.append(&mut slots[b].subs);
        let mut sub_centroids = std::mem::take(&mut slots[a].sub_centroids);
        sub_centroids.append(&mut slots[b].sub_centroids);
        let merged = centroid(subs.iter().flatten().map(|&r| &rows[r].features))?;
        let new = slots.len();
        slots.push(Slot {
            intra: slots[a].intra + slots[b].intra + cross,
            subs,
            centroid: merged.values,
            sub_centroids,
            alive: true,
        });
        merges += 1;
        for k in 0..new {
            if slots[k].alive {
                heap.push(Candidate {
                    x: metric.eval(&slots[k].centroid, &slots[new].centroid),
                    a: k,
                    b: new,
                });
            }
        }
    }
    log::debug!("merge pass: {merges} merges");

    let groups = slots
        .into_iter()
        .filter(|s| s.alive)
        .map(|s| s.subs)
        .collect();
    model.rebuilt(groups, rows)
}

fn nearest<'a, I>(q: &[f64], candidates: I, metric: Metric) -> Option<usize>
where
    I: IntoIterator<Item = (usize, &'a [f64])>,
{
    let mut best: Option<(f64, usize)> = None;
    for (id, c) in candidates {
        let d = metric.eval(q, c);
        best = match best {
            Some((bd, bid)) if bd < d || (bd == d && bid < id) => Some((bd, bid)),
            _ => Some((d, id)),
        };
    }
    best.map(|(_, id)| id)
}

/// Move every row to the base cluster whose centroid is nearest. A moved row
/// joins the nearest branch of its new cluster. Emptied clusters disappear.
pub fn reassign_pass(model: &ClusterModel, rows: &[DataRow]) -> Result<(ClusterModel, usize)> {
    let metric = model.config.metric;
    let n = rows.len();
    let home = model.cluster_of_rows(n);
    let mut groups = model.groups();
    let mut moved = 0;
    let mut incoming: Vec<(usize, usize)> = Vec::new();

    for c in &model.clusters {
        for &r in &c.members {
            let q = &rows[r].features;
            let target = nearest(
                q,
                model
                    .clusters
                    .iter()
                    .map(|k| (k.id, k.centroid.values.as_slice())),
                metric,
            )
            .expect("model has clusters");
            if Some(target) != home[r] {
                moved += 1;
                incoming.push((r, target));
            }
        }
    }

    for &(r, target) in &incoming {
        let from = home[r].expect("row belongs to a cluster");
        for sub in groups[from].iter_mut() {
            sub.retain(|&m| m != r);
        }
        let dest = &model.clusters[target];
        let branch = nearest(
            &rows[r].features,
            dest.subclusters
                .iter()
                .enumerate()
                .map(|(i, s)| (i, s.centroid.values.as_slice())),
            metric,
        )
        .expect("cluster has branches");
        groups[target][branch].push(r);
    }

    Ok((model.rebuilt(groups, rows)?, moved))
}

/// Run the full loop until rows stop moving, the cluster count repeats
/// between two consecutive iterations, or `max_iterations` is reached.
pub fn run(rows: &[DataRow], config: SelfOrgConfig) -> Result<ClusterModel> {
    config.validate()?;
    let mut model = initial_model(rows, config)?;
    log::info!(
        "initial model: {} clusters over {} rows",
        model.cluster_count(),
        rows.len()
    );
    let mut previous_count: Option<usize> = None;
    for iter in 1..=config.max_iterations {
        let refined = refine_subclusters(&model, rows)?;
        let merged = merge_pass(&refined, rows)?;
        let (next, moved) = reassign_pass(&merged, rows)?;
        model = next;
        model.iterations = iter;
        let count = model.cluster_count();
        model.trace.push(TraceEntry {
            iter,
            cluster_count: count,
            subcluster_count: model.subcluster_count(),
            moved,
        });
        log::debug!("iteration {iter}: {count} clusters, {moved} moved");
        if moved == 0 || previous_count == Some(count) {
            break;
        }
        previous_count = Some(count);
    }
    Ok(model)
}

/// Top-down descent: nearest base centroid, then nearest branch inside it.
/// Returns `(cluster id, sub-cluster id)`.
pub fn classify(model: &ClusterModel, q: &[f64]) -> Result<(usize, usize)> {
    let metric = model.config.metric;
    let first = model.clusters.first().ok_or(Error::EmptyModel)?;
    if first.centroid.dim() != q.len() {
        return Err(Error::DimensionMismatch {
            left: first.centroid.dim(),
            right: q.len(),
        });
    }
    let cid = nearest(
        q,
        model
            .clusters
            .iter()
            .map(|c| (c.id, c.centroid.values.as_slice())),
        metric,
    )
    .ok_or(Error::EmptyModel)?;
    let cluster = model
        .clusters
        .iter()
        .find(|c| c.id == cid)
        .expect("id from this model");
    let sid = nearest(
        q,
        cluster
            .subclusters
            .iter()
            .map(|s| (s.id, s.centroid.values.as_slice())),
        metric,
    )
    .ok_or(Error::EmptyModel)?;
    Ok((cid, sid))
}
