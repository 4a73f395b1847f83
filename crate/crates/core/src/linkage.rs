//! Closest-link graph, its connected components, and the per-cluster
//! frequency grid used to split a cluster into sub-clusters.
//!
//! Ties anywhere in this module resolve to the lowest row id.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::dataset::DataRow;
use crate::error::{Error, Result};
use crate::metric::Metric;

/// Each row's single closest other row.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LinkMap {
    pub links: BTreeMap<usize, usize>,
}

impl LinkMap {
    pub fn target(&self, row: usize) -> Option<usize> {
        self.links.get(&row).copied()
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }
}

/// Inbound closest-link counts inside one cluster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyGrid {
    pub inbound: BTreeMap<usize, usize>,
    /// The in-cluster links the counts were taken from.
    pub links: LinkMap,
}

impl FrequencyGrid {
    pub fn count(&self, row: usize) -> usize {
        self.inbound.get(&row).copied().unwrap_or(0)
    }
}

/// Result of splitting one cluster with its frequency grid.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SubClusterSet {
    /// Groups of two or more rows, each sorted, ordered by smallest member.
    pub subclusters: Vec<Vec<usize>>,
    /// Rows that ended up alone.
    pub additional: Vec<usize>,
}

/// Closest links over every row in `universe`.
pub fn closest_links(universe: &[DataRow], metric: Metric) -> Result<LinkMap> {
    let points: Vec<(usize, &[f64])> = universe
        .iter()
        .map(|r| (r.id, r.features.as_slice()))
        .collect();
    links_over(&points, metric)
}

/// Closest links restricted to `members`, looked up by id in `rows`.
pub fn closest_links_within(
    rows: &[DataRow],
    members: &[usize],
    metric: Metric,
) -> Result<LinkMap> {
    let points: Vec<(usize, &[f64])> = members
        .iter()
        .map(|&id| (id, rows[id].features.as_slice()))
        .collect();
    links_over(&points, metric)
}

fn links_over(points: &[(usize, &[f64])], metric: Metric) -> Result<LinkMap> {
    if points.len() < 2 {
        return Err(Error::TooFewRows {
            required: 2,
            found: points.len(),
        });
    }
    let dim = points[0].1.len();
    if let Some((_, f)) = points.iter().find(|(_, f)| f.len() != dim) {
        return Err(Error::DimensionMismatch {
            left: dim,
            right: f.len(),
        });
    }
    let mut links = BTreeMap::new();
    for &(id, a) in points {
        let mut best: Option<(f64, usize)> = None;
        for &(other, b) in points {
            if other == id {
                continue;
            }
            let d = metric.eval(a, b);
            best = match best {
                Some((bd, bid)) if bd < d || (bd == d && bid < other) => Some((bd, bid)),
                _ => Some((d, other)),
            };
        }
        links.insert(id, best.expect("at least one other row").1);
    }
    Ok(LinkMap { links })
}

/// Connected components of the undirected link graph, each sorted and the
/// list ordered by smallest member.
pub fn components(link_map: &LinkMap) -> Vec<Vec<usize>> {
    let mut adjacency: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (&from, &to) in &link_map.links {
        adjacency.entry(from).or_default().push(to);
        adjacency.entry(to).or_default().push(from);
    }
    let mut seen: BTreeMap<usize, bool> = adjacency.keys().map(|&k| (k, false)).collect();
    let mut out = Vec::new();
    for &start in adjacency.keys() {
        if seen[&start] {
            continue;
        }
        let mut part = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen.insert(start, true);
        while let Some(node) = queue.pop_front() {
            part.push(node);
            for &next in &adjacency[&node] {
                if !seen[&next] {
                    seen.insert(next, true);
                    queue.push_back(next);
                }
            }
        }
        part.sort_unstable();
        out.push(part);
    }
    // BTreeMap iteration visits starts in ascending order, so the list is
    // already ordered by smallest member.
    out
}

/// Count, for every member, how many other members have it as their closest
/// in-cluster row.
pub fn frequency_grid(
    cluster: &[usize],
    rows: &[DataRow],
    metric: Metric,
) -> Result<FrequencyGrid> {
    let links = closest_links_within(rows, cluster, metric)?;
    let mut inbound: BTreeMap<usize, usize> = cluster.iter().map(|&id| (id, 0)).collect();
    for &target in links.links.values() {
        *inbound.get_mut(&target).expect("link targets are members") += 1;
    }
    Ok(FrequencyGrid { inbound, links })
}

/// Split a cluster around its frequency-grid hubs.
///
/// Rows whose inbound count reaches `exemplar_threshold` become exemplars.
/// With fewer than two exemplars the cluster stays whole. Otherwise every
/// member joins its nearest exemplar, and groups of one are moved to
/// `additional`.
pub fn subcluster(
    cluster: &[usize],
    grid: &FrequencyGrid,
    rows: &[DataRow],
    exemplar_threshold: usize,
    metric: Metric,
) -> SubClusterSet {
    let mut members = cluster.to_vec();
    members.sort_unstable();
    let exemplars: Vec<usize> = members
        .iter()
        .copied()
        .filter(|&id| grid.count(id) >= exemplar_threshold)
        .collect();
    if exemplars.len() < 2 {
        return if members.len() >= 2 {
            SubClusterSet {
                subclusters: vec![members],
                additional: Vec::new(),
            }
        } else {
            SubClusterSet {
                subclusters: Vec::new(),
                additional: members,
            }
        };
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &id in &members {
        let features = &rows[id].features;
        let mut best = (f64::INFINITY, usize::MAX);
        for &ex in &exemplars {
            let d = metric.eval(features, &rows[ex].features);
            if d < best.0 {
                best = (d, ex);
            }
        }
        groups.entry(best.1).or_default().push(id);
    }

    let mut result = SubClusterSet::default();
    for group in groups.into_values() {
        if group.len() == 1 {
            result.additional.push(group[0]);
        } else {
            result.subclusters.push(group);
        }
    }
    result.subclusters.sort_by_key(|g| g[0]);
    result.additional.sort_unstable();
    result
}
