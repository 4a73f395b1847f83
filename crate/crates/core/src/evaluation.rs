//! Coherence scoring of a self-organised model against the oracle.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::Oracle;
use crate::error::{Error, Result};
use crate::self_organiser::ClusterModel;

/// Rows left after removing the largest single-category group.
pub fn coherence_error(labels: &[usize]) -> Result<usize> {
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let majority = counts.values().copied().max().expect("non-empty");
    Ok(labels.len() - majority)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubClusterScore {
    pub subcluster: usize,
    pub cluster: usize,
    pub size: usize,
    pub majority_category: usize,
    pub error: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub per_subcluster: Vec<SubClusterScore>,
    pub total_incoherent: usize,
    pub cluster_count: usize,
    pub subcluster_count: usize,
}

impl CoherenceReport {
    pub fn is_coherent(&self) -> bool {
        self.total_incoherent == 0
    }
}

/// Score every sub-cluster and sum the errors.
pub fn score_model(model: &ClusterModel, oracle: &Oracle) -> Result<CoherenceReport> {
    let mut per_subcluster = Vec::with_capacity(model.subcluster_count());
    for cluster in &model.clusters {
        for sub in &cluster.subclusters {
            let labels = sub
                .members
                .iter()
                .map(|&r| oracle.label(r))
                .collect::<Result<Vec<_>>>()?;
            let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
            for &l in &labels {
                *counts.entry(l).or_default() += 1;
            }
            // lowest category id among the tied maxima
            let (majority_category, _) =
                counts.iter().fold(
                    (usize::MAX, 0),
                    |best, (&cat, &n)| if n > best.1 { (cat, n) } else { best },
                );
            per_subcluster.push(SubClusterScore {
                subcluster: sub.id,
                cluster: cluster.id,
                size: labels.len(),
                majority_category,
                error: coherence_error(&labels)?,
            });
        }
    }
    let total_incoherent = per_subcluster.iter().map(|s| s.error).sum();
    Ok(CoherenceReport {
        total_incoherent,
        cluster_count: model.cluster_count(),
        subcluster_count: per_subcluster.len(),
        per_subcluster,
    })
}

/// Oracle queries spent per data row.
pub fn teaching_efficiency(queries_used: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    queries_used as f64 / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::DataRow;
    use crate::self_organiser::SelfOrgConfig;

    const A: usize = 0;
    const B: usize = 1;
    const C: usize = 2;

    #[test]
    fn worked_example() {
        assert_eq!(coherence_error(&[A, A, A, B, B]).unwrap(), 2);
    }

    #[test]
    fn coherence_edge_cases() {
        assert_eq!(coherence_error(&[A]).unwrap(), 0);
        assert_eq!(coherence_error(&[A, A, B, B, C, C]).unwrap(), 4);
        assert_eq!(coherence_error(&[A, A, A, B, B, C]).unwrap(), 3);
        assert!(coherence_error(&[]).is_err());
    }

    fn rows(n: usize) -> Vec<DataRow> {
        (0..n)
            .map(|id| DataRow {
                id,
                features: vec![id as f64],
            })
            .collect()
    }

    #[test]
    fn score_model_sums_subcluster_errors() {
        let r = rows(6);
        let oracle = Oracle::new(vec![A, A, B, B, B, A], vec!["a".into(), "b".into()]).unwrap();
        let pure = ClusterModel::from_groups(
            vec![vec![vec![0, 1, 5]], vec![vec![2, 3], vec![4]]],
            &r,
            SelfOrgConfig::default(),
        )
        .unwrap();
        let report = score_model(&pure, &oracle).unwrap();
        assert_eq!(report.total_incoherent, 0);
        assert_eq!(report.cluster_count, 2);
        assert_eq!(report.subcluster_count, 3);

        let mixed = ClusterModel::from_groups(
            vec![vec![vec![0, 1, 2]], vec![vec![3, 4]], vec![vec![5]]],
            &r,
            SelfOrgConfig::default(),
        )
        .unwrap();
        let report = score_model(&mixed, &oracle).unwrap();
        assert_eq!(report.total_incoherent, 1);
        assert_eq!(report.per_subcluster[0].majority_category, A);
        assert_eq!(report.per_subcluster[0].error, 1);
    }

    #[test]
    fn score_model_missing_label() {
        let r = rows(3);
        let oracle = Oracle::new(vec![A, A], vec!["a".into()]).unwrap();
        let m = ClusterModel::from_groups(vec![vec![vec![0, 1, 2]]], &r, SelfOrgConfig::default())
            .unwrap();
        assert!(matches!(
            score_model(&m, &oracle),
            Err(Error::MissingLabel(2))
        ));
    }

    #[test]
    fn efficiency_ratios() {
        assert_eq!(teaching_efficiency(90, 150), 0.6);
        assert_eq!(teaching_efficiency(0, 150), 0.0);
        assert_eq!(teaching_efficiency(150, 150), 1.0);
    }
}
