//! Simulated teaching over a frozen self-organised model.
//!
//! The learner asks an [`Oracle`] for the true category of one row at a time.
//! Each answer becomes a category leaf in the knowledge tree and a cross-link
//! from the row's sub-cluster to that category. Untaught rows then take
//! their label from their sub-cluster's links:
//!
//! * one linked category: that category, [`Confidence::Inferred`];
//! * two or more: the nearest branch of the sub-cluster's inter-node, which
//!   only knows the taught rows of that sub-cluster, also `Inferred`;
//! * none: the nearest category leaf centroid, if any, as a [`Confidence::Guess`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{DataRow, Oracle};
use crate::error::{Error, Result};
use crate::metric::{centroid, Centroid, Metric};
use crate::self_organiser::ClusterModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Confidence {
    Known,
    Inferred,
    Guess,
}

impl fmt::Display for Confidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Confidence::Known => "Known",
            Confidence::Inferred => "Inferred",
            Confidence::Guess => "Guess",
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    /// Any unasked row, uniformly.
    #[default]
    Uniform,
    /// Only rows whose label is still uncertain; see [`TeachingSession::pool`].
    Smart,
}

impl FromStr for SamplingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(SamplingMode::Uniform),
            "smart" => Ok(SamplingMode::Smart),
            other => Err(Error::Config(format!("unknown sampling mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryLeaf {
    pub category: usize,
    pub taught_rows: Vec<usize>,
    pub true_centroid: Centroid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterBranch {
    pub category: usize,
    pub rows: Vec<usize>,
    pub centroid: Centroid,
}

/// Discriminator for one sub-cluster that has been taught two or more
/// categories. Branches are ordered by category id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterNode {
    pub subcluster: usize,
    pub branches: Vec<InterBranch>,
}

/// Everything the learner knows: leaves, inter-nodes and cross-links.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Knowledge {
    pub leaves: BTreeMap<usize, CategoryLeaf>,
    pub inter_nodes: BTreeMap<usize, InterNode>,
    /// Sub-cluster id to the categories taught inside it.
    pub cross_links: BTreeMap<usize, BTreeSet<usize>>,
    #[serde(default)]
    pub metric: Metric,
}

impl Knowledge {
    pub fn links(&self, subcluster: usize) -> usize {
        self.cross_links.get(&subcluster).map_or(0, BTreeSet::len)
    }

    /// Label an untaught row that sits in `subcluster` at `features`.
    pub fn infer(&self, subcluster: usize, features: &[f64]) -> (Option<usize>, Confidence) {
        match self.cross_links.get(&subcluster) {
            Some(cats) if cats.len() == 1 => (cats.iter().next().copied(), Confidence::Inferred),
            Some(cats) if cats.len() > 1 => {
                let node = &self.inter_nodes[&subcluster];
                let cat = nearest_category(
                    features,
                    node.branches.iter().map(|b| (b.category, &b.centroid)),
                    self.metric,
                );
                (cat, Confidence::Inferred)
            }
            _ => {
                let cat = nearest_category(
                    features,
                    self.leaves.values().map(|l| (l.category, &l.true_centroid)),
                    self.metric,
                );
                (cat, Confidence::Guess)
            }
        }
    }

    /// Category of the nearest leaf centroid, ignoring cluster structure.
    pub fn nearest_leaf(&self, features: &[f64]) -> Option<usize> {
        nearest_category(
            features,
            self.leaves.values().map(|l| (l.category, &l.true_centroid)),
            self.metric,
        )
    }
}

fn nearest_category<'a>(
    q: &[f64],
    candidates: impl Iterator<Item = (usize, &'a Centroid)>,
    metric: Metric,
) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (cat, c) in candidates {
        let d = metric.eval(q, &c.values);
        best = match best {
            Some((bd, bc)) if bd < d || (bd == d && bc < cat) => Some((bd, bc)),
            _ => Some((d, cat)),
        };
    }
    best.map(|(_, c)| c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub step: usize,
    pub row: usize,
    pub category: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowLabel {
    pub row: usize,
    pub category: Option<usize>,
    pub confidence: Confidence,
}

/// Mutable state of one teaching run. The model is borrowed and never
/// changes while the session lives.
pub struct TeachingSession<'a> {
    model: &'a ClusterModel,
    rows: &'a [DataRow],
    subcluster_of: Vec<usize>,
    knowledge: Knowledge,
    taught: BTreeMap<usize, usize>,
    asked: BTreeSet<usize>,
    rng: ChaCha8Rng,
    seed: u64,
    mode: SamplingMode,
    query_log: Vec<QueryRecord>,
}

impl<'a> TeachingSession<'a> {
    pub fn start(
        model: &'a ClusterModel,
        rows: &'a [DataRow],
        seed: u64,
        mode: SamplingMode,
    ) -> Result<Self> {
        if model.clusters.is_empty() {
            return Err(Error::EmptyModel);
        }
        let subcluster_of = model
            .subcluster_of_rows(rows.len())
            .into_iter()
            .enumerate()
            .map(|(r, s)| {
                s.ok_or_else(|| Error::Config(format!("row {r} is not covered by the model")))
            })
            .collect::<Result<Vec<_>>>()?;
        if model.row_count() != rows.len() {
            return Err(Error::Config(format!(
                "model covers {} rows, dataset has {}",
                model.row_count(),
                rows.len()
            )));
        }
        Ok(TeachingSession {
            model,
            rows,
            subcluster_of,
            knowledge: Knowledge {
                metric: model.config.metric,
                ..Knowledge::default()
            },
            taught: BTreeMap::new(),
            asked: BTreeSet::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
            mode,
            query_log: Vec::new(),
        })
    }

    pub fn model(&self) -> &ClusterModel {
        self.model
    }

    pub fn knowledge(&self) -> &Knowledge {
        &self.knowledge
    }

    pub fn query_log(&self) -> &[QueryRecord] {
        &self.query_log
    }

    pub fn asked(&self) -> &BTreeSet<usize> {
        &self.asked
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn subcluster_of(&self, row: usize) -> usize {
        self.subcluster_of[row]
    }

    /// Rows the sampler may pick from next, ascending.
    ///
    /// In smart mode a row qualifies when its sub-cluster has no link or
    /// conflicting links, or when the label it would get disagrees with the
    /// nearest category leaf. An empty pool ends the session.
    pub fn pool(&self) -> Vec<usize> {
        let unasked = (0..self.rows.len()).filter(|r| !self.asked.contains(r));
        match self.mode {
            SamplingMode::Uniform => unasked.collect(),
            SamplingMode::Smart => unasked.filter(|&r| self.is_uncertain(r)).collect(),
        }
    }

    fn is_uncertain(&self, row: usize) -> bool {
        let sub = self.subcluster_of[row];
        if self.knowledge.links(sub) != 1 {
            return true;
        }
        let features = &self.rows[row].features;
        self.knowledge.infer(sub, features).0 != self.knowledge.nearest_leaf(features)
    }

    /// Ask the oracle about one random row from the pool.
    pub fn query_once(&mut self, oracle: &Oracle) -> Result<(usize, usize)> {
        let pool = self.pool();
        if pool.is_empty() {
            return Err(Error::PoolExhausted);
        }
        let row = pool[self.rng.gen_range(0..pool.len())];
        let category = oracle.label(row)?;
        self.asked.insert(row);
        self.query_log.push(QueryRecord {
            step: self.query_log.len() + 1,
            row,
            category,
        });
        Ok((row, category))
    }

    /// Add a queried row's true category to the knowledge tree.
    pub fn incorporate(&mut self, row: usize, category: usize) -> Result<()> {
        if !self.asked.contains(&row) {
            return Err(Error::NotQueried(row));
        }
        match self.taught.get(&row) {
            Some(&existing) if existing != category => {
                return Err(Error::OracleConflict {
                    row,
                    existing,
                    given: category,
                })
            }
            Some(_) => return Ok(()),
            None => {}
        }
        self.taught.insert(row, category);

        let rows = self.rows;
        let leaf = self
            .knowledge
            .leaves
            .entry(category)
            .or_insert_with(|| CategoryLeaf {
                category,
                taught_rows: Vec::new(),
                true_centroid: Centroid {
                    values: Vec::new(),
                    count: 0,
                },
            });
        let at = leaf.taught_rows.binary_search(&row).unwrap_err();
        leaf.taught_rows.insert(at, row);
        leaf.true_centroid = centroid(leaf.taught_rows.iter().map(|&r| &rows[r].features))?;

        let sub = self.subcluster_of[row];
        let cats = self.knowledge.cross_links.entry(sub).or_default();
        cats.insert(category);
        if cats.len() >= 2 {
            self.rebuild_inter_node(sub)?;
        }
        Ok(())
    }

    fn rebuild_inter_node(&mut self, sub: usize) -> Result<()> {
        let members = &self
            .model
            .subcluster(sub)
            .expect("sub-cluster id from this model")
            .members;
        let mut by_cat: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for r in members {
            if let Some(&c) = self.taught.get(r) {
                by_cat.entry(c).or_default().push(*r);
            }
        }
        let branches = by_cat
            .into_iter()
            .map(|(category, rows)| {
                let c = centroid(rows.iter().map(|&r| &self.rows[r].features))?;
                Ok(InterBranch {
                    category,
                    rows,
                    centroid: c,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.knowledge.inter_nodes.insert(
            sub,
            InterNode {
                subcluster: sub,
                branches,
            },
        );
        Ok(())
    }

    /// Current label and confidence of every row, indexed by row id.
    pub fn infer_labels(&self) -> Vec<RowLabel> {
        (0..self.rows.len())
            .map(|row| {
                let (category, confidence) = match self.taught.get(&row) {
                    Some(&c) => (Some(c), Confidence::Known),
                    None => self
                        .knowledge
                        .infer(self.subcluster_of[row], &self.rows[row].features),
                };
                RowLabel {
                    row,
                    category,
                    confidence,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub name: String,
    /// Rows of this category in the oracle.
    pub support: usize,
    /// Rows the learner labels with this category.
    pub predicted: usize,
    pub correct: usize,
    pub precision: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeachingReport {
    pub n: usize,
    pub budget: usize,
    pub sampling: SamplingMode,
    pub queries_used: usize,
    pub accuracy: f64,
    pub fully_correct: bool,
    pub efficiency: f64,
    pub known: usize,
    pub inferred: usize,
    pub guess: usize,
    pub query_log: Vec<QueryRecord>,
    pub per_category: BTreeMap<usize, CategoryStats>,
    pub labels: Vec<RowLabel>,
    pub knowledge: Knowledge,
}

impl TeachingReport {
    pub fn teaching_efficiency(&self) -> f64 {
        crate::evaluation::teaching_efficiency(self.queries_used, self.n)
    }
}

fn summarise(session: &TeachingSession<'_>, oracle: &Oracle, budget: usize) -> TeachingReport {
    let labels = session.infer_labels();
    let n = labels.len();
    let mut per_category: BTreeMap<usize, CategoryStats> = oracle
        .category_names()
        .iter()
        .enumerate()
        .map(|(c, name)| {
            (
                c,
                CategoryStats {
                    name: name.clone(),
                    support: 0,
                    predicted: 0,
                    correct: 0,
                    precision: None,
                },
            )
        })
        .collect();
    let (mut known, mut inferred, mut guess, mut correct) = (0, 0, 0, 0);
    for l in &labels {
        match l.confidence {
            Confidence::Known => known += 1,
            Confidence::Inferred => inferred += 1,
            Confidence::Guess => guess += 1,
        }
        let truth = oracle.labels()[l.row];
        per_category
            .get_mut(&truth)
            .expect("oracle category")
            .support += 1;
        if let Some(c) = l.category {
            let stats = per_category.get_mut(&c).expect("taught category");
            stats.predicted += 1;
            if c == truth {
                stats.correct += 1;
                correct += 1;
            }
        }
    }
    for stats in per_category.values_mut() {
        if stats.predicted > 0 {
            stats.precision = Some(stats.correct as f64 / stats.predicted as f64);
        }
    }
    let queries_used = session.query_log.len();
    TeachingReport {
        n,
        budget,
        sampling: session.mode,
        queries_used,
        accuracy: if n == 0 {
            0.0
        } else {
            correct as f64 / n as f64
        },
        fully_correct: correct == n,
        efficiency: crate::evaluation::teaching_efficiency(queries_used, n),
        known,
        inferred,
        guess,
        query_log: session.query_log.clone(),
        per_category,
        labels,
        knowledge: session.knowledge.clone(),
    }
}

/// Query and incorporate until every inferred label matches the oracle, the
/// budget is spent, or no rows are left. The completeness check is done
/// here, on the harness side; the session never sees untaught labels.
pub fn run_teaching(
    session: &mut TeachingSession<'_>,
    oracle: &Oracle,
    budget: usize,
) -> Result<TeachingReport> {
    if oracle.len() != session.len() {
        return Err(Error::Config(format!(
            "oracle covers {} rows, session has {}",
            oracle.len(),
            session.len()
        )));
    }
    let truth = oracle.labels();
    loop {
        let all_correct = session
            .infer_labels()
            .iter()
            .all(|l| l.category == Some(truth[l.row]));
        if all_correct || session.query_log.len() >= budget {
            break;
        }
        match session.query_once(oracle) {
            Ok((row, category)) => session.incorporate(row, category)?,
            Err(Error::PoolExhausted) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(summarise(session, oracle, budget))
}
