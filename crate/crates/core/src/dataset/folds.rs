use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::LabeledExample;
use crate::error::{Error, Result};

/// What a cross-validation group is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    /// All examples of one episode form a group; a fold holds out whole
    /// episodes drawn from every scenario.
    #[default]
    Episode,
    /// All examples of one failure scenario form a group.
    Scenario,
}

impl Grouping {
    pub fn key(self, ex: &LabeledExample) -> String {
        match self {
            Grouping::Episode => ex.episode_id.clone(),
            Grouping::Scenario => ex.scenario.name().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub test: Vec<String>,
    pub validation: Vec<String>,
    pub train: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub grouping: Grouping,
    pub folds: Vec<Fold>,
}

/// Example indices of one fold's three partitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

pub const DEFAULT_FOLDS: usize = 6;

/// Nested leave-group-out plan. Sorted groups are dealt round-robin into
/// `n_outer` buckets; fold `i` tests bucket `i`, validates on bucket
/// `(i + 1) mod n_outer` and trains on the rest.
pub fn make_folds(examples: &[LabeledExample], n_outer: usize, grouping: Grouping) -> Result<FoldPlan> {
    let groups: BTreeSet<String> = examples.iter().map(|e| grouping.key(e)).collect();
    if groups.len() < 3 {
        return Err(Error::Usage(format!("need at least 3 groups, found {}", groups.len())));
    }
    if n_outer < 3 || n_outer > groups.len() {
        return Err(Error::Config(format!(
            "fold count {n_outer} must lie in 3..={} for {} groups",
            groups.len(),
            groups.len()
        )));
    }
    let mut buckets = vec![Vec::new(); n_outer];
    for (i, g) in groups.into_iter().enumerate() {
        buckets[i % n_outer].push(g);
    }
    let folds = (0..n_outer)
        .map(|i| {
            let v = (i + 1) % n_outer;
            Fold {
                test: buckets[i].clone(),
                validation: buckets[v].clone(),
                train: (0..n_outer)
                    .filter(|&j| j != i && j != v)
                    .flat_map(|j| buckets[j].iter().cloned())
                    .collect(),
            }
        })
        .collect();
    Ok(FoldPlan { grouping, folds })
}

impl FoldPlan {
    pub fn split(&self, examples: &[LabeledExample], fold: usize) -> Result<Split> {
        let f = self
            .folds
            .get(fold)
            .ok_or_else(|| Error::Usage(format!("fold {fold} out of range")))?;
        let role: HashMap<&str, u8> = f
            .train
            .iter()
            .map(|g| (g.as_str(), 0))
            .chain(f.validation.iter().map(|g| (g.as_str(), 1)))
            .chain(f.test.iter().map(|g| (g.as_str(), 2)))
            .collect();
        let mut split = Split {
            train: Vec::new(),
            validation: Vec::new(),
            test: Vec::new(),
        };
        for (i, ex) in examples.iter().enumerate() {
            match role.get(self.grouping.key(ex).as_str()) {
                Some(0) => split.train.push(i),
                Some(1) => split.validation.push(i),
                Some(2) => split.test.push(i),
                _ => {
                    return Err(Error::Usage(format!(
                        "example {} belongs to no group of fold {fold}",
                        ex.id()
                    )))
                }
            }
        }
        Ok(split)
    }

    /// Checks the partition invariants over example ids: no id shared by two
    /// roles of a fold, and every id tested in exactly one fold.
    pub fn audit(&self, examples: &[LabeledExample]) -> Result<()> {
        let mut tested: HashMap<String, usize> = HashMap::new();
        for fold in 0..self.folds.len() {
            let s = self.split(examples, fold)?;
            let ids = |idx: &[usize]| -> HashSet<String> { idx.iter().map(|&i| examples[i].id()).collect() };
            let (tr, va, te) = (ids(&s.train), ids(&s.validation), ids(&s.test));
            if !tr.is_disjoint(&va) || !tr.is_disjoint(&te) || !va.is_disjoint(&te) {
                return Err(Error::Usage(format!("fold {fold} leaks examples between partitions")));
            }
            for &i in &s.test {
                *tested.entry(examples[i].id()).or_default() += 1;
            }
        }
        for ex in examples {
            let n = tested.get(&ex.id()).copied().unwrap_or(0);
            if n != 1 {
                return Err(Error::Usage(format!("example {} is tested {n} times", ex.id())));
            }
        }
        Ok(())
    }
}
