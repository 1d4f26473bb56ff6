//! External clustering quality: Jaccard coefficient over sample pairs and
//! V-measure over the class/cluster contingency table.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Pair tallies: `ss` same cluster and same class, `sd` same cluster but
/// different class, `ds` different cluster but same class, `dd` neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub ss: u64,
    pub sd: u64,
    pub ds: u64,
    pub dd: u64,
}

/// `a[q][p]`: samples of class `q` placed in cluster `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub a: Vec<Vec<u64>>,
    pub n: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VMeasure {
    pub v: f64,
    pub homogeneity: f64,
    pub completeness: f64,
}

fn dense_ids(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = alloc::collections::BTreeMap::new();
    let ids = labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect();
    (ids, map.len())
}

impl ContingencyTable {
    /// Rows are classes of `truth`, columns clusters of `pred`. Label values
    /// may be arbitrary; unused ids produce no empty rows or columns.
    pub fn new(pred: &[usize], truth: &[usize]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::Shape(format!("{} predicted labels vs {} true labels", pred.len(), truth.len())));
        }
        let (p, kp) = dense_ids(pred);
        let (t, kt) = dense_ids(truth);
        let mut a = vec![vec![0u64; kp]; kt];
        for (&q, &c) in t.iter().zip(&p) {
            a[q][c] += 1;
        }
        let table = Self { a, n: pred.len() as u64 };
        debug_assert_eq!(table.a.iter().flatten().sum::<u64>(), table.n);
        Ok(table)
    }

    pub fn class_totals(&self) -> Vec<u64> {
        self.a.iter().map(|row| row.iter().sum()).collect()
    }

    pub fn cluster_totals(&self) -> Vec<u64> {
        let k = self.a.first().map_or(0, Vec::len);
        (0..k).map(|p| self.a.iter().map(|row| row[p]).sum()).collect()
    }

    pub fn pair_counts(&self) -> PairCounts {
        let c2 = |x: u64| x * x.saturating_sub(1) / 2;
        let ss: u64 = self.a.iter().flatten().map(|&x| c2(x)).sum();
        let same_cluster: u64 = self.cluster_totals().into_iter().map(c2).sum();
        let same_class: u64 = self.class_totals().into_iter().map(c2).sum();
        let total = c2(self.n);
        let counts =
            PairCounts { ss, sd: same_cluster - ss, ds: same_class - ss, dd: total + ss - same_cluster - same_class };
        assert_eq!(counts.ss + counts.sd + counts.ds + counts.dd, total);
        counts
    }
}

/// `SS / (SS + SD + DS)`. When both partitions are all singletons there are
/// no co-clustered pairs at all and the partitions agree, so the result is 1.
pub fn jaccard(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() < 2 {
        return Err(Error::TooFewSamples(pred.len()));
    }
    let pc = ContingencyTable::new(pred, truth)?.pair_counts();
    let denom = pc.ss + pc.sd + pc.ds;
    Ok(if denom == 0 { 1.0 } else { pc.ss as f64 / denom as f64 })
}

fn xlogx_ratio(count: u64, total: u64) -> f64 {
    if count == 0 {
        0.0
    } else {
        let p = count as f64 / total as f64;
        p * libm::log(p)
    }
}

/// V-measure with weight `beta` (1 for the harmonic mean). Natural logs.
pub fn v_measure(pred: &[usize], truth: &[usize], beta: f64) -> Result<VMeasure> {
    let table = ContingencyTable::new(pred, truth)?;
    let n = table.n;
    if n == 0 {
        return Ok(VMeasure { v: 1.0, homogeneity: 1.0, completeness: 1.0 });
    }
    let classes = table.class_totals();
    let clusters = table.cluster_totals();

    let h_c: f64 = -classes.iter().map(|&c| xlogx_ratio(c, n)).sum::<f64>();
    let h_k: f64 = -clusters.iter().map(|&k| xlogx_ratio(k, n)).sum::<f64>();
    let mut h_c_given_k = 0.0;
    let mut h_k_given_c = 0.0;
    for (q, row) in table.a.iter().enumerate() {
        for (p, &a) in row.iter().enumerate() {
            if a == 0 {
                continue;
            }
            let joint = a as f64 / n as f64;
            h_c_given_k -= joint * libm::log(a as f64 / clusters[p] as f64);
            h_k_given_c -= joint * libm::log(a as f64 / classes[q] as f64);
        }
    }
    // H(C, K) = 0 exactly when both partitions are a single block.
    let homogeneity = if h_c == 0.0 { 1.0 } else { 1.0 - h_c_given_k / h_c };
    let completeness = if h_k == 0.0 { 1.0 } else { 1.0 - h_k_given_c / h_k };
    let v = if homogeneity + completeness == 0.0 {
        0.0
    } else {
        (1.0 + beta) * homogeneity * completeness / (beta * homogeneity + completeness)
    };
    Ok(VMeasure { v, homogeneity, completeness })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_partitions() {
        let t = [0, 0, 1, 1, 2];
        assert_eq!(jaccard(&t, &t).unwrap(), 1.0);
        let vm = v_measure(&t, &t, 1.0).unwrap();
        assert!((vm.v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn worked_jaccard() {
        // truth {a,b},{c,d}; pred {a},{b,c,d}
        let truth = [0, 0, 1, 1];
        let pred = [0, 1, 1, 1];
        let pc = ContingencyTable::new(&pred, &truth).unwrap().pair_counts();
        assert_eq!((pc.ss, pc.sd, pc.ds, pc.dd), (1, 2, 1, 2));
        assert_eq!(jaccard(&pred, &truth).unwrap(), 0.25);
    }

    #[test]
    fn singletons() {
        let truth = [0, 0, 1, 1];
        let single = [0, 1, 2, 3];
        assert_eq!(jaccard(&single, &truth).unwrap(), 0.0);
        assert_eq!(jaccard(&single, &single).unwrap(), 1.0);
    }

    #[test]
    fn one_cluster_is_complete() {
        let truth = [0, 0, 1, 1, 2];
        let pred = [0; 5];
        let vm = v_measure(&pred, &truth, 1.0).unwrap();
        assert_eq!(vm.completeness, 1.0);
        assert!(vm.homogeneity < 1.0);
        assert_eq!(vm.homogeneity, 0.0);
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(jaccard(&[0, 1], &[0, 1, 1]), Err(Error::Shape(_))));
        assert!(matches!(v_measure(&[0, 1], &[0], 1.0), Err(Error::Shape(_))));
    }
}
