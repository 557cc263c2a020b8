//! The BWDM stopping rule.
//!
//! For a partition into K clusters with sizes `k_i` and spatial medians
//! `SM_i`:
//!
//! * ABDM(K) is the mean Euclidean distance over all `C(K, 2)` unordered
//!   pairs of cluster medians (between-cluster spread);
//! * AWDM(K) is the mean distance of each observation to the median of its
//!   own cluster (within-cluster spread);
//! * BWDM(K) = (ABDM / (K − 1)) / (AWDM / (n − K)), using the same degrees of
//!   freedom as the Calinski–Harabasz variance ratio.
//!
//! The estimated number of clusters is the K in `2..=k_max` maximising BWDM.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{euclidean, spatial_median_of, DataMatrix, Point, WeiszfeldOptions};
use crate::partition::{fit_range, FitResult, Partition, PartitionerConfig};

pub const DEFAULT_K_MAX: usize = 10;

/// Per-cluster sizes and spatial medians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub sizes: Vec<usize>,
    pub medians: Vec<Point>,
}

impl ClusterSummary {
    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    pub fn n(&self) -> usize {
        self.sizes.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRecord {
    pub k: usize,
    pub abdm: f64,
    pub awdm: f64,
    /// `+inf` when `awdm == 0`; serialised as `null` in JSON.
    pub bwdm: f64,
    /// Set when every observation coincides with its cluster median.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexCurve {
    pub records: Vec<IndexRecord>,
    pub best_k: usize,
    pub n: usize,
}

impl IndexCurve {
    pub fn record(&self, k: usize) -> Option<&IndexRecord> {
        self.records.iter().find(|r| r.k == k)
    }

    pub fn bwdm(&self, k: usize) -> Option<f64> {
        self.record(k).map(|r| r.bwdm)
    }
}

/// Number of unordered pairs among `k` items.
pub fn pairs(k: usize) -> usize {
    k * k.saturating_sub(1) / 2
}

pub fn summarize(data: &DataMatrix, partition: &Partition) -> Result<ClusterSummary> {
    summarize_with(data, partition, WeiszfeldOptions::default())
}

pub fn summarize_with(
    data: &DataMatrix,
    partition: &Partition,
    opts: WeiszfeldOptions,
) -> Result<ClusterSummary> {
    partition.check_against(data)?;
    let members = partition.members();
    let mut sizes = Vec::with_capacity(members.len());
    let mut medians = Vec::with_capacity(members.len());
    for (c, idx) in members.iter().enumerate() {
        if idx.is_empty() {
            return Err(Error::InvalidPartition(format!("cluster {c} is empty")));
        }
        let rows: Vec<&[f64]> = idx.iter().map(|&i| data.row(i)).collect();
        sizes.push(idx.len());
        medians.push(spatial_median_of(&rows, None, opts)?.median);
    }
    Ok(ClusterSummary { sizes, medians })
}

/// Mean pairwise distance between cluster medians.
pub fn abdm(summary: &ClusterSummary) -> Result<f64> {
    let k = summary.k();
    if k < 2 {
        return Err(Error::Undefined("ABDM undefined for K<2"));
    }
    let m = &summary.medians;
    let mut total = 0.0;
    for i in 0..k {
        for j in (i + 1)..k {
            total += euclidean(m[i].coords(), m[j].coords());
        }
    }
    Ok(total / pairs(k) as f64)
}

/// Mean distance of each observation to its own cluster median.
pub fn awdm(data: &DataMatrix, partition: &Partition, summary: &ClusterSummary) -> Result<f64> {
    partition.check_against(data)?;
    if summary.k() != partition.k() || summary.n() != data.n() {
        return Err(Error::InvalidPartition(
            "summary does not match partition".into(),
        ));
    }
    let total: f64 = data
        .rows()
        .zip(partition.labels())
        .map(|(x, &l)| euclidean(x, summary.medians[l].coords()))
        .sum();
    Ok(total / data.n() as f64)
}

/// `(abdm / (k − 1)) / (awdm / (n − k))`; `+inf` when `awdm == 0`.
pub fn bwdm(abdm: f64, awdm: f64, k: usize, n: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::InvalidK {
            k,
            n,
            reason: "BWDM needs K >= 2",
        });
    }
    if k >= n {
        return Err(Error::InvalidK {
            k,
            n,
            reason: "BWDM needs K < n",
        });
    }
    if !(awdm >= 0.0) || !(abdm >= 0.0) {
        return Err(Error::InvalidParameter("ABDM and AWDM must be >= 0".into()));
    }
    if awdm == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((abdm / (k - 1) as f64) / (awdm / (n - k) as f64))
}

pub fn index_record(data: &DataMatrix, partition: &Partition) -> Result<IndexRecord> {
    let summary = summarize(data, partition)?;
    let k = partition.k();
    let a = abdm(&summary)?;
    let w = awdm(data, partition, &summary)?;
    Ok(IndexRecord {
        k,
        abdm: a,
        awdm: w,
        bwdm: bwdm(a, w, k, data.n())?,
        degenerate: w == 0.0,
    })
}

/// Argmax of BWDM, smallest K on ties. Degenerate records only compete when
/// every record is degenerate.
pub fn best_k(records: &[IndexRecord]) -> Option<usize> {
    let all_degenerate = records.iter().all(|r| r.degenerate);
    let mut best: Option<&IndexRecord> = None;
    for r in records.iter().filter(|r| all_degenerate || !r.degenerate) {
        let better = match best {
            None => true,
            Some(b) => r.bwdm > b.bwdm || (r.bwdm == b.bwdm && r.k < b.k),
        };
        if better {
            best = Some(r);
        }
    }
    best.map(|r| r.k)
}

pub fn curve_from_partitions(data: &DataMatrix, partitions: &[Partition]) -> Result<IndexCurve> {
    use rayon::prelude::*;
    let mut records: Vec<IndexRecord> = partitions
        .par_iter()
        .map(|p| index_record(data, p))
        .collect::<Result<_>>()?;
    records.sort_by_key(|r| r.k);
    let best_k = best_k(&records).ok_or(Error::InvalidParameter("no K to evaluate".into()))?;
    Ok(IndexCurve {
        records,
        best_k,
        n: data.n(),
    })
}

pub(crate) fn check_k_max(k_max: usize, n: usize) -> Result<()> {
    if k_max < 2 {
        return Err(Error::InvalidK {
            k: k_max,
            n,
            reason: "k_max must be at least 2",
        });
    }
    if k_max >= n {
        return Err(Error::InvalidK {
            k: k_max,
            n,
            reason: "k_max must be smaller than the number of observations",
        });
    }
    Ok(())
}

/// Fits one partition per K in `2..=k_max` and scores it.
pub fn select_k_detailed(
    data: &DataMatrix,
    k_max: usize,
    partitioner: &PartitionerConfig,
) -> Result<(IndexCurve, Vec<FitResult>)> {
    check_k_max(k_max, data.n())?;
    let fits = fit_range(data, 2..=k_max, partitioner)?;
    let partitions: Vec<Partition> = fits.iter().map(|f| f.partition.clone()).collect();
    let curve = curve_from_partitions(data, &partitions)?;
    Ok((curve, fits))
}

pub fn select_k(data: &DataMatrix, k_max: usize, partitioner: &PartitionerConfig) -> Result<IndexCurve> {
    select_k_detailed(data, k_max, partitioner).map(|(c, _)| c)
}
