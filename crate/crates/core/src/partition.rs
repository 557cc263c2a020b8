//! Base partitioners that produce a candidate clustering for each K.
//!
//! `KSpatialMedians` and `KMeans` run Lloyd alternation from `n_init` seeded
//! random starts and keep the cheapest result. `Pam` is classic k-medoids
//! (BUILD then steepest-descent SWAP) and is deterministic.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    euclidean, mean_of_rows, spatial_median_unrefined, squared_euclidean, DataMatrix, WeiszfeldOptions,
    DESCENT_SLACK,
};

/// Hard assignment of `n` observations to `k` non-empty clusters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidPartition("K must be >= 1".into()));
        }
        let mut sizes = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            if l >= k {
                return Err(Error::InvalidPartition(format!(
                    "label {l} of observation {i} out of range for K={k}"
                )));
            }
            sizes[l] += 1;
        }
        if let Some(c) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidPartition(format!("cluster {c} is empty")));
        }
        Ok(Partition { labels, k })
    }

    /// Builds a partition and renumbers clusters by first occurrence.
    pub fn canonical(labels: Vec<usize>, k: usize) -> Result<Self> {
        let mut p = Self::new(labels, k)?;
        p.canonicalize();
        Ok(p)
    }

    fn canonicalize(&mut self) {
        let mut map = vec![usize::MAX; self.k];
        let mut next = 0;
        for l in &mut self.labels {
            if map[*l] == usize::MAX {
                map[*l] = next;
                next += 1;
            }
            *l = map[*l];
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Observation indices of each cluster, in observation order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    pub(crate) fn check_against(&self, data: &DataMatrix) -> Result<()> {
        if self.n() != data.n() {
            return Err(Error::InvalidPartition(format!(
                "partition covers {} observations, data has {}",
                self.n(),
                data.n()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "kmedians")]
    KSpatialMedians,
    #[serde(rename = "kmeans")]
    KMeans,
    #[serde(rename = "pam")]
    Pam,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::KSpatialMedians => "kmedians",
            Method::KMeans => "kmeans",
            Method::Pam => "pam",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kmedians" | "k_spatial_medians" => Ok(Method::KSpatialMedians),
            "kmeans" | "k_means" => Ok(Method::KMeans),
            "pam" => Ok(Method::Pam),
            other => Err(Error::InvalidParameter(format!("unknown partitioner {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionerConfig {
    pub method: Method,
    pub n_init: usize,
    /// Lloyd iterations per restart.
    pub max_iter: usize,
    pub seed: u64,
    /// Convergence tolerance of the inner spatial-median solver.
    pub tol: f64,
}

pub const DEFAULT_SEED: u64 = 42;

impl Default for PartitionerConfig {
    fn default() -> Self {
        PartitionerConfig {
            method: Method::KSpatialMedians,
            n_init: 10,
            max_iter: 100,
            seed: DEFAULT_SEED,
            tol: 1e-9,
        }
    }
}

impl PartitionerConfig {
    pub fn with_method(method: Method) -> Self {
        PartitionerConfig {
            method,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_init < 1 {
            return Err(Error::InvalidParameter("n_init must be >= 1".into()));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidParameter("max_iter must be >= 1".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidParameter("tol must be > 0".into()));
        }
        Ok(())
    }

    fn weiszfeld(&self) -> WeiszfeldOptions {
        WeiszfeldOptions {
            tol: self.tol,
            ..Default::default()
        }
    }
}

/// Outcome of a partitioner run.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub partition: Partition,
    /// Cluster centres in canonical label order (medoids for PAM).
    pub centers: Vec<Vec<f64>>,
    /// Total within-cluster cost: sum of distances to centres, or the sum of
    /// squared distances for k-means.
    pub cost: f64,
    /// Cost after each centre update of the winning restart.
    pub cost_trace: Vec<f64>,
    /// Index of the winning restart.
    pub restart: usize,
}

pub fn fit(data: &DataMatrix, k: usize, config: &PartitionerConfig) -> Result<Partition> {
    fit_detailed(data, k, config).map(|r| r.partition)
}

pub fn pam_fit(data: &DataMatrix, k: usize, config: &PartitionerConfig) -> Result<Partition> {
    config.validate()?;
    check_k(k, data.n())?;
    Ok(pam(data, k).partition)
}

pub fn fit_detailed(data: &DataMatrix, k: usize, config: &PartitionerConfig) -> Result<FitResult> {
    config.validate()?;
    check_k(k, data.n())?;
    if config.method == Method::Pam {
        return Ok(pam(data, k));
    }

    let runs: Vec<Result<FitResult>> = (0..config.n_init)
        .into_par_iter()
        .map(|restart| lloyd(data, k, config, restart))
        .collect();

    // Lowest cost wins; ties go to the earliest restart.
    let mut best: Option<FitResult> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.cost < b.cost) {
            best = Some(run);
        }
    }
    Ok(best.expect("n_init >= 1"))
}

/// Fits one partition per K in `ks`, reusing `config` (and its seed) for each.
pub fn fit_range(
    data: &DataMatrix,
    ks: std::ops::RangeInclusive<usize>,
    config: &PartitionerConfig,
) -> Result<Vec<FitResult>> {
    ks.collect::<Vec<_>>()
        .into_par_iter()
        .map(|k| fit_detailed(data, k, config))
        .collect()
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k < 1 {
        return Err(Error::InvalidK {
            k,
            n,
            reason: "K must be at least 1",
        });
    }
    if k > n {
        return Err(Error::InvalidK {
            k,
            n,
            reason: "K cannot exceed the number of observations",
        });
    }
    Ok(())
}

/// Random generator for one restart: ChaCha8 keyed by the seed, with the
/// restart index selecting the stream.
pub(crate) fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

fn nearest(x: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = euclidean(x, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign(data: &DataMatrix, centers: &[Vec<f64>], labels: &mut [usize]) {
    for (i, x) in data.rows().enumerate() {
        labels[i] = nearest(x, centers).0;
    }
}

/// Moves the point farthest from its centre into each empty cluster, drawing
/// only from clusters that would stay non-empty.
fn repair_empty(data: &DataMatrix, centers: &[Vec<f64>], labels: &mut [usize]) {
    let k = centers.len();
    let mut sizes = vec![0usize; k];
    labels.iter().for_each(|&l| sizes[l] += 1);
    let mut moved = vec![false; labels.len()];
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let mut far: Option<(usize, f64)> = None;
        for (i, x) in data.rows().enumerate() {
            let l = labels[i];
            if moved[i] || sizes[l] < 2 {
                continue;
            }
            let d = euclidean(x, &centers[l]);
            if far.is_none_or(|(_, fd)| d > fd) {
                far = Some((i, d));
            }
        }
        let (i, _) = far.expect("K <= n guarantees a donor cluster");
        sizes[labels[i]] -= 1;
        sizes[empty] += 1;
        labels[i] = empty;
        moved[i] = true;
    }
}

fn update_centers(
    data: &DataMatrix,
    labels: &[usize],
    centers: &mut [Vec<f64>],
    config: &PartitionerConfig,
) -> Result<()> {
    let k = centers.len();
    let mut groups: Vec<Vec<&[f64]>> = vec![Vec::new(); k];
    for (i, x) in data.rows().enumerate() {
        groups[labels[i]].push(x);
    }
    for (center, rows) in centers.iter_mut().zip(&groups) {
        *center = match config.method {
            Method::KMeans => mean_of_rows(rows.iter().copied()),
            // Warm start keeps the per-cluster cost from increasing.
            _ => spatial_median_unrefined(rows, Some(center), config.weiszfeld())?
                .median
                .into_inner(),
        };
    }
    Ok(())
}

fn total_cost(data: &DataMatrix, labels: &[usize], centers: &[Vec<f64>], method: Method) -> f64 {
    data.rows()
        .zip(labels)
        .map(|(x, &l)| match method {
            Method::KMeans => squared_euclidean(x, &centers[l]),
            _ => euclidean(x, &centers[l]),
        })
        .sum()
}

fn lloyd(data: &DataMatrix, k: usize, config: &PartitionerConfig, restart: usize) -> Result<FitResult> {
    let mut rng = restart_rng(config.seed, restart);
    let mut centers: Vec<Vec<f64>> = rand::seq::index::sample(&mut rng, data.n(), k)
        .into_iter()
        .map(|i| data.row(i).to_vec())
        .collect();

    let mut labels = vec![0usize; data.n()];
    assign(data, &centers, &mut labels);
    repair_empty(data, &centers, &mut labels);

    let mut trace = Vec::new();
    let mut next = labels.clone();
    for _ in 0..config.max_iter {
        update_centers(data, &labels, &mut centers, config)?;
        let cost = total_cost(data, &labels, &centers, config.method);
        if let Some(&prev) = trace.last() {
            debug_assert!(
                cost <= prev + DESCENT_SLACK * prev,
                "Lloyd cost increased: {prev} -> {cost}"
            );
        }
        trace.push(cost);

        assign(data, &centers, &mut next);
        repair_empty(data, &centers, &mut next);
        if next == labels {
            break;
        }
        std::mem::swap(&mut labels, &mut next);
    }

    let cost = total_cost(data, &labels, &centers, config.method);
    finish(labels, centers, cost, trace, restart)
}

fn finish(
    labels: Vec<usize>,
    centers: Vec<Vec<f64>>,
    cost: f64,
    cost_trace: Vec<f64>,
    restart: usize,
) -> Result<FitResult> {
    let k = centers.len();
    let mut order = Vec::with_capacity(k);
    let mut seen = vec![false; k];
    for &l in &labels {
        if !seen[l] {
            seen[l] = true;
            order.push(l);
        }
    }
    let centers = order.iter().map(|&c| centers[c].clone()).collect();
    let partition = Partition::canonical(labels, k)?;
    Ok(FitResult {
        partition,
        centers,
        cost,
        cost_trace,
        restart,
    })
}

/// Nearest and second-nearest medoid (positions in `medoids`) for each point.
fn medoid_neighbours(dist: &[f64], n: usize, medoids: &[usize]) -> Vec<(usize, f64, f64)> {
    (0..n)
        .map(|j| {
            let mut first = (usize::MAX, f64::INFINITY);
            let mut second = f64::INFINITY;
            for (pos, &m) in medoids.iter().enumerate() {
                // A medoid always belongs to its own cluster.
                let d = if m == j { -1.0 } else { dist[m * n + j] };
                if d < first.1 {
                    second = first.1;
                    first = (pos, d);
                } else if d < second {
                    second = d;
                }
            }
            (first.0, first.1.max(0.0), second.max(0.0))
        })
        .collect()
}

fn pam(data: &DataMatrix, k: usize) -> FitResult {
    let n = data.n();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(data.row(i), data.row(j));
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }

    // BUILD: start from the most central point, then greedily add the point
    // with the largest cost reduction.
    let mut medoids = Vec::with_capacity(k);
    let mut is_medoid = vec![false; n];
    let mut nearest_d = vec![f64::INFINITY; n];
    let first = (0..n)
        .map(|i| (i, dist[i * n..(i + 1) * n].iter().sum::<f64>()))
        .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b })
        .0;
    medoids.push(first);
    is_medoid[first] = true;
    for j in 0..n {
        nearest_d[j] = dist[first * n + j];
    }
    while medoids.len() < k {
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for i in (0..n).filter(|&i| !is_medoid[i]) {
            let gain: f64 = (0..n).map(|j| (nearest_d[j] - dist[i * n + j]).max(0.0)).sum();
            if gain > best.1 {
                best = (i, gain);
            }
        }
        let i = best.0;
        medoids.push(i);
        is_medoid[i] = true;
        for j in 0..n {
            nearest_d[j] = nearest_d[j].min(dist[i * n + j]);
        }
    }

    // SWAP: apply the best improving (medoid, non-medoid) exchange until none
    // improves the cost.
    let mut trace = Vec::new();
    loop {
        let nb = medoid_neighbours(&dist, n, &medoids);
        let cost: f64 = nb.iter().map(|t| t.1).sum();
        trace.push(cost);
        let mut best = (usize::MAX, usize::MAX, 0.0);
        for (pos, _) in medoids.iter().enumerate() {
            for h in (0..n).filter(|&h| !is_medoid[h]) {
                let delta: f64 = nb
                    .iter()
                    .enumerate()
                    .map(|(j, &(near, d1, d2))| {
                        let dh = dist[h * n + j];
                        let new = if near == pos { d2.min(dh) } else { d1.min(dh) };
                        new - d1
                    })
                    .sum();
                if delta < best.2 {
                    best = (pos, h, delta);
                }
            }
        }
        if best.0 == usize::MAX || best.2 >= -1e-12 * (1.0 + cost) {
            break;
        }
        is_medoid[medoids[best.0]] = false;
        is_medoid[best.1] = true;
        medoids[best.0] = best.1;
    }

    let nb = medoid_neighbours(&dist, n, &medoids);
    let labels: Vec<usize> = nb.iter().map(|t| t.0).collect();
    let cost = nb.iter().map(|t| t.1).sum();
    let centers = medoids.iter().map(|&m| data.row(m).to_vec()).collect();
    finish(labels, centers, cost, trace, 0).expect("every medoid owns itself")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_pairs() -> DataMatrix {
        DataMatrix::from_rows(vec![
            vec![0.0, 0.0],
            vec![0.1, 0.0],
            vec![10.0, 10.0],
            vec![10.1, 10.0],
        ])
        .unwrap()
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(vec![0, 1, 1], 2).is_ok());
        assert!(Partition::new(vec![0, 0, 0], 2).is_err());
        assert!(Partition::new(vec![0, 2], 2).is_err());
        let p = Partition::canonical(vec![2, 0, 1, 2], 3).unwrap();
        assert_eq!(p.labels(), &[0, 1, 2, 0]);
        assert_eq!(p.sizes(), vec![2, 1, 1]);
    }

    #[test]
    fn separates_distant_groups() {
        for method in [Method::KSpatialMedians, Method::KMeans, Method::Pam] {
            let p = fit(&two_pairs(), 2, &PartitionerConfig::with_method(method)).unwrap();
            assert_eq!(p.labels(), &[0, 0, 1, 1], "{method}");
        }
    }

    #[test]
    fn single_cluster() {
        let p = fit(&two_pairs(), 1, &PartitionerConfig::default()).unwrap();
        assert_eq!(p.labels(), &[0, 0, 0, 0]);
    }

    #[test]
    fn invalid_k() {
        let cfg = PartitionerConfig::default();
        assert!(matches!(fit(&two_pairs(), 0, &cfg), Err(Error::InvalidK { .. })));
        assert!(matches!(fit(&two_pairs(), 5, &cfg), Err(Error::InvalidK { .. })));
        assert!(matches!(pam_fit(&two_pairs(), 5, &cfg), Err(Error::InvalidK { .. })));
    }

    #[test]
    fn pam_pairs_and_k_equals_n() {
        let res = fit_detailed(&two_pairs(), 2, &PartitionerConfig::with_method(Method::Pam)).unwrap();
        assert!((res.cost - 0.2).abs() < 1e-12);
        assert!(res.centers[0][0] < 1.0 && res.centers[1][0] > 9.0);

        let res = fit_detailed(&two_pairs(), 4, &PartitionerConfig::with_method(Method::Pam)).unwrap();
        assert_eq!(res.cost, 0.0);
        assert_eq!(res.partition.sizes(), vec![1, 1, 1, 1]);
    }

    #[test]
    fn duplicate_points_never_leave_empty_clusters() {
        let data = DataMatrix::from_rows(vec![vec![1.0, 1.0]; 5]).unwrap();
        for method in [Method::KSpatialMedians, Method::KMeans, Method::Pam] {
            let p = fit(&data, 3, &PartitionerConfig::with_method(method)).unwrap();
            assert_eq!(p.k(), 3);
            assert!(p.sizes().iter().all(|&s| s > 0));
        }
    }

    #[test]
    fn repair_moves_farthest_point() {
        let data = DataMatrix::from_rows(vec![vec![0.0], vec![1.0], vec![5.0]]).unwrap();
        let centers = vec![vec![0.0], vec![100.0]];
        let mut labels = vec![0, 0, 0];
        repair_empty(&data, &centers, &mut labels);
        assert_eq!(labels, vec![0, 0, 1]);
    }

    #[test]
    fn method_parsing() {
        assert_eq!("kmedians".parse::<Method>().unwrap(), Method::KSpatialMedians);
        assert_eq!("pam".parse::<Method>().unwrap(), Method::Pam);
        assert!("dbscan".parse::<Method>().is_err());
    }
}
