//! Reference validity indices: Calinski–Harabasz and mean silhouette width.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{euclidean, mean_of_rows, squared_euclidean, DataMatrix};
use crate::partition::Partition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexName {
    Bwdm,
    Ch,
    Silhouette,
}

impl fmt::Display for IndexName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IndexName::Bwdm => "bwdm",
            IndexName::Ch => "ch",
            IndexName::Silhouette => "silhouette",
        })
    }
}

impl FromStr for IndexName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "bwdm" => Ok(IndexName::Bwdm),
            "ch" => Ok(IndexName::Ch),
            "silhouette" => Ok(IndexName::Silhouette),
            other => Err(Error::InvalidParameter(format!("unknown index {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRecord {
    pub k: usize,
    pub value: f64,
    pub index_name: IndexName,
}

/// Calinski–Harabasz variance ratio `[B/(K−1)] / [W/(n−K)]`.
pub fn ch_index(data: &DataMatrix, partition: &Partition) -> Result<f64> {
    partition.check_against(data)?;
    let (k, n) = (partition.k(), data.n());
    if k < 2 || k >= n {
        return Err(Error::InvalidK {
            k,
            n,
            reason: "CH index needs 2 <= K < n",
        });
    }
    let grand = data.column_means();
    let mut between = 0.0;
    let mut within = 0.0;
    for idx in partition.members() {
        let centroid = mean_of_rows(idx.iter().map(|&i| data.row(i)));
        between += idx.len() as f64 * squared_euclidean(&centroid, &grand);
        within += idx
            .iter()
            .map(|&i| squared_euclidean(data.row(i), &centroid))
            .sum::<f64>();
    }
    Ok((between / (k - 1) as f64) / (within / (n - k) as f64))
}

/// Mean silhouette width. Members of singleton clusters score 0.
pub fn silhouette_width(data: &DataMatrix, partition: &Partition) -> Result<f64> {
    partition.check_against(data)?;
    let (k, n) = (partition.k(), data.n());
    if k < 2 || k > n - 1 {
        return Err(Error::InvalidK {
            k,
            n,
            reason: "silhouette needs 2 <= K <= n-1",
        });
    }
    let labels = partition.labels();
    let sizes = partition.sizes();
    let mut sums = vec![0.0; k];
    let mut total = 0.0;
    for i in 0..n {
        let own = labels[i];
        if sizes[own] == 1 {
            continue;
        }
        sums.fill(0.0);
        for j in 0..n {
            if j != i {
                sums[labels[j]] += euclidean(data.row(i), data.row(j));
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}

pub fn baseline(name: IndexName, data: &DataMatrix, partition: &Partition) -> Result<BaselineRecord> {
    let value = match name {
        IndexName::Ch => ch_index(data, partition)?,
        IndexName::Silhouette => silhouette_width(data, partition)?,
        IndexName::Bwdm => crate::index::index_record(data, partition)?.bwdm,
    };
    Ok(BaselineRecord {
        k: partition.k(),
        value,
        index_name: name,
    })
}

/// K with the largest value, smallest K on ties.
pub fn argmax_k(records: &[BaselineRecord]) -> Option<usize> {
    records
        .iter()
        .fold(None::<&BaselineRecord>, |best, r| match best {
            Some(b) if !(r.value > b.value) => Some(b),
            _ => Some(r),
        })
        .map(|r| r.k)
}
