//! Test-only oracles and helpers, independent of the library's solvers.
#![allow(dead_code)]

use bwdm::DataMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub fn sum_dist(rows: &[Vec<f64>], y: &[f64]) -> f64 {
    rows.iter().map(|x| dist(x, y)).sum()
}

/// Derivative-free Nelder–Mead minimisation of `f` from `start`.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, start: &[f64], scale: f64, iters: usize) -> (Vec<f64>, f64) {
    let d = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..d {
        let mut p = start.to_vec();
        p[i] += scale;
        simplex.push(p);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|p| f(p)).collect();
    for _ in 0..iters {
        let mut idx: Vec<usize> = (0..=d).collect();
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();
        let spread = simplex.iter().map(|p| dist(p, &simplex[0])).fold(0.0, f64::max);
        if spread < 1e-14 {
            break;
        }
        let centroid: Vec<f64> = (0..d)
            .map(|j| simplex[..d].iter().map(|p| p[j]).sum::<f64>() / d as f64)
            .collect();
        let worst = simplex[d].clone();
        let along = |t: f64| -> Vec<f64> { (0..d).map(|j| centroid[j] + t * (worst[j] - centroid[j])).collect() };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[d] = xe;
                vals[d] = fe;
            } else {
                simplex[d] = xr;
                vals[d] = fr;
            }
        } else if fr < vals[d - 1] {
            simplex[d] = xr;
            vals[d] = fr;
        } else {
            let (xc, fc) = if fr < vals[d] {
                let x = along(-0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = f(&x);
                (x, v)
            };
            if fc < vals[d].min(fr) {
                simplex[d] = xc;
                vals[d] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..=d {
                    simplex[i] = (0..d).map(|j| best[j] + 0.5 * (simplex[i][j] - best[j])).collect();
                    vals[i] = f(&simplex[i]);
                }
            }
        }
    }
    let (i, v) = vals
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |b, (i, &v)| if v < b.1 { (i, v) } else { b });
    (simplex[i].clone(), v)
}

/// Brute-force minimum of `Σ‖y − x_i‖`: every data point as a candidate, plus
/// restarted Nelder–Mead from the centroid and each data point.
pub fn brute_force_median_objective(rows: &[Vec<f64>]) -> f64 {
    let f = |y: &[f64]| sum_dist(rows, y);
    let d = rows[0].len();
    let mut best = rows.iter().map(|x| f(x)).fold(f64::INFINITY, f64::min);
    let centroid: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64)
        .collect();
    let mut starts = vec![centroid];
    starts.extend(rows.iter().cloned());
    for s in starts {
        let mut point = s;
        let mut scale = 0.1;
        for _ in 0..6 {
            let (p, v) = nelder_mead(&f, &point, scale, 5000);
            best = best.min(v);
            point = p;
            scale *= 0.1;
        }
    }
    best
}

/// Random orthogonal matrix via Gram–Schmidt on Gaussian columns.
pub fn random_orthogonal(d: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    loop {
        let mut q: Vec<Vec<f64>> = Vec::new();
        for _ in 0..d {
            let mut v: Vec<f64> = (0..d).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
            for u in &q {
                let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
            }
            let len = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if len < 1e-6 {
                break;
            }
            q.push(v.into_iter().map(|a| a / len).collect());
        }
        if q.len() == d {
            return q;
        }
    }
}

pub fn apply_similarity(x: &[f64], c: f64, q: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    q.iter()
        .zip(b)
        .map(|(row, bi)| c * row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + bi)
        .collect()
}

pub fn transform(data: &DataMatrix, c: f64, q: &[Vec<f64>], b: &[f64]) -> DataMatrix {
    data.map_rows(|r| apply_similarity(r, c, q, b)).unwrap()
}

pub fn random_data(rng: &mut impl Rng, n: usize, d: usize, spread: f64) -> DataMatrix {
    let rows = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-spread..spread)).collect())
        .collect();
    DataMatrix::from_rows(rows).unwrap()
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

/// Fraction of labels matching the truth under the best label permutation.
pub fn agreement(pred: &[usize], truth: &[usize], k: usize) -> f64 {
    fn perms(k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in perms(k - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, k - 1);
                out.push(q);
            }
        }
        out
    }
    perms(k)
        .into_iter()
        .map(|perm| pred.iter().zip(truth).filter(|(&p, &t)| perm[p] == t).count())
        .max()
        .unwrap() as f64
        / pred.len() as f64
}
