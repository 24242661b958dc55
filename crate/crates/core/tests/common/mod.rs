#![allow(dead_code)]

use causal_tensor::alphabet::SymbolSeries;
use causal_tensor::dynamics::{SymbolicTriad, TriadKind, Trajectory};
use causal_tensor::inference::TriadJoint;
use causal_tensor::tensor::{CausalTensor, Pmf};
use ndarray::{Array2, Array3, Array5};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Strictly positive pmf of length `n`.
pub fn pmf_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.02..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

pub fn pmf(rng: &mut impl Rng, n: usize) -> Pmf {
    Pmf::new(pmf_vec(rng, n)).unwrap()
}

/// Row-stochastic `[a][b][c]` with strictly positive rows.
pub fn stochastic3(rng: &mut impl Rng, a: usize, b: usize, c: usize) -> Array3<f64> {
    let mut out = Array3::zeros((a, b, c));
    for x in 0..a {
        for y in 0..b {
            for (z, v) in pmf_vec(rng, c).into_iter().enumerate() {
                out[[x, y, z]] = v;
            }
        }
    }
    out
}

pub fn stochastic2(rng: &mut impl Rng, a: usize, b: usize) -> Array2<f64> {
    let t = stochastic3(rng, 1, a, b);
    t.index_axis(ndarray::Axis(0), 0).to_owned()
}

pub fn tensor(rng: &mut impl Rng, g: usize, i: usize, j: usize, delay: i64) -> CausalTensor {
    let w = pmf(rng, g);
    CausalTensor::new(stochastic3(rng, g, i, j), delay, w, None).unwrap()
}

pub fn dmc(rng: &mut impl Rng, i: usize, j: usize, delay: i64) -> CausalTensor {
    CausalTensor::single(stochastic2(rng, i, j), delay).unwrap()
}

pub fn bern(p: f64, v: usize) -> f64 {
    if v == 1 {
        p
    } else {
        1.0 - p
    }
}

/// Population joint of a memoryless symbolic triad (pasts carry no information).
pub fn triad_joint(m: &SymbolicTriad) -> TriadJoint {
    let w = Array5::from_shape_fn((2, 1, 2, 1, 2), |(i, _, j, _, k)| {
        let pz = match m.kind {
            TriadKind::Chain => m.b[j],
            TriadKind::Fork => m.b[i],
            TriadKind::Triangle => m.d[j][i],
        };
        bern(m.p_x, i) * bern(m.a[i], j) * bern(pz, k)
    });
    TriadJoint::new(w, m.delay_xy as i64, m.delay_yz as i64).unwrap()
}

/// Reads a 0/1 trajectory as binary symbol series.
pub fn binary_series(t: &Trajectory) -> Vec<SymbolSeries> {
    t.series
        .iter()
        .map(|c| SymbolSeries::new(c.iter().map(|&v| v as u32).collect(), 2, 1.0).unwrap())
        .collect()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn h2(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

/// `I(X;Y)` from a joint table, computed directly from its marginals.
pub fn mi_from_joint(p: &Array2<f64>) -> f64 {
    let px: Vec<f64> = p.rows().into_iter().map(|r| r.sum()).collect();
    let py: Vec<f64> = p.columns().into_iter().map(|c| c.sum()).collect();
    let mut mi = 0.0;
    for ((i, j), &v) in p.indexed_iter() {
        if v > 0.0 {
            mi += v * (v / (px[i] * py[j])).log2();
        }
    }
    mi
}

/// Joint `p(x, y) = p(x) W[x][y]`.
pub fn joint_of(px: &[f64], w: ndarray::ArrayView2<'_, f64>) -> Array2<f64> {
    Array2::from_shape_fn(w.dim(), |(i, j)| px[i] * w[[i, j]])
}

/// `W1 W2` as plain matrices.
pub fn matmul(a: ndarray::ArrayView2<'_, f64>, b: ndarray::ArrayView2<'_, f64>) -> Array2<f64> {
    a.dot(&b)
}
