//! Chain / fork / triangle discrimination for three related variables.
//!
//! All quantities come from one aligned joint over
//! `(i, g, j, h, k)`: the X word `i` feeding Y, Y's past `g` at that time,
//! the Y word `j` feeding Z, Z's past `h` and Z's symbol `k`. Estimating
//! every tensor from the same joint keeps the product rule exact on
//! population distributions.

use ndarray::{Array2, Array3, Array5, Axis};
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::significance::quantile;
use crate::alphabet::{SymbolSeries, WordTable};
use crate::error::{shape_err, Error, Result};
use crate::rng::task_rng;
use crate::tensor::{
    average_tensor, cascade, classify_degeneracy, dagger, AveragedTensor, CausalTensor, DaggerFallback,
    Degeneracy, Pmf,
};

/// Which causal tensors the product rule is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    /// Sub-channels indexed by the destination pasts `g` and `h`.
    MultiChannel,
    /// Pasts marginalized out; plain discrete memoryless channels.
    #[default]
    SingleChannel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Structure {
    Chain,
    Fork,
    Triangle,
    Indistinguishable,
}

/// One of the three pairwise relations of a triad.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    #[serde(rename = "x-to-y")]
    XtoY,
    #[serde(rename = "y-to-z")]
    YtoZ,
    #[serde(rename = "x-to-z")]
    XtoZ,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum IndistinguishableReason {
    Degenerate { relation: Relation, class: Degeneracy },
    ResidualsBelowTolerance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriadVerdict {
    pub structure: Structure,
    /// `max |B - Abar' C|`; zero when the data are a fork.
    pub residual_chain: f64,
    /// `max |C - Abar B|`; zero when the data are a chain.
    pub residual_fork: f64,
    pub basis: Basis,
    pub tol: f64,
    pub reason: Option<IndistinguishableReason>,
}

/// Aligned counts (or probabilities) indexed `[i][g][j][h][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriadJoint {
    weights: Array5<f64>,
    delay_xy: i64,
    delay_yz: i64,
}

impl TriadJoint {
    /// Accepts any nonnegative weights; they need not be normalized.
    pub fn new(weights: Array5<f64>, delay_xy: i64, delay_yz: i64) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidInput("triad weights must be finite and nonnegative".into()));
        }
        if !(weights.sum() > 0.0) {
            return Err(Error::InsufficientData("triad joint is empty".into()));
        }
        Ok(Self { weights, delay_xy, delay_yz })
    }

    /// Counts aligned records for `x -> y` (delay `tau_xy`) and `y -> z`
    /// (delay `tau_yz`). Words have `m_plus_1` symbols, pasts `ell`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_series(
        x: &SymbolSeries,
        y: &SymbolSeries,
        z: &SymbolSeries,
        ell: usize,
        m_plus_1: usize,
        tau_xy: i64,
        tau_yz: i64,
    ) -> Result<Self> {
        let n = z.len();
        if x.len() != n || y.len() != n {
            return Err(shape_err!("series lengths differ"));
        }
        if ell == 0 || m_plus_1 == 0 {
            return Err(Error::InvalidInput("ell and m_plus_1 must be positive".into()));
        }
        let xw = WordTable::new(x, m_plus_1, 0)?;
        let yw = WordTable::new(y, m_plus_1, 0)?;
        let gw = WordTable::new(y, ell, 1)?;
        let hw = WordTable::new(z, ell, 1)?;
        let (m, l, ni) = (m_plus_1 as i64 - 1, ell as i64, n as i64);
        // t indexes z; s = t - tau_yz indexes y; s - tau_xy indexes x.
        let lo = l
            .max(tau_yz + m)
            .max(tau_yz + l)
            .max(tau_yz + tau_xy + m)
            .max(0);
        let hi = (ni - 1).min(ni - 1 + tau_yz).min(ni - 1 + tau_yz + tau_xy);
        if lo > hi {
            return Err(Error::InsufficientData(format!(
                "series of length {n} too short for delays ({tau_xy},{tau_yz})"
            )));
        }
        let shape = (xw.states(), gw.states(), yw.states(), hw.states(), z.cardinality() as usize);
        let mut w = Array5::<f64>::zeros(shape);
        let zs = z.symbols();
        for t in lo..=hi {
            let s = t - tau_yz;
            let r = s - tau_xy;
            let tu = t as usize;
            w[[xw.get(r as usize), gw.get(s as usize), yw.get(s as usize), hw.get(tu), zs[tu] as usize]] += 1.0;
        }
        Self::new(w, tau_xy, tau_yz)
    }

    pub fn weights(&self) -> &Array5<f64> {
        &self.weights
    }

    pub fn delays(&self) -> (i64, i64) {
        (self.delay_xy, self.delay_yz)
    }

    /// Collapses the past axes when the single-channel basis is requested.
    pub fn in_basis(&self, basis: Basis) -> Self {
        match basis {
            Basis::MultiChannel => self.clone(),
            Basis::SingleChannel => {
                let m = self.weights.sum_axis(Axis(3)).sum_axis(Axis(1));
                let (ni, nj, nk) = m.dim();
                let w = Array5::from_shape_fn((ni, 1, nj, 1, nk), |(i, _, j, _, k)| m[[i, j, k]]);
                Self { weights: w, ..*self }
            }
        }
    }
}

/// The tensors of a triad in one basis.
#[derive(Debug, Clone, PartialEq)]
pub struct TriadTensors {
    pub basis: Basis,
    /// `A[g][i][j] = p(j | i, g)`.
    pub a: CausalTensor,
    /// `B[h][j][k] = p(k | j, h)`.
    pub b: CausalTensor,
    /// `C[h][i][k] = p(k | i, h)`.
    pub c: CausalTensor,
    /// `Abar[h][i][j] = sum_g p(g|h,i) A[g][i][j]`.
    pub a_bar: AveragedTensor,
    /// `Abar'[h][j][i] = sum_g p(g|h,j) A'[g][j][i]` with `A'` the Bayes inverse of `A`.
    pub a_bar_dagger: AveragedTensor,
    /// `p(h, i) > 0`.
    pub support_hi: Array2<bool>,
    /// `p(h, j) > 0`.
    pub support_hj: Array2<bool>,
}

/// Conditional pmf rows from a weight table; empty rows become uniform.
fn normalize_rows(w: Array3<f64>) -> Array3<f64> {
    let mut w = w;
    for mut row in w.lanes_mut(Axis(2)) {
        let s: f64 = row.sum();
        if s > 0.0 {
            row.mapv_inplace(|v| v / s);
        } else {
            let n = row.len() as f64;
            row.fill(1.0 / n);
        }
    }
    w
}

impl TriadTensors {
    pub fn from_joint(joint: &TriadJoint, basis: Basis) -> Result<Self> {
        let j5 = joint.in_basis(basis);
        let w = &j5.weights;
        let (ni, ng, nj, nh, nk) = w.dim();
        let (dxy, dyz) = joint.delays();
        let total = w.sum();

        // (i, g, j) and (h, j, k), (h, i, k) marginals.
        let w_igj = w.sum_axis(Axis(4)).sum_axis(Axis(3));
        let w_ghk = Array3::from_shape_fn((nh, nj, nk), |(h, j, k)| {
            w.slice(ndarray::s![.., .., j, h, k]).sum()
        });
        let w_hik = Array3::from_shape_fn((nh, ni, nk), |(h, i, k)| {
            w.slice(ndarray::s![i, .., .., h, k]).sum()
        });
        let w_hig = Array3::from_shape_fn((nh, ni, ng), |(h, i, g)| {
            w.slice(ndarray::s![i, g, .., h, ..]).sum()
        });
        let w_hjg = Array3::from_shape_fn((nh, nj, ng), |(h, j, g)| {
            w.slice(ndarray::s![.., g, j, h, ..]).sum()
        });

        let a_rows = normalize_rows(Array3::from_shape_fn((ng, ni, nj), |(g, i, j)| w_igj[[i, g, j]]));
        let w_g: Vec<f64> = (0..ng).map(|g| w_igj.index_axis(Axis(1), g).sum() / total).collect();
        let p_i_given_g = Array2::from_shape_fn((ng, ni), |(g, i)| {
            let s: f64 = w_igj.index_axis(Axis(1), g).sum();
            if s > 0.0 {
                w_igj.slice(ndarray::s![i, g, ..]).sum() / s
            } else {
                1.0 / ni as f64
            }
        });
        let a = CausalTensor::new(a_rows, dxy, Pmf::new(w_g)?, Some(p_i_given_g.clone()))?;
        let w_h: Vec<f64> = (0..nh).map(|h| w_ghk.index_axis(Axis(0), h).sum() / total).collect();
        let b = CausalTensor::new(normalize_rows(w_ghk.clone()), dyz, Pmf::new(w_h.clone())?, None)?;
        let c = CausalTensor::new(normalize_rows(w_hik.clone()), dxy + dyz, Pmf::new(w_h)?, None)?;

        let a_bar = average_tensor(&a, normalize_rows(w_hig.clone()).view())?;
        let a_dag = dagger(&a, p_i_given_g.view(), DaggerFallback::Uniform)?;
        let a_bar_dagger = average_tensor(&a_dag, normalize_rows(w_hjg.clone()).view())?;

        let support_hi = Array2::from_shape_fn((nh, ni), |(h, i)| w_hig.slice(ndarray::s![h, i, ..]).sum() > 0.0);
        let support_hj = Array2::from_shape_fn((nh, nj), |(h, j)| w_hjg.slice(ndarray::s![h, j, ..]).sum() > 0.0);
        Ok(Self { basis, a, b, c, a_bar, a_bar_dagger, support_hi, support_hj })
    }

    /// `max |C - Abar B|` over observed `(h, i)` rows.
    pub fn residual_fork(&self) -> Result<f64> {
        let pred = cascade(&self.b, &self.a_bar)?;
        Ok(masked_max_diff(self.c.entries(), pred.entries(), &self.support_hi))
    }

    /// `max |B - Abar' C|` over observed `(h, j)` rows.
    pub fn residual_chain(&self) -> Result<f64> {
        let pred = cascade(&self.c, &self.a_bar_dagger)?;
        Ok(masked_max_diff(self.b.entries(), pred.entries(), &self.support_hj))
    }
}

fn masked_max_diff(x: &Array3<f64>, y: &Array3<f64>, mask: &Array2<bool>) -> f64 {
    let mut m: f64 = 0.0;
    for ((h, r), &keep) in mask.indexed_iter() {
        if keep {
            for k in 0..x.dim().2 {
                m = m.max((x[[h, r, k]] - y[[h, r, k]]).abs());
            }
        }
    }
    m
}

/// Decides the triad structure from the two product-rule residuals.
pub fn classify_triad(t: &TriadTensors, tol: f64) -> Result<TriadVerdict> {
    classify_triad_with(t, tol, tol)
}

/// As [`classify_triad`], with a separate tolerance for the degeneracy screen.
pub fn classify_triad_with(t: &TriadTensors, tol: f64, degeneracy_tol: f64) -> Result<TriadVerdict> {
    let residual_chain = t.residual_chain()?;
    let residual_fork = t.residual_fork()?;
    let mut reason = None;
    for (relation, tensor) in [(Relation::XtoY, &t.a), (Relation::YtoZ, &t.b), (Relation::XtoZ, &t.c)] {
        let class = classify_degeneracy(tensor, degeneracy_tol);
        if class != Degeneracy::General {
            reason = Some(IndistinguishableReason::Degenerate { relation, class });
            break;
        }
    }
    let structure = if reason.is_some() {
        Structure::Indistinguishable
    } else {
        match (residual_chain > tol, residual_fork > tol) {
            (true, false) => Structure::Chain,
            (false, true) => Structure::Fork,
            (true, true) => Structure::Triangle,
            (false, false) => {
                reason = Some(IndistinguishableReason::ResidualsBelowTolerance);
                Structure::Indistinguishable
            }
        }
    };
    Ok(TriadVerdict { structure, residual_chain, residual_fork, basis: t.basis, tol, reason })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TriadConfig {
    pub basis: Basis,
    pub n_surrogates: usize,
    /// Quantile of the pooled surrogate residuals used as tolerance.
    pub quantile: f64,
    /// Fixed tolerance overriding the surrogate threshold.
    pub fixed_tol: Option<f64>,
    /// Tolerance for flagging noiseless or perfectly noisy relations.
    /// Defaults to the residual tolerance.
    pub degeneracy_tol: Option<f64>,
}

impl Default for TriadConfig {
    fn default() -> Self {
        Self { basis: Basis::SingleChannel, n_surrogates: 100, quantile: 0.95, fixed_tol: None, degeneracy_tol: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriadThreshold {
    pub tol: f64,
    /// `residual_fork` of data resampled from the fitted chain.
    pub chain_null: Vec<f64>,
    /// `residual_chain` of data resampled from the fitted fork.
    pub fork_null: Vec<f64>,
}

/// Draws multinomial counts by sequential binomials.
fn multinomial<R: Rng>(rng: &mut R, n: u64, p: &[f64], out: &mut [u64]) {
    let mut left = n;
    let mut mass = 1.0;
    for (k, (&pk, o)) in p.iter().zip(out.iter_mut()).enumerate() {
        if left == 0 {
            *o = 0;
            continue;
        }
        if k + 1 == p.len() || mass <= 0.0 {
            *o = left;
            left = 0;
            continue;
        }
        let q = (pk / mass).clamp(0.0, 1.0);
        let draw = Binomial::new(left, q).expect("valid binomial").sample(rng);
        *o = draw;
        left -= draw;
        mass -= pk;
    }
}

/// Parametric surrogates: the observed joint is resampled under the fitted
/// chain model (keep `n(i,g,h)`, draw `j ~ A`, `k ~ B`) and under the fitted
/// fork model (keep `n(j,g,h)`, draw `i ~ A'`, `k ~ C`). The tolerance is
/// the requested quantile of the pooled null residuals.
pub fn triad_threshold(joint: &TriadJoint, cfg: &TriadConfig, seed: u64) -> Result<TriadThreshold> {
    if cfg.n_surrogates == 0 {
        return Err(Error::InvalidInput("triad threshold needs surrogates".into()));
    }
    let base = joint.in_basis(cfg.basis);
    let w = base.weights();
    if w.iter().any(|v| v.fract() != 0.0) {
        return Err(Error::InvalidInput("surrogate thresholds need integer counts".into()));
    }
    let t = TriadTensors::from_joint(&base, cfg.basis)?;
    let (ni, ng, nj, nh, nk) = w.dim();
    let n_igh = w.sum_axis(Axis(4)).sum_axis(Axis(2)); // [i][g][h]
    let n_gjh = w.sum_axis(Axis(4)).sum_axis(Axis(0)); // [g][j][h]
    let a_dag = dagger(&t.a, t.a.context_input().expect("set by from_joint").view(), DaggerFallback::Uniform)?;

    let draws = (0..cfg.n_surrogates)
        .into_par_iter()
        .map(|r| -> Result<(f64, f64)> {
            let mut rng = task_rng(seed, &format!("triad/{r}"));
            let mut buf_j = vec![0u64; nj];
            let mut buf_i = vec![0u64; ni];
            let mut buf_k = vec![0u64; nk];

            let mut chain = Array5::<f64>::zeros((ni, ng, nj, nh, nk));
            for ((i, g, h), &n) in n_igh.indexed_iter() {
                if n == 0.0 {
                    continue;
                }
                let pj: Vec<f64> = t.a.subchannel(g).row(i).to_vec();
                multinomial(&mut rng, n as u64, &pj, &mut buf_j);
                for (j, &m) in buf_j.iter().enumerate() {
                    if m > 0 {
                        let pk: Vec<f64> = t.b.subchannel(h).row(j).to_vec();
                        multinomial(&mut rng, m, &pk, &mut buf_k);
                        for (k, &c) in buf_k.iter().enumerate() {
                            chain[[i, g, j, h, k]] += c as f64;
                        }
                    }
                }
            }
            let mut fork = Array5::<f64>::zeros((ni, ng, nj, nh, nk));
            for ((g, j, h), &n) in n_gjh.indexed_iter() {
                if n == 0.0 {
                    continue;
                }
                let pi: Vec<f64> = a_dag.subchannel(g).row(j).to_vec();
                multinomial(&mut rng, n as u64, &pi, &mut buf_i);
                for (i, &m) in buf_i.iter().enumerate() {
                    if m > 0 {
                        let pk: Vec<f64> = t.c.subchannel(h).row(i).to_vec();
                        multinomial(&mut rng, m, &pk, &mut buf_k);
                        for (k, &c) in buf_k.iter().enumerate() {
                            fork[[i, g, j, h, k]] += c as f64;
                        }
                    }
                }
            }
            let (dxy, dyz) = joint.delays();
            let tc = TriadTensors::from_joint(&TriadJoint::new(chain, dxy, dyz)?, cfg.basis)?;
            let tf = TriadTensors::from_joint(&TriadJoint::new(fork, dxy, dyz)?, cfg.basis)?;
            Ok((tc.residual_fork()?, tf.residual_chain()?))
        })
        .collect::<Result<Vec<_>>>()?;
    let chain_null: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let fork_null: Vec<f64> = draws.iter().map(|d| d.1).collect();
    let pooled: Vec<f64> = chain_null.iter().chain(&fork_null).copied().collect();
    Ok(TriadThreshold { tol: quantile(&pooled, cfg.quantile), chain_null, fork_null })
}

/// Estimates the triad tensors from data, derives the tolerance and classifies.
pub fn analyze_triad(joint: &TriadJoint, cfg: &TriadConfig, seed: u64) -> Result<TriadVerdict> {
    let tol = match cfg.fixed_tol {
        Some(t) => t,
        None => triad_threshold(joint, cfg, seed)?.tol,
    };
    classify_triad_with(&TriadTensors::from_joint(joint, cfg.basis)?, tol, cfg.degeneracy_tol.unwrap_or(tol))
}

/// `tau_xz` matches `tau_xy + tau_yz` within `tol` samples.
pub fn delays_consistent(tau_xy: i64, tau_yz: i64, tau_xz: i64, tol: i64) -> bool {
    (tau_xz - (tau_xy + tau_yz)).abs() <= tol
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact joint of `x -> y -> z` with memoryless channels and iid `x`,
    /// single-symbol words, no pasts: `p(i,j,k) = p(i) A[i][j] B[j][k]`.
    fn exact_chain(px: &[f64], a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> TriadJoint {
        let w = Array5::from_shape_fn((2, 1, 2, 1, 2), |(i, _, j, _, k)| px[i] * a[i][j] * b[j][k]);
        TriadJoint::new(w, 1, 2).unwrap()
    }

    const A: [[f64; 2]; 2] = [[0.5, 0.5], [1.0, 0.0]];
    const B: [[f64; 2]; 2] = [[1.0 / 3.0, 2.0 / 3.0], [0.0, 1.0]];

    #[test]
    fn worked_example_is_chain() {
        let j = exact_chain(&[0.4, 0.6], &A, &B);
        let t = TriadTensors::from_joint(&j, Basis::SingleChannel).unwrap();
        let v = classify_triad(&t, 1e-12).unwrap();
        assert_eq!(v.structure, Structure::Chain);
        // B - Abar' C = [[1/24, -1/24], [-1/6, 1/6]].
        assert!((v.residual_chain - 1.0 / 6.0).abs() < 1e-12, "{v:?}");
        assert!(v.residual_fork < 1e-12);
        assert_eq!(t.c.delay(), 3);
    }

    #[test]
    fn fork_from_common_cause() {
        // x -> y via A, x -> z via C = A B; then y -> z is explained by x.
        let c = [[1.0 / 6.0, 5.0 / 6.0], [1.0 / 3.0, 2.0 / 3.0]];
        let px = [0.4, 0.6];
        let w = Array5::from_shape_fn((2, 1, 2, 1, 2), |(i, _, j, _, k)| px[i] * A[i][j] * c[i][k]);
        let t = TriadTensors::from_joint(&TriadJoint::new(w, 1, 1).unwrap(), Basis::SingleChannel).unwrap();
        let v = classify_triad(&t, 1e-12).unwrap();
        assert_eq!(v.structure, Structure::Fork, "{v:?}");
    }

    #[test]
    fn permutation_triad_is_indistinguishable() {
        let id = [[1.0, 0.0], [0.0, 1.0]];
        let swap = [[0.0, 1.0], [1.0, 0.0]];
        let t = TriadTensors::from_joint(&exact_chain(&[0.5, 0.5], &id, &swap), Basis::SingleChannel).unwrap();
        let v = classify_triad(&t, 1e-12).unwrap();
        assert_eq!(v.structure, Structure::Indistinguishable);
        assert!(matches!(v.reason, Some(IndistinguishableReason::Degenerate { class: Degeneracy::Noiseless, .. })));
    }

    #[test]
    fn multinomial_preserves_total() {
        let mut rng = task_rng(0, "m");
        let mut out = [0u64; 3];
        multinomial(&mut rng, 1000, &[0.2, 0.0, 0.8], &mut out);
        assert_eq!(out.iter().sum::<u64>(), 1000);
        assert_eq!(out[1], 0);
    }

    #[test]
    fn delay_additivity_tolerance() {
        assert!(delays_consistent(2, 4, 6, 0));
        assert!(delays_consistent(2, 4, 5, 1));
        assert!(!delays_consistent(2, 4, 8, 1));
    }
}
