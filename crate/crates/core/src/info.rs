//! Mutual information, transfer entropy and data-processing checks (bits).

use ndarray::{Array3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};
use crate::estimation::{joint_pmf, JointCounts};
use crate::tensor::{cascade, AveragedTensor, CausalTensor, Pmf};

/// `p * log2(p / q)` with `0 log 0 = 0`.
#[inline]
fn plogr(p: f64, ratio: f64) -> f64 {
    if p > 0.0 {
        p * ratio.log2()
    } else {
        0.0
    }
}

/// `I(X;Y)` for input pmf `p(x)` through a single-channel tensor.
pub fn mutual_information(input: &Pmf, channel: &CausalTensor) -> Result<f64> {
    if !channel.is_single_channel() {
        return Err(shape_err!("mutual_information needs a single-channel tensor"));
    }
    if input.cardinality() != channel.n_inputs() {
        return Err(shape_err!(
            "input pmf has {} symbols, channel expects {}",
            input.cardinality(),
            channel.n_inputs()
        ));
    }
    let a = channel.subchannel(0);
    let px = input.probs();
    let py = px_dot(px, a);
    let mut mi = 0.0;
    for (i, &p) in px.iter().enumerate() {
        for (j, &q) in py.iter().enumerate() {
            let aij = a[[i, j]];
            if p > 0.0 && aij > 0.0 {
                mi += p * aij * (aij / q).log2();
            }
        }
    }
    Ok(mi.max(0.0))
}

fn px_dot(px: &[f64], a: ndarray::ArrayView2<'_, f64>) -> Vec<f64> {
    (0..a.ncols()).map(|j| px.iter().enumerate().map(|(i, p)| p * a[[i, j]]).sum()).collect()
}

/// One term of the sub-channel decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubchannelTerm {
    /// `p(past = g)`.
    pub weight: f64,
    /// `I(X;Y | past = g)` in bits.
    pub mi_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeResult {
    pub value_bits: f64,
    pub per_subchannel: Vec<SubchannelTerm>,
    pub delay: i64,
}

/// Transfer entropy `sum p(g,i,j) log2(A[g][i][j] / p(j|g))`.
///
/// `joint` is indexed `[g][i][j]`; `p(j|g)` is taken from the joint. The
/// total is accumulated sub-channel by sub-channel, so it equals the weighted
/// sum of the reported terms.
pub fn transfer_entropy(joint: &Array3<f64>, tensor: &CausalTensor) -> Result<TeResult> {
    if joint.dim() != tensor.dims() {
        return Err(shape_err!("joint {:?} vs tensor {:?}", joint.dim(), tensor.dims()));
    }
    let (ng, ni, nj) = tensor.dims();
    let mut terms = Vec::with_capacity(ng);
    let mut total = 0.0;
    for g in 0..ng {
        let pg_slice = joint.index_axis(Axis(0), g);
        let w: f64 = pg_slice.sum();
        if w <= 0.0 {
            terms.push(SubchannelTerm { weight: 0.0, mi_bits: 0.0 });
            continue;
        }
        let pj: Vec<f64> = (0..nj).map(|j| pg_slice.column(j).sum() / w).collect();
        let mut mi = 0.0;
        for i in 0..ni {
            for j in 0..nj {
                let p = pg_slice[[i, j]] / w;
                if p > 0.0 {
                    mi += plogr(p, tensor.get(g, i, j) / pj[j]);
                }
            }
        }
        // A conditional KL divergence; clamp rounding noise below zero.
        let mi = mi.max(0.0);
        total += w * mi;
        terms.push(SubchannelTerm { weight: w, mi_bits: mi });
    }
    Ok(TeResult { value_bits: total, per_subchannel: terms, delay: tensor.delay() })
}

/// Plug-in transfer entropy straight from counts, without building a tensor.
pub fn te_from_counts(c: &JointCounts) -> f64 {
    let counts = c.counts();
    let (ng, ni, nj) = counts.dim();
    let n = c.total() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    let mut col = vec![0u64; nj];
    for g in 0..ng {
        let slice = counts.index_axis(Axis(0), g);
        let n_g: u64 = slice.sum();
        if n_g == 0 {
            continue;
        }
        col.iter_mut().for_each(|v| *v = 0);
        for i in 0..ni {
            for j in 0..nj {
                col[j] += slice[[i, j]];
            }
        }
        for i in 0..ni {
            let row = slice.row(i);
            let n_gi: u64 = row.sum();
            for j in 0..nj {
                let c = row[j];
                if c > 0 {
                    // p(j|g,i) / p(j|g)
                    let r = (c as f64 * n_g as f64) / (n_gi as f64 * col[j] as f64);
                    acc += c as f64 * r.log2();
                }
            }
        }
    }
    (acc / n).max(0.0)
}

/// Plug-in estimate from counts: builds the joint and the tensor and applies
/// [`transfer_entropy`].
pub fn te_result_from_counts(c: &JointCounts, tensor: &CausalTensor) -> Result<TeResult> {
    transfer_entropy(&joint_pmf(c)?, tensor)
}

/// TE of the indirect relation implied by the product rule,
/// `sum p(h,i,k) log2( sum_j Abar[h][i][j] B[h][j][k] / p(k|h) )`.
///
/// `joint` is indexed `[h][i][k]`.
pub fn expected_indirect_te(a_bar: &AveragedTensor, b: &CausalTensor, joint: &Array3<f64>) -> Result<f64> {
    let (ah, ni, nj) = a_bar.dims();
    let (nh, bj, nk) = b.dims();
    if bj != nj || (ah != nh && ah != 1) {
        return Err(shape_err!("incompatible tensors {:?} and {:?}", a_bar.dims(), b.dims()));
    }
    if joint.dim() != (nh, ni, nk) {
        return Err(shape_err!("joint {:?}, expected ({nh},{ni},{nk})", joint.dim()));
    }
    Ok(transfer_entropy(joint, &cascade(b, a_bar)?)?.value_bits)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum DpiOutcome {
    Satisfied,
    Violated { margin: f64 },
}

impl DpiOutcome {
    pub fn is_satisfied(&self) -> bool {
        matches!(self, DpiOutcome::Satisfied)
    }
}

/// Checks `te_xz <= min(te_xy, te_yz) + slack`.
pub fn dpi_check(te_xy: f64, te_yz: f64, te_xz: f64, slack: f64) -> DpiOutcome {
    let margin = te_xz - te_xy.min(te_yz);
    if margin > slack {
        DpiOutcome::Violated { margin }
    } else {
        DpiOutcome::Satisfied
    }
}
