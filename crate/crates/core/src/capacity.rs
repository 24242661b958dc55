//! Channel capacity by Blahut–Arimoto and the sub-channel-weighted
//! approximation for causal tensors.

use std::f64::consts::LN_2;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{CausalTensor, Pmf};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    /// Lower bound on the capacity at termination, in bits.
    pub capacity_bits: f64,
    /// Upper bound at termination, in bits.
    pub upper_bound_bits: f64,
    pub optimal_input: Pmf,
    pub iterations: usize,
    pub converged: bool,
}

/// Blahut–Arimoto iteration on a row-stochastic matrix `W[x][y]`.
///
/// Stops when the gap between the upper bound `max_x D(W_x || q)` and the
/// lower bound `log sum_x r_x exp D(W_x || q)` falls below `tol` bits. Never
/// fails on a valid matrix: if `max_iter` is reached the best bounds are
/// returned with `converged = false`.
pub fn blahut_arimoto(channel: ArrayView2<'_, f64>, tol: f64, max_iter: usize) -> Result<CapacityResult> {
    let (nx, ny) = channel.dim();
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidInput("channel matrix must be nonempty".into()));
    }
    for (i, row) in channel.outer_iter().enumerate() {
        let s: f64 = row.sum();
        if (s - 1.0).abs() > crate::tensor::NUMERIC_TOL || row.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidInput(format!("row {i} is not a probability vector")));
        }
    }
    // Outputs that are never emitted carry no information; leave them out.
    let cols: Vec<usize> = (0..ny).filter(|&j| channel.column(j).iter().any(|&v| v > 0.0)).collect();
    let m = cols.len();
    // Identical rows act as one input; iterate on the distinct rows and
    // split the mass evenly among copies at the end.
    let mut distinct: Vec<Vec<f64>> = Vec::new();
    let mut owner = Vec::with_capacity(nx);
    for row in channel.outer_iter() {
        let v: Vec<f64> = cols.iter().map(|&j| row[j]).collect();
        let k = match distinct.iter().position(|d| *d == v) {
            Some(k) => k,
            None => {
                distinct.push(v);
                distinct.len() - 1
            }
        };
        owner.push(k);
    }
    let nd = distinct.len();
    let mut copies = vec![0usize; nd];
    owner.iter().for_each(|&k| copies[k] += 1);
    let w: Vec<f64> = distinct.concat();
    // D(W_x || q) = sum_y W log W - sum_y W log q.
    let neg_entropy: Vec<f64> = distinct
        .iter()
        .map(|row| row.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum())
        .collect();

    // Start from the uniform input over the original rows.
    let mut r: Vec<f64> = copies.iter().map(|&c| c as f64 / nx as f64).collect();
    let mut q = vec![0.0; m];
    let mut log_q = vec![0.0; m];
    let mut d = vec![0.0; nd];
    let mut scale = vec![0.0; nd];
    let mut lower = 0.0;
    let mut upper = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        q.iter_mut().for_each(|v| *v = 0.0);
        for (ri, row) in r.iter().zip(w.chunks_exact(m)) {
            for (qj, wj) in q.iter_mut().zip(row) {
                *qj += ri * wj;
            }
        }
        for (lq, qj) in log_q.iter_mut().zip(&q) {
            *lq = if *qj > 0.0 { qj.ln() } else { 0.0 };
        }
        for ((di, row), ne) in d.iter_mut().zip(w.chunks_exact(m)).zip(&neg_entropy) {
            let cross: f64 = row.iter().zip(&log_q).map(|(wj, lq)| wj * lq).sum();
            *di = ne - cross;
        }
        let dmax = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        // exp(D - dmax) keeps the normalizer in range.
        let mut z = 0.0;
        for (e, di) in scale.iter_mut().zip(&d) {
            *e = (di - dmax).exp();
        }
        for (ri, e) in r.iter().zip(&scale) {
            z += ri * e;
        }
        lower = (dmax + z.ln()) / LN_2;
        upper = dmax / LN_2;
        if upper - lower < tol {
            converged = true;
            break;
        }
        for (ri, e) in r.iter_mut().zip(&scale) {
            *ri *= e / z;
        }
    }
    let r: Vec<f64> = owner.iter().map(|&k| r[k] / copies[k] as f64).collect();
    if !lower.is_finite() || !upper.is_finite() {
        return Err(Error::Numerical("Blahut–Arimoto produced non-finite bounds".into()));
    }
    let optimal_input = Pmf::from_weights(&r)?;
    Ok(CapacityResult {
        capacity_bits: lower.max(0.0),
        upper_bound_bits: upper.max(0.0),
        optimal_input,
        iterations,
        converged,
    })
}

/// Binary entropy in nats.
fn h_nats(p: f64) -> f64 {
    let t = |v: f64| if v > 0.0 { -v * v.ln() } else { 0.0 };
    t(p) + t(1.0 - p)
}

/// Exact capacity of a channel with two outputs.
///
/// Mutual information is `h(q) - sum_x r_x h(p_x)` with `q = sum_x r_x p_x`;
/// for any target `q` the second term is smallest with all mass on the two
/// inputs whose `p_x` are extreme, which leaves a concave problem in one
/// variable with a closed-form maximizer.
fn binary_output_capacity(channel: ArrayView2<'_, f64>, col: usize) -> Result<CapacityResult> {
    let nx = channel.nrows();
    let p: Vec<f64> = (0..nx).map(|x| channel[[x, col]]).collect();
    let lo = (0..nx).min_by(|&a, &b| p[a].total_cmp(&p[b])).expect("nonempty");
    let hi = (0..nx).max_by(|&a, &b| p[a].total_cmp(&p[b])).expect("nonempty");
    let (pa, pb) = (p[lo], p[hi]);
    let mut input = vec![0.0; nx];
    if pb - pa <= 0.0 {
        input.iter_mut().for_each(|v| *v = 1.0 / nx as f64);
        return Ok(CapacityResult {
            capacity_bits: 0.0,
            upper_bound_bits: 0.0,
            optimal_input: Pmf::new(input)?,
            iterations: 0,
            converged: true,
        });
    }
    // Stationarity: ln((1-q)/q) = (h(pb) - h(pa)) / (pb - pa).
    let kappa = (h_nats(pb) - h_nats(pa)) / (pb - pa);
    let q = 1.0 / (1.0 + kappa.exp());
    let r = ((q - pa) / (pb - pa)).clamp(0.0, 1.0);
    let q = pa + r * (pb - pa);
    let nats = h_nats(q) - (1.0 - r) * h_nats(pa) - r * h_nats(pb);
    let bits = (nats / LN_2).max(0.0);
    input[lo] += 1.0 - r;
    input[hi] += r;
    Ok(CapacityResult {
        capacity_bits: bits,
        upper_bound_bits: bits,
        optimal_input: Pmf::from_weights(&input)?,
        iterations: 0,
        converged: true,
    })
}

/// Capacity of one channel matrix: exact when at most two outputs are ever
/// emitted, Blahut–Arimoto otherwise.
pub fn channel_capacity(channel: ArrayView2<'_, f64>, tol: f64, max_iter: usize) -> Result<CapacityResult> {
    let (nx, ny) = channel.dim();
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidInput("channel matrix must be nonempty".into()));
    }
    for (i, row) in channel.outer_iter().enumerate() {
        let s: f64 = row.sum();
        if (s - 1.0).abs() > crate::tensor::NUMERIC_TOL || row.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidInput(format!("row {i} is not a probability vector")));
        }
    }
    let used: Vec<usize> = (0..ny).filter(|&j| channel.column(j).iter().any(|&v| v > 0.0)).collect();
    match used.len() {
        1 => binary_output_capacity(channel, used[0]),
        2 => binary_output_capacity(channel, used[1]),
        _ => blahut_arimoto(channel, tol, max_iter),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxCapacity {
    pub gamma_tilde: f64,
    /// `None` for sub-channels with zero weight.
    pub per_subchannel: Vec<Option<CapacityResult>>,
}

/// `sum_g p(g) Gamma(A_g)`, skipping sub-channels of zero weight.
///
/// When the tensor carries `p(i|g)`, each sub-channel's capacity is taken
/// over the inputs observed in that sub-channel only: rows of unseen inputs
/// hold placeholder pmfs, not estimates.
pub fn approx_capacity(t: &CausalTensor, tol: f64, max_iter: usize) -> Result<ApproxCapacity> {
    let weights = t.subchannel_weights().probs();
    let mut gamma = 0.0;
    let mut per = Vec::with_capacity(weights.len());
    for (g, &wg) in weights.iter().enumerate() {
        if wg <= 0.0 {
            per.push(None);
            continue;
        }
        let slice = t.subchannel(g);
        let res = match t.context_input() {
            Some(ctx) => {
                let rows: Vec<usize> = (0..t.n_inputs()).filter(|&i| ctx[[g, i]] > 0.0).collect();
                if rows.len() == t.n_inputs() {
                    channel_capacity(slice, tol, max_iter)?
                } else if rows.is_empty() {
                    return Err(Error::InvalidInput(format!("sub-channel {g} has weight but no inputs")));
                } else {
                    let sub = slice.select(ndarray::Axis(0), &rows);
                    let mut r = channel_capacity(sub.view(), tol, max_iter)?;
                    let mut full = vec![0.0; t.n_inputs()];
                    for (k, &i) in rows.iter().enumerate() {
                        full[i] = r.optimal_input.probs()[k];
                    }
                    r.optimal_input = Pmf::from_weights(&full)?;
                    r
                }
            }
            None => channel_capacity(slice, tol, max_iter)?,
        };
        gamma += wg * res.capacity_bits;
        per.push(Some(res));
    }
    Ok(ApproxCapacity { gamma_tilde: gamma, per_subchannel: per })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2, Array3};

    fn h2(p: f64) -> f64 {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }

    #[test]
    fn two_output_shortcut_agrees_with_iteration() {
        let chans = [
            array![[0.9, 0.1], [0.2, 0.8]],
            array![[0.5, 0.5], [0.52, 0.48], [0.49, 0.51]],
            array![[1.0, 0.0], [0.3, 0.7], [0.6, 0.4], [0.0, 1.0]],
            array![[0.7, 0.0, 0.3], [0.1, 0.0, 0.9]],
        ];
        for c in &chans {
            let fast = channel_capacity(c.view(), 1e-13, 1_000_000).unwrap();
            let slow = blahut_arimoto(c.view(), 1e-13, 1_000_000).unwrap();
            assert!((fast.capacity_bits - slow.capacity_bits).abs() < 1e-9, "{c:?}");
            assert_eq!(fast.iterations, 0);
        }
    }

    #[test]
    fn bsc_matches_closed_form() {
        for p in [0.05, 0.1, 0.25] {
            let w = array![[1.0 - p, p], [p, 1.0 - p]];
            let r = blahut_arimoto(w.view(), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
            assert!(r.converged);
            assert!((r.capacity_bits - (1.0 - h2(p))).abs() < 1e-9, "p={p}");
            assert!((r.optimal_input.probs()[0] - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn identity_and_useless_channels() {
        let id = Array2::eye(2);
        assert!((blahut_arimoto(id.view(), 1e-12, 100).unwrap().capacity_bits - 1.0).abs() < 1e-12);
        let half = Array2::from_elem((2, 2), 0.5);
        assert!(blahut_arimoto(half.view(), 1e-12, 100).unwrap().capacity_bits.abs() < 1e-12);
    }

    #[test]
    fn zero_columns_are_ignored() {
        let w = array![[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        let r = blahut_arimoto(w.view(), 1e-12, 100).unwrap();
        assert!((r.capacity_bits - 1.0).abs() < 1e-12);
    }

    #[test]
    fn iteration_cap_reports_unconverged() {
        let w = array![[0.9, 0.1, 0.0], [0.0, 0.2, 0.8], [0.3, 0.3, 0.4]];
        let r = blahut_arimoto(w.view(), 1e-15, 2).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 2);
        assert!(r.capacity_bits <= r.upper_bound_bits);
    }

    #[test]
    fn lower_bound_is_nondecreasing() {
        let w = array![[0.7, 0.2, 0.1], [0.1, 0.1, 0.8], [0.3, 0.4, 0.3], [0.25, 0.25, 0.5]];
        let mut last = 0.0;
        for it in 1..60 {
            let r = blahut_arimoto(w.view(), 0.0, it).unwrap();
            assert!(r.capacity_bits >= last - 1e-15, "iteration {it}");
            last = r.capacity_bits;
        }
    }

    #[test]
    fn weighted_capacity_definition() {
        let e = Array3::from_shape_fn((2, 2, 2), |(g, i, j)| match g {
            0 => f64::from(u8::from(i == j)),
            _ => 0.5,
        });
        let t = CausalTensor::new(e, 0, Pmf::uniform(2), None).unwrap();
        let a = approx_capacity(&t, 1e-12, 1000).unwrap();
        assert!((a.gamma_tilde - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_weight_subchannels_are_skipped() {
        let e = Array3::from_shape_fn((2, 2, 2), |(_, i, j)| f64::from(u8::from(i == j)));
        let t = CausalTensor::new(e, 0, Pmf::new(vec![1.0, 0.0]).unwrap(), None).unwrap();
        let a = approx_capacity(&t, 1e-12, 1000).unwrap();
        assert!(a.per_subchannel[1].is_none());
        assert!((a.gamma_tilde - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unseen_inputs_do_not_count() {
        // Input 1 never observed; its placeholder row would otherwise add capacity.
        let t = CausalTensor::from_rows(&[&[1.0, 0.0], &[0.5, 0.5], &[1.0, 0.0]], 0)
            .unwrap()
            .with_context_input(array![[0.5, 0.0, 0.5]])
            .unwrap();
        let a = approx_capacity(&t, 1e-12, 1000).unwrap();
        assert!(a.gamma_tilde.abs() < 1e-12);
        assert_eq!(a.per_subchannel[0].as_ref().unwrap().optimal_input.probs()[1], 0.0);
    }
}
