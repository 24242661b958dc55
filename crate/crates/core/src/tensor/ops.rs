use ndarray::{Array2, Array3, ArrayView2, ArrayView3, Axis};
use serde::{Deserialize, Serialize};

use super::{AveragedTensor, CausalTensor, InteractionTensor, Pmf, NUMERIC_TOL};
use crate::error::{shape_err, Error, Result};

/// Pushes per-sub-channel input pmfs `p(i|g)` through the tensor, giving `p(j|g)`.
pub fn apply(t: &CausalTensor, input: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let (g, i, j) = t.dims();
    if input.dim() != (g, i) {
        return Err(shape_err!("input has shape {:?}, tensor expects ({g},{i})", input.dim()));
    }
    let mut out = Array2::zeros((g, j));
    for gg in 0..g {
        out.row_mut(gg).assign(&input.row(gg).dot(&t.subchannel(gg)));
    }
    Ok(out)
}

/// Single-channel convenience form of [`apply`].
pub fn apply_pmf(t: &CausalTensor, input: &Pmf) -> Result<Pmf> {
    if !t.is_single_channel() {
        return Err(shape_err!("apply_pmf needs a single-channel tensor"));
    }
    let row = ArrayView2::from_shape((1, input.cardinality()), input.probs())
        .map_err(|e| shape_err!("{e}"))?;
    let out = apply(t, row)?;
    Pmf::new(out.row(0).to_vec())
}

/// Averages a causal tensor over its sub-channels, weighted per `(h, i)`.
///
/// `context[h][i][g]` must hold `p(g | h, i)`.
pub fn average_tensor(a: &CausalTensor, context: ArrayView3<'_, f64>) -> Result<AveragedTensor> {
    let (g, i, j) = a.dims();
    let (nh, ci, cg) = context.dim();
    if ci != i || cg != g {
        return Err(shape_err!(
            "context has shape {:?}, expected (_, {i}, {g})",
            context.dim()
        ));
    }
    for row in context.lanes(Axis(2)) {
        if (row.sum() - 1.0).abs() > NUMERIC_TOL || row.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidInput("context rows must be pmfs over sub-channels".into()));
        }
    }
    let mut out = Array3::zeros((nh, i, j));
    for h in 0..nh {
        for ii in 0..i {
            for gg in 0..g {
                let w = context[[h, ii, gg]];
                if w == 0.0 {
                    continue;
                }
                for jj in 0..j {
                    out[[h, ii, jj]] += w * a.get(gg, ii, jj);
                }
            }
        }
    }
    AveragedTensor::new(out, a.delay())
}

/// What to do when Bayes inversion meets an output with zero probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DaggerFallback {
    #[default]
    Error,
    /// Fill the unreachable row with a uniform pmf.
    Uniform,
}

/// Reconstruction operator: per-sub-channel Bayes inversion
/// `A'[g][j][i] = A[g][i][j] p(i|g) / p(j|g)`, with the delay negated.
pub fn dagger(a: &CausalTensor, input: ArrayView2<'_, f64>, fallback: DaggerFallback) -> Result<CausalTensor> {
    let (g, i, j) = a.dims();
    let output = apply(a, input)?;
    let mut out = Array3::zeros((g, j, i));
    for gg in 0..g {
        for jj in 0..j {
            let pj = output[[gg, jj]];
            if pj > 0.0 {
                for ii in 0..i {
                    out[[gg, jj, ii]] = a.get(gg, ii, jj) * input[[gg, ii]] / pj;
                }
            } else {
                match fallback {
                    DaggerFallback::Error => {
                        return Err(Error::SingularChannel { subchannel: gg, output: jj })
                    }
                    DaggerFallback::Uniform => out.slice_mut(ndarray::s![gg, jj, ..]).fill(1.0 / i as f64),
                }
            }
        }
    }
    CausalTensor::new(out, -a.delay(), a.subchannel_weights().clone(), Some(output))
}

/// Bayes inversion of an averaged tensor given `p(i|h)`; result is `[h][j][i]`.
pub fn dagger_averaged(
    a: &AveragedTensor,
    input: ArrayView2<'_, f64>,
    fallback: DaggerFallback,
) -> Result<AveragedTensor> {
    let (nh, _, _) = a.dims();
    let t = a.to_causal(Pmf::uniform(nh))?;
    let d = dagger(&t, input, fallback)?;
    AveragedTensor::new(d.entries().clone(), d.delay())
}

/// Product rule for a chain: `C[h][i][k] = sum_j Abar[h][i][j] B[h][j][k]`.
///
/// A one-context `a_bar` is broadcast over every sub-channel of `b`. The
/// result keeps `b`'s sub-channel weights; its delay is the sum of both delays.
pub fn cascade(b: &CausalTensor, a_bar: &AveragedTensor) -> Result<CausalTensor> {
    let (nh, nj, nk) = b.dims();
    let (ah, ni, aj) = a_bar.dims();
    if aj != nj {
        return Err(shape_err!("inner dimensions differ: {aj} outputs vs {nj} inputs"));
    }
    if ah != nh && ah != 1 {
        return Err(shape_err!("{ah} contexts cannot align with {nh} sub-channels"));
    }
    let mut out = Array3::zeros((nh, ni, nk));
    for h in 0..nh {
        let ah_idx = if ah == 1 { 0 } else { h };
        let abar = a_bar.entries().index_axis(Axis(0), ah_idx);
        out.index_axis_mut(Axis(0), h).assign(&abar.dot(&b.subchannel(h)));
    }
    CausalTensor::new(out, a_bar.delay() + b.delay(), b.subchannel_weights().clone(), None)
}

/// Product rule for two discrete memoryless channels in series.
pub fn cascade_dmc(b: &CausalTensor, a: &CausalTensor) -> Result<CausalTensor> {
    if !a.is_single_channel() {
        return Err(shape_err!("cascade_dmc needs a single-channel first stage"));
    }
    cascade(b, &AveragedTensor::try_from(a)?)
}

/// Which parent an interaction tensor is contracted over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Contraction {
    /// `C[h][i][k] = sum_j Abar[h][i][j] D[h][i][j][k]`; weights are `Abar` (`[h][i][j]`).
    OverY,
    /// `B[h][j][k] = sum_i Abar'[h][j][i] D[h][i][j][k]`; weights are the dagger (`[h][j][i]`).
    OverX,
}

/// Expresses a bivariate causal tensor through the interaction tensor.
pub fn contract_interaction(
    d: &InteractionTensor,
    weights: &AveragedTensor,
    over: Contraction,
) -> Result<CausalTensor> {
    let (nh, ni, nj, nk) = d.dims();
    let (wh, w1, w2) = weights.dims();
    let wi = |h: usize| if wh == 1 { 0 } else { h };
    if wh != nh && wh != 1 {
        return Err(shape_err!("weights have {wh} contexts, interaction tensor {nh}"));
    }
    let e = d.entries();
    let w = weights.entries();
    match over {
        Contraction::OverY => {
            if (w1, w2) != (ni, nj) {
                return Err(shape_err!("weights shape ({w1},{w2}) != ({ni},{nj})"));
            }
            let mut out = Array3::zeros((nh, ni, nk));
            for h in 0..nh {
                for i in 0..ni {
                    for j in 0..nj {
                        let wt = w[[wi(h), i, j]];
                        if wt == 0.0 {
                            continue;
                        }
                        for k in 0..nk {
                            out[[h, i, k]] += wt * e[[h, i, j, k]];
                        }
                    }
                }
            }
            CausalTensor::new(out, d.delay_x(), Pmf::uniform(nh), None)
        }
        Contraction::OverX => {
            if (w1, w2) != (nj, ni) {
                return Err(shape_err!("weights shape ({w1},{w2}) != ({nj},{ni})"));
            }
            let mut out = Array3::zeros((nh, nj, nk));
            for h in 0..nh {
                for j in 0..nj {
                    for i in 0..ni {
                        let wt = w[[wi(h), j, i]];
                        if wt == 0.0 {
                            continue;
                        }
                        for k in 0..nk {
                            out[[h, j, k]] += wt * e[[h, i, j, k]];
                        }
                    }
                }
            }
            CausalTensor::new(out, d.delay_y(), Pmf::uniform(nh), None)
        }
    }
}

/// Degeneracy class of a causal tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Degeneracy {
    /// 0/1 entries with doubly stochastic sub-channels.
    Noiseless,
    /// Every entry equal to `1/n_outputs`.
    PerfectNoisy,
    General,
}

pub fn classify_degeneracy(t: &CausalTensor, tol: f64) -> Degeneracy {
    let e = t.entries();
    let binary = e.iter().all(|&v| v.abs() <= tol || (v - 1.0).abs() <= tol);
    let columns_ok = (0..t.n_subchannels()).all(|g| {
        t.subchannel(g)
            .axis_iter(Axis(1))
            .all(|col| (col.sum() - 1.0).abs() <= tol)
    });
    if binary && columns_ok {
        return Degeneracy::Noiseless;
    }
    let u = 1.0 / t.n_outputs() as f64;
    if e.iter().all(|&v| (v - u).abs() <= tol) {
        return Degeneracy::PerfectNoisy;
    }
    Degeneracy::General
}

/// Entrywise maximum absolute difference of two equally shaped tensors.
pub fn max_abs_diff(a: &Array3<f64>, b: &Array3<f64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(shape_err!("shapes {:?} and {:?} differ", a.dim(), b.dim()));
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array4};

    fn a_ex() -> CausalTensor {
        CausalTensor::from_rows(&[&[0.5, 0.5], &[1.0, 0.0]], 1).unwrap()
    }

    fn b_ex() -> CausalTensor {
        CausalTensor::from_rows(&[&[1.0 / 3.0, 2.0 / 3.0], &[0.0, 1.0]], 2).unwrap()
    }

    fn px() -> Pmf {
        Pmf::new(vec![0.4, 0.6]).unwrap()
    }

    fn close(a: &Array3<f64>, b: &Array3<f64>, tol: f64) -> bool {
        max_abs_diff(a, b).unwrap() <= tol
    }

    #[test]
    fn apply_worked_example() {
        let py = apply_pmf(&a_ex(), &px()).unwrap();
        assert!((py.probs()[0] - 0.8).abs() < 1e-12);
        assert!((py.probs()[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn apply_identity_and_noisy() {
        let p = Pmf::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(apply_pmf(&CausalTensor::identity(3, 0), &p).unwrap(), p);
        let u = apply_pmf(&CausalTensor::perfect_noisy(1, 3, 3), &p).unwrap();
        assert!(u.probs().iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn apply_shape_error() {
        let p = Pmf::uniform(3);
        assert!(matches!(apply_pmf(&a_ex(), &p), Err(Error::Shape(_))));
    }

    #[test]
    fn dagger_worked_example() {
        let a = a_ex();
        let input = array![[0.4, 0.6]];
        let d = dagger(&a, input.view(), DaggerFallback::Error).unwrap();
        let expect = array![[[0.25, 0.75], [1.0, 0.0]]];
        assert!(close(d.entries(), &expect, 1e-12));
        assert_eq!(d.delay(), -1);
    }

    #[test]
    fn dagger_identity() {
        let id = CausalTensor::identity(3, 4);
        let u = Array2::from_elem((1, 3), 1.0 / 3.0);
        let d = dagger(&id, u.view(), DaggerFallback::Error).unwrap();
        assert!(close(d.entries(), id.entries(), 0.0));
        assert_eq!(d.delay(), -4);
    }

    #[test]
    fn dagger_zero_output_reports_location() {
        // output 1 never produced
        let t = CausalTensor::from_rows(&[&[1.0, 0.0], &[1.0, 0.0]], 0).unwrap();
        let input = array![[0.5, 0.5]];
        match dagger(&t, input.view(), DaggerFallback::Error) {
            Err(Error::SingularChannel { subchannel: 0, output: 1 }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let d = dagger(&t, input.view(), DaggerFallback::Uniform).unwrap();
        assert_eq!(d.entries()[[0, 1, 0]], 0.5);
    }

    #[test]
    fn cascade_worked_example() {
        let c = cascade_dmc(&b_ex(), &a_ex()).unwrap();
        let expect = array![[[1.0 / 6.0, 5.0 / 6.0], [1.0 / 3.0, 2.0 / 3.0]]];
        assert!(close(c.entries(), &expect, 1e-12));
        assert_eq!(c.delay(), 3);
    }

    #[test]
    fn reconstruction_of_b_fails_for_chain() {
        let a = a_ex();
        let c = cascade_dmc(&b_ex(), &a).unwrap();
        let ad = dagger(&a, array![[0.4, 0.6]].view(), DaggerFallback::Error).unwrap();
        let b_rec = cascade_dmc(&c, &ad).unwrap();
        let expect = array![[[7.0 / 24.0, 17.0 / 24.0], [1.0 / 6.0, 5.0 / 6.0]]];
        assert!(close(b_rec.entries(), &expect, 1e-12));
        assert!(!close(b_rec.entries(), b_ex().entries(), 1e-3));
        assert_eq!(b_rec.delay(), c.delay() + ad.delay());
    }

    #[test]
    fn cascade_identity_is_neutral() {
        let c = cascade_dmc(&b_ex(), &CausalTensor::identity(2, 5)).unwrap();
        assert!(close(c.entries(), b_ex().entries(), 0.0));
        assert_eq!(c.delay(), 7);
    }

    #[test]
    fn cascade_and_dagger_do_not_commute() {
        let a = a_ex();
        let ad = dagger(&a, array![[0.4, 0.6]].view(), DaggerFallback::Error).unwrap();
        let x = cascade_dmc(&a, &ad).unwrap();
        let y = cascade_dmc(&ad, &a).unwrap();
        assert!(max_abs_diff(x.entries(), y.entries()).unwrap() > 1e-3);
    }

    #[test]
    fn average_single_channel_broadcasts() {
        let a = a_ex();
        let ctx = Array3::from_elem((3, 2, 1), 1.0);
        let abar = average_tensor(&a, ctx.view()).unwrap();
        for h in 0..3 {
            assert_eq!(abar.entries().index_axis(Axis(0), h), a.subchannel(0));
        }
    }

    #[test]
    fn average_point_mass_selects_slice() {
        let e = array![[[0.9, 0.1], [0.2, 0.8]], [[0.5, 0.5], [0.3, 0.7]]];
        let a = CausalTensor::new(e, 0, Pmf::uniform(2), None).unwrap();
        let mut ctx = Array3::zeros((2, 2, 2));
        ctx.slice_mut(ndarray::s![.., .., 1]).fill(1.0);
        let abar = average_tensor(&a, ctx.view()).unwrap();
        for h in 0..2 {
            assert_eq!(abar.entries().index_axis(Axis(0), h), a.subchannel(1));
        }
    }

    #[test]
    fn average_rejects_bad_context() {
        let ctx = Array3::from_elem((1, 2, 1), 0.5);
        assert!(average_tensor(&a_ex(), ctx.view()).is_err());
    }

    #[test]
    fn contraction_with_chain_interaction_recovers_b() {
        // D independent of the x-input: D[h][i][j][k] = B[j][k]
        let b = b_ex();
        let d = Array4::from_shape_fn((1, 3, 2, 2), |(_, _, j, k)| b.get(0, j, k));
        let d = InteractionTensor::new(d, 3, 2).unwrap();
        let mut w = Array3::zeros((1, 2, 3));
        w.slice_mut(ndarray::s![0, 0, ..]).assign(&array![0.2, 0.3, 0.5]);
        w.slice_mut(ndarray::s![0, 1, ..]).assign(&array![0.6, 0.4, 0.0]);
        let w = AveragedTensor::new(w, 0).unwrap();
        let out = contract_interaction(&d, &w, Contraction::OverX).unwrap();
        assert!(close(out.entries(), b.entries(), 1e-15));
        assert_eq!(out.delay(), 2);
    }

    #[test]
    fn degeneracy_classes() {
        let id = CausalTensor::identity(4, 0);
        assert_eq!(classify_degeneracy(&id, 1e-12), Degeneracy::Noiseless);
        let perm = CausalTensor::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]], 0).unwrap();
        assert_eq!(classify_degeneracy(&perm, 1e-12), Degeneracy::Noiseless);
        let noisy = CausalTensor::perfect_noisy(1, 3, 3);
        assert_eq!(classify_degeneracy(&noisy, 1e-12), Degeneracy::PerfectNoisy);
        assert_eq!(classify_degeneracy(&a_ex(), 1e-12), Degeneracy::General);
        // 0/1 rows but not doubly stochastic
        let z = CausalTensor::from_rows(&[&[1.0, 0.0], &[1.0, 0.0]], 0).unwrap();
        assert_eq!(classify_degeneracy(&z, 1e-12), Degeneracy::General);
    }
}
