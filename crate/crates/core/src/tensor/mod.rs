//! Stochastic tensors describing causal channels.
//!
//! Index layout follows the channel picture: a [`CausalTensor`] is stored as
//! `[subchannel][input][output]`, an [`AveragedTensor`] as
//! `[context][input][output]` and an [`InteractionTensor`] as
//! `[context][input_x][input_y][output]`. Every row over the last axis is a
//! probability vector.
//!
//! Interaction delays are carried as signed sample counts. Cascading adds
//! them and Bayes inversion negates them.

mod json;
mod ops;

pub use json::TensorJson;
pub use ops::{
    apply, apply_pmf, average_tensor, cascade, cascade_dmc, classify_degeneracy,
    contract_interaction, dagger, dagger_averaged, max_abs_diff, Contraction, DaggerFallback,
    Degeneracy,
};

use ndarray::{Array2, Array3, Array4, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};

/// Row-sum tolerance for exactly constructed objects.
pub const EXACT_TOL: f64 = 1e-12;
/// Row-sum tolerance accepted by validating constructors.
pub const NUMERIC_TOL: f64 = 1e-9;

/// A probability vector over a finite alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Pmf {
    probs: Vec<f64>,
}

impl Pmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_row(&probs).map_err(|e| e.context("pmf"))?;
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform pmf needs a nonempty alphabet");
        Self { probs: vec![1.0 / n as f64; n] }
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[at] = 1.0;
        Self { probs }
    }

    /// Normalizes nonnegative weights. Fails if they sum to zero.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidInput("weights must be nonnegative with positive sum".into()));
        }
        Ok(Self { probs: weights.iter().map(|w| w / total).collect() })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn cardinality(&self) -> usize {
        self.probs.len()
    }

    /// Shannon entropy in bits.
    pub fn entropy_bits(&self) -> f64 {
        -self.probs.iter().filter(|&&p| p > 0.0).map(|p| p * p.log2()).sum::<f64>()
    }
}

impl TryFrom<Vec<f64>> for Pmf {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Pmf::new(v)
    }
}

impl From<Pmf> for Vec<f64> {
    fn from(p: Pmf) -> Self {
        p.probs
    }
}

fn check_row(row: &[f64]) -> Result<()> {
    if row.is_empty() {
        return Err(Error::InvalidInput("empty probability vector".into()));
    }
    if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidInput(format!("invalid probability {v}")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > NUMERIC_TOL {
        return Err(Error::InvalidInput(format!("probabilities sum to {sum}, expected 1")));
    }
    Ok(())
}

fn check_rows<'a>(rows: impl Iterator<Item = ndarray::ArrayView1<'a, f64>>) -> Result<()> {
    for (r, row) in rows.enumerate() {
        let row: Vec<f64> = row.to_vec();
        check_row(&row).map_err(|e| e.context(format!("row {r}")))?;
    }
    Ok(())
}

/// Row-stochastic tensor `A[g][i][j] = p(output j | input i, sub-channel g)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalTensor {
    entries: Array3<f64>,
    delay: i64,
    subchannel_weights: Pmf,
    context_input: Option<Array2<f64>>,
}

impl CausalTensor {
    pub fn new(
        entries: Array3<f64>,
        delay: i64,
        subchannel_weights: Pmf,
        context_input: Option<Array2<f64>>,
    ) -> Result<Self> {
        let (g, i, j) = entries.dim();
        if g == 0 || i == 0 || j == 0 {
            return Err(shape_err!("causal tensor dims must be positive, got ({g},{i},{j})"));
        }
        check_rows(entries.lanes(Axis(2)).into_iter())?;
        if subchannel_weights.cardinality() != g {
            return Err(shape_err!(
                "{} sub-channel weights for {g} sub-channels",
                subchannel_weights.cardinality()
            ));
        }
        if let Some(ctx) = &context_input {
            if ctx.dim() != (g, i) {
                return Err(shape_err!("context input has shape {:?}, expected ({g},{i})", ctx.dim()));
            }
        }
        Ok(Self { entries, delay, subchannel_weights, context_input })
    }

    /// A discrete memoryless channel viewed as a one-sub-channel tensor.
    pub fn single(matrix: Array2<f64>, delay: i64) -> Result<Self> {
        let (i, j) = matrix.dim();
        let entries = matrix.into_shape_with_order((1, i, j)).expect("contiguous reshape");
        Self::new(entries, delay, Pmf::uniform(1), None)
    }

    /// Convenience constructor for a single-channel tensor from row slices.
    pub fn from_rows(rows: &[&[f64]], delay: i64) -> Result<Self> {
        Self::single(rows_to_array(rows)?, delay)
    }

    pub fn identity(n: usize, delay: i64) -> Self {
        Self::single(Array2::eye(n), delay).expect("identity is stochastic")
    }

    /// Every entry equal to `1/n_outputs`.
    pub fn perfect_noisy(n_subchannels: usize, n_inputs: usize, n_outputs: usize) -> Self {
        let entries = Array3::from_elem((n_subchannels, n_inputs, n_outputs), 1.0 / n_outputs as f64);
        Self::new(entries, 0, Pmf::uniform(n_subchannels), None).expect("uniform rows")
    }

    pub fn entries(&self) -> &Array3<f64> {
        &self.entries
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.entries.dim()
    }

    pub fn n_subchannels(&self) -> usize {
        self.entries.dim().0
    }

    pub fn n_inputs(&self) -> usize {
        self.entries.dim().1
    }

    pub fn n_outputs(&self) -> usize {
        self.entries.dim().2
    }

    pub fn delay(&self) -> i64 {
        self.delay
    }

    pub fn with_delay(mut self, delay: i64) -> Self {
        self.delay = delay;
        self
    }

    pub fn subchannel_weights(&self) -> &Pmf {
        &self.subchannel_weights
    }

    /// `p(input i | sub-channel g)` when known.
    pub fn context_input(&self) -> Option<&Array2<f64>> {
        self.context_input.as_ref()
    }

    pub fn with_context_input(mut self, ctx: Array2<f64>) -> Result<Self> {
        if ctx.dim() != (self.n_subchannels(), self.n_inputs()) {
            return Err(shape_err!("context input has shape {:?}", ctx.dim()));
        }
        self.context_input = Some(ctx);
        Ok(self)
    }

    pub fn with_subchannel_weights(mut self, weights: Pmf) -> Result<Self> {
        if weights.cardinality() != self.n_subchannels() {
            return Err(shape_err!("{} weights for {} sub-channels", weights.cardinality(), self.n_subchannels()));
        }
        self.subchannel_weights = weights;
        Ok(self)
    }

    pub fn is_single_channel(&self) -> bool {
        self.n_subchannels() == 1
    }

    /// The discrete memoryless channel of sub-channel `g`.
    pub fn subchannel(&self, g: usize) -> ArrayView2<'_, f64> {
        self.entries.index_axis(Axis(0), g)
    }

    pub fn get(&self, g: usize, i: usize, j: usize) -> f64 {
        self.entries[[g, i, j]]
    }

    /// Largest deviation of any row sum from 1.
    pub fn max_row_error(&self) -> f64 {
        max_row_error(self.entries.lanes(Axis(2)).into_iter())
    }
}

/// Context-weighted average `Abar[h][i][j] = sum_g p(g|h,i) A[g][i][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedTensor {
    entries: Array3<f64>,
    delay: i64,
}

impl AveragedTensor {
    pub fn new(entries: Array3<f64>, delay: i64) -> Result<Self> {
        let (h, i, j) = entries.dim();
        if h == 0 || i == 0 || j == 0 {
            return Err(shape_err!("averaged tensor dims must be positive"));
        }
        check_rows(entries.lanes(Axis(2)).into_iter())?;
        Ok(Self { entries, delay })
    }

    /// Repeats a single-channel tensor across `n_contexts` contexts.
    pub fn broadcast(a: &CausalTensor, n_contexts: usize) -> Result<Self> {
        if !a.is_single_channel() {
            return Err(shape_err!("only a single-channel tensor can be broadcast"));
        }
        let slice = a.subchannel(0);
        let (i, j) = slice.dim();
        let entries = Array3::from_shape_fn((n_contexts, i, j), |(_, ii, jj)| slice[[ii, jj]]);
        Ok(Self { entries, delay: a.delay() })
    }

    pub fn entries(&self) -> &Array3<f64> {
        &self.entries
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.entries.dim()
    }

    pub fn n_contexts(&self) -> usize {
        self.entries.dim().0
    }

    pub fn delay(&self) -> i64 {
        self.delay
    }

    pub fn max_row_error(&self) -> f64 {
        max_row_error(self.entries.lanes(Axis(2)).into_iter())
    }

    /// Views the averaged tensor as a causal tensor with the given context weights.
    pub fn to_causal(&self, weights: Pmf) -> Result<CausalTensor> {
        CausalTensor::new(self.entries.clone(), self.delay, weights, None)
    }
}

impl TryFrom<&CausalTensor> for AveragedTensor {
    type Error = Error;
    fn try_from(a: &CausalTensor) -> Result<Self> {
        AveragedTensor::broadcast(a, 1)
    }
}

/// Two-parent interaction tensor `D[h][i][j][k] = p(k | x-word i, y-word j, past h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionTensor {
    entries: Array4<f64>,
    delay_x: i64,
    delay_y: i64,
}

impl InteractionTensor {
    pub fn new(entries: Array4<f64>, delay_x: i64, delay_y: i64) -> Result<Self> {
        let (h, i, j, k) = entries.dim();
        if h == 0 || i == 0 || j == 0 || k == 0 {
            return Err(shape_err!("interaction tensor dims must be positive"));
        }
        check_rows(entries.lanes(Axis(3)).into_iter())?;
        Ok(Self { entries, delay_x, delay_y })
    }

    pub fn entries(&self) -> &Array4<f64> {
        &self.entries
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        self.entries.dim()
    }

    pub fn delay_x(&self) -> i64 {
        self.delay_x
    }

    pub fn delay_y(&self) -> i64 {
        self.delay_y
    }

    pub fn max_row_error(&self) -> f64 {
        max_row_error(self.entries.lanes(Axis(3)).into_iter())
    }
}

fn max_row_error<'a>(rows: impl Iterator<Item = ndarray::ArrayView1<'a, f64>>) -> f64 {
    rows.map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max)
}

pub(crate) fn rows_to_array(rows: &[&[f64]]) -> Result<Array2<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != m) {
        return Err(shape_err!("ragged rows"));
    }
    Ok(Array2::from_shape_fn((n, m), |(i, j)| rows[i][j]))
}
