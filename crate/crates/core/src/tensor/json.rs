use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use super::{CausalTensor, Pmf};
use crate::error::{shape_err, Error, Result};

/// Wire form of a [`CausalTensor`]. Entries are nested `[g][i][j]`.
///
/// Floats are written with shortest round-trip formatting, so
/// `decode(encode(t)) == t` bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorJson {
    pub dims: [usize; 3],
    pub delay: i64,
    pub subchannel_weights: Vec<f64>,
    pub entries: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_input: Option<Vec<Vec<f64>>>,
}

impl From<&CausalTensor> for TensorJson {
    fn from(t: &CausalTensor) -> Self {
        let (g, i, j) = t.dims();
        let e = t.entries();
        Self {
            dims: [g, i, j],
            delay: t.delay(),
            subchannel_weights: t.subchannel_weights().probs().to_vec(),
            entries: (0..g)
                .map(|gg| (0..i).map(|ii| (0..j).map(|jj| e[[gg, ii, jj]]).collect()).collect())
                .collect(),
            context_input: t.context_input().map(|c| c.outer_iter().map(|r| r.to_vec()).collect()),
        }
    }
}

impl TryFrom<TensorJson> for CausalTensor {
    type Error = Error;

    fn try_from(w: TensorJson) -> Result<Self> {
        let [g, i, j] = w.dims;
        // Guard the allocation below against absurd declared sizes.
        let cells = g.checked_mul(i).and_then(|x| x.checked_mul(j));
        if cells.is_none_or(|c| c > (1 << 28)) {
            return Err(shape_err!("declared dims {:?} are too large", w.dims));
        }
        if w.entries.len() != g
            || w.entries.iter().any(|s| s.len() != i || s.iter().any(|r| r.len() != j))
        {
            return Err(shape_err!("entries do not match dims {:?}", w.dims));
        }
        let entries = Array3::from_shape_fn((g, i, j), |(a, b, c)| w.entries[a][b][c]);
        let ctx = match w.context_input {
            None => None,
            Some(rows) => {
                if rows.len() != g || rows.iter().any(|r| r.len() != i) {
                    return Err(shape_err!("context_input does not match dims {:?}", w.dims));
                }
                Some(Array2::from_shape_fn((g, i), |(a, b)| rows[a][b]))
            }
        };
        CausalTensor::new(entries, w.delay, Pmf::new(w.subchannel_weights)?, ctx)
    }
}

impl CausalTensor {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&TensorJson::from(self)).expect("tensor serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&TensorJson::from(self)).expect("tensor serializes")
    }

    /// Parses and validates a tensor document.
    pub fn from_json(s: &str) -> Result<Self> {
        let w: TensorJson = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        CausalTensor::try_from(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let e = Array3::from_shape_fn((2, 2, 3), |(g, i, j)| {
            let a = 0.1 + g as f64 / 7.0;
            let b = 0.3 - i as f64 / 11.0;
            [a, b, 1.0 - a - b][j]
        });
        let ctx = Array2::from_shape_fn((2, 2), |(_, i)| if i == 0 { 1.0 / 3.0 } else { 2.0 / 3.0 });
        let t = CausalTensor::new(e, -7, Pmf::new(vec![0.1, 0.9]).unwrap(), Some(ctx)).unwrap();
        let back = CausalTensor::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
        for (a, b) in back.entries().iter().zip(t.entries().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_mismatched_dims() {
        let s = r#"{"dims":[1,2,2],"delay":0,"subchannel_weights":[1.0],"entries":[[[1.0,0.0]]]}"#;
        assert!(matches!(CausalTensor::from_json(s), Err(Error::Shape(_))));
    }

    #[test]
    fn rejects_non_stochastic() {
        let s = r#"{"dims":[1,1,2],"delay":0,"subchannel_weights":[1.0],"entries":[[[0.7,0.7]]]}"#;
        assert!(matches!(CausalTensor::from_json(s), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(CausalTensor::from_json("{"), Err(Error::Parse(_))));
    }
}
