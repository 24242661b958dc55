//! Ground-truth generators.

mod ou;
mod triad;
mod ulam;

pub use ou::{simulate_ou, OuCoefficients, OuConfig, OuDelays};
pub use triad::{simulate_symbolic_triad, SymbolicTriad, TriadKind};
pub use ulam::{simulate_ulam, UlamConfig};

/// Simulated multivariate series, one column per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub names: Vec<String>,
    pub series: Vec<Vec<f64>>,
    /// Time units between consecutive samples.
    pub sample_interval: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.series.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.series[i].as_slice())
    }
}
