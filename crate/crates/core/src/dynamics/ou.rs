use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::error::{Error, Result};
use crate::rng::task_rng;

/// Delays (time units) of the coupling terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OuDelays {
    pub x_from_w: f64,
    pub y_from_x: f64,
    pub y_from_z: f64,
    pub z_from_y: f64,
    pub w_from_y: f64,
}

impl Default for OuDelays {
    fn default() -> Self {
        Self { x_from_w: 4.0, y_from_x: 2.0, y_from_z: 5.0, z_from_y: 6.0, w_from_y: 3.0 }
    }
}

/// Coefficients of the four delay-coupled Ornstein–Uhlenbeck processes
///
/// ```text
/// dx = (-θx x + b_xw w(t-d_xw)) dt + (a_x + c_xw w(t-d_xw)) dWx
/// dy = (-θy y + c_yx x(t-d_yx) + c_yz z(t-d_yz)) dt + s dWy
/// dz = (-θz z + c_zy y(t-d_zy)) dt + s dWz
/// dw = (-θw w + q_wy y(t-d_wy)^2 + c_wy y(t-d_wy)) dt + s dWw
/// ```
///
/// with `s = noise_scale` (`a_x` and `c_xw` are scaled by it as well).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OuCoefficients {
    /// Mean-reversion rates for x, y, z, w.
    pub theta: [f64; 4],
    pub x_noise_additive: f64,
    pub x_noise_from_w: f64,
    /// Drift coupling of x to delayed w.
    pub x_from_w: f64,
    pub y_from_x: f64,
    pub y_from_z: f64,
    pub z_from_y: f64,
    pub w_from_y_sq: f64,
    pub w_from_y: f64,
    pub noise_scale: f64,
    pub delays: OuDelays,
}

impl Default for OuCoefficients {
    fn default() -> Self {
        Self {
            theta: [0.5, 0.9, 0.7, 0.8],
            x_noise_additive: 0.0,
            x_noise_from_w: 0.6,
            x_from_w: 0.0,
            y_from_x: -1.0,
            y_from_z: 0.6,
            z_from_y: -0.5,
            w_from_y_sq: -0.4,
            w_from_y: 0.05,
            // Unit noise drives the y -> w -> x -> y loop (quadratic in y,
            // multiplicative in w) to blow up under Euler-Maruyama.
            noise_scale: 0.5,
            delays: OuDelays::default(),
        }
    }
}

impl OuCoefficients {
    /// All couplings removed; every component driven by unit additive noise.
    pub fn uncoupled() -> Self {
        Self {
            x_noise_additive: 1.0,
            x_noise_from_w: 0.0,
            x_from_w: 0.0,
            y_from_x: 0.0,
            y_from_z: 0.0,
            z_from_y: 0.0,
            w_from_y_sq: 0.0,
            w_from_y: 0.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OuConfig {
    /// Integration step.
    pub dt: f64,
    /// Integration steps per output sample.
    pub sample_stride: usize,
    /// Simulated time kept in the output.
    pub duration: f64,
    /// Simulated time discarded before recording.
    pub burn_in: f64,
    pub seed: u64,
    /// State at time 0; the delayed history before 0 equals it.
    pub initial: [f64; 4],
    pub coefficients: OuCoefficients,
}

impl Default for OuConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            sample_stride: 100,
            duration: 100_000.0,
            burn_in: 100.0,
            seed: 0,
            initial: [0.0; 4],
            coefficients: OuCoefficients::default(),
        }
    }
}

/// Converts a delay to whole integration steps.
fn delay_steps(d: f64, dt: f64) -> Result<usize> {
    let steps = d / dt;
    if !(d >= 0.0) || (steps - steps.round()).abs() > 1e-6 {
        return Err(Error::Config(format!("delay {d} is not a whole multiple of dt={dt}")));
    }
    Ok(steps.round() as usize)
}

impl OuConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.sample_stride == 0 {
            return Err(Error::Config("sample_stride must be at least 1".into()));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!("duration must be positive, got {}", self.duration)));
        }
        if !(self.burn_in >= 0.0 && self.burn_in.is_finite()) {
            return Err(Error::Config(format!("burn_in must be nonnegative, got {}", self.burn_in)));
        }
        let d = self.coefficients.delays;
        for v in [d.x_from_w, d.y_from_x, d.y_from_z, d.z_from_y, d.w_from_y] {
            delay_steps(v, self.dt)?;
        }
        Ok(())
    }

    pub fn sample_interval(&self) -> f64 {
        self.dt * self.sample_stride as f64
    }

    pub fn n_samples(&self) -> usize {
        (self.duration / self.sample_interval()).round() as usize
    }
}

/// Fixed-length ring holding the most recent states of one variable.
struct History {
    buf: Vec<f64>,
    head: usize,
}

impl History {
    fn new(len: usize, fill: f64) -> Self {
        Self { buf: vec![fill; len], head: 0 }
    }

    fn push(&mut self, v: f64) {
        self.head = (self.head + 1) % self.buf.len();
        self.buf[self.head] = v;
    }

    /// State `lag` steps before the latest push.
    #[inline]
    fn lag(&self, lag: usize) -> f64 {
        let n = self.buf.len();
        self.buf[(self.head + n - lag) % n]
    }
}

/// Euler–Maruyama integration; columns `x, y, z, w` sampled every
/// `sample_stride` steps after the burn-in.
pub fn simulate_ou(cfg: &OuConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let c = &cfg.coefficients;
    let dt = cfg.dt;
    let sq = dt.sqrt();
    let d = c.delays;
    let (d_xw, d_yx, d_yz, d_zy, d_wy) = (
        delay_steps(d.x_from_w, dt)?,
        delay_steps(d.y_from_x, dt)?,
        delay_steps(d.y_from_z, dt)?,
        delay_steps(d.z_from_y, dt)?,
        delay_steps(d.w_from_y, dt)?,
    );
    let depth = [d_xw, d_yx, d_yz, d_zy, d_wy].into_iter().max().unwrap_or(0) + 1;
    let mut hist: Vec<History> = cfg.initial.iter().map(|&v| History::new(depth, v)).collect();
    let mut rng = task_rng(cfg.seed, "ou/noise");

    let burn_steps = (cfg.burn_in / dt).round() as usize;
    let burn_steps = burn_steps.div_ceil(cfg.sample_stride) * cfg.sample_stride;
    let n_out = cfg.n_samples();
    let total_steps = burn_steps + n_out * cfg.sample_stride;
    let mut series = vec![Vec::with_capacity(n_out); 4];
    let s = c.noise_scale;

    for step in 1..=total_steps {
        let [x, y, z, w] = [hist[0].lag(0), hist[1].lag(0), hist[2].lag(0), hist[3].lag(0)];
        let eta: [f64; 4] = std::array::from_fn(|_| rng.sample::<f64, _>(StandardNormal) * sq);
        let y_w = hist[1].lag(d_wy);
        let w_x = hist[3].lag(d_xw);
        let nx = x + (-c.theta[0] * x + c.x_from_w * w_x) * dt + s * (c.x_noise_additive + c.x_noise_from_w * w_x) * eta[0];
        let ny = y + (-c.theta[1] * y + c.y_from_x * hist[0].lag(d_yx) + c.y_from_z * hist[2].lag(d_yz)) * dt
            + s * eta[1];
        let nz = z + (-c.theta[2] * z + c.z_from_y * hist[1].lag(d_zy)) * dt + s * eta[2];
        let nw = w + (-c.theta[3] * w + c.w_from_y_sq * y_w * y_w + c.w_from_y * y_w) * dt + s * eta[3];
        let next = [nx, ny, nz, nw];
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite state at step {step}")));
        }
        for (h, v) in hist.iter_mut().zip(next) {
            h.push(v);
        }
        if step > burn_steps && (step - burn_steps) % cfg.sample_stride == 0 {
            for (out, v) in series.iter_mut().zip(next) {
                out.push(v);
            }
        }
    }
    Ok(Trajectory {
        names: ["x", "y", "z", "w"].iter().map(|s| s.to_string()).collect(),
        series,
        sample_interval: cfg.sample_interval(),
    })
}
