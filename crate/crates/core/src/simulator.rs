//! Per-mode integration of `uₖ'' + aₖ uₖ − bₖ ∫₀^∞ g(s) uₖ(t − s) ds = 0`.
//!
//! The memory integral is split at `s = t`: the part over `[0, t]` is a
//! composite trapezoid on the stored samples (the `s` grid is the time grid),
//! the part over `[t, ∞)` only sees the prescribed history and is evaluated by
//! [`crate::history`] once per step for all modes.
//!
//! Time stepping is the explicit central difference
//! `uⁿ⁺¹ = 2uⁿ − uⁿ⁻¹ + Δt² (−a uⁿ + b wⁿ)` with a second-order Taylor start.

use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::history::{HistoryData, HistoryError, HistoryShape};
use crate::kernels::{Kernel, KernelError};
use crate::operators::ModalOperatorPair;

/// Upper bound on `Δt √(max aₖ)`.
pub const CFL_LIMIT: f64 = 1.9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("time step violates CFL: dt·sqrt(max a) = {value:.6} > {limit}")]
    Cfl { value: f64, limit: f64 },
    #[error("non-finite state at step {step} (mode {mode})")]
    Instability { step: usize, mode: usize },
    #[error("oracle unavailable: {0}")]
    UnsupportedOracle(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    History(#[from] HistoryError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub kernel: Kernel,
    pub pair: ModalOperatorPair,
    pub history: HistoryData,
    pub dt: f64,
    pub horizon: f64,
    /// Absolute accuracy of history tail integrals; defaults to
    /// [`HistoryData::default_tail_tolerance`].
    pub tail_tolerance: Option<f64>,
    /// Worker threads for mode-parallel stepping; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl SimConfig {
    pub fn new(
        kernel: Kernel,
        pair: ModalOperatorPair,
        history: HistoryData,
        dt: f64,
        horizon: f64,
    ) -> Self {
        Self {
            kernel,
            pair,
            history,
            dt,
            horizon,
            tail_tolerance: None,
            threads: None,
        }
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn tail_tolerance(&self) -> f64 {
        self.tail_tolerance
            .unwrap_or_else(|| self.history.default_tail_tolerance())
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(SimError::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(SimError::InvalidConfig(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        let ratio = self.horizon / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(SimError::InvalidConfig(format!(
                "horizon {} is not an integer number of steps of {}",
                self.horizon, self.dt
            )));
        }
        if self.steps() < 2 {
            return Err(SimError::InvalidConfig("need at least two time steps".into()));
        }
        let cfl = self.dt * self.pair.max_a().sqrt();
        if cfl > CFL_LIMIT {
            return Err(SimError::Cfl {
                value: cfl,
                limit: CFL_LIMIT,
            });
        }
        self.history.check_modes(&self.pair)?;
        self.kernel.total_mass()?;
        if let Some(tol) = self.tail_tolerance {
            if !(tol > 0.0) {
                return Err(SimError::InvalidConfig("tail tolerance must be positive".into()));
            }
        }
        Ok(())
    }

    fn with_pool<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match self.threads {
            Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                Ok(pool) => pool.install(f),
                Err(_) => f(),
            },
            None => f(),
        }
    }
}

/// Kernel samples on the time grid plus the unit history forcing
/// `∫₀^∞ g(tₙ + r) φ(r) dr` at every step.
#[derive(Debug, Clone)]
pub struct MemoryQuadrature {
    dt: f64,
    kernel_samples: Vec<f64>,
    history_forcing: Vec<f64>,
}

impl MemoryQuadrature {
    pub fn new(
        kernel: &Kernel,
        history: &HistoryData,
        dt: f64,
        steps: usize,
        tail_tolerance: f64,
    ) -> Result<Self, KernelError> {
        let kernel_samples = (0..=steps).map(|j| kernel.value(j as f64 * dt)).collect();
        let shape = history.shape();
        let unit_tol = tail_tolerance / history.sup_abs().max(1.0);
        let history_forcing = if history.sup_abs() == 0.0 {
            vec![0.0; steps + 1]
        } else {
            (0..=steps)
                .into_par_iter()
                .map(|n| shape.kernel_moment(kernel, n as f64 * dt, false, 1, unit_tol))
                .collect::<Result<Vec<_>, _>>()?
        };
        Ok(Self {
            dt,
            kernel_samples,
            history_forcing,
        })
    }

    pub fn kernel_samples(&self) -> &[f64] {
        &self.kernel_samples
    }

    /// `∫₀^∞ g(s) uₖ(tₙ − s) ds` for a mode with history coefficient `coefficient`
    /// and stored samples `u[0..=n]`.
    pub fn convolution(&self, u: &[f64], coefficient: f64, n: usize) -> f64 {
        let tail = coefficient * self.history_forcing[n];
        if n == 0 {
            return tail;
        }
        let g = &self.kernel_samples[..=n];
        let past = &u[..=n];
        let interior: f64 = g[1..n]
            .iter()
            .zip(past[1..n].iter().rev())
            .map(|(g, u)| g * u)
            .sum();
        let ends = 0.5 * (g[0] * past[n] + g[n] * past[0]);
        self.dt * (interior + ends) + tail
    }
}

/// One mode's displacement samples, advanced step by step.
pub struct ModeIntegrator<'a> {
    a: f64,
    b: f64,
    dt: f64,
    coefficient: f64,
    velocity0: f64,
    memory: &'a MemoryQuadrature,
    u: Vec<f64>,
}

impl<'a> ModeIntegrator<'a> {
    pub fn new(
        a: f64,
        b: f64,
        coefficient: f64,
        velocity0: f64,
        memory: &'a MemoryQuadrature,
        steps: usize,
    ) -> Self {
        let mut u = Vec::with_capacity(steps + 1);
        u.push(coefficient);
        Self {
            a,
            b,
            dt: memory.dt,
            coefficient,
            velocity0,
            memory,
            u,
        }
    }

    pub fn displacement(&self) -> &[f64] {
        &self.u
    }

    fn acceleration(&self, n: usize) -> f64 {
        -self.a * self.u[n] + self.b * self.memory.convolution(&self.u, self.coefficient, n)
    }

    /// `u¹ = u⁰ + Δt u₁ + (Δt²/2)(−a u⁰ + b w⁰)`.
    pub fn bootstrap(&mut self) {
        debug_assert_eq!(self.u.len(), 1);
        let u1 = self.u[0] + self.dt * self.velocity0 + 0.5 * self.dt * self.dt * self.acceleration(0);
        self.u.push(u1);
    }

    /// Advances from step `n` to `n + 1` (requires `n ≥ 1` and `u[..=n]` stored).
    pub fn step(&mut self, n: usize) -> f64 {
        debug_assert!(n >= 1 && self.u.len() == n + 1);
        let next = 2.0 * self.u[n] - self.u[n - 1] + self.dt * self.dt * self.acceleration(n);
        self.u.push(next);
        next
    }

    /// Runs to `steps`, returning the first non-finite step on failure.
    pub fn run(mut self, steps: usize) -> Result<Vec<f64>, usize> {
        self.bootstrap();
        if !self.u[1].is_finite() {
            return Err(1);
        }
        for n in 1..steps {
            if !self.step(n).is_finite() {
                return Err(n + 1);
            }
        }
        Ok(self.u)
    }
}

/// Sampled displacements and velocities for every mode on `tₙ = nΔt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalTrajectory {
    pub dt: f64,
    pub steps: usize,
    pub displacement: Vec<Vec<f64>>,
    pub velocity: Vec<Vec<f64>>,
    pub history: HistoryData,
}

impl ModalTrajectory {
    pub fn modes(&self) -> usize {
        self.displacement.len()
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|n| self.time(n)).collect()
    }

    /// `uₖ(t)` for any real `t`: the prescribed history for `t < 0`, linear
    /// interpolation between stored samples otherwise.
    pub fn displacement_at(&self, k: usize, t: f64) -> f64 {
        if t < 0.0 {
            return self.history.displacement(k, -t);
        }
        let x = t / self.dt;
        let n = (x.floor() as usize).min(self.steps);
        if n == self.steps {
            return self.displacement[k][n];
        }
        let w = x - n as f64;
        let u = &self.displacement[k];
        u[n] + w * (u[n + 1] - u[n])
    }

    /// CSV with header `t,mode,u,v`, one row per retained `(tₙ, k)`.
    pub fn write_csv<W: Write>(&self, mut out: W, stride: usize) -> std::io::Result<()> {
        writeln!(out, "t,mode,u,v")?;
        let stride = stride.max(1);
        for n in (0..=self.steps).step_by(stride) {
            for k in 0..self.modes() {
                writeln!(
                    out,
                    "{:.16e},{},{:.16e},{:.16e}",
                    self.time(n),
                    k,
                    self.displacement[k][n],
                    self.velocity[k][n]
                )?;
            }
        }
        Ok(())
    }
}

/// Centered differences; `u` carries one step past the last returned sample.
fn velocities(u: &[f64], v0: f64, dt: f64) -> Vec<f64> {
    let n = u.len() - 1;
    let mut v = Vec::with_capacity(n);
    v.push(v0);
    for i in 1..n {
        v.push((u[i + 1] - u[i - 1]) / (2.0 * dt));
    }
    v
}

pub fn simulate(config: &SimConfig) -> Result<ModalTrajectory, SimError> {
    config.validate()?;
    let steps = config.steps();
    let dt = config.dt;
    config.with_pool(|| {
        let memory = MemoryQuadrature::new(
            &config.kernel,
            &config.history,
            dt,
            steps + 1,
            config.tail_tolerance(),
        )?;
        let pair = &config.pair;
        let history = &config.history;
        let results: Vec<Result<Vec<f64>, usize>> = (0..pair.modes())
            .into_par_iter()
            .map(|k| {
                ModeIntegrator::new(
                    pair.a()[k],
                    pair.b()[k],
                    history.initial_displacement(k),
                    history.initial_velocity(k),
                    &memory,
                    steps + 1,
                )
                .run(steps + 1)
            })
            .collect();
        let mut first_bad: Option<(usize, usize)> = None;
        for (k, r) in results.iter().enumerate() {
            if let Err(step) = r {
                if first_bad.is_none_or(|(s, _)| *step < s) {
                    first_bad = Some((*step, k));
                }
            }
        }
        if let Some((step, mode)) = first_bad {
            return Err(SimError::Instability { step, mode });
        }
        let mut displacement: Vec<Vec<f64>> = results.into_iter().map(|r| r.unwrap()).collect();
        let velocity = displacement
            .iter()
            .enumerate()
            .map(|(k, u)| velocities(u, history.initial_velocity(k), dt))
            .collect();
        for u in &mut displacement {
            u.truncate(steps + 1);
        }
        Ok(ModalTrajectory {
            dt,
            steps,
            displacement,
            velocity,
            history: history.clone(),
        })
    })
}

/// `∫₀^∞ a e^{−λs} φ(s) ds` in closed form.
fn exponential_history_moment(amplitude: f64, rate: f64, shape: HistoryShape) -> f64 {
    match shape {
        HistoryShape::Constant => amplitude / rate,
        HistoryShape::Exponential { rate: mu } => amplitude / (rate + mu),
        HistoryShape::Bump { width } => {
            amplitude * (1.0 / rate - (1.0 - (-rate * width).exp()) / (rate * rate * width))
        }
    }
}

/// Reference solution for `g(s) = a e^{−λs}`.
///
/// `w(t) = ∫₀^∞ g(s) u(t − s) ds` obeys `w' = a u − λ w`, so each mode is the
/// linear ODE `(u, v, w)' = (v, −aₖ u + bₖ w, a u − λ w)` with
/// `w(0) = cₖ ∫₀^∞ g φ`. It is integrated by classical RK4 at `Δt/10`.
pub fn exponential_oracle(config: &SimConfig) -> Result<ModalTrajectory, SimError> {
    let Kernel::Exponential { amplitude, rate } = config.kernel else {
        return Err(SimError::UnsupportedOracle(format!(
            "augmented ODE needs an exponential kernel, got {}",
            config.kernel.family_name()
        )));
    };
    config.validate()?;
    let steps = config.steps();
    let h = config.dt / 10.0;
    let unit_w0 = exponential_history_moment(amplitude, rate, config.history.shape());
    let pair = &config.pair;
    let history = &config.history;
    let (displacement, velocity): (Vec<Vec<f64>>, Vec<Vec<f64>>) = (0..pair.modes())
        .map(|k| {
            let (ak, bk) = (pair.a()[k], pair.b()[k]);
            let rhs = |y: [f64; 3]| {
                [
                    y[1],
                    -ak * y[0] + bk * y[2],
                    amplitude * y[0] - rate * y[2],
                ]
            };
            let c = history.initial_displacement(k);
            let mut y = [c, history.initial_velocity(k), c * unit_w0];
            let mut u = Vec::with_capacity(steps + 1);
            let mut v = Vec::with_capacity(steps + 1);
            u.push(y[0]);
            v.push(y[1]);
            for _ in 0..steps {
                for _ in 0..10 {
                    y = rk4_step(&rhs, y, h);
                }
                u.push(y[0]);
                v.push(y[1]);
            }
            (u, v)
        })
        .unzip();
    Ok(ModalTrajectory {
        dt: config.dt,
        steps,
        displacement,
        velocity,
        history: history.clone(),
    })
}

pub(crate) fn rk4_step<const N: usize>(f: &impl Fn([f64; N]) -> [f64; N], y: [f64; N], h: f64) -> [f64; N] {
    let add = |a: [f64; N], b: [f64; N], s: f64| {
        let mut out = a;
        for i in 0..N {
            out[i] += s * b[i];
        }
        out
    };
    let k1 = f(y);
    let k2 = f(add(y, k1, h / 2.0));
    let k3 = f(add(y, k2, h / 2.0));
    let k4 = f(add(y, k3, h));
    let mut out = y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}
