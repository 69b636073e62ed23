//! Energies and Lyapunov functionals sampled along a modal trajectory.
//!
//! For each mode the memory terms need `∫₀^∞ g(s) ηₖ(s)^m ds` with
//! `ηₖ(s) = uₖ(t) − uₖ(t − s)`. The range `[0, t]` is a trapezoid on the
//! stored samples; `[t, ∞)` only involves the history and is closed-form per
//! [`TailProfile`].

use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::history::{HistoryError, TailProfile};
use crate::kernels::{Kernel, KernelError};
use crate::operators::ModalOperatorPair;
use crate::simulator::ModalTrajectory;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("sample index {index} beyond trajectory end {steps}")]
    OutOfRange { index: usize, steps: usize },
    #[error("invalid functional constants: {0}")]
    InvalidConstants(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    History(#[from] HistoryError),
}

/// `M` and `α₀` in `I₃ = (M + α₀)E + I₁ + (g₀/2) I₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovConstants {
    pub m: f64,
    pub alpha0: f64,
}

impl Default for LyapunovConstants {
    fn default() -> Self {
        Self { m: 10.0, alpha0: 1.0 }
    }
}

impl LyapunovConstants {
    pub fn new(m: f64, alpha0: f64) -> Result<Self, EnergyError> {
        if !(m > 0.0) || !(alpha0 >= 0.0) || !m.is_finite() || !alpha0.is_finite() {
            return Err(EnergyError::InvalidConstants(format!(
                "need M > 0 and alpha0 >= 0, got M = {m}, alpha0 = {alpha0}"
            )));
        }
        Ok(Self { m, alpha0 })
    }
}

/// All functionals at one time sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySample {
    pub t: f64,
    pub energy: f64,
    pub energy2: f64,
    /// `½ Σ bₖ ∫ g'(s) ηₖ(s)² ds`.
    pub energy_rate: f64,
    pub coercivity_floor: f64,
    pub i1: f64,
    pub i2: f64,
}

impl EnergySample {
    pub fn i3(&self, constants: LyapunovConstants, g0: f64) -> f64 {
        (constants.m + constants.alpha0) * self.energy + self.i1 + 0.5 * g0 * self.i2
    }
}

/// Precomputed kernel samples for evaluating functionals on one trajectory.
pub struct EnergyEvaluator<'a> {
    traj: &'a ModalTrajectory,
    pair: &'a ModalOperatorPair,
    kernel: &'a Kernel,
    g: Vec<f64>,
    dg: Vec<f64>,
    g0: f64,
    a0: f64,
    tail_tolerance: f64,
}

impl<'a> EnergyEvaluator<'a> {
    pub fn new(
        traj: &'a ModalTrajectory,
        pair: &'a ModalOperatorPair,
        kernel: &'a Kernel,
    ) -> Result<Self, EnergyError> {
        traj.history.check_modes(pair)?;
        let g0 = kernel.total_mass()?;
        let g = (0..=traj.steps).map(|j| kernel.value(traj.time(j))).collect();
        let dg = (0..=traj.steps).map(|j| kernel.derivative(traj.time(j))).collect();
        Ok(Self {
            traj,
            pair,
            kernel,
            g,
            dg,
            g0,
            a0: pair.coercivity_constants().0,
            tail_tolerance: traj.history.default_tail_tolerance(),
        })
    }

    pub fn with_tail_tolerance(mut self, tol: f64) -> Self {
        self.tail_tolerance = tol;
        self
    }

    pub fn g0(&self) -> f64 {
        self.g0
    }

    pub fn sample(&self, n: usize) -> Result<EnergySample, EnergyError> {
        if n > self.traj.steps {
            return Err(EnergyError::OutOfRange {
                index: n,
                steps: self.traj.steps,
            });
        }
        let t = self.traj.time(n);
        let profile = self.traj.history.profile(self.kernel, t, self.tail_tolerance)?;
        let dt = self.traj.dt;
        let g0 = self.g0;
        let mut s = EnergySample {
            t,
            energy: 0.0,
            energy2: 0.0,
            energy_rate: 0.0,
            coercivity_floor: 0.0,
            i1: 0.0,
            i2: 0.0,
        };
        let mut floor_sum = 0.0;
        for k in 0..self.pair.modes() {
            let (a, b) = (self.pair.a()[k], self.pair.b()[k]);
            let u = &self.traj.displacement[k];
            let v = self.traj.velocity[k][n];
            let un = u[n];
            let c = self.traj.history.coefficients()[k];
            let m = self.memory_moments(u, n, dt, c, &profile);
            s.energy += 0.5 * (a * un * un - g0 * b * un * un + v * v + b * m.q);
            s.energy2 += 0.5 * a * (a * un * un - g0 * b * un * un + v * v + b * m.q);
            s.energy_rate += 0.5 * b * m.q_rate;
            s.i1 += v * un;
            s.i2 -= v * m.d;
            floor_sum += a * un * un + v * v + b * m.q;
        }
        s.coercivity_floor = 0.5 * (1.0 - self.a0 * g0) * floor_sum;
        Ok(s)
    }

    fn memory_moments(&self, u: &[f64], n: usize, dt: f64, c: f64, profile: &TailProfile) -> Moments {
        let un = u[n];
        let mut q = 0.0;
        let mut q_rate = 0.0;
        let mut d = 0.0;
        // η₀ = 0, so only the far endpoint carries the half weight.
        for j in 1..=n {
            let w = if j == n { 0.5 } else { 1.0 };
            let eta = un - u[n - j];
            q += w * self.g[j] * eta * eta;
            q_rate += w * self.dg[j] * eta * eta;
            d += w * self.g[j] * eta;
        }
        Moments {
            q: dt * q + profile.weighted_gap(un, c),
            q_rate: dt * q_rate + profile.weighted_gap_rate(un, c),
            d: dt * d + profile.weighted_difference(un, c),
        }
    }
}

struct Moments {
    q: f64,
    q_rate: f64,
    d: f64,
}

pub fn energy(
    traj: &ModalTrajectory,
    pair: &ModalOperatorPair,
    kernel: &Kernel,
    n: usize,
) -> Result<f64, EnergyError> {
    Ok(EnergyEvaluator::new(traj, pair, kernel)?.sample(n)?.energy)
}

pub fn energy2(
    traj: &ModalTrajectory,
    pair: &ModalOperatorPair,
    kernel: &Kernel,
    n: usize,
) -> Result<f64, EnergyError> {
    Ok(EnergyEvaluator::new(traj, pair, kernel)?.sample(n)?.energy2)
}

pub fn energy_rate_identity(
    traj: &ModalTrajectory,
    pair: &ModalOperatorPair,
    kernel: &Kernel,
    n: usize,
) -> Result<f64, EnergyError> {
    Ok(EnergyEvaluator::new(traj, pair, kernel)?.sample(n)?.energy_rate)
}

pub fn coercivity_floor(
    traj: &ModalTrajectory,
    pair: &ModalOperatorPair,
    kernel: &Kernel,
    n: usize,
) -> Result<f64, EnergyError> {
    Ok(EnergyEvaluator::new(traj, pair, kernel)?.sample(n)?.coercivity_floor)
}

/// `(I₁, I₂, I₃)` at step `n`.
pub fn functionals(
    traj: &ModalTrajectory,
    pair: &ModalOperatorPair,
    kernel: &Kernel,
    n: usize,
    constants: LyapunovConstants,
) -> Result<(f64, f64, f64), EnergyError> {
    let ev = EnergyEvaluator::new(traj, pair, kernel)?;
    let s = ev.sample(n)?;
    Ok((s.i1, s.i2, s.i3(constants, ev.g0())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTrace {
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub energy2: Vec<f64>,
    pub energy_rate: Vec<f64>,
    pub coercivity_floor: Vec<f64>,
    pub i1: Vec<f64>,
    pub i2: Vec<f64>,
    pub i3: Vec<f64>,
    pub constants: LyapunovConstants,
    pub g0: f64,
    pub dt: f64,
    pub tail_tolerance: f64,
}

impl EnergyTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with header `t,E,E2,Eprime,I1,I2,I3`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,E,E2,Eprime,I1,I2,I3")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.times[i],
                self.energy[i],
                self.energy2[i],
                self.energy_rate[i],
                self.i1[i],
                self.i2[i],
                self.i3[i]
            )?;
        }
        Ok(())
    }
}

/// Samples every `stride`-th step; the final step is always included.
pub fn energy_trace(
    traj: &ModalTrajectory,
    pair: &ModalOperatorPair,
    kernel: &Kernel,
    stride: usize,
    constants: LyapunovConstants,
) -> Result<EnergyTrace, EnergyError> {
    let mut steps: Vec<usize> = (0..=traj.steps).step_by(stride.max(1)).collect();
    if *steps.last().unwrap() != traj.steps {
        steps.push(traj.steps);
    }
    trace_at(traj, pair, kernel, &steps, constants)
}

/// Samples the given step indices.
pub fn trace_at(
    traj: &ModalTrajectory,
    pair: &ModalOperatorPair,
    kernel: &Kernel,
    steps: &[usize],
    constants: LyapunovConstants,
) -> Result<EnergyTrace, EnergyError> {
    let ev = EnergyEvaluator::new(traj, pair, kernel)?;
    let samples = steps
        .par_iter()
        .map(|&n| ev.sample(n))
        .collect::<Result<Vec<_>, _>>()?;
    let g0 = ev.g0();
    Ok(EnergyTrace {
        steps: steps.to_vec(),
        times: samples.iter().map(|s| s.t).collect(),
        energy: samples.iter().map(|s| s.energy).collect(),
        energy2: samples.iter().map(|s| s.energy2).collect(),
        energy_rate: samples.iter().map(|s| s.energy_rate).collect(),
        coercivity_floor: samples.iter().map(|s| s.coercivity_floor).collect(),
        i1: samples.iter().map(|s| s.i1).collect(),
        i2: samples.iter().map(|s| s.i2).collect(),
        i3: samples.iter().map(|s| s.i3(constants, g0)).collect(),
        constants,
        g0,
        dt: traj.dt,
        tail_tolerance: ev.tail_tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::{HistoryData, HistoryShape};
    use crate::simulator::{simulate, SimConfig};

    fn golden() -> (ModalTrajectory, ModalOperatorPair, Kernel) {
        let kernel = Kernel::exponential(0.5, 1.0).unwrap();
        let pair = ModalOperatorPair::new(vec![4.0], vec![1.0]).unwrap();
        let h = HistoryData::new(HistoryShape::Exponential { rate: 1.0 }, vec![1.0], vec![0.0]).unwrap();
        let traj = simulate(&SimConfig::new(kernel.clone(), pair.clone(), h, 1e-3, 2.0)).unwrap();
        (traj, pair, kernel)
    }

    #[test]
    fn zero_state_is_zero() {
        let kernel = Kernel::polynomial(1.0, 3.0).unwrap();
        let pair = ModalOperatorPair::laplacian_same(2, 1.0).unwrap();
        let traj = simulate(&SimConfig::new(kernel.clone(), pair.clone(), HistoryData::zero(2), 0.01, 1.0)).unwrap();
        let ev = EnergyEvaluator::new(&traj, &pair, &kernel).unwrap();
        for n in [0, 50, 100] {
            let s = ev.sample(n).unwrap();
            assert_eq!(
                (s.energy, s.energy2, s.energy_rate, s.coercivity_floor, s.i1, s.i2),
                (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
            );
        }
    }

    #[test]
    fn undamped_single_mode() {
        let pair = ModalOperatorPair::new(vec![4.0], vec![1.0]).unwrap();
        let h = HistoryData::new(HistoryShape::Constant, vec![1.0], vec![0.0]).unwrap();
        let kernel = Kernel::zero();
        let traj = simulate(&SimConfig::new(kernel.clone(), pair.clone(), h, 0.01, 1.0)).unwrap();
        let ev = EnergyEvaluator::new(&traj, &pair, &kernel).unwrap();
        let s = ev.sample(0).unwrap();
        assert_eq!(s.energy, 2.0);
        assert_eq!(s.energy_rate, 0.0);
        assert_eq!((s.i1, s.i2), (0.0, 0.0));
        assert_eq!(s.i3(LyapunovConstants::default(), 0.0), 22.0);
    }

    #[test]
    fn golden_initial_values() {
        // Q(0) = ∫ ½e^{-s}(1 − e^{-s})² ds = 1/6, g₀ = ½:
        // E(0) = ½(4 − ½ + 1/6) = 11/6, E₂(0) = ½(16 − 2 + 4/6) = 22/3, E'(0) = −1/12.
        let (traj, pair, kernel) = golden();
        let s = EnergyEvaluator::new(&traj, &pair, &kernel).unwrap().sample(0).unwrap();
        assert!((s.energy - 11.0 / 6.0).abs() < 1e-10);
        assert!((s.energy2 - 22.0 / 3.0).abs() < 1e-10);
        assert!((s.energy_rate + 1.0 / 12.0).abs() < 1e-10);
        assert!(s.coercivity_floor <= s.energy);
    }

    #[test]
    fn same_operator_single_mode_scales_energy2() {
        let kernel = Kernel::exponential(0.5, 1.0).unwrap();
        let pair = ModalOperatorPair::new(vec![3.0], vec![3.0]).unwrap();
        let h = HistoryData::new(HistoryShape::Bump { width: 1.0 }, vec![0.7], vec![0.2]).unwrap();
        let traj = simulate(&SimConfig::new(kernel.clone(), pair.clone(), h, 0.01, 2.0)).unwrap();
        let ev = EnergyEvaluator::new(&traj, &pair, &kernel).unwrap();
        for n in [0, 77, 200] {
            let s = ev.sample(n).unwrap();
            assert!((s.energy2 - 3.0 * s.energy).abs() < 1e-13 * s.energy2.abs().max(1.0));
        }
    }

    #[test]
    fn trace_layout_and_csv() {
        let (traj, pair, kernel) = golden();
        let tr = energy_trace(&traj, &pair, &kernel, 300, LyapunovConstants::default()).unwrap();
        assert_eq!(tr.steps.first(), Some(&0));
        assert_eq!(tr.steps.last(), Some(&2000));
        assert_eq!(tr.len(), 8);
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("t,E,E2,Eprime,I1,I2,I3"));
        assert_eq!(text.lines().count(), 9);
    }

    #[test]
    fn out_of_range_and_bad_constants() {
        let (traj, pair, kernel) = golden();
        let ev = EnergyEvaluator::new(&traj, &pair, &kernel).unwrap();
        assert!(matches!(ev.sample(5000), Err(EnergyError::OutOfRange { .. })));
        assert!(LyapunovConstants::new(0.0, 1.0).is_err());
        assert!(LyapunovConstants::new(1.0, -1.0).is_err());
    }
}
