//! Relaxation kernels `g`, weights `ξ`, and the kernel hypotheses.
//!
//! A [`Kernel`] is positive and nonincreasing with finite total mass
//! `g₀ = ∫₀^∞ g`. An [`XiWeight`] pairs a nonincreasing positive profile with
//! an exponent `1 ≤ p < 3/2` and certifies the differential inequality
//! `g'(t) ≤ −ξ(t) g(t)^p` when [`check_hypotheses`] reports a pass.

use std::io::Read;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::quadrature;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),
    #[error("exponent q = {q} gives p = (q+1)/q >= 3/2; the admissible pair needs q > 2")]
    Inadmissible { q: f64 },
    #[error("tail integral undefined: tabulated kernel has no decaying tail model")]
    TailUndefined,
    #[error("invalid table: {0}")]
    InvalidTable(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("could not read kernel table: {0}")]
    Io(String),
}

/// Power-law model `a (1 + t)^{-q}` fitted to the last decade of a table.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerTail {
    pub amplitude: f64,
    pub exponent: f64,
}

impl PowerTail {
    fn value(&self, t: f64) -> f64 {
        self.amplitude * (1.0 + t).powf(-self.exponent)
    }

    fn derivative(&self, t: f64) -> f64 {
        -self.amplitude * self.exponent * (1.0 + t).powf(-self.exponent - 1.0)
    }

    fn tail(&self, t: f64) -> f64 {
        self.amplitude * (1.0 + t).powf(1.0 - self.exponent) / (self.exponent - 1.0)
    }
}

/// Sampled kernel with monotone piecewise-cubic (Fritsch–Carlson) interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedKernel {
    times: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    /// `cumulative[i] = ∫₀^{times[i]} g`.
    cumulative: Vec<f64>,
    tail_model: Option<PowerTail>,
}

#[derive(Debug, Deserialize)]
struct KernelRow {
    s: f64,
    g: f64,
}

impl TabulatedKernel {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self, KernelError> {
        if times.len() != values.len() {
            return Err(KernelError::InvalidTable(
                "time and value columns differ in length".into(),
            ));
        }
        if times.len() < 2 {
            return Err(KernelError::InvalidTable("need at least two samples".into()));
        }
        if times[0] != 0.0 {
            return Err(KernelError::InvalidTable("first sample must be at s = 0".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(KernelError::InvalidTable("s must be strictly increasing".into()));
        }
        if values.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
            return Err(KernelError::InvalidTable("g must be positive and finite".into()));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(KernelError::InvalidTable("g must be nonincreasing".into()));
        }
        let slopes = pchip_slopes(&times, &values);
        let mut cumulative = Vec::with_capacity(times.len());
        cumulative.push(0.0);
        for i in 0..times.len() - 1 {
            let h = times[i + 1] - times[i];
            // Exact integral of the cubic Hermite segment.
            let seg = h * (values[i] + values[i + 1]) / 2.0 + h * h * (slopes[i] - slopes[i + 1]) / 12.0;
            cumulative.push(cumulative[i] + seg);
        }
        let tail_model = fit_power_tail(&times, &values);
        Ok(Self {
            times,
            values,
            slopes,
            cumulative,
            tail_model,
        })
    }

    /// Reads a two-column CSV with header `s,g`.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, KernelError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| KernelError::Io(e.to_string()))?;
        if headers.len() != 2 || &headers[0] != "s" || &headers[1] != "g" {
            return Err(KernelError::InvalidTable("expected header row \"s,g\"".into()));
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for row in rdr.deserialize::<KernelRow>() {
            let row = row.map_err(|e| KernelError::InvalidTable(e.to_string()))?;
            times.push(row.s);
            values.push(row.g);
        }
        Self::new(times, values)
    }

    pub fn from_path(path: &Path) -> Result<Self, KernelError> {
        let file = std::fs::File::open(path)
            .map_err(|e| KernelError::Io(format!("{}: {e}", path.display())))?;
        Self::from_reader(file)
    }

    pub fn tail_model(&self) -> Option<&PowerTail> {
        self.tail_model.as_ref()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn last_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    fn segment(&self, t: f64) -> usize {
        match self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(self.times.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.times.len() - 2),
        }
    }

    fn hermite(&self, i: usize, t: f64) -> (f64, f64) {
        let h = self.times[i + 1] - self.times[i];
        let x = (t - self.times[i]) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.slopes[i], self.slopes[i + 1]);
        let x2 = x * x;
        let x3 = x2 * x;
        let value = (2.0 * x3 - 3.0 * x2 + 1.0) * y0
            + (x3 - 2.0 * x2 + x) * h * d0
            + (-2.0 * x3 + 3.0 * x2) * y1
            + (x3 - x2) * h * d1;
        let deriv = (6.0 * x2 - 6.0 * x) * y0 / h
            + (3.0 * x2 - 4.0 * x + 1.0) * d0
            + (-6.0 * x2 + 6.0 * x) * y1 / h
            + (3.0 * x2 - 2.0 * x) * d1;
        (value, deriv)
    }

    fn value(&self, t: f64) -> f64 {
        if t >= self.last_time() {
            return match &self.tail_model {
                Some(m) if t > self.last_time() => m.value(t),
                _ => *self.values.last().unwrap(),
            };
        }
        self.hermite(self.segment(t), t).0
    }

    fn derivative(&self, t: f64) -> f64 {
        if t >= self.last_time() {
            return match &self.tail_model {
                Some(m) if t > self.last_time() => m.derivative(t),
                _ => *self.slopes.last().unwrap(),
            };
        }
        self.hermite(self.segment(t), t).1
    }

    fn tail(&self, t: f64) -> Result<f64, KernelError> {
        let model = self.tail_model.as_ref().ok_or(KernelError::TailUndefined)?;
        let last = self.last_time();
        if t >= last {
            return Ok(model.tail(t));
        }
        let i = self.segment(t);
        let partial = quadrature::gauss_legendre(|s| self.hermite(i, s).0, self.times[i], t);
        let head = self.cumulative[i] + partial;
        Ok(self.cumulative[self.times.len() - 1] - head + model.tail(last))
    }
}

/// Fritsch–Carlson node slopes (weighted harmonic mean, shape-preserving ends).
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    if n == 2 {
        return vec![delta[0], delta[0]];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] <= 0.0 {
            d[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    d[0] = pchip_end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = pchip_end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn pchip_end_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

/// Least-squares fit of `ln g` against `ln(1 + s)` over the last decade of samples.
fn fit_power_tail(times: &[f64], values: &[f64]) -> Option<PowerTail> {
    let last = *times.last()?;
    let mut idx: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= last / 10.0).collect();
    if idx.len() < 2 {
        idx = vec![times.len() - 2, times.len() - 1];
    }
    let xs: Vec<f64> = idx.iter().map(|&i| (1.0 + times[i]).ln()).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| values[i].ln()).collect();
    let (slope, intercept) = least_squares(&xs, &ys)?;
    let exponent = -slope;
    if !(exponent > 1.0) || !exponent.is_finite() {
        return None;
    }
    Some(PowerTail {
        amplitude: intercept.exp(),
        exponent,
    })
}

pub(crate) fn least_squares(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Relaxation function `g` of the memory term.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    /// `g(t) = a (1 + t)^{-q}`.
    Polynomial { amplitude: f64, exponent: f64 },
    /// `g(t) = a e^{-λ t}`; `a = 0` is the degenerate zero kernel.
    Exponential { amplitude: f64, rate: f64 },
    Tabulated(TabulatedKernel),
}

impl Kernel {
    pub fn polynomial(amplitude: f64, exponent: f64) -> Result<Self, KernelError> {
        if !(amplitude > 0.0) || !amplitude.is_finite() {
            return Err(KernelError::ParameterDomain(format!(
                "polynomial amplitude must be positive, got {amplitude}"
            )));
        }
        if !(exponent > 1.0) || !exponent.is_finite() {
            return Err(KernelError::ParameterDomain(format!(
                "polynomial exponent must exceed 1, got {exponent}"
            )));
        }
        Ok(Kernel::Polynomial { amplitude, exponent })
    }

    pub fn exponential(amplitude: f64, rate: f64) -> Result<Self, KernelError> {
        if !(amplitude >= 0.0) || !amplitude.is_finite() {
            return Err(KernelError::ParameterDomain(format!(
                "exponential amplitude must be nonnegative, got {amplitude}"
            )));
        }
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(KernelError::ParameterDomain(format!(
                "exponential rate must be positive, got {rate}"
            )));
        }
        Ok(Kernel::Exponential { amplitude, rate })
    }

    /// `g ≡ 0`, for conservative reference runs.
    pub fn zero() -> Self {
        Kernel::Exponential {
            amplitude: 0.0,
            rate: 1.0,
        }
    }

    pub fn tabulated(times: Vec<f64>, values: Vec<f64>) -> Result<Self, KernelError> {
        TabulatedKernel::new(times, values).map(Kernel::Tabulated)
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Kernel::Polynomial { .. } => "polynomial",
            Kernel::Exponential { .. } => "exponential",
            Kernel::Tabulated(_) => "tabulated",
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Kernel::Polynomial { amplitude, exponent } => amplitude * (1.0 + t).powf(-exponent),
            Kernel::Exponential { amplitude, rate } => amplitude * (-rate * t).exp(),
            Kernel::Tabulated(tab) => tab.value(t),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            Kernel::Polynomial { amplitude, exponent } => {
                -amplitude * exponent * (1.0 + t).powf(-exponent - 1.0)
            }
            Kernel::Exponential { amplitude, rate } => -amplitude * rate * (-rate * t).exp(),
            Kernel::Tabulated(tab) => tab.derivative(t),
        }
    }

    /// `G(t) = ∫_t^∞ g(s) ds`.
    pub fn tail(&self, t: f64) -> Result<f64, KernelError> {
        match self {
            Kernel::Polynomial { amplitude, exponent } => {
                Ok(amplitude * (1.0 + t).powf(1.0 - exponent) / (exponent - 1.0))
            }
            Kernel::Exponential { amplitude, rate } => Ok(amplitude / rate * (-rate * t).exp()),
            Kernel::Tabulated(tab) => tab.tail(t),
        }
    }

    /// `g₀ = G(0)`.
    pub fn total_mass(&self) -> Result<f64, KernelError> {
        self.tail(0.0)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Kernel::Exponential { amplitude, .. } if *amplitude == 0.0)
    }
}

/// Nonincreasing positive profile `ξ(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum XiProfile {
    Constant(f64),
    /// Linear interpolation between samples, held constant outside the table.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

impl XiProfile {
    pub fn constant(value: f64) -> Result<Self, KernelError> {
        if !(value > 0.0) || !value.is_finite() {
            return Err(KernelError::ParameterDomain(format!(
                "xi must be positive, got {value}"
            )));
        }
        Ok(XiProfile::Constant(value))
    }

    pub fn tabulated(times: Vec<f64>, values: Vec<f64>) -> Result<Self, KernelError> {
        if times.len() != values.len() || times.is_empty() {
            return Err(KernelError::InvalidTable("xi table is empty or ragged".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(KernelError::InvalidTable("xi times must be strictly increasing".into()));
        }
        if values.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(KernelError::InvalidTable("xi values must be positive".into()));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(KernelError::InvalidTable("xi must be nonincreasing".into()));
        }
        Ok(XiProfile::Tabulated { times, values })
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            XiProfile::Constant(v) => *v,
            XiProfile::Tabulated { times, values } => {
                if t <= times[0] {
                    return values[0];
                }
                let n = times.len();
                if t >= times[n - 1] {
                    return values[n - 1];
                }
                let i = times.partition_point(|&x| x <= t) - 1;
                let w = (t - times[i]) / (times[i + 1] - times[i]);
                values[i] + w * (values[i + 1] - values[i])
            }
        }
    }

    /// Right derivative `ξ'(t⁺)`; zero outside the table.
    pub fn slope(&self, t: f64) -> f64 {
        match self {
            XiProfile::Constant(_) => 0.0,
            XiProfile::Tabulated { times, values } => {
                let n = times.len();
                if t < times[0] || t >= times[n - 1] {
                    return 0.0;
                }
                let i = times.partition_point(|&x| x <= t) - 1;
                (values[i + 1] - values[i]) / (times[i + 1] - times[i])
            }
        }
    }

    /// Knots where the profile has kinks (empty for a constant).
    pub fn knots(&self) -> &[f64] {
        match self {
            XiProfile::Constant(_) => &[],
            XiProfile::Tabulated { times, .. } => times,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, XiProfile::Constant(_))
    }
}

/// Weight `ξ` together with the exponent `p` of the kernel inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct XiWeight {
    profile: XiProfile,
    p: f64,
}

impl XiWeight {
    pub fn new(profile: XiProfile, p: f64) -> Result<Self, KernelError> {
        if !(1.0..1.5).contains(&p) {
            return Err(KernelError::ParameterDomain(format!(
                "exponent p must satisfy 1 <= p < 3/2, got {p}"
            )));
        }
        Ok(Self { profile, p })
    }

    pub fn constant(value: f64, p: f64) -> Result<Self, KernelError> {
        Self::new(XiProfile::constant(value)?, p)
    }

    pub fn profile(&self) -> &XiProfile {
        &self.profile
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn value(&self, t: f64) -> f64 {
        self.profile.value(t)
    }
}

/// The constant weight and exponent turning the kernel inequality into an
/// identity for `g(t) = a (1 + t)^{-q}`: `ξ ≡ q a^{-1/q}`, `p = (q + 1)/q`.
pub fn admissible_xi_p(kernel: &Kernel) -> Result<XiWeight, KernelError> {
    let Kernel::Polynomial { amplitude, exponent } = *kernel else {
        return Err(KernelError::ParameterDomain(format!(
            "closed-form weight only exists for polynomial kernels, got {}",
            kernel.family_name()
        )));
    };
    if exponent <= 2.0 {
        return Err(KernelError::Inadmissible { q: exponent });
    }
    let b = exponent * amplitude.powf(-1.0 / exponent);
    XiWeight::constant(b, (exponent + 1.0) / exponent)
}

/// Outcome of checking the total-mass and kernel-inequality hypotheses on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub grid: Vec<f64>,
    /// Relative tolerance: a point fails when the margin is below
    /// `−tolerance · max(|g'|, ξ g^p)` there.
    pub tolerance: f64,
    pub total_mass: f64,
    /// `1/a₀ − g₀`.
    pub mass_margin: f64,
    pub mass_pass: bool,
    /// `min_t (−g'(t) − ξ(t) g(t)^p)` over the grid.
    pub inequality_margin: f64,
    pub xi_nonincreasing: bool,
    pub inequality_pass: bool,
    /// Grid points where the inequality fails beyond the relative tolerance.
    pub failures: Vec<f64>,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.mass_pass && self.inequality_pass
    }
}

/// Default check grid: 512 points log-spaced on [0, 10³].
pub fn default_check_grid() -> Vec<f64> {
    quadrature::log_grid(1e3, 512)
}

pub fn check_hypotheses(
    kernel: &Kernel,
    xi: &XiWeight,
    a0: f64,
    grid: &[f64],
) -> Result<HypothesisReport, KernelError> {
    if grid.is_empty() {
        return Err(KernelError::InvalidGrid("check grid is empty".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] < 0.0 {
        return Err(KernelError::InvalidGrid(
            "check grid must be nonnegative and increasing".into(),
        ));
    }
    let total_mass = kernel.total_mass().unwrap_or(f64::INFINITY);
    let mass_margin = 1.0 / a0 - total_mass;
    let mass_pass = total_mass > 0.0 && mass_margin > 0.0;

    let tolerance = 1e-9;
    let p = xi.p();
    let mut inequality_margin = f64::INFINITY;
    let mut failures = Vec::new();
    for &t in grid {
        let lhs = -kernel.derivative(t);
        let rhs = xi.value(t) * kernel.value(t).powf(p);
        let margin = lhs - rhs;
        inequality_margin = inequality_margin.min(margin);
        if margin < -tolerance * lhs.abs().max(rhs) {
            failures.push(t);
        }
    }
    let xi_nonincreasing = grid.windows(2).all(|w| xi.value(w[1]) <= xi.value(w[0]));
    let inequality_pass = failures.is_empty() && xi_nonincreasing;
    Ok(HypothesisReport {
        grid: grid.to_vec(),
        tolerance,
        total_mass,
        mass_margin,
        mass_pass,
        inequality_margin,
        xi_nonincreasing,
        inequality_pass,
        failures,
    })
}

/// `h(t) = ξ(t) ∫_t^∞ g`.
pub fn tail_h(kernel: &Kernel, xi: &XiProfile, t: f64) -> Result<f64, KernelError> {
    Ok(xi.value(t) * kernel.tail(t)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma2Integral {
    pub value: f64,
    pub converged: bool,
    /// Increments gained over the last horizon doublings, oldest first.
    pub increments: Vec<f64>,
}

/// `∫₀^horizon ξ(t) g(t)^{1−σ} dt` with a horizon-doubling convergence flag.
pub fn lemma2_integral(
    kernel: &Kernel,
    xi: &XiProfile,
    sigma: f64,
    horizon: f64,
) -> Result<Lemma2Integral, KernelError> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(KernelError::ParameterDomain(format!(
            "sigma must lie in (0, 1), got {sigma}"
        )));
    }
    if !(horizon > 0.0) {
        return Err(KernelError::ParameterDomain("horizon must be positive".into()));
    }
    let f = |t: f64| xi.value(t) * kernel.value(t).powf(1.0 - sigma);
    let (value, increments) = quadrature::integrate_with_doublings(f, horizon, 3, 1e-13);
    Ok(Lemma2Integral {
        value,
        converged: quadrature::increments_converge(&increments),
        increments,
    })
}
