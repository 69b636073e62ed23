//! Decay envelopes and their empirical verification.
//!
//! Every bound is evaluated with its leading constant set to one; the
//! constant is fitted against a trace afterwards ([`fit_envelope`]).

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use thiserror::Error;

use crate::kernels::{Kernel, KernelError, XiProfile};
use crate::quadrature::{doubling_breakpoints, gauss_legendre, increments_converge, log_grid};
use crate::simulator::rk4_step;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("parameter out of range: {0}")]
    ParameterDomain(String),
    #[error("bound family undefined: {0}")]
    FamilyUndefined(String),
    #[error("improved bound unavailable: integrability condition fails numerically (last increments {increments:?})")]
    ImprovedUnavailable { increments: Vec<f64> },
    #[error("bound evaluated at t = {t} below its domain start {t_min}")]
    Domain { t: f64, t_min: f64 },
    #[error("cannot fit envelope: {0}")]
    FitDomain(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundFamily {
    Lemma1,
    ThmCase1First,
    ThmCase1Improved,
    ThmCase2First,
    ThmCase2Improved,
    ExampleCase1,
    ExampleCase2,
    PriorCase1,
    PriorCase2,
}

impl BoundFamily {
    pub const ALL: [BoundFamily; 9] = [
        BoundFamily::Lemma1,
        BoundFamily::ThmCase1First,
        BoundFamily::ThmCase1Improved,
        BoundFamily::ThmCase2First,
        BoundFamily::ThmCase2Improved,
        BoundFamily::ExampleCase1,
        BoundFamily::ExampleCase2,
        BoundFamily::PriorCase1,
        BoundFamily::PriorCase2,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            BoundFamily::Lemma1 => "lemma1",
            BoundFamily::ThmCase1First => "thm_case1_first",
            BoundFamily::ThmCase1Improved => "thm_case1_improved",
            BoundFamily::ThmCase2First => "thm_case2_first",
            BoundFamily::ThmCase2Improved => "thm_case2_improved",
            BoundFamily::ExampleCase1 => "example_case1",
            BoundFamily::ExampleCase2 => "example_case2",
            BoundFamily::PriorCase1 => "prior_case1",
            BoundFamily::PriorCase2 => "prior_case2",
        }
    }
}

impl fmt::Display for BoundFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for BoundFamily {
    type Err = BoundError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BoundFamily::ALL
            .into_iter()
            .find(|f| f.tag() == s)
            .ok_or_else(|| BoundError::ParameterDomain(format!("unknown bound family '{s}'")))
    }
}

/// The forcing `h(t)` of the comparison inequality.
#[derive(Debug, Clone, PartialEq)]
pub enum TailWeight {
    Zero,
    /// `amplitude (1 + t)^{−exponent}`.
    Power { amplitude: f64, exponent: f64 },
    /// `amplitude e^{−rate t}`.
    Exponential { amplitude: f64, rate: f64 },
    /// `ξ(t) ∫_t^∞ g`.
    FromKernel { kernel: Kernel, xi: XiProfile },
}

impl TailWeight {
    pub fn from_kernel(kernel: &Kernel, xi: &XiProfile) -> Result<Self, BoundError> {
        kernel.tail(0.0)?;
        Ok(TailWeight::FromKernel {
            kernel: kernel.clone(),
            xi: xi.clone(),
        })
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            TailWeight::Zero => 0.0,
            TailWeight::Power { amplitude, exponent } => amplitude * (1.0 + t).powf(-exponent),
            TailWeight::Exponential { amplitude, rate } => amplitude * (-rate * t).exp(),
            TailWeight::FromKernel { kernel, xi } => {
                xi.value(t) * kernel.tail(t).unwrap_or(f64::NAN)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            TailWeight::Zero => true,
            TailWeight::Power { amplitude, .. } | TailWeight::Exponential { amplitude, .. } => {
                *amplitude == 0.0
            }
            TailWeight::FromKernel { kernel, .. } => kernel.is_zero(),
        }
    }

    fn knots(&self) -> &[f64] {
        match self {
            TailWeight::FromKernel { xi, kernel } => match kernel {
                Kernel::Tabulated(t) => t.times(),
                _ => xi.knots(),
            },
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundShape {
    /// `(1+t)^{−1/α} ξ(t)^{−(α+1)/α} [1 + ∫₀^t (1+s)^{1/α} ξ^{(α+1)/α} h^{α+1} ds]`.
    Bracket {
        alpha: f64,
        xi: XiProfile,
        h: TailWeight,
    },
    /// `((E₂(0) + E(0)^m + ∫₀^t h^m) / ∫₀^t ξ^m)^{1/m}` for `t ≥ t_min`.
    Quotient {
        m: f64,
        xi: XiProfile,
        h: TailWeight,
        e0: f64,
        e2_0: f64,
        t_min: f64,
    },
    /// `(1+t)^{exponent}`, or `t^{exponent}` for `t ≥ t_min` when `t_min > 0`.
    Power { exponent: f64, t_min: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayBound {
    pub family: BoundFamily,
    pub shape: BoundShape,
}

fn check_p(p: f64) -> Result<(), BoundError> {
    if p == 1.0 {
        return Err(BoundError::FamilyUndefined(
            "p = 1 makes the algebraic exponent singular; exponential-type bounds are not provided".into(),
        ));
    }
    if !(p > 1.0 && p < 1.5) {
        return Err(BoundError::ParameterDomain(format!("need 1 < p < 3/2, got {p}")));
    }
    Ok(())
}

/// Case-2 quotients start at `t = 1`.
pub const CASE2_T_MIN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case2Variant {
    First,
    Improved,
}

impl DecayBound {
    pub fn lemma1(alpha: f64, xi: XiProfile, h: TailWeight) -> Result<Self, BoundError> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(BoundError::ParameterDomain(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self {
            family: BoundFamily::Lemma1,
            shape: BoundShape::Bracket { alpha, xi, h },
        })
    }

    /// Bracket bound with `α = 2p − 2`.
    pub fn thm_case1_first(p: f64, xi: XiProfile, h: TailWeight) -> Result<Self, BoundError> {
        check_p(p)?;
        Ok(Self {
            family: BoundFamily::ThmCase1First,
            shape: BoundShape::Bracket {
                alpha: 2.0 * p - 2.0,
                xi,
                h,
            },
        })
    }

    /// Bracket bound with `α = p − 1`, without checking integrability of the
    /// first bound; see [`thm_case1_improved`].
    pub fn thm_case1_improved_unchecked(p: f64, xi: XiProfile, h: TailWeight) -> Result<Self, BoundError> {
        check_p(p)?;
        Ok(Self {
            family: BoundFamily::ThmCase1Improved,
            shape: BoundShape::Bracket { alpha: p - 1.0, xi, h },
        })
    }

    pub fn thm_case2(
        p: f64,
        xi: XiProfile,
        h: TailWeight,
        e0: f64,
        e2_0: f64,
        variant: Case2Variant,
    ) -> Result<Self, BoundError> {
        check_p(p)?;
        if !(e0 >= 0.0 && e2_0 >= 0.0) || !e0.is_finite() || !e2_0.is_finite() {
            return Err(BoundError::ParameterDomain(format!(
                "initial energies must be finite and nonnegative, got E(0) = {e0}, E2(0) = {e2_0}"
            )));
        }
        let (family, m) = match variant {
            Case2Variant::First => (BoundFamily::ThmCase2First, 2.0 * p - 1.0),
            Case2Variant::Improved => (BoundFamily::ThmCase2Improved, p),
        };
        Ok(Self {
            family,
            shape: BoundShape::Quotient {
                m,
                xi,
                h,
                e0,
                e2_0,
                t_min: CASE2_T_MIN,
            },
        })
    }

    pub fn power(family: BoundFamily, exponent: f64, t_min: f64) -> Self {
        Self {
            family,
            shape: BoundShape::Power { exponent, t_min },
        }
    }

    /// First time at which the bound is defined.
    pub fn t_min(&self) -> f64 {
        match self.shape {
            BoundShape::Quotient { t_min, .. } | BoundShape::Power { t_min, .. } => t_min,
            BoundShape::Bracket { .. } => 0.0,
        }
    }

    /// Closed-form exponent for power-law families.
    pub fn exponent(&self) -> Option<f64> {
        match self.shape {
            BoundShape::Power { exponent, .. } => Some(exponent),
            _ => None,
        }
    }

    pub fn evaluate(&self, t: f64) -> Result<f64, BoundError> {
        Ok(self.evaluate_on_grid(&[t])?[0])
    }

    /// Values on a nondecreasing grid; inner integrals are accumulated as
    /// prefix sums over the grid.
    pub fn evaluate_on_grid(&self, grid: &[f64]) -> Result<Vec<f64>, BoundError> {
        if grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(BoundError::ParameterDomain("grid must be nondecreasing".into()));
        }
        if let Some(&t) = grid.first() {
            if t < self.t_min() || t < 0.0 {
                return Err(BoundError::Domain { t, t_min: self.t_min() });
            }
        }
        match &self.shape {
            BoundShape::Power { exponent, t_min } => Ok(grid
                .iter()
                .map(|&t| if *t_min > 0.0 { t.powf(*exponent) } else { (1.0 + t).powf(*exponent) })
                .collect()),
            BoundShape::Bracket { alpha, xi, h } => {
                let beta = (alpha + 1.0) / alpha;
                let inv = 1.0 / alpha;
                let integrand = |s: f64| {
                    let hs = h.value(s);
                    if hs == 0.0 {
                        return 0.0;
                    }
                    (inv * (1.0 + s).ln() + beta * xi.value(s).ln() + (alpha + 1.0) * hs.ln()).exp()
                };
                let knots = merge_knots(xi.knots(), h.knots());
                let inner = cumulative(&integrand, grid, &knots);
                Ok(grid
                    .iter()
                    .zip(inner)
                    .map(|(&t, i)| (-inv * (1.0 + t).ln() - beta * xi.value(t).ln()).exp() * (1.0 + i))
                    .collect())
            }
            BoundShape::Quotient {
                m,
                xi,
                h,
                e0,
                e2_0,
                ..
            } => {
                let knots = merge_knots(xi.knots(), h.knots());
                let num = cumulative(&|s: f64| h.value(s).powf(*m), grid, &knots);
                let den = cumulative(&|s: f64| xi.value(s).powf(*m), grid, &knots);
                let base = e2_0 + e0.powf(*m);
                Ok(num
                    .iter()
                    .zip(&den)
                    .map(|(n, d)| ((base + n) / d).powf(1.0 / m))
                    .collect())
            }
        }
    }

    /// True when the bound does not increase along `grid` (up to roundoff).
    pub fn is_nonincreasing_on(&self, grid: &[f64]) -> Result<bool, BoundError> {
        let v = self.evaluate_on_grid(grid)?;
        Ok(v.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)))
    }
}

fn merge_knots(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut k: Vec<f64> = a.iter().chain(b).copied().collect();
    k.sort_by(f64::total_cmp);
    k.dedup();
    k
}

/// `∫₀^{tᵢ} f` for every grid point, Gauss–Legendre on panels split where
/// `1 + t` doubles and at the given knots.
fn cumulative(f: &impl Fn(f64) -> f64, grid: &[f64], knots: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    let mut prev = 0.0;
    for &t in grid {
        acc += segment_integral(f, prev, t, knots);
        out.push(acc);
        prev = t;
    }
    out
}

fn segment_integral(f: &impl Fn(f64) -> f64, a: f64, b: f64, knots: &[f64]) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut points = doubling_breakpoints(a, b);
    points.extend(knots.iter().copied().filter(|&k| k > a && k < b));
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut sum = 0.0;
    for w in points.windows(2) {
        let h = (w[1] - w[0]) / 4.0;
        for i in 0..4 {
            let lo = w[0] + i as f64 * h;
            sum += gauss_legendre(f, lo, lo + h);
        }
    }
    sum
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrabilityReport {
    /// `∫_{start}^{horizon}` of the bound.
    pub value: f64,
    /// Integral over each range on which `1 + t` doubles, oldest first.
    pub increments: Vec<f64>,
    pub converged: bool,
    pub horizon: f64,
}

const POINTS_PER_DOUBLING: usize = 32;

/// Numeric test that `∫ bound(t) dt` is finite: the bound is integrated over
/// `doublings` successive doublings of `1 + t` from its domain start, and the
/// last three increments must shrink geometrically.
pub fn integrability_check(bound: &DecayBound, doublings: usize) -> Result<IntegrabilityReport, BoundError> {
    let start = bound.t_min();
    let n = POINTS_PER_DOUBLING * doublings;
    let grid: Vec<f64> = (0..=n)
        .map(|i| (1.0 + start) * 2f64.powf(i as f64 / POINTS_PER_DOUBLING as f64) - 1.0)
        .collect();
    let values = bound.evaluate_on_grid(&grid)?;
    // Simpson in u = ln(1 + t), where dt = (1 + t) du.
    let du = std::f64::consts::LN_2 / POINTS_PER_DOUBLING as f64;
    let weighted: Vec<f64> = grid.iter().zip(&values).map(|(t, v)| (1.0 + t) * v).collect();
    let increments: Vec<f64> = (0..doublings)
        .map(|j| {
            let chunk = &weighted[j * POINTS_PER_DOUBLING..=(j + 1) * POINTS_PER_DOUBLING];
            let mut s = chunk[0] + chunk[POINTS_PER_DOUBLING];
            for (i, v) in chunk.iter().enumerate().take(POINTS_PER_DOUBLING).skip(1) {
                s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            s * du / 3.0
        })
        .collect();
    Ok(IntegrabilityReport {
        value: increments.iter().sum(),
        converged: increments_converge(&increments),
        increments,
        horizon: *grid.last().unwrap(),
    })
}

/// Doublings used when testing integrability conditions (horizon ≈ 10¹²).
pub const INTEGRABILITY_DOUBLINGS: usize = 40;

/// Improved case-1 bound, available only when the first bound is integrable.
pub fn thm_case1_improved(p: f64, xi: XiProfile, h: TailWeight) -> Result<DecayBound, BoundError> {
    let first = DecayBound::thm_case1_first(p, xi.clone(), h.clone())?;
    let report = integrability_check(&first, INTEGRABILITY_DOUBLINGS)?;
    if !report.converged {
        let n = report.increments.len();
        return Err(BoundError::ImprovedUnavailable {
            increments: report.increments[n.saturating_sub(3)..].to_vec(),
        });
    }
    DecayBound::thm_case1_improved_unchecked(p, xi, h)
}

/// Integrability of the first case-2 quotient, the precondition of the
/// improved case-2 bound. Reported, not enforced.
pub fn case2_condition(
    p: f64,
    xi: XiProfile,
    h: TailWeight,
    e0: f64,
    e2_0: f64,
) -> Result<IntegrabilityReport, BoundError> {
    let first = DecayBound::thm_case2(p, xi, h, e0, e2_0, Case2Variant::First)?;
    integrability_check(&first, INTEGRABILITY_DOUBLINGS)
}

/// Envelopes for `g = a(1+t)^{−q}` with `ξ ≡ q a^{−1/q}`:
/// `(1+t)^{(−q²+q+1)/q}` and `t^{−q/(q+1)}`.
pub fn example_bounds(q: f64) -> Result<(DecayBound, DecayBound), BoundError> {
    check_q(q)?;
    Ok((
        DecayBound::power(BoundFamily::ExampleCase1, (-q * q + q + 1.0) / q, 0.0),
        DecayBound::power(BoundFamily::ExampleCase2, -q / (q + 1.0), CASE2_T_MIN),
    ))
}

/// Earlier polynomial rates for the same kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorWork {
    /// Supremum of admissible case-1 decay exponents, `(q − 1)/2`.
    pub case1_sup: f64,
    /// Supremum of admissible case-2 decay exponents, `(q − 1)/(q + 1)`.
    pub case2_sup: f64,
    pub case1: DecayBound,
    pub case2: DecayBound,
}

pub fn prior_work_bounds(q: f64) -> Result<PriorWork, BoundError> {
    check_q(q)?;
    let case1_sup = (q - 1.0) / 2.0;
    let case2_sup = (q - 1.0) / (q + 1.0);
    Ok(PriorWork {
        case1_sup,
        case2_sup,
        case1: DecayBound::power(BoundFamily::PriorCase1, -case1_sup, 0.0),
        case2: DecayBound::power(BoundFamily::PriorCase2, -case2_sup, 0.0),
    })
}

fn check_q(q: f64) -> Result<(), BoundError> {
    if !(q > 2.0) || !q.is_finite() {
        return Err(BoundError::ParameterDomain(format!("polynomial example needs q > 2, got {q}")));
    }
    Ok(())
}

/// Fit window: envelope over `[start, end]`; the slope is fitted on
/// `slope` or, by default, on the final quarter of `[start, end]` in log-time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitWindow {
    pub start: f64,
    pub end: f64,
    pub slope: Option<(f64, f64)>,
}

impl FitWindow {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end, slope: None }
    }

    pub fn with_slope(mut self, lo: f64, hi: f64) -> Self {
        self.slope = Some((lo, hi));
        self
    }

    pub fn slope_range(&self) -> (f64, f64) {
        self.slope.unwrap_or_else(|| {
            let lo = (1.0 + self.start).ln();
            let hi = (1.0 + self.end).ln();
            ((lo + 0.75 * (hi - lo)).exp() - 1.0, self.end)
        })
    }
}

/// `C*(T) = max E/bound` over `[start, T]` on the nested horizons `T, T/2, T/4`.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub c_star: f64,
    /// `(T, C*(T))`, longest horizon first.
    pub series: Vec<(f64, f64)>,
    /// `(C*(T) − C*(T/2)) / C*(T)`.
    pub drift_last_doubling: f64,
    /// `(C*(T) − C*(T/4)) / C*(T)`.
    pub drift_two_doublings: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub window: FitWindow,
    pub envelope: Envelope,
    /// Least-squares slope of `ln E` against `ln(1 + t)`.
    pub slope: f64,
    /// Root-mean-square residual of that fit.
    pub slope_residual: f64,
}

impl FitReport {
    pub fn c_star(&self) -> f64 {
        self.envelope.c_star
    }
}

pub fn envelope_constant(
    times: &[f64],
    values: &[f64],
    bound: &[f64],
    start: f64,
    end: f64,
) -> Result<Envelope, BoundError> {
    if times.len() != values.len() || times.len() != bound.len() {
        return Err(BoundError::FitDomain("trace and bound lengths differ".into()));
    }
    let horizons = [end, end / 2.0, end / 4.0];
    let mut series = Vec::with_capacity(3);
    for &horizon in &horizons {
        let mut c: f64 = 0.0;
        let mut any = false;
        for i in 0..times.len() {
            let t = times[i];
            if t < start || t > horizon {
                continue;
            }
            any = true;
            if !(bound[i] > 0.0) || !bound[i].is_finite() {
                return Err(BoundError::FitDomain(format!("bound not positive at t = {t}")));
            }
            if !(values[i] >= 0.0) || !values[i].is_finite() {
                return Err(BoundError::FitDomain(format!("value negative at t = {t}")));
            }
            c = c.max(values[i] / bound[i]);
        }
        if !any {
            if horizon == end {
                return Err(BoundError::FitDomain(format!("no samples in [{start}, {end}]")));
            }
            c = f64::NAN;
        }
        series.push((horizon, c));
    }
    let c_star = series[0].1;
    let drift = |c: f64| {
        if c_star == 0.0 {
            0.0
        } else if c.is_nan() {
            f64::NAN
        } else {
            (c_star - c) / c_star
        }
    };
    Ok(Envelope {
        c_star,
        drift_last_doubling: drift(series[1].1),
        drift_two_doublings: drift(series[2].1),
        series,
    })
}

/// `(slope, rms residual)` of `ln v` against `ln(1 + t)` on `[lo, hi]`.
pub fn loglog_slope(times: &[f64], values: &[f64], lo: f64, hi: f64) -> Result<(f64, f64), BoundError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t < lo || t > hi {
            continue;
        }
        if !(v > 0.0) || !v.is_finite() {
            return Err(BoundError::FitDomain(format!("nonpositive value {v} at t = {t}")));
        }
        xs.push((1.0 + t).ln());
        ys.push(v.ln());
    }
    if xs.len() < 2 {
        return Err(BoundError::FitDomain(format!("fewer than two samples in [{lo}, {hi}]")));
    }
    let (slope, intercept) = crate::kernels::least_squares(&xs, &ys)
        .ok_or_else(|| BoundError::FitDomain("degenerate slope window".into()))?;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    Ok((slope, (rss / xs.len() as f64).sqrt()))
}

pub fn fit_envelope(
    times: &[f64],
    energy: &[f64],
    bound: &[f64],
    window: FitWindow,
) -> Result<FitReport, BoundError> {
    let envelope = envelope_constant(times, energy, bound, window.start, window.end)?;
    let (lo, hi) = window.slope_range();
    let (slope, slope_residual) = loglog_slope(times, energy, lo, hi)?;
    Ok(FitReport {
        window,
        envelope,
        slope,
        slope_residual,
    })
}

/// Evaluates `bound` on the trace samples inside the window and fits it.
pub fn fit_bound(
    times: &[f64],
    energy: &[f64],
    bound: &DecayBound,
    window: FitWindow,
) -> Result<FitReport, BoundError> {
    let start = window.start.max(bound.t_min());
    let idx: Vec<usize> = (0..times.len())
        .filter(|&i| times[i] >= start && times[i] <= window.end)
        .collect();
    let t: Vec<f64> = idx.iter().map(|&i| times[i]).collect();
    let e: Vec<f64> = idx.iter().map(|&i| energy[i]).collect();
    let b = bound.evaluate_on_grid(&t)?;
    fit_envelope(&t, &e, &b, FitWindow { start, ..window })
}

/// Parameters of the comparison inequality `F' ≤ −c₁ ξ^{α+1} F^{α+1} + c₂ h^{α+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lemma1Problem {
    pub alpha: f64,
    pub xi: XiProfile,
    pub h: TailWeight,
    pub c1: f64,
    pub c2: f64,
    pub f0: f64,
    pub horizon: f64,
    /// Log-spaced output grid size (knots of `ξ` are added).
    pub grid_points: usize,
}

impl Lemma1Problem {
    pub fn new(alpha: f64, xi: XiProfile, h: TailWeight, c1: f64, c2: f64, f0: f64, horizon: f64) -> Self {
        Self {
            alpha,
            xi,
            h,
            c1,
            c2,
            f0,
            horizon,
            grid_points: 3000,
        }
    }

    fn validate(&self) -> Result<(), BoundError> {
        let ok = self.alpha > 0.0
            && self.c1 > 0.0
            && self.c2 >= 0.0
            && self.f0 >= 0.0
            && self.horizon > 0.0
            && self.grid_points >= 8
            && [self.alpha, self.c1, self.c2, self.f0, self.horizon]
                .iter()
                .all(|v| v.is_finite());
        if !ok {
            return Err(BoundError::ParameterDomain(format!(
                "need alpha, c1, horizon > 0 and c2, F0 >= 0: {self:?}"
            )));
        }
        Ok(())
    }

    fn rhs(&self, t: f64, f: f64) -> f64 {
        let a1 = self.alpha + 1.0;
        -self.c1 * self.xi.value(t).powf(a1) * f.max(0.0).powf(a1) + self.c2 * self.h.value(t).powf(a1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma1Report {
    pub times: Vec<f64>,
    pub solution: Vec<f64>,
    pub bound: Vec<f64>,
    pub envelope: Envelope,
    /// Largest relative excess of `φ'` over `−c₁φ^{α+1} + c₂ξ^β h^{α+1}`.
    pub phi_max_violation: f64,
    pub phi_pass: bool,
    /// Against `(F₀^{−α} + c₁α∫₀^t ξ^{α+1})^{−1/α}` when there is no forcing.
    pub closed_form_max_rel_err: Option<f64>,
}

/// Integrates the equality case of the comparison inequality with RK4 (at
/// least ten substeps per output interval, more while the decay term is stiff)
/// and measures the envelope constant of the bracket bound.
pub fn lemma1_verify(problem: &Lemma1Problem) -> Result<Lemma1Report, BoundError> {
    problem.validate()?;
    let mut times = log_grid(problem.horizon, problem.grid_points);
    times.extend(problem.xi.knots().iter().filter(|&&k| k > 0.0 && k < problem.horizon));
    times.sort_by(f64::total_cmp);
    times.dedup();

    let alpha = problem.alpha;
    let a1 = alpha + 1.0;
    let mut solution = Vec::with_capacity(times.len());
    let mut f = problem.f0;
    solution.push(f);
    for w in times.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let span = t1 - t0;
        let stiffness = problem.c1 * a1 * problem.xi.value(t0).powf(a1) * f.max(0.0).powf(alpha);
        let substeps = ((span * stiffness / 0.1).ceil() as usize).clamp(10, 1_000_000);
        let dt = span / substeps as f64;
        for i in 0..substeps {
            let t = t0 + i as f64 * dt;
            let y = rk4_step(
                &|y: [f64; 2]| [1.0, problem.rhs(y[0], y[1])],
                [t, f],
                dt,
            );
            f = y[1].max(0.0);
        }
        if !f.is_finite() {
            return Err(BoundError::ParameterDomain(format!("comparison ODE blew up near t = {t1}")));
        }
        solution.push(f);
    }

    let bound_fn = DecayBound::lemma1(alpha, problem.xi.clone(), problem.h.clone())?;
    let bound = bound_fn.evaluate_on_grid(&times)?;
    let envelope = envelope_constant(&times, &solution, &bound, 0.0, problem.horizon)?;

    let beta = a1 / alpha;
    let mut phi_max_violation: f64 = 0.0;
    for (&t, &fv) in times.iter().zip(&solution) {
        let xi = problem.xi.value(t);
        let phi = xi.powf(beta) * fv;
        let dphi = beta * xi.powf(beta - 1.0) * problem.xi.slope(t) * fv + xi.powf(beta) * problem.rhs(t, fv);
        let rhs = -problem.c1 * phi.powf(a1) + problem.c2 * xi.powf(beta) * problem.h.value(t).powf(a1);
        let scale = dphi.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
        phi_max_violation = phi_max_violation.max((dphi - rhs) / scale);
    }

    let closed_form_max_rel_err = if problem.c2 == 0.0 || problem.h.is_zero() {
        let xi_power = cumulative(&|s: f64| problem.xi.value(s).powf(a1), &times, problem.xi.knots());
        let mut worst: f64 = 0.0;
        for (i, &fv) in solution.iter().enumerate() {
            let exact = if problem.f0 == 0.0 {
                0.0
            } else {
                (problem.f0.powf(-alpha) + problem.c1 * alpha * xi_power[i]).powf(-1.0 / alpha)
            };
            let err = if exact == 0.0 { fv.abs() } else { ((fv - exact) / exact).abs() };
            worst = worst.max(err);
        }
        Some(worst)
    } else {
        None
    };

    Ok(Lemma1Report {
        times,
        solution,
        bound,
        envelope,
        phi_pass: phi_max_violation <= 1e-10,
        phi_max_violation,
        closed_form_max_rel_err,
    })
}

/// One row of `verification.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationRow {
    pub family: String,
    pub exponent: f64,
    pub c_star: f64,
    pub c_star_drift: f64,
    pub slope: f64,
    pub slope_residual: f64,
    pub pass: bool,
}

pub fn write_verification_csv<W: Write>(rows: &[VerificationRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "family,exponent,Cstar,Cstar_drift,slope,slope_residual,pass")?;
    for r in rows {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            r.family, r.exponent, r.c_star, r.c_star_drift, r.slope, r.slope_residual, r.pass
        )?;
    }
    Ok(())
}
