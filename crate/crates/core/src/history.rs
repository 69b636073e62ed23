//! Prescribed past history `u(−s) = u₀(s)` and initial velocity in modal coordinates.
//!
//! Each mode's history is `cₖ φ(s)` with a shape `φ` from a small catalog. All
//! shapes satisfy `φ(0) = 1` and `|φ(s)| ≤ 1`, so `sup_s |u₀ₖ(s)| = |cₖ|`.
//!
//! The part of the memory integral that reaches back before `t = 0` is
//! `∫_t^∞ K(s) u₀ₖ(s − t) ds = cₖ ∫₀^∞ K(t + r) φ(r) dr` for `K = g` or `g'`;
//! these shape moments are mode independent and are evaluated here.

use thiserror::Error;

use crate::kernels::{Kernel, KernelError};
use crate::operators::ModalOperatorPair;
use crate::quadrature;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HistoryError {
    #[error("history parameter out of domain: {0}")]
    ParameterDomain(String),
    #[error("history has {history} modes but the operator pair has {pair}")]
    ModeMismatch { history: usize, pair: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HistoryShape {
    /// `φ(s) = 1`.
    Constant,
    /// `φ(s) = e^{−μ s}`.
    Exponential { rate: f64 },
    /// `φ(s) = max(0, 1 − s/τ)`.
    Bump { width: f64 },
}

impl HistoryShape {
    pub fn value(&self, s: f64) -> f64 {
        match *self {
            HistoryShape::Constant => 1.0,
            HistoryShape::Exponential { rate } => (-rate * s).exp(),
            HistoryShape::Bump { width } => (1.0 - s / width).max(0.0),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            HistoryShape::Constant => "constant",
            HistoryShape::Exponential { .. } => "exponential",
            HistoryShape::Bump { .. } => "bump",
        }
    }

    fn validate(&self) -> Result<(), HistoryError> {
        match *self {
            HistoryShape::Constant => Ok(()),
            HistoryShape::Exponential { rate } if rate > 0.0 && rate.is_finite() => Ok(()),
            HistoryShape::Bump { width } if width > 0.0 && width.is_finite() => Ok(()),
            other => Err(HistoryError::ParameterDomain(format!(
                "{} history needs a positive decay parameter",
                other.name()
            ))),
        }
    }

    /// `∫₀^∞ K(t + r) φ(r)^power dr` with `K = g` (or `g'` when `derivative`),
    /// to absolute accuracy `tol`.
    pub fn kernel_moment(
        &self,
        kernel: &Kernel,
        t: f64,
        derivative: bool,
        power: i32,
        tol: f64,
    ) -> Result<f64, KernelError> {
        let k = |s: f64| {
            if derivative {
                kernel.derivative(s)
            } else {
                kernel.value(s)
            }
        };
        // ∫_t^∞ |K| bounds every remainder below.
        let mass = if derivative {
            kernel.value(t)
        } else {
            kernel.tail(t)?
        };
        if mass == 0.0 {
            return Ok(0.0);
        }
        match *self {
            HistoryShape::Constant => Ok(if derivative { -mass } else { mass }),
            HistoryShape::Exponential { rate } => {
                let decay = rate * power as f64;
                // ∫_S^∞ |K(t+r)| e^{−decay r} dr ≤ e^{−decay S} · mass.
                let mut cut = ((mass / tol).ln() / decay).max(0.0);
                cut = cut.min(self.kernel_cut(kernel, t, derivative, tol)?);
                let f = |r: f64| k(t + r) * (-decay * r).exp();
                Ok(quadrature::integrate_doubling(f, 0.0, cut, 1e-12))
            }
            HistoryShape::Bump { width } => {
                let f = |r: f64| k(t + r) * (1.0 - r / width).powi(power);
                Ok(quadrature::integrate_doubling(f, 0.0, width, 1e-12))
            }
        }
    }

    /// Smallest doubling length `S` with `∫_{t+S}^∞ |K| ≤ tol`.
    fn kernel_cut(&self, kernel: &Kernel, t: f64, derivative: bool, tol: f64) -> Result<f64, KernelError> {
        let mut cut = 1.0;
        for _ in 0..200 {
            let rest = if derivative {
                kernel.value(t + cut)
            } else {
                kernel.tail(t + cut)?
            };
            if rest <= tol {
                return Ok(cut);
            }
            cut *= 2.0;
        }
        Ok(f64::INFINITY)
    }
}

/// History shape moments at one time `t`, shared by every mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailProfile {
    pub t: f64,
    /// `G(t) = ∫_t^∞ g`.
    pub kernel_tail: f64,
    /// `g(t)`.
    pub kernel_value: f64,
    /// `∫₀^∞ g(t+r) φ(r) dr`.
    pub g_phi: f64,
    /// `∫₀^∞ g(t+r) φ(r)² dr`.
    pub g_phi2: f64,
    /// `∫₀^∞ g'(t+r) φ(r) dr`.
    pub dg_phi: f64,
    /// `∫₀^∞ g'(t+r) φ(r)² dr`.
    pub dg_phi2: f64,
}

impl TailProfile {
    /// `∫_t^∞ g(s) (u − c φ(s−t))² ds`.
    pub fn weighted_gap(&self, u: f64, c: f64) -> f64 {
        u * u * self.kernel_tail - 2.0 * u * c * self.g_phi + c * c * self.g_phi2
    }

    /// `∫_t^∞ g'(s) (u − c φ(s−t))² ds`.
    pub fn weighted_gap_rate(&self, u: f64, c: f64) -> f64 {
        -u * u * self.kernel_value - 2.0 * u * c * self.dg_phi + c * c * self.dg_phi2
    }

    /// `∫_t^∞ g(s) (u − c φ(s−t)) ds`.
    pub fn weighted_difference(&self, u: f64, c: f64) -> f64 {
        u * self.kernel_tail - c * self.g_phi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryData {
    shape: HistoryShape,
    coefficients: Vec<f64>,
    velocities: Vec<f64>,
}

impl HistoryData {
    pub fn new(
        shape: HistoryShape,
        coefficients: Vec<f64>,
        velocities: Vec<f64>,
    ) -> Result<Self, HistoryError> {
        shape.validate()?;
        if coefficients.len() != velocities.len() {
            return Err(HistoryError::ParameterDomain(format!(
                "{} history coefficients but {} initial velocities",
                coefficients.len(),
                velocities.len()
            )));
        }
        if coefficients.is_empty() {
            return Err(HistoryError::ParameterDomain("history needs at least one mode".into()));
        }
        if coefficients.iter().chain(&velocities).any(|x| !x.is_finite()) {
            return Err(HistoryError::ParameterDomain("history data must be finite".into()));
        }
        Ok(Self {
            shape,
            coefficients,
            velocities,
        })
    }

    /// Rest state: zero history and zero velocity.
    pub fn zero(modes: usize) -> Self {
        Self {
            shape: HistoryShape::Constant,
            coefficients: vec![0.0; modes],
            velocities: vec![0.0; modes],
        }
    }

    pub fn shape(&self) -> HistoryShape {
        self.shape
    }

    pub fn modes(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.iter().chain(&self.velocities).all(|&x| x == 0.0)
    }

    /// `u₀ₖ(s)`, the displacement at time `−s`.
    pub fn displacement(&self, k: usize, s: f64) -> f64 {
        self.coefficients[k] * self.shape.value(s)
    }

    pub fn initial_displacement(&self, k: usize) -> f64 {
        self.coefficients[k]
    }

    pub fn initial_velocity(&self, k: usize) -> f64 {
        self.velocities[k]
    }

    /// `max_k sup_s |u₀ₖ(s)|`.
    pub fn sup_abs(&self) -> f64 {
        self.coefficients.iter().map(|c| c.abs()).fold(0.0, f64::max)
    }

    /// Default absolute tolerance for history tail integrals, `1e−10 (1 + sup|u₀|)`.
    pub fn default_tail_tolerance(&self) -> f64 {
        1e-10 * (1.0 + self.sup_abs())
    }

    pub fn check_modes(&self, pair: &ModalOperatorPair) -> Result<(), HistoryError> {
        if self.modes() != pair.modes() {
            return Err(HistoryError::ModeMismatch {
                history: self.modes(),
                pair: pair.modes(),
            });
        }
        Ok(())
    }

    /// Shape moments at `t` with per-mode absolute accuracy `tol`.
    pub fn profile(&self, kernel: &Kernel, t: f64, tol: f64) -> Result<TailProfile, KernelError> {
        let unit_tol = tol / self.sup_abs().max(1.0);
        let kernel_tail = kernel.tail(t)?;
        let kernel_value = kernel.value(t);
        if self.sup_abs() == 0.0 {
            return Ok(TailProfile {
                t,
                kernel_tail,
                kernel_value,
                g_phi: 0.0,
                g_phi2: 0.0,
                dg_phi: 0.0,
                dg_phi2: 0.0,
            });
        }
        let moment = |derivative, power| self.shape.kernel_moment(kernel, t, derivative, power, unit_tol);
        Ok(TailProfile {
            t,
            kernel_tail,
            kernel_value,
            g_phi: moment(false, 1)?,
            g_phi2: moment(false, 2)?,
            dg_phi: moment(true, 1)?,
            dg_phi2: moment(true, 2)?,
        })
    }
}

/// `sup_s ‖B^{1/2} u₀(s)‖ = (Σ bₖ cₖ²)^{1/2}`.
pub fn m0_case1(history: &HistoryData, pair: &ModalOperatorPair) -> Result<f64, HistoryError> {
    history.check_modes(pair)?;
    Ok(weighted_norm(history.coefficients(), pair.b().iter().copied()))
}

/// `sup_s ‖A^{1/2} B^{1/2} u₀(s)‖ = (Σ aₖ bₖ cₖ²)^{1/2}`.
pub fn m0_case2(history: &HistoryData, pair: &ModalOperatorPair) -> Result<f64, HistoryError> {
    history.check_modes(pair)?;
    let weights = pair.a().iter().zip(pair.b()).map(|(a, b)| a * b);
    Ok(weighted_norm(history.coefficients(), weights))
}

fn weighted_norm(c: &[f64], weights: impl Iterator<Item = f64>) -> f64 {
    c.iter().zip(weights).map(|(c, w)| w * c * c).sum::<f64>().sqrt()
}

/// `∫_t^∞ g(s) u₀ₖ(s − t) ds`, to absolute accuracy `tol`.
pub fn history_tail_integral(
    history: &HistoryData,
    kernel: &Kernel,
    t: f64,
    k: usize,
    tol: f64,
) -> Result<f64, KernelError> {
    let c = history.coefficients[k];
    if c == 0.0 {
        return Ok(0.0);
    }
    let unit = history.shape.kernel_moment(kernel, t, false, 1, tol / c.abs())?;
    Ok(c * unit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_kernel() -> Kernel {
        Kernel::exponential(1.0, 1.0).unwrap()
    }

    #[test]
    fn m0_examples() {
        let pair = ModalOperatorPair::new(vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let h = HistoryData::new(HistoryShape::Exponential { rate: 1.0 }, vec![1.0, 0.5], vec![0.0; 2]).unwrap();
        assert!((m0_case1(&h, &pair).unwrap() - 1.25f64.sqrt()).abs() < 1e-15);
        assert_eq!(m0_case1(&HistoryData::zero(2), &pair).unwrap(), 0.0);

        let pair = ModalOperatorPair::new(vec![1.0, 1.0], vec![2.0, 3.0]).unwrap();
        let h = HistoryData::new(HistoryShape::Constant, vec![1.0, 1.0], vec![0.0; 2]).unwrap();
        assert!((m0_case1(&h, &pair).unwrap() - 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn m0_case2_examples() {
        let pair = ModalOperatorPair::new(vec![4.0], vec![1.0]).unwrap();
        let h = HistoryData::new(HistoryShape::Exponential { rate: 1.0 }, vec![1.0], vec![0.0]).unwrap();
        assert_eq!(m0_case2(&h, &pair).unwrap(), 2.0);
        assert_eq!(m0_case2(&HistoryData::zero(1), &pair).unwrap(), 0.0);
        let pair = ModalOperatorPair::new(vec![1.0, 4.0], vec![1.0, 1.0]).unwrap();
        let h = HistoryData::new(HistoryShape::Constant, vec![1.0, 1.0], vec![0.0; 2]).unwrap();
        assert!((m0_case2(&h, &pair).unwrap() - 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn mode_mismatch() {
        let pair = ModalOperatorPair::new(vec![4.0], vec![1.0]).unwrap();
        assert!(matches!(
            m0_case1(&HistoryData::zero(2), &pair),
            Err(HistoryError::ModeMismatch { .. })
        ));
    }

    #[test]
    fn tail_integral_examples() {
        let k = exp_kernel();
        let h = HistoryData::new(HistoryShape::Constant, vec![1.0], vec![0.0]).unwrap();
        assert!((history_tail_integral(&h, &k, 0.0, 0, 1e-12).unwrap() - 1.0).abs() < 1e-12);
        let h = HistoryData::new(HistoryShape::Exponential { rate: 1.0 }, vec![1.0], vec![0.0]).unwrap();
        assert!((history_tail_integral(&h, &k, 0.0, 0, 1e-12).unwrap() - 0.5).abs() < 1e-11);
        let poly = Kernel::polynomial(1.0, 3.0).unwrap();
        assert_eq!(history_tail_integral(&HistoryData::zero(1), &poly, 2.0, 0, 1e-10).unwrap(), 0.0);
    }

    /// Closed forms of `∫₀^∞ a e^{−λ(t+r)} φ(r)^m dr`.
    fn exp_kernel_moment(a: f64, lam: f64, shape: HistoryShape, t: f64, power: i32) -> f64 {
        let base = a * (-lam * t).exp();
        match shape {
            HistoryShape::Constant => base / lam,
            HistoryShape::Exponential { rate } => base / (lam + power as f64 * rate),
            HistoryShape::Bump { width } => {
                // ∫₀^τ e^{−λr}(1 − r/τ)^m dr for m = 1, 2.
                let e = (-lam * width).exp();
                match power {
                    1 => base * (1.0 / lam - (1.0 - e) / (lam * lam * width)),
                    2 => {
                        base * (1.0 / lam - 2.0 / (lam * lam * width)
                            + 2.0 * (1.0 - e) / (lam.powi(3) * width * width))
                    }
                    _ => unreachable!(),
                }
            }
        }
    }

    #[test]
    fn moments_match_exponential_closed_forms() {
        let (a, lam) = (0.7, 1.3);
        let k = Kernel::exponential(a, lam).unwrap();
        let shapes = [
            HistoryShape::Constant,
            HistoryShape::Exponential { rate: 0.4 },
            HistoryShape::Exponential { rate: 5.0 },
            HistoryShape::Bump { width: 2.5 },
        ];
        for shape in shapes {
            for t in [0.0, 0.3, 4.0, 20.0] {
                for power in [1, 2] {
                    let exact = exp_kernel_moment(a, lam, shape, t, power);
                    let tol = 1e-12 * exact;
                    let got = shape.kernel_moment(&k, t, false, power, tol).unwrap();
                    assert!(
                        (got - exact).abs() <= 1e-10 * exact.abs(),
                        "{shape:?} t={t} m={power}: {got} vs {exact}"
                    );
                    let got_d = shape.kernel_moment(&k, t, true, power, tol).unwrap();
                    assert!((got_d + lam * exact).abs() <= 1e-10 * lam * exact.abs());
                }
            }
        }
    }

    #[test]
    fn tail_integral_bounded_by_sup_times_tail() {
        let kernels = [
            Kernel::polynomial(1.0, 3.0).unwrap(),
            Kernel::polynomial(0.5, 2.2).unwrap(),
            Kernel::exponential(2.0, 0.5).unwrap(),
        ];
        let shapes = [
            HistoryShape::Constant,
            HistoryShape::Exponential { rate: 0.3 },
            HistoryShape::Bump { width: 4.0 },
        ];
        for k in &kernels {
            for shape in shapes {
                let h = HistoryData::new(shape, vec![-1.7], vec![0.0]).unwrap();
                for t in [0.0, 1.0, 10.0, 100.0] {
                    let v = history_tail_integral(&h, k, t, 0, 1e-12).unwrap();
                    assert!(v.abs() <= 1.7 * k.tail(t).unwrap() * (1.0 + 1e-12) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn weighted_gap_is_nonnegative() {
        let k = Kernel::polynomial(1.0, 3.0).unwrap();
        let h = HistoryData::new(HistoryShape::Exponential { rate: 2.0 }, vec![1.0], vec![0.0]).unwrap();
        let p = h.profile(&k, 3.0, 1e-12).unwrap();
        for u in [-1.0, 0.0, 0.3, 1.0, 2.0] {
            assert!(p.weighted_gap(u, 1.0) >= -1e-14);
            assert!(p.weighted_gap_rate(u, 1.0) <= 1e-14);
        }
    }

    #[test]
    fn invalid_histories() {
        assert!(HistoryData::new(HistoryShape::Exponential { rate: 0.0 }, vec![1.0], vec![0.0]).is_err());
        assert!(HistoryData::new(HistoryShape::Bump { width: -1.0 }, vec![1.0], vec![0.0]).is_err());
        assert!(HistoryData::new(HistoryShape::Constant, vec![1.0], vec![]).is_err());
    }
}
