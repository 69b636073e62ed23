//! Jointly diagonal realizations of the operator pair `(A, B)`.

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("operator pair needs at least one mode")]
    Empty,
    #[error("eigenvalue lists differ in length ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("eigenvalue {index} of {which} is not positive and finite: {value}")]
    NonPositive {
        which: &'static str,
        index: usize,
        value: f64,
    },
}

/// Eigenvalues `aₖ` of `A` and `bₖ` of `B` on a shared eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalOperatorPair {
    a: Vec<f64>,
    b: Vec<f64>,
}

/// Tightest modal constants for the two operator conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseConstants {
    /// `max aₖ/bₖ`: `‖A^{1/2}v‖² ≤ a₂ ‖B^{1/2}v‖²`.
    pub a2_case1: f64,
    /// `max 1/bₖ`: `‖A^{1/2}v‖² ≤ a₂ ‖A^{1/2}B^{1/2}v‖²`.
    pub a2_case2: f64,
    /// Both conditions hold for any finite truncation.
    pub case1_holds: bool,
    pub case2_holds: bool,
    /// False when `aₖ/bₖ` keeps growing towards the top mode, i.e. the first
    /// condition degenerates as the truncation is refined (e.g. `B = I`).
    pub case1_stable_under_refinement: bool,
}

impl ModalOperatorPair {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self, OperatorError> {
        if a.len() != b.len() {
            return Err(OperatorError::LengthMismatch {
                a: a.len(),
                b: b.len(),
            });
        }
        if a.is_empty() {
            return Err(OperatorError::Empty);
        }
        for (which, vals) in [("A", &a), ("B", &b)] {
            if let Some((index, &value)) = vals
                .iter()
                .enumerate()
                .find(|(_, v)| !(**v > 0.0) || !v.is_finite())
            {
                return Err(OperatorError::NonPositive { which, index, value });
            }
        }
        Ok(Self { a, b })
    }

    /// `aₖ = bₖ = (kπ/L)²`.
    pub fn laplacian_same(modes: usize, length: f64) -> Result<Self, OperatorError> {
        let a = laplacian_1d(modes, length);
        Self::new(a.clone(), a)
    }

    /// `aₖ = (kπ/L)²`, `bₖ = 1`.
    pub fn laplacian_identity(modes: usize, length: f64) -> Result<Self, OperatorError> {
        Self::new(laplacian_1d(modes, length), vec![1.0; modes])
    }

    pub fn modes(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn max_a(&self) -> f64 {
        self.a.iter().copied().fold(f64::MIN, f64::max)
    }

    /// `(a₀, a₁)` with `a₁‖v‖² ≤ ‖B^{1/2}v‖² ≤ a₀‖A^{1/2}v‖²`.
    pub fn coercivity_constants(&self) -> (f64, f64) {
        let a1 = self.b.iter().copied().fold(f64::INFINITY, f64::min);
        let a0 = self
            .a
            .iter()
            .zip(&self.b)
            .map(|(a, b)| b / a)
            .fold(f64::MIN, f64::max);
        (a0, a1)
    }

    pub fn case_constants(&self) -> CaseConstants {
        let ratios: Vec<f64> = self.a.iter().zip(&self.b).map(|(a, b)| a / b).collect();
        let a2_case1 = ratios.iter().copied().fold(f64::MIN, f64::max);
        let a2_case2 = self.b.iter().map(|b| 1.0 / b).fold(f64::MIN, f64::max);
        let top = self
            .a
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.total_cmp(y.1))
            .map(|(i, _)| i)
            .unwrap();
        let bottom = self
            .a
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.total_cmp(y.1))
            .map(|(i, _)| i)
            .unwrap();
        let growing = self.modes() > 1 && ratios[top] == a2_case1 && ratios[top] > ratios[bottom];
        CaseConstants {
            a2_case1,
            a2_case2,
            case1_holds: true,
            case2_holds: true,
            case1_stable_under_refinement: !growing,
        }
    }
}

/// Dirichlet Laplacian eigenvalues `(kπ/L)²`, `k = 1..=modes`.
pub fn laplacian_1d(modes: usize, length: f64) -> Vec<f64> {
    (1..=modes)
        .map(|k| (k as f64 * PI / length).powi(2))
        .collect()
}
