//! Quadrature helpers shared by the kernel, history and bound evaluators.
//!
//! Finite panels go through the double-exponential rule of the `quadrature`
//! crate. Long or semi-infinite ranges of algebraically decaying integrands
//! are split into panels on which `1 + t` doubles, so every panel sees the
//! integrand on a single scale.

/// Nodes and weights of the 8-point Gauss–Legendre rule on [-1, 1].
const GL8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Fixed 8-point Gauss–Legendre rule on [a, b]; exact for polynomials of degree 15.
pub(crate) fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
        acc += w * (f(mid - half * x) + f(mid + half * x));
    }
    acc * half
}

/// Adaptive integral over a finite panel.
pub(crate) fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    quadrature::integrate(f, a, b, abs_tol).integral
}

/// Splits [a, b] at the points where `1 + t` doubles, starting from `1 + a`.
pub(crate) fn doubling_breakpoints(a: f64, b: f64) -> Vec<f64> {
    let mut points = vec![a];
    let mut x = 1.0 + a.max(0.0);
    loop {
        x *= 2.0;
        let t = x - 1.0;
        if t >= b {
            break;
        }
        points.push(t);
    }
    points.push(b);
    points
}

/// Integral over [a, b] accumulated panel by panel on doubling breakpoints.
///
/// The relative tolerance is applied to a crude magnitude estimate of each
/// panel, so algebraic tails keep their relative accuracy far from the origin.
pub(crate) fn integrate_doubling<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let points = doubling_breakpoints(a, b);
    points
        .windows(2)
        .map(|w| integrate_panel(&f, w[0], w[1], rel_tol))
        .sum()
}

pub(crate) fn integrate_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let scale = gauss_legendre(|x| f(x).abs(), a, b);
    if scale == 0.0 {
        return 0.0;
    }
    integrate(f, a, b, (rel_tol * scale).max(f64::MIN_POSITIVE))
}

/// Geometric-convergence test on successive horizon-doubling increments:
/// the last three increments must shrink by a ratio below `0.9` each time.
pub(crate) fn increments_converge(increments: &[f64]) -> bool {
    if increments.len() < 3 {
        return false;
    }
    let tail = &increments[increments.len() - 3..];
    if tail[0] == 0.0 && tail[1] == 0.0 && tail[2] == 0.0 {
        return true;
    }
    // An increment that underflowed to zero after a nonzero one counts as shrinking.
    tail.windows(2)
        .all(|w| w[1] == 0.0 || w[1].abs() < 0.9 * w[0].abs())
}

/// Integrates `f` over [0, horizon] and records the increments gained at each
/// of the last `doublings` horizon doublings (horizon/2^k -> horizon/2^(k-1)).
pub(crate) fn integrate_with_doublings<F: Fn(f64) -> f64>(
    f: F,
    horizon: f64,
    doublings: usize,
    rel_tol: f64,
) -> (f64, Vec<f64>) {
    let first = horizon / 2f64.powi(doublings as i32);
    let mut value = integrate_doubling(&f, 0.0, first, rel_tol);
    let mut increments = Vec::with_capacity(doublings);
    let mut lo = first;
    for _ in 0..doublings {
        let hi = 2.0 * lo;
        let inc = integrate_doubling(&f, lo, hi, rel_tol);
        increments.push(inc);
        value += inc;
        lo = hi;
    }
    (value, increments)
}

/// `n` points log-spaced in `1 + t` on [0, horizon], both ends included.
pub fn log_grid(horizon: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "log grid needs at least two points");
    let top = (1.0 + horizon).ln();
    let mut grid: Vec<f64> = (0..n)
        .map(|i| (top * i as f64 / (n - 1) as f64).exp() - 1.0)
        .collect();
    grid[0] = 0.0;
    grid[n - 1] = horizon;
    grid
}
