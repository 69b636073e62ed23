//! Acceptance checks. Each test prints one `PASS`/`FAIL` line.

use std::sync::OnceLock;
use std::time::Instant;

use memdecay::bounds::{
    fit_bound, lemma1_verify, loglog_slope, prior_work_bounds, thm_case1_improved, Case2Variant, DecayBound,
    FitWindow, Lemma1Problem, TailWeight,
};
use memdecay::energy::{energy_trace, EnergyTrace, LyapunovConstants};
use memdecay::history::{HistoryData, HistoryShape};
use memdecay::kernels::{admissible_xi_p, lemma2_integral, Kernel, XiProfile};
use memdecay::operators::ModalOperatorPair;
use memdecay::simulator::{exponential_oracle, simulate, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, name: &str, pass: bool, detail: String) {
    println!("criterion {id} ({name}): {} | {detail}", if pass { "PASS" } else { "FAIL" });
}

fn golden(dt: f64) -> SimConfig {
    SimConfig::new(
        Kernel::exponential(0.5, 1.0).unwrap(),
        ModalOperatorPair::new(vec![4.0], vec![1.0]).unwrap(),
        HistoryData::new(HistoryShape::Exponential { rate: 1.0 }, vec![1.0], vec![0.0]).unwrap(),
        dt,
        40.0,
    )
}

/// Max displacement error against the oracle divided by `max |u_oracle|`.
fn oracle_error(cfg: &SimConfig) -> f64 {
    let u = simulate(cfg).unwrap();
    let o = exponential_oracle(cfg).unwrap();
    let scale = o.displacement[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let err = u.displacement[0]
        .iter()
        .zip(&o.displacement[0])
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    err / scale
}

#[test]
fn criterion_01_oracle_equivalence() {
    let start = Instant::now();
    let rel = oracle_error(&golden(1e-3));
    let secs = start.elapsed().as_secs_f64();
    let pass = rel <= 1e-3 && secs <= 60.0;
    report(1, "oracle equivalence", pass, format!("max rel err {rel:.3e}, {secs:.2} s"));
    assert!(pass);
}

#[test]
fn criterion_02_convergence_order() {
    let errs: Vec<f64> = [4e-3, 2e-3, 1e-3].iter().map(|&dt| oracle_error(&golden(dt))).collect();
    let ratios = [errs[0] / errs[1], errs[1] / errs[2]];
    let pass = ratios.iter().all(|r| (3.3..=4.7).contains(r));
    report(2, "convergence order", pass, format!("errors {:.3e} {:.3e} {:.3e}, ratios {:.4} {:.4}", errs[0], errs[1], errs[2], ratios[0], ratios[1]));
    assert!(pass);
}

#[test]
fn criterion_03_conservation_without_memory() {
    let cfg = SimConfig::new(
        Kernel::zero(),
        ModalOperatorPair::new(vec![4.0], vec![1.0]).unwrap(),
        HistoryData::new(HistoryShape::Exponential { rate: 1.0 }, vec![1.0], vec![0.5]).unwrap(),
        1e-3,
        100.0,
    );
    let traj = simulate(&cfg).unwrap();
    let trace = energy_trace(&traj, &cfg.pair, &cfg.kernel, 1, LyapunovConstants::default()).unwrap();
    let e0 = trace.energy[0];
    let worst = trace.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max) / e0;
    let pass = e0 > 0.0 && worst <= 1e-4;
    report(3, "conservation", pass, format!("max |E - E0|/E0 = {worst:.3e}"));
    assert!(pass);
}

struct Run {
    name: &'static str,
    cfg: SimConfig,
    trace: EnergyTrace,
}

fn run(name: &'static str, cfg: SimConfig, stride: usize) -> Run {
    let traj = simulate(&cfg).unwrap();
    let trace = energy_trace(&traj, &cfg.pair, &cfg.kernel, stride, LyapunovConstants::default()).unwrap();
    Run { name, cfg, trace }
}

/// Admissible runs sampled at every step.
fn catalog_runs() -> &'static [Run] {
    static RUNS: OnceLock<Vec<Run>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let q3 = SimConfig::new(
            Kernel::polynomial(1.0, 3.0).unwrap(),
            ModalOperatorPair::laplacian_same(3, 1.0).unwrap(),
            HistoryData::new(HistoryShape::Constant, vec![1.0, 0.25, 1.0 / 9.0], vec![0.0, 0.5, 0.0]).unwrap(),
            2.5e-4,
            10.0,
        );
        let q25 = SimConfig::new(
            Kernel::polynomial(0.5, 2.5).unwrap(),
            ModalOperatorPair::laplacian_identity(3, 1.0).unwrap(),
            HistoryData::new(HistoryShape::Exponential { rate: 2.0 }, vec![1.0, -0.5, 0.25], vec![0.0, 0.0, 1.0])
                .unwrap(),
            2.5e-4,
            10.0,
        );
        vec![
            run("exponential single mode", golden(1e-3), 1),
            run("polynomial q=3, B=A", q3, 1),
            run("polynomial q=2.5, B=I", q25, 1),
        ]
    })
}

/// The worked polynomial example: q = 3, g₀ = 1/2, 16 modes with B = A, T = 200.
fn polynomial_example() -> &'static (Run, f64) {
    static RUN: OnceLock<(Run, f64)> = OnceLock::new();
    RUN.get_or_init(|| {
        let coeffs: Vec<f64> = (1..=16).map(|k| 1.0 / (k * k) as f64).collect();
        let cfg = SimConfig::new(
            Kernel::polynomial(1.0, 3.0).unwrap(),
            ModalOperatorPair::laplacian_same(16, 1.0).unwrap(),
            HistoryData::new(HistoryShape::Constant, coeffs, vec![0.0; 16]).unwrap(),
            5e-3,
            200.0,
        );
        (run("polynomial example", cfg, 10), 3.0)
    })
}

#[test]
fn criterion_04_dissipation() {
    let mut pass = true;
    let mut details = Vec::new();
    for r in catalog_runs() {
        let t = &r.trace;
        let e0 = t.energy[0];
        let dt = r.cfg.dt;
        let slack = 1e-6 * e0 + e0 * dt * dt;
        let worst_rise = t.energy.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        let mut worst_fd = 0.0f64;
        for i in 1..t.len() - 1 {
            let fd = (t.energy[i + 1] - t.energy[i - 1]) / (t.times[i + 1] - t.times[i - 1]);
            let tol = (1e-2 * t.energy_rate[i].abs()).max(1e-6 * e0);
            worst_fd = worst_fd.max((fd - t.energy_rate[i]).abs() / tol);
        }
        let ok = worst_rise <= slack && worst_fd <= 1.0;
        pass &= ok;
        details.push(format!(
            "{}: worst rise {:.2e} (slack {:.2e}), E' mismatch {:.3} of tolerance",
            r.name, worst_rise, slack, worst_fd
        ));
    }
    report(4, "dissipation", pass, details.join("; "));
    assert!(pass);
}

#[test]
fn criterion_05_coercivity() {
    let mut pass = true;
    let mut details = Vec::new();
    let (example, _) = polynomial_example();
    for r in catalog_runs().iter().chain(std::iter::once(example)) {
        let t = &r.trace;
        let worst = t
            .energy
            .iter()
            .zip(&t.coercivity_floor)
            .map(|(e, f)| f / e)
            .fold(f64::NEG_INFINITY, f64::max);
        let ok = t.coercivity_floor.iter().zip(&t.energy).all(|(f, e)| *f <= e * (1.0 + 1e-10));
        pass &= ok;
        details.push(format!("{}: max floor/E {:.6}", r.name, worst));
    }
    report(5, "coercivity", pass, details.join("; "));
    assert!(pass);
}

#[test]
fn criterion_06_polynomial_example() {
    let (r, q) = polynomial_example();
    let t = &r.trace;
    let xi = admissible_xi_p(&r.cfg.kernel).unwrap();
    let h = TailWeight::from_kernel(&r.cfg.kernel, xi.profile()).unwrap();
    let bound = thm_case1_improved(xi.p(), xi.profile().clone(), h).unwrap();
    let window = FitWindow::new(1.0, 200.0).with_slope(50.0, 200.0);
    let fit = fit_bound(&t.times, &t.energy, &bound, window).unwrap();
    let target = (-q * q + q + 1.0) / q;
    let prior = prior_work_bounds(*q).unwrap().case1_sup;
    let drift = fit.envelope.drift_last_doubling.abs();
    let pass = fit.slope <= target + 0.15 && drift < 0.05 && fit.slope <= -prior - 0.3;
    report(
        6,
        "polynomial example, first case",
        pass,
        format!(
            "slope {:.4} (target {:.4}, prior sup -{:.1}), C* {:.4} drift {:.2e}",
            fit.slope, target, prior, fit.c_star(), drift
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_case2_quotient() {
    let (r, q) = polynomial_example();
    let t = &r.trace;
    let xi = admissible_xi_p(&r.cfg.kernel).unwrap();
    let h = TailWeight::from_kernel(&r.cfg.kernel, xi.profile()).unwrap();
    let bound = DecayBound::thm_case2(
        xi.p(),
        xi.profile().clone(),
        h,
        t.energy[0],
        t.energy2[0],
        Case2Variant::Improved,
    )
    .unwrap();
    let fit = fit_bound(&t.times, &t.energy, &bound, FitWindow::new(1.0, 200.0)).unwrap();
    let c = fit.c_star();
    let mut dominated = true;
    for (&s, &e) in t.times.iter().zip(&t.energy) {
        if s >= 1.0 {
            dominated &= e <= c * bound.evaluate(s).unwrap() * (1.0 + 1e-12);
        }
    }
    let grid: Vec<f64> = t.times.iter().copied().filter(|&s| s >= 50.0).collect();
    let values = bound.evaluate_on_grid(&grid).unwrap();
    let (bound_slope, _) = loglog_slope(&grid, &values, 50.0, 200.0).unwrap();
    let target = -q / (q + 1.0);
    let drift = fit.envelope.drift_last_doubling.abs();
    let pass = dominated && drift < 0.05 && (bound_slope - target).abs() <= 0.05;
    report(
        7,
        "second-case quotient bound",
        pass,
        format!("C* {c:.4e} drift {drift:.2e}, bound slope {bound_slope:.4} (target {target:.4})"),
    );
    assert!(pass);
}

fn random_xi(rng: &mut ChaCha8Rng) -> XiProfile {
    match rng.gen_range(0..4) {
        0 => XiProfile::constant(1.0).unwrap(),
        1 => XiProfile::constant(0.5).unwrap(),
        2 => XiProfile::constant(3.0).unwrap(),
        _ => XiProfile::tabulated(vec![0.0, 5.0, 10.0], vec![2.0, 1.5, 1.0]).unwrap(),
    }
}

fn random_h(rng: &mut ChaCha8Rng) -> TailWeight {
    match rng.gen_range(0..5) {
        0 => TailWeight::Zero,
        1..=3 => TailWeight::Power {
            amplitude: rng.gen_range(0.1..2.0),
            exponent: rng.gen_range(1..=3) as f64,
        },
        _ => TailWeight::Exponential {
            amplitude: rng.gen_range(0.1..2.0),
            rate: rng.gen_range(0.5..2.0),
        },
    }
}

#[test]
fn criterion_08_comparison_lemma() {
    let mut rng = ChaCha8Rng::seed_from_u64(20261019);
    let mut worst_drift = 0.0f64;
    let mut worst_closed = 0.0f64;
    let mut failures = Vec::new();
    let mut unforced = 0;
    for draw in 0..100 {
        let alpha = rng.gen_range(0.1..2.0);
        let c1 = rng.gen_range(0.1..10.0);
        let c2 = rng.gen_range(0.1..10.0);
        let f0 = rng.gen_range(0.1..10.0);
        let xi = random_xi(&mut rng);
        let h = random_h(&mut rng);
        let problem = Lemma1Problem::new(alpha, xi, h, c1, c2, f0, 1e6);
        let r = lemma1_verify(&problem).unwrap();
        let drift = r.envelope.drift_two_doublings.abs();
        worst_drift = worst_drift.max(drift);
        let mut ok = drift <= 0.05 && r.phi_pass;
        if problem.h.is_zero() {
            unforced += 1;
            let err = r.closed_form_max_rel_err.unwrap();
            worst_closed = worst_closed.max(err);
            ok &= err <= 1e-6;
        }
        if !ok {
            failures.push(draw);
        }
    }
    let pass = failures.is_empty();
    report(
        8,
        "comparison lemma",
        pass,
        format!(
            "100 draws, worst C* drift {worst_drift:.2e}, {unforced} unforced with worst closed-form err \
             {worst_closed:.2e}, failing draws {failures:?}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_lemma2_integral() {
    let kernel = Kernel::polynomial(1.0, 3.0).unwrap();
    let xi = admissible_xi_p(&kernel).unwrap();
    let inside = lemma2_integral(&kernel, xi.profile(), 1.0 / 3.0, 1e8).unwrap();
    let boundary = lemma2_integral(&kernel, xi.profile(), 2.0 / 3.0, 1e8).unwrap();
    let err = (inside.value - 3.0).abs();
    let pass = inside.converged && err <= 1e-6 && !boundary.converged;
    report(
        9,
        "integrability of xi g^(1-sigma)",
        pass,
        format!(
            "sigma=1/3: {:.10} (err {err:.2e}, converged {}); sigma=2/3 converged {}",
            inside.value, inside.converged, boundary.converged
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_10_operator_constants() {
    use std::f64::consts::PI;
    let pi2 = PI * PI;
    let same = ModalOperatorPair::laplacian_same(4, 1.0).unwrap();
    let ident = ModalOperatorPair::laplacian_identity(4, 1.0).unwrap();
    let single = ModalOperatorPair::new(vec![2.0], vec![3.0]).unwrap();
    let quarter = ModalOperatorPair::new(vec![4.0], vec![0.25]).unwrap();
    let integer_same = ModalOperatorPair::new(vec![1.0, 4.0, 9.0, 16.0], vec![1.0, 4.0, 9.0, 16.0]).unwrap();
    let integer_ident = ModalOperatorPair::new(vec![1.0, 4.0, 9.0, 16.0], vec![1.0; 4]).unwrap();
    let checks = [
        ("B=A a0", same.coercivity_constants().0, 1.0),
        ("B=A a1", same.coercivity_constants().1, pi2),
        ("B=A a2", same.case_constants().a2_case1, 1.0),
        ("B=I a0", ident.coercivity_constants().0, 1.0 / pi2),
        ("B=I a1", ident.coercivity_constants().1, 1.0),
        ("B=I a2 first", ident.case_constants().a2_case1, (4.0 * PI) * (4.0 * PI)),
        ("B=I a2 second", ident.case_constants().a2_case2, 1.0),
        ("single a0", single.coercivity_constants().0, 1.5),
        ("single a1", single.coercivity_constants().1, 3.0),
        ("quarter a2 first", quarter.case_constants().a2_case1, 16.0),
        ("quarter a2 second", quarter.case_constants().a2_case2, 4.0),
        ("k^2 B=A a0", integer_same.coercivity_constants().0, 1.0),
        ("k^2 B=A a1", integer_same.coercivity_constants().1, 1.0),
        ("k^2 B=I a0", integer_ident.coercivity_constants().0, 1.0),
        ("k^2 B=I a2 first", integer_ident.case_constants().a2_case1, 16.0),
        ("k^2 B=I a2 second", integer_ident.case_constants().a2_case2, 1.0),
    ];
    let bad: Vec<String> = checks
        .iter()
        .filter(|(_, got, want)| got != want)
        .map(|(name, got, want)| format!("{name}: {got:e} != {want:e}"))
        .collect();
    let pass = bad.is_empty();
    report(
        10,
        "operator constants",
        pass,
        if pass { format!("{} exact matches", checks.len()) } else { bad.join("; ") },
    );
    assert!(pass);
}
