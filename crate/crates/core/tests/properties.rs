use memdecay::bounds::{
    integrability_check, thm_case1_improved, BoundFamily, DecayBound, TailWeight, INTEGRABILITY_DOUBLINGS,
};
use memdecay::energy::{energy_trace, LyapunovConstants};
use memdecay::history::{HistoryData, HistoryShape};
use memdecay::kernels::{admissible_xi_p, lemma2_integral, tail_h, Kernel, XiProfile};
use memdecay::operators::ModalOperatorPair;
use memdecay::quadrature::log_grid;
use memdecay::simulator::{simulate, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn catalog_kernels() -> Vec<Kernel> {
    vec![
        Kernel::polynomial(1.0, 3.0).unwrap(),
        Kernel::polynomial(0.5, 2.5).unwrap(),
        Kernel::polynomial(2.0, 6.0).unwrap(),
        Kernel::exponential(0.5, 1.0).unwrap(),
        Kernel::exponential(2.0, 0.5).unwrap(),
    ]
}

#[test]
fn kernel_sign_and_tail_derivative() {
    let h = 1e-4;
    // e^{-t} underflows past t ≈ 708.
    for k in catalog_kernels() {
        for t in log_grid(500.0, 200).into_iter().map(|t| t + h) {
            let g = k.value(t);
            assert!(g > 0.0 && k.derivative(t) <= 0.0);
            let dg = (k.tail(t + h).unwrap() - k.tail(t - h).unwrap()) / (2.0 * h);
            assert!((dg + g).abs() <= 1e-6 * g, "{k:?} at t = {t}: {dg} vs {g}");
        }
    }
}

#[test]
fn example_pair_is_an_equality() {
    for q in [2.5, 3.0, 4.0] {
        let k = Kernel::polynomial(1.0, q).unwrap();
        let xi = admissible_xi_p(&k).unwrap();
        for t in log_grid(1e3, 100) {
            let rhs = xi.value(t) * k.value(t).powf(xi.p());
            let lhs = k.derivative(t);
            assert!((lhs + rhs).abs() <= 1e-10 * rhs, "q = {q}, t = {t}");
        }
    }
}

#[test]
fn lemma2_converges_at_half_the_critical_sigma() {
    for q in [2.5, 3.0, 4.0, 6.0] {
        let k = Kernel::polynomial(1.0, q).unwrap();
        let xi = admissible_xi_p(&k).unwrap();
        let sigma = (2.0 - xi.p()) / 2.0;
        let r = lemma2_integral(&k, xi.profile(), sigma, 1e6).unwrap();
        assert!(r.converged, "q = {q}: {:?}", r.increments);
    }
}

#[test]
fn tail_weight_nonincreasing_for_constant_xi() {
    let xi = XiProfile::constant(2.0).unwrap();
    for k in catalog_kernels() {
        let grid = log_grid(1e3, 300);
        let h: Vec<f64> = grid.iter().map(|&t| tail_h(&k, &xi, t).unwrap()).collect();
        assert!(h.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn random_pairs_satisfy_modal_inequalities() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let log_uniform = |rng: &mut ChaCha8Rng| 10f64.powf(rng.gen_range(-2.0..4.0));
    let slack = 4.0 * f64::EPSILON;
    for _ in 0..1000 {
        let k = rng.gen_range(1..=32);
        let a: Vec<f64> = (0..k).map(|_| log_uniform(&mut rng)).collect();
        let b: Vec<f64> = (0..k).map(|_| log_uniform(&mut rng)).collect();
        let pair = ModalOperatorPair::new(a.clone(), b.clone()).unwrap();
        let (a0, a1) = pair.coercivity_constants();
        let a2 = pair.case_constants().a2_case1;
        for _ in 0..100 {
            let v: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm: f64 = v.iter().map(|x| x * x).sum();
            let bv: f64 = v.iter().zip(&b).map(|(x, b)| b * x * x).sum();
            let av: f64 = v.iter().zip(&a).map(|(x, a)| a * x * x).sum();
            assert!(a1 * norm <= bv * (1.0 + slack));
            assert!(bv <= a0 * av * (1.0 + slack));
            assert!(av <= a2 * bv * (1.0 + slack));
        }
        let s = 3.0;
        let scaled = ModalOperatorPair::new(a.clone(), b.iter().map(|x| s * x).collect()).unwrap();
        let (s0, s1) = scaled.coercivity_constants();
        assert!((s0 - s * a0).abs() <= 4.0 * f64::EPSILON * s0);
        assert!((s1 - s * a1).abs() <= 4.0 * f64::EPSILON * s1);
        let s2 = scaled.case_constants().a2_case1;
        assert!((s2 - a2 / s).abs() <= 4.0 * f64::EPSILON * s2);
    }
}

fn golden_trace() -> (ModalOperatorPair, Kernel, memdecay::energy::EnergyTrace) {
    let cfg = SimConfig::new(
        Kernel::exponential(0.5, 1.0).unwrap(),
        ModalOperatorPair::new(vec![4.0], vec![1.0]).unwrap(),
        HistoryData::new(HistoryShape::Exponential { rate: 1.0 }, vec![1.0], vec![0.0]).unwrap(),
        1e-3,
        40.0,
    );
    let traj = simulate(&cfg).unwrap();
    let trace = energy_trace(&traj, &cfg.pair, &cfg.kernel, 1, LyapunovConstants::default()).unwrap();
    (cfg.pair, cfg.kernel, trace)
}

#[test]
fn lyapunov_functional_stays_equivalent_to_energy() {
    let (pair, kernel, trace) = golden_trace();
    let (a0, a1) = pair.coercivity_constants();
    let g0 = kernel.total_mass().unwrap();
    let envelope = 2.0 / (1.0 - a0 * g0) * (a0 / a1).sqrt();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..trace.len() {
        let e = trace.energy[i];
        assert!(trace.i1[i].abs() <= envelope * e, "I1 envelope at step {i}");
        let r = trace.i3[i] / e;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    // Frozen from the reference run with M = 10, α₀ = 1: I₃/E spans [10.4792, 11.3965].
    assert!(lo >= 10.47 && hi <= 11.40, "I3/E in [{lo}, {hi}]");
}

#[test]
fn improved_bound_beats_first_bound_eventually() {
    let k = Kernel::polynomial(1.0, 3.0).unwrap();
    let xi = admissible_xi_p(&k).unwrap();
    let h = TailWeight::from_kernel(&k, xi.profile()).unwrap();
    let first = DecayBound::thm_case1_first(xi.p(), xi.profile().clone(), h.clone()).unwrap();
    let improved = thm_case1_improved(xi.p(), xi.profile().clone(), h).unwrap();
    let ratio = |t: f64| improved.evaluate(t).unwrap() / first.evaluate(t).unwrap();
    // Exponents −5/3 and −3/2: the ratio falls like t^{−1/6}.
    let decades: Vec<f64> = (4..=12).map(|d| ratio(10f64.powi(d))).collect();
    assert!(decades.windows(2).all(|w| w[1] < w[0]));
    let per_decade = (decades[8] / decades[4]).log10() / 4.0;
    assert!((per_decade + 1.0 / 6.0).abs() < 0.01, "{per_decade}");
}

#[test]
fn bounds_nonincreasing_from_one() {
    let grid: Vec<f64> = log_grid(1e6, 500).into_iter().filter(|&t| t >= 1.0).collect();
    for q in [2.5, 3.0, 4.0] {
        let k = Kernel::polynomial(1.0, q).unwrap();
        let xi = admissible_xi_p(&k).unwrap();
        let h = TailWeight::from_kernel(&k, xi.profile()).unwrap();
        let p = xi.p();
        let xp = xi.profile().clone();
        let bounds = [
            DecayBound::lemma1(2.0 * p - 2.0, xp.clone(), h.clone()).unwrap(),
            DecayBound::thm_case1_first(p, xp.clone(), h.clone()).unwrap(),
            thm_case1_improved(p, xp.clone(), h.clone()).unwrap(),
        ];
        for b in &bounds {
            assert!(b.is_nonincreasing_on(&grid).unwrap(), "{:?} q = {q}", b.family);
        }
    }
}

#[test]
fn integrability_matches_exponent_arithmetic() {
    // Decay of the first bound for the polynomial family is (1+t)^{-q/2}.
    for q in [2.5, 3.0, 4.0, 6.0] {
        let k = Kernel::polynomial(1.0, q).unwrap();
        let xi = admissible_xi_p(&k).unwrap();
        let h = TailWeight::from_kernel(&k, xi.profile()).unwrap();
        let b = DecayBound::thm_case1_first(xi.p(), xi.profile().clone(), h).unwrap();
        assert!(integrability_check(&b, INTEGRABILITY_DOUBLINGS).unwrap().converged, "q = {q}");
    }
    for (e, integrable) in [(-0.5, false), (-0.9, false), (-1.0, false), (-1.3, true), (-2.0, true)] {
        let b = DecayBound::power(BoundFamily::PriorCase1, e, 0.0);
        assert_eq!(integrability_check(&b, INTEGRABILITY_DOUBLINGS).unwrap().converged, integrable, "{e}");
    }
}
