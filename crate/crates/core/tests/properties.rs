//! Invariants of the prior, the quadrature, the certificates, the sampler and
//! the risk sweep, checked against independent oracles on seeded random
//! inputs.

mod common;

use common::{ln_trapezoid, mat_vec, random_orthogonal, rng};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use shrinkprior::estimator::{bayes_estimate, ShrinkCurve};
use shrinkprior::minimax::{certify, check_corollary1, check_theorem1, named_prior, NamedPrior};
use shrinkprior::prior::HGrid;
use shrinkprior::quadrature::{log_marginal, posterior_kappa_mean, weighted_integral, QuadConfig};
use shrinkprior::risk::{risk_sweep, Estimator};
use shrinkprior::sampler::{posterior_mean, posterior_mean_se, run_chain, SamplerConfig};
use shrinkprior::{HFamily, Monotonicity, Propriety, PriorSpec, Rule};
use statrs::distribution::{ChiSquared, ContinuousCDF};

const P: usize = 10;

fn prior1() -> PriorSpec {
    named_prior(NamedPrior::Prior1, P).unwrap()
}

fn prior2() -> PriorSpec {
    named_prior(NamedPrior::Prior2, P).unwrap()
}

fn half_cauchy() -> PriorSpec {
    PriorSpec::new(P, 0.5, 0.5, HFamily::Constant).unwrap()
}

fn random_family(rng: &mut impl Rng) -> HFamily {
    match rng.random_range(0..3) {
        0 => HFamily::Constant,
        1 => HFamily::LogAdjusted {
            c1: rng.random_range(0.05..2.0),
            c2: rng.random_range(-3.0..3.0),
        },
        _ => HFamily::HyperIb {
            c3: rng.random_range(0.1..4.0),
            c4: rng.random_range(-3.0..3.0),
            d: rng.random_range(-2.0..2.0),
        },
    }
}

fn gaussian(rng: &mut impl Rng, p: usize, scale: f64) -> Vec<f64> {
    (0..p).map(|_| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    }).collect()
}

/// Richardson-extrapolated centered difference of `f` at `x`.
fn derivative(f: impl Fn(f64) -> f64, x: f64, step: f64) -> f64 {
    let centered = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    (4.0 * centered(step / 2.0) - centered(step)) / 3.0
}

#[test]
fn prior_beta_density_is_rotation_invariant() {
    let mut rng = rng(1);
    let cfg = QuadConfig::default();
    for spec in [prior1(), prior2(), half_cauchy()] {
        for _ in 0..10 {
            let beta = gaussian(&mut rng, P, 2.0);
            let q = random_orthogonal(P, &mut rng);
            let here = spec.log_prior_beta(&beta, &cfg).unwrap().log_value().unwrap();
            let rotated = spec.log_prior_beta(&mat_vec(&q, &beta), &cfg).unwrap().log_value().unwrap();
            let flipped: Vec<f64> = beta.iter().map(|v| -v).collect();
            let flipped = spec.log_prior_beta(&flipped, &cfg).unwrap().log_value().unwrap();
            assert!((here - rotated).abs() < 1e-9, "{here} vs {rotated}");
            assert_eq!(here, flipped);
        }
    }
}

#[test]
fn prior1_beta_density_matches_trapezoid() {
    let spec = prior1();
    let mut beta = vec![0.0; P];
    beta[0] = 2.0;
    let got = spec.log_prior_beta(&beta, &QuadConfig::default()).unwrap().log_value().unwrap();
    let (a, b) = (spec.a(), spec.b());
    let half_p = P as f64 / 2.0;
    let r2 = 4.0;
    let oracle = ln_trapezoid(0.0, 1.0, 1_000_000, |k| {
        if k <= 0.0 || k >= 1.0 {
            return f64::NEG_INFINITY;
        }
        -half_p * (2.0 * std::f64::consts::PI).ln() + half_p * (k / (1.0 - k)).ln() - k / (1.0 - k) * r2 / 2.0
            + (a - 1.0) * k.ln()
            + (b - 1.0) * (1.0 - k).ln()
    });
    assert!((got - oracle).abs() < 1e-6, "{got} vs {oracle}");
}

#[test]
fn prior2_marginal_matches_trapezoid() {
    let spec = prior2();
    let got = log_marginal(&spec, 25.0, &QuadConfig::default()).unwrap();
    let half_p = P as f64 / 2.0;
    let oracle = ln_trapezoid(1e-12, 1.0 - 1e-12, 1_000_000, |k| {
        -half_p * (2.0 * std::f64::consts::PI).ln() + half_p * k.ln() - 12.5 * k + spec.log_prior_kappa(k).unwrap()
    });
    assert!((got - oracle).abs() < 1e-6, "{got} vs {oracle}");
}

#[test]
fn marginal_at_origin_is_a_beta_function_and_a_maximum() {
    let mut rng = rng(2);
    let cfg = QuadConfig::default();
    for _ in 0..20 {
        let a = rng.random_range(-4.5..2.0);
        let b = rng.random_range(0.2..3.0);
        let spec = PriorSpec::relaxed(P, a, b, HFamily::Constant).unwrap();
        let half_p = P as f64 / 2.0;
        let at_origin = log_marginal(&spec, 0.0, &cfg).unwrap();
        let exact = -half_p * (2.0 * std::f64::consts::PI).ln() + statrs::function::beta::ln_beta(half_p + a, b);
        assert!((at_origin - exact).abs() < 1e-10, "a = {a}, b = {b}: {at_origin} vs {exact}");
        for r2 in [0.1, 1.0, 10.0, 100.0, 1e4] {
            assert!(log_marginal(&spec, r2, &cfg).unwrap() < at_origin);
        }
    }
}

#[test]
fn log_integral_derivative_is_minus_the_ratio() {
    let mut rng = rng(3);
    let cfg = QuadConfig::default().with_rel_tol(1e-13);
    for _ in 0..40 {
        let h = random_family(&mut rng);
        let spec = PriorSpec::relaxed(P, rng.random_range(-2.0..1.0), rng.random_range(0.3..2.0), h).unwrap();
        let s = P as f64 / 2.0 + spec.a() - 1.0;
        let w: f64 = rng.random_range(0.2..60.0);
        let log_i = |w: f64| weighted_integral(&spec, s, w, &cfg).unwrap().log_value;
        let fd = derivative(log_i, w, 1e-2 * w.min(1.0));
        let ratio = (weighted_integral(&spec, s + 1.0, w, &cfg).unwrap().log_value - log_i(w)).exp();
        assert!((fd + ratio).abs() <= 1e-5 * ratio, "{spec:?} at w = {w}: {fd} vs {}", -ratio);
        assert!(log_i(w * 1.1) < log_i(w));
    }
}

#[test]
fn large_w_behaviour_follows_the_tauberian_limit() {
    // I_s(w) ~ Γ(s+1) w^-(s+1) h(1/w) as w → ∞.
    let w = 1e5_f64;
    let cfg = QuadConfig::default();
    let families = [
        HFamily::Constant,
        HFamily::HyperIb { c3: 2.0, c4: -1.5, d: 0.7 },
        HFamily::LogAdjusted { c1: 0.01, c2: 1.0 },
        HFamily::LogAdjusted { c1: 0.01, c2: -2.0 },
    ];
    for h in families {
        let spec = PriorSpec::new(P, 0.5, 0.7, h).unwrap();
        let s = P as f64 / 2.0 + spec.a() - 1.0;
        let got = weighted_integral(&spec, s, w, &cfg).unwrap().log_value;
        let limit = statrs::function::gamma::ln_gamma(s + 1.0) - (s + 1.0) * w.ln() + h.ln_h(1.0 / w);
        assert!((got - limit).exp_m1().abs() < 0.05, "{h:?}: {got} vs {limit}");
    }
}

/// `∫ κ^{e−1} h(κ) dκ` over `κ ∈ [e^{−hi}, e^{−lo}]`, by Simpson's rule in
/// `u = −log κ`.
fn tail_piece(e: f64, h: &HFamily, lo: f64, hi: f64) -> f64 {
    let n = 200_000;
    let step = (hi - lo) / n as f64;
    let f = |u: f64| (-e * u + h.ln_h((-u).exp())).exp();
    let inner: f64 = (1..n).map(|i| f(lo + i as f64 * step) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(lo) + f(hi) + inner) * step / 3.0
}

/// Whether the mass in `[ε, 1e−10]` stops growing as `ε` goes from `1e−100`
/// to `1e−300`.
fn tail_converges(e: f64, h: &HFamily) -> bool {
    let u = [10.0, 100.0, 300.0].map(|d: f64| d * std::f64::consts::LN_10);
    let near = tail_piece(e, h, u[0], u[1]);
    let far = tail_piece(e, h, u[1], u[2]);
    far.is_finite() && far <= 0.5 * near
}

#[test]
fn propriety_agrees_with_shrinking_neighbourhoods_of_zero() {
    let families = [
        HFamily::Constant,
        HFamily::LogAdjusted { c1: 0.5, c2: -3.0 },
        HFamily::LogAdjusted { c1: 0.5, c2: -2.0 },
        HFamily::LogAdjusted { c1: 0.5, c2: -1.5 },
        HFamily::LogAdjusted { c1: 0.5, c2: -0.5 },
        HFamily::LogAdjusted { c1: 0.5, c2: 1.0 },
        HFamily::HyperIb { c3: 1.0, c4: 2.0, d: -1.0 },
    ];
    for h in families {
        for a in [-5.2, -5.0, -4.8, -0.2, 0.0, 0.2] {
            let spec = PriorSpec::relaxed(P, a, 0.5, h).unwrap();
            let report = spec.classify_propriety();
            assert_eq!(report.prior.is_finite(), tail_converges(a, &h), "prior, {h:?}, a = {a}");
            let e = a + P as f64 / 2.0;
            assert_eq!(report.marginal.is_finite(), tail_converges(e, &h), "marginal, {h:?}, a = {a}");
            if a == 0.0 && report.prior.is_finite() {
                assert_eq!(report.prior, Propriety::ProperBoundary);
            }
        }
    }
}

#[test]
fn bayes_estimate_is_tweedie() {
    let mut rng = rng(4);
    let cfg = QuadConfig::default().with_rel_tol(1e-13);
    let specs = [prior1(), prior2(), half_cauchy()];
    for i in 0..20 {
        let spec = &specs[i % 3];
        let scale = rng.random_range(0.3..3.0);
        let y = gaussian(&mut rng, P, scale);
        let r2: f64 = y.iter().map(|v| v * v).sum();
        // ∇ log m(y) = 2y · d log m / d‖y‖².
        let slope = derivative(|t| log_marginal(spec, t, &cfg).unwrap(), r2, 1e-2 * r2.min(1.0));
        let est = bayes_estimate(spec, &y, &cfg).unwrap();
        let grad_norm = 2.0 * slope.abs() * r2.sqrt();
        for (e, v) in est.iter().zip(&y) {
            assert!((e - v - 2.0 * v * slope).abs() <= 1e-5 * grad_norm, "{e} vs {}", v + 2.0 * v * slope);
        }
    }
}

#[test]
fn fast_paths_are_sound() {
    let mut rng = rng(5);
    let mut proven = 0;
    for _ in 0..200 {
        let h = random_family(&mut rng);
        let a = rng.random_range(-1.0..0.99);
        let b = rng.random_range(0.01..0.999);
        let spec = PriorSpec::new(P, a, b, h).unwrap();
        let general = check_theorem1(&spec).unwrap();
        let report = certify(&spec).unwrap();
        assert_eq!(report.is_proven(), general.is_proven(), "{spec:?}");
        if report.is_proven() {
            proven += 1;
        }
        if h.monotonicity() != Monotonicity::NonMonotone {
            let corollary = check_corollary1(&spec).unwrap();
            if corollary.is_proven() {
                assert!(general.is_proven(), "{spec:?}");
            }
            // With its hypothesis on H(1) met, the corollary is exactly the
            // general inequality solved for b.
            if corollary.b_threshold.is_some() {
                assert_eq!(corollary.is_proven(), general.is_proven(), "{spec:?}");
            }
        } else {
            assert_eq!(report.rule, Rule::Thm1);
        }
    }
    assert!(proven > 10 && proven < 190, "{proven} of 200 proven");
}

/// Analytic `(max H₂, H₁(1))` for the hypergeometric inverted-beta factor,
/// whose `H` has at most one interior stationary point.
fn hyper_ib_extremes(c3: f64, c4: f64, d: f64) -> (f64, f64) {
    let big_h = |k: f64| d * k + c4 * c3 * k / (1.0 + c3 * k);
    let mut points = vec![0.0, 1.0];
    let q = -c4 * c3 / d;
    if q > 0.0 {
        let k = (q.sqrt() - 1.0) / c3;
        if k > 0.0 && k < 1.0 {
            points.push(k);
        }
    }
    points.sort_by(f64::total_cmp);
    let values: Vec<f64> = points.iter().map(|&k| big_h(k)).collect();
    let mut running = 0.0_f64;
    let mut max_h2 = 0.0_f64;
    for &v in &values {
        running = running.min(v);
        max_h2 = max_h2.max(v - running);
    }
    (max_h2, values.iter().cloned().fold(0.0, f64::min))
}

#[test]
fn grid_extremes_match_analytic_extremes() {
    let mut rng = rng(6);
    let mut non_monotone = 0;
    for _ in 0..300 {
        let (c3, c4, d) = (rng.random_range(0.1..6.0), rng.random_range(-4.0..4.0), rng.random_range(-3.0..3.0));
        let h = HFamily::HyperIb { c3, c4, d };
        if h.monotonicity() == Monotonicity::NonMonotone {
            non_monotone += 1;
        }
        let grid = HGrid::new(&h);
        let (max_h2, h1_one) = hyper_ib_extremes(c3, c4, d);
        assert!((grid.max_h2() - max_h2).abs() < 1e-6, "{h:?}: {} vs {max_h2}", grid.max_h2());
        assert!((grid.h1_at_one() - h1_one).abs() < 1e-6, "{h:?}: {} vs {h1_one}", grid.h1_at_one());
    }
    assert!(non_monotone > 20);
}

#[test]
fn shrinkage_factor_has_a_strict_interior_maximum() {
    let norms: Vec<f64> = (1..=300).map(|i| i as f64 * 0.05).collect();
    for spec in [prior1(), prior2()] {
        let curve = ShrinkCurve::evaluate(&spec, &norms, &QuadConfig::default()).unwrap();
        let phi: Vec<f64> = curve.points.iter().map(|p| p.1).collect();
        let peak = (1..phi.len() - 1).find(|&i| phi[i] > phi[i - 1] && phi[i] > phi[i + 1]);
        let peak = peak.expect("no interior local maximum");
        assert!(phi[peak] > curve.limit);
        assert!(phi[phi.len() - 1] < phi[peak]);
    }
}

#[test]
fn prior1_kappa_density_is_symmetric() {
    let spec = prior1();
    for i in 1..100 {
        let k = i as f64 / 100.0;
        let (l, r) = (spec.log_prior_kappa(k).unwrap(), spec.log_prior_kappa(1.0 - k).unwrap());
        assert!((l - r).abs() < 1e-12, "{k}: {l} vs {r}");
    }
}

#[test]
#[allow(clippy::needless_range_loop)]
fn sampler_transitions_are_reversible() {
    // Under detailed balance the count of i → j moves matches j → i.
    let spec = prior2();
    let mut y = vec![0.0; P];
    y[0] = 3.0;
    let cfg = SamplerConfig {
        iterations: 400_000,
        burn_in: 1_000,
        seed: 21,
        ..SamplerConfig::for_spec(&spec)
    };
    let trace = run_chain(&spec, &y, &cfg).unwrap();
    let bins = 50;
    let bin = |k: f64| ((k * bins as f64) as usize).min(bins - 1);
    let mut counts = vec![vec![0u64; bins]; bins];
    for pair in trace.kept_kappa().windows(2) {
        counts[bin(pair[0])][bin(pair[1])] += 1;
    }
    let mut stat = 0.0;
    let mut df = 0;
    for i in 0..bins {
        for j in i + 1..bins {
            let (n_ij, n_ji) = (counts[i][j] as f64, counts[j][i] as f64);
            if n_ij + n_ji > 0.0 {
                stat += (n_ij - n_ji).powi(2) / (n_ij + n_ji);
                df += 1;
            }
        }
    }
    let p_value = ChiSquared::new(df as f64).unwrap().sf(stat);
    assert!(p_value > 1e-3, "χ² = {stat} on {df} df, p = {p_value}");
}

#[test]
fn rao_blackwell_and_plain_estimates_agree() {
    let mut rng = rng(7);
    let spec = prior1();
    let mut worst = 0.0_f64;
    for chain in 0..10 {
        let scale = rng.random_range(0.5..2.0);
        let y = gaussian(&mut rng, P, scale);
        let base = SamplerConfig {
            iterations: 40_000,
            seed: 7,
            chain_id: chain,
            ..SamplerConfig::for_spec(&spec)
        };
        let rb = run_chain(&spec, &y, &base).unwrap();
        let plain = run_chain(&spec, &y, &SamplerConfig { rao_blackwell: false, ..base }).unwrap();
        let (m1, s1) = (posterior_mean(&rb).unwrap(), posterior_mean_se(&rb));
        let (m2, s2) = (posterior_mean(&plain).unwrap(), posterior_mean_se(&plain));
        for i in 0..P {
            worst = worst.max((m1[i] - m2[i]).abs() / (s1[i] * s1[i] + s2[i] * s2[i]).sqrt());
        }
        assert!(s1.iter().zip(&s2).all(|(a, b)| a < b), "conditioning should not add variance");
    }
    assert!(worst < 4.5, "max z = {worst}");
}

#[test]
fn huge_observation_is_barely_shrunk() {
    let spec = prior1();
    let mut y = vec![0.0; P];
    y[0] = 2e4_f64.sqrt();
    let cfg = SamplerConfig {
        iterations: 20_000,
        seed: 9,
        ..SamplerConfig::for_spec(&spec)
    };
    let (mean, _) = run_chain(&spec, &y, &cfg).unwrap().kappa_mean().unwrap();
    assert!(mean < 0.01, "{mean}");
    let exact = posterior_kappa_mean(&spec, 2e4, &QuadConfig::default()).unwrap();
    assert!(exact < 0.01);
}

#[test]
fn risk_sweep_invariants() {
    let grid: Vec<f64> = (0..=10).map(f64::from).collect();
    let estimators = [
        Estimator::Bayes { label: "prior1".into(), spec: prior1() },
        Estimator::Bayes { label: "prior2".into(), spec: prior2() },
        Estimator::JamesStein,
        Estimator::Identity,
    ];
    let cfg = QuadConfig::default();
    let curve = risk_sweep(&estimators, P, &grid, 4_000, 31, &cfg).unwrap();
    for (g, r) in grid.iter().enumerate() {
        let risks = &curve.risks[g];
        let se = &curve.mc_se[g];
        for e in 0..2 {
            assert!(risks[e] < P as f64 + 4.0 * se[e], "{} at {r}: {}", estimators[e].label(), risks[e]);
        }
        if *r <= 3.0 {
            assert!(risks[0] < risks[2] && risks[1] < risks[2], "no dominance at {r}: {risks:?}");
        }
        assert!((risks[3] - P as f64).abs() < 5.0 * se[3]);
    }
    for e in 0..2 {
        let at_ten = curve.risks[10][e];
        assert!((9.0..=10.3).contains(&at_ten), "{at_ten}");
    }
    let again = risk_sweep(&estimators, P, &grid[..3], 4_000, 31, &cfg).unwrap();
    assert_eq!(again.risks[..], curve.risks[..3]);
}
