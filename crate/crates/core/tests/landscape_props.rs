use fracbubble_core::bubble::{alpha_ns, BubblePoint};
use fracbubble_core::field::{energy, Grid};
use fracbubble_core::landscape::{
    asymptotic_window, build_slab, expected_mu_slope, expected_xi_slope, find_critical_points, fit_loglog, mu_sweep, small_mu_limit, xi_sweep,
    CriticalKind, FnFunctional, Landscape, LimitDiagnostic, SearchOptions, SlabSpec,
};
use fracbubble_core::model::{Bump, CompactWeight, ProblemParams};
use fracbubble_core::num::gamma_fn;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params(q: f64) -> ProblemParams<f64> {
    ProblemParams::validate(1, 0.2, q, 0.0).unwrap()
}

fn unit_bump() -> CompactWeight<f64> {
    CompactWeight::single(vec![0.0], 1.0, 1.0, 2).unwrap()
}

fn two_bumps() -> CompactWeight<f64> {
    CompactWeight::new(vec![Bump::new(vec![-0.7], 0.8, 1.0, 2), Bump::new(vec![1.1], 0.5, 0.6, 3)]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn matches_grid_quadrature(mu in 0.05f64..3.0, xi in -2.0f64..2.0) {
        let p = params(1.5);
        let h = two_bumps();
        let land = Landscape::new(&p, &h).unwrap();
        let g = land.gamma(mu, &[xi]).unwrap().gamma;
        let grid = Grid::with_center(1, &[xi], mu, 4096).unwrap();
        let z = BubblePoint::new(&p, land.alpha(), mu, vec![xi]).unwrap().sample(&grid);
        let gz = energy(&z, &p, &h).g;
        prop_assert!((g - gz).abs() <= 1e-6 * g.abs(), "{} vs {}", g, gz);
    }

    #[test]
    fn linear_and_translation_covariant(mu in 0.05f64..3.0, xi in -2.0f64..2.0, c in -2.0f64..2.0, v in -5.0f64..5.0) {
        let p = params(1.5);
        let h = two_bumps();
        let l = Landscape::new(&p, &h).unwrap();
        let g = l.gamma(mu, &[xi]).unwrap();
        let scaled = Landscape::new(&p, &h.scaled(c.abs() + 0.1)).unwrap().gamma(mu, &[xi]).unwrap();
        prop_assert!((scaled.gamma - (c.abs() + 0.1) * g.gamma).abs() <= 1e-12 * scaled.gamma.abs());
        let moved = Landscape::new(&p, &h.translated(&[v])).unwrap().gamma(mu, &[xi + v]).unwrap();
        prop_assert!((moved.gamma - g.gamma).abs() <= 1e-9 * g.gamma.abs());
        let sum = Landscape::unchecked(&p, &CompactWeight::new([h.bumps.clone(), unit_bump().bumps].concat()).unwrap()).unwrap();
        let single = Landscape::new(&p, &unit_bump()).unwrap();
        let lhs = sum.gamma(mu, &[xi]).unwrap().gamma;
        let rhs = g.gamma + single.gamma(mu, &[xi]).unwrap().gamma;
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs());
    }

    #[test]
    fn sign_follows_weight(mu in 0.05f64..3.0, xi in -3.0f64..3.0) {
        let p = params(1.5);
        let pos = Landscape::new(&p, &two_bumps()).unwrap().gamma(mu, &[xi]).unwrap().gamma;
        let neg = Landscape::unchecked(&p, &two_bumps().scaled(-1.0)).unwrap().gamma(mu, &[xi]).unwrap().gamma;
        prop_assert!(pos > 0.0 && neg < 0.0);
        prop_assert!((pos + neg).abs() <= 1e-12 * pos);
    }
}

#[test]
fn opposite_bumps_cancel() {
    let p = params(1.5);
    let h = CompactWeight::new(vec![Bump::new(vec![0.3], 1.0, 1.0, 2), Bump::new(vec![0.3], 1.0, -1.0, 2)]).unwrap();
    let land = Landscape::unchecked(&p, &h).unwrap();
    let reference = Landscape::new(&p, &unit_bump()).unwrap();
    for (mu, xi) in [(0.1, 0.0), (1.0, 0.3), (4.0, -2.0)] {
        let g = land.gamma(mu, &[xi]).unwrap();
        let r = reference.gamma(mu, &[xi]).unwrap().gamma;
        assert!(g.gamma.abs() <= 1e-14 * r, "{} at ({mu}, {xi})", g.gamma);
    }
}

#[test]
fn symmetric_weight_has_flat_center() {
    let land = Landscape::new(&params(1.5), &unit_bump()).unwrap();
    for mu in [0.01, 0.3, 2.0] {
        let g = land.gamma(mu, &[0.0]).unwrap();
        assert!(g.grad[1].abs() <= 1e-12 * g.gamma / mu, "{:?}", g.grad);
        let a = land.gamma(mu, &[0.4]).unwrap();
        let b = land.gamma(mu, &[-0.4]).unwrap();
        assert!((a.gamma - b.gamma).abs() <= 1e-13 * a.gamma);
        assert!((a.grad[1] + b.grad[1]).abs() <= 1e-12 * a.grad[1].abs());
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for (n, weight) in [
        (1usize, two_bumps()),
        (2, CompactWeight::new(vec![Bump::new(vec![0.3, 0.0], 1.0, 1.0, 2), Bump::new(vec![-0.5, 0.4], 0.6, 0.5, 2)]).unwrap()),
    ] {
        let p = ProblemParams::validate(n, if n == 1 { 0.2 } else { 0.4 }, 1.5, 0.0).unwrap();
        let land = Landscape::new(&p, &weight).unwrap();
        let points = if n == 1 { 20 } else { 6 };
        for _ in 0..points {
            let mu = rng.gen_range(0.05f64..2.0);
            let xi: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let s = land.gamma(mu, &xi).unwrap();
            let scale = s.grad.iter().fold(s.gamma.abs() / mu, |m, v| m.max(v.abs()));
            for j in 0..=n {
                let h = 1e-5 * mu;
                let at = |d: f64| {
                    let mut x = xi.clone();
                    let mut m = mu;
                    if j == 0 { m += d } else { x[j - 1] += d }
                    land.gamma(m, &x).unwrap().gamma
                };
                let fd = (at(h) - at(-h)) / (2.0 * h);
                assert!((fd - s.grad[j]).abs() <= 1e-6 * scale, "n={n} j={j} at ({mu}, {xi:?}): {fd} vs {}", s.grad[j]);
            }
        }
    }
}

#[test]
fn far_field_matches_point_mass() {
    // far away h acts like a point mass: Γ ≈ α^{q+1}/(q+1)·∫h·(μ/|ξ|²)^{γ_s}
    let p = params(1.5);
    let land = Landscape::new(&p, &unit_bump()).unwrap();
    let mass = std::f64::consts::PI.sqrt() * gamma_fn(3.0) / gamma_fn(3.5);
    for rho in [1e3f64, 1e4] {
        let g = land.gamma(1.0, &[rho]).unwrap().gamma;
        let pred = land.alpha().powf(2.5) / 2.5 * mass * rho.powf(-2.0 * p.gamma_s());
        assert!((g / pred - 1.0).abs() < 10.0 / (rho * rho), "rho={rho}: {g} vs {pred}");
    }
}

#[test]
fn tail_rates_match_exponents() {
    for q in [1.5, 0.5] {
        let p = params(q);
        let land = Landscape::new(&p, &unit_bump()).unwrap();
        let mu = fit_loglog(mu_sweep(&land, &[0.0], &asymptotic_window(&p)).unwrap()).unwrap();
        assert!((mu.slope / expected_mu_slope(&p) - 1.0).abs() < 0.02, "q={q}: {}", mu.slope);
        let radii: Vec<f64> = (3..10).map(|k| 2f64.powi(k)).collect();
        let xi = fit_loglog(xi_sweep(&land, 1.0, &[0.0], &radii).unwrap()).unwrap();
        assert!((xi.slope / expected_xi_slope(&p) - 1.0).abs() < 0.02, "q={q}: {}", xi.slope);
        let sup: Vec<f64> = mu.samples.iter().map(|s| s.1).collect();
        assert!(sup.windows(2).all(|w| w[1] < w[0]));
    }
}

#[test]
fn small_mu_regimes() {
    let land = Landscape::new(&params(1.5), &unit_bump()).unwrap();
    match small_mu_limit(&land, &[0.0], &asymptotic_window(land.params())).unwrap() {
        LimitDiagnostic::Finite { a_hat, a_pred, .. } => assert!((a_hat / a_pred - 1.0).abs() < 1e-3, "{a_hat} vs {a_pred}"),
        d => panic!("expected a finite limit, got {d:?}"),
    }
    let land = Landscape::new(&params(0.5), &unit_bump()).unwrap();
    match small_mu_limit(&land, &[0.0], &(4..=12).collect::<Vec<_>>()).unwrap() {
        LimitDiagnostic::Divergent { consistent_with_infinity, .. } => assert!(consistent_with_infinity),
        d => panic!("expected divergence, got {d:?}"),
    }
}

#[test]
fn maximum_of_symmetric_bump_is_centered() {
    let p = params(1.5);
    let land = Landscape::new(&p, &unit_bump()).unwrap();
    let slab = build_slab(&land).unwrap();
    assert!(slab.contains(slab.max_side.mu0, &slab.max_side.xi0));
    assert!(slab.max_side.boundary_sampled < 0.5 * slab.b());
    assert!(slab.min_side.is_none());
    let pts = find_critical_points(&land, &slab, &SearchOptions::default()).unwrap();
    let max = pts.iter().find(|c| c.kind == CriticalKind::Max).unwrap();
    assert!(max.xi[0].abs() < 1e-8, "{max:?}");
    assert!(max.grad_norm <= 1e-8);
    assert!(slab.contains(max.mu, &max.xi));

    // scaling h by 10 leaves the critical point and scales Γ by 10
    let loud = Landscape::new(&p, &unit_bump().scaled(10.0)).unwrap();
    let slab10 = build_slab(&loud).unwrap();
    let pts10 = find_critical_points(&loud, &slab10, &SearchOptions::default()).unwrap();
    let max10 = pts10.iter().find(|c| c.kind == CriticalKind::Max).unwrap();
    assert!((max10.mu / max.mu - 1.0).abs() < 1e-6, "{} vs {}", max10.mu, max.mu);
    assert!((max10.gamma / max.gamma - 10.0).abs() < 1e-6);
}

#[test]
fn sign_changing_weight_gives_max_and_min() {
    let p = params(1.5);
    let h = CompactWeight::new(vec![Bump::new(vec![-3.0], 1.0, 1.0, 2), Bump::new(vec![3.0], 1.0, -1.0, 2)]).unwrap();
    let land = Landscape::new(&p, &h).unwrap();
    let slab = build_slab(&land).unwrap();
    assert!(slab.min_side.is_some());
    let pts = find_critical_points(&land, &slab, &SearchOptions::default()).unwrap();
    let max = pts.iter().find(|c| c.kind == CriticalKind::Max).unwrap();
    let min = pts.iter().find(|c| c.kind == CriticalKind::Min).unwrap();
    // antisymmetric weight: the two are mirror images
    assert!((max.xi[0] + min.xi[0]).abs() < 1e-6 && (max.mu / min.mu - 1.0).abs() < 1e-6);
    assert!((max.gamma + min.gamma).abs() < 1e-6 * max.gamma);
    assert!(max.xi[0] < 0.0 && max.gamma > 0.0);
}

#[test]
fn synthetic_quadratic_is_located() {
    let (mc, xc) = (0.37f64, [0.21f64, -0.13]);
    let f = FnFunctional {
        dim: 2,
        f: move |mu: f64, xi: &[f64]| {
            let l = (mu / mc).ln();
            let d: Vec<f64> = xi.iter().zip(&xc).map(|(a, b)| a - b).collect();
            let g = 1.0 - l * l - d.iter().map(|v| v * v).sum::<f64>();
            (g, vec![-2.0 * l / mu, -2.0 * d[0], -2.0 * d[1]])
        },
    };
    let slab = SlabSpec::manual(0.01, 10.0, 1.0, 2);
    let pts = find_critical_points(&f, &slab, &SearchOptions::default()).unwrap();
    assert_eq!(pts.len(), 1);
    let c = &pts[0];
    assert_eq!(c.kind, CriticalKind::Max);
    assert!((c.mu / mc - 1.0).abs() < 1e-8 && (c.xi[0] - xc[0]).abs() < 1e-8 && (c.xi[1] - xc[1]).abs() < 1e-8, "{c:?}");
}

#[test]
fn alpha_is_shared_with_bubble() {
    let p = params(1.5);
    assert_eq!(Landscape::new(&p, &unit_bump()).unwrap().alpha(), alpha_ns(&p).unwrap());
}
