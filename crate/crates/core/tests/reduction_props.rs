use fracbubble_core::field::{energy, frac_laplacian, Field, Grid};
use fracbubble_core::landscape::{build_slab, find_critical_points, CriticalKind, CriticalPoint, Landscape, SearchOptions};
use fracbubble_core::model::{CompactWeight, ProblemParams};
use fracbubble_core::reduction::{construct_solution, kernel_certificate, NewtonOptions, Reduction, SolveOptions};
use fracbubble_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params() -> ProblemParams<f64> {
    ProblemParams::validate(1, 0.2, 1.5, 0.0).unwrap()
}

fn weight() -> CompactWeight<f64> {
    CompactWeight::single(vec![0.0], 1.0, 1.0, 2).unwrap()
}

fn setup(mu: f64, xi: f64, size: usize) -> Reduction<f64> {
    let g = Grid::with_center(1, &[xi], mu, size).unwrap();
    Reduction::new(&params(), &weight(), &g).unwrap()
}

fn random_field(g: &Grid<f64>, seed: u64) -> Field<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c, r, a): (f64, f64, f64) = (rng.gen_range(-0.3..0.3), rng.gen_range(0.1..0.5), rng.gen_range(-1.0..1.0));
    let tail = rng.gen_range(0.1..1.0);
    Field::from_fn(g, |x| {
        let d2 = (x[0] - c).powi(2) / (r * r);
        a * (-d2).exp() + tail / (1.0 + x[0] * x[0])
    })
}

fn maximum() -> CriticalPoint<f64> {
    let land = Landscape::new(&params(), &weight()).unwrap();
    let slab = build_slab(&land).unwrap();
    find_critical_points(&land, &slab, &SearchOptions::default()).unwrap().into_iter().find(|c| c.kind == CriticalKind::Max).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn tangents_span_the_kernel(mu in 0.05f64..2.0, xi in -0.5f64..0.5, seed in any::<u64>()) {
        let red = setup(mu, xi, 256);
        let b = red.bubble(mu, vec![xi]).unwrap();
        let lin = red.linearized(&b);
        let v = random_field(red.grid(), seed);
        let tv = lin.apply(&v).unwrap();
        for q in lin.tangents() {
            let tq = lin.apply(&q).unwrap();
            prop_assert!(tq.sup_norm() <= 1e-10 * q.sup_norm());
            // T is self-adjoint in Ḣ^s, so the range of T is orthogonal to its kernel
            let ip = lin.hs_inner(&tv, &q).unwrap();
            let scale = lin.hs_inner(&tv, &tv).unwrap().sqrt() * lin.hs_inner(&q, &q).unwrap().sqrt();
            prop_assert!(ip.abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn bordered_solve_roundtrip(seed in any::<u64>(), b0 in -1.0f64..1.0, b1 in -1.0f64..1.0) {
        let red = setup(0.3, 0.1, 256);
        let b = red.bubble(0.3, vec![0.1]).unwrap();
        let op = red.linearized(&b).bordered();
        let v = random_field(red.grid(), seed);
        let (f, g) = op.apply(&v, &[b0, b1]).unwrap();
        let (v2, beta) = op.solve(&f, &g, 1e-13).unwrap();
        prop_assert!(v2.sub(&v).unwrap().sup_norm() <= 1e-8 * v.sup_norm());
        prop_assert!((beta[0] - b0).abs() <= 1e-8 && (beta[1] - b1).abs() <= 1e-8, "{:?}", beta);
    }
}

#[test]
fn zero_eps_is_the_bubble() {
    let red = setup(0.1, 0.0, 256);
    let b = red.bubble(0.1, vec![0.0]).unwrap();
    let s = red.solve_auxiliary(&b, 0.0, &NewtonOptions::default()).unwrap();
    assert!(s.w.values().iter().all(|v| *v == 0.0));
    assert!(s.alpha.iter().all(|v| *v == 0.0));
}

#[test]
fn even_weight_gives_even_correction() {
    let red = setup(0.1, 0.0, 512);
    let b = red.bubble(0.1, vec![0.0]).unwrap();
    let s = red.solve_auxiliary(&b, 1e-2, &NewtonOptions::default()).unwrap();
    let w = s.w.values();
    let m = w.len();
    let odd = (0..m).fold(0.0f64, |a, i| a.max((w[i] - w[m - 1 - i]).abs()));
    assert!(odd <= 1e-10 * s.w.sup_norm(), "{odd}");
    // the ξ multiplier vanishes by symmetry
    assert!(s.alpha[0].abs() <= 1e-10 * s.alpha[1].abs().max(1e-300), "{:?}", s.alpha);
    assert!(s.orthogonality <= 1e-10);
}

#[test]
fn correction_is_linear_in_eps() {
    let red = setup(0.1, 0.0, 512);
    let b = red.bubble(0.1, vec![0.0]).unwrap();
    let opts = NewtonOptions::default();
    let w1 = red.solve_auxiliary(&b, 1e-4, &opts).unwrap().w_hs();
    let w2 = red.solve_auxiliary(&b, 1e-3, &opts).unwrap().w_hs();
    assert!((w2 / w1 / 10.0 - 1.0).abs() < 0.02, "{}", w2 / w1);
}

#[test]
fn kernel_has_dimension_n_plus_one() {
    for (n, s, size) in [(1usize, 0.2, 64usize), (2, 0.4, 16)] {
        let p = ProblemParams::validate(n, s, 1.5, 0.0).unwrap();
        let red = Reduction::new(&p, &CompactWeight::single(vec![0.0; n], 1.0, 1.0, 2).unwrap(), &Grid::new(n, 1.0, size).unwrap()).unwrap();
        let b = red.bubble(1.0, vec![0.0; n]).unwrap();
        let k = kernel_certificate(&p, &b, size).unwrap();
        assert!(k.pass && k.kernel_dim == n + 1, "{k:?}");
        assert!(k.smallest[n] < 1e-10 && k.smallest[n + 1] > 1e-3, "{k:?}");
    }
}

#[test]
fn constructed_solution_solves_the_equation() {
    let p = params();
    let h = weight();
    let cp = maximum();
    let eps = 1e-2;
    let sol = construct_solution(&p, &h, std::slice::from_ref(&cp), CriticalKind::Max, eps, 1024, &SolveOptions::default()).unwrap();
    // residual recomputed directly from the field
    let u = &sol.u;
    let lap = frac_laplacian(u, p.s());
    let mut err = 0.0f64;
    let mut scale = 0.0f64;
    for (i, (l, v)) in lap.values().iter().zip(u.values()).enumerate() {
        let up = v.max(0.0);
        let r = up.powf(p.p()) + eps * h.eval(u.grid().point(i)) * up.powf(p.q());
        err = err.max((l - r).abs());
        scale = scale.max(up.powf(p.p()));
    }
    let floor = sol.report.floor_sup.max(1e3 * f64::EPSILON);
    assert!(err / scale <= 10.0 * floor, "{} vs floor {}", err / scale, floor);
    assert!(sol.report.positive && sol.report.min_u > 0.0);
    // f_ε(u) = f₀(z) − εΓ + o(ε)
    let z = fracbubble_core::bubble::BubblePoint::new(&p, Landscape::new(&p, &h).unwrap().alpha(), cp.mu, cp.xi.clone()).unwrap().sample(u.grid());
    let fe = energy(u, &p.with_eps(eps).unwrap(), &h).feps;
    let f0 = energy(&z, &p, &h).f0;
    assert!((fe - f0 + eps * cp.gamma).abs() < 0.05 * eps * cp.gamma, "{fe} {f0} {}", cp.gamma);
    // the outer refinement moves the bubble by O(ε) at most
    assert!((sol.report.mu / cp.mu - 1.0).abs() < 10.0 * eps);
}

#[test]
fn missing_kind_is_reported() {
    let cp = maximum();
    let r = construct_solution(&params(), &weight(), &[cp], CriticalKind::Min, 1e-2, 256, &SolveOptions::default());
    assert!(matches!(r, Err(Error::NotRequestedKind { .. })));
}
