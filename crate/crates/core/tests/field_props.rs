use fracbubble_core::field::io::{raw_bytes, read_raw, sidecar, write_csv, Sidecar};
use fracbubble_core::field::{frac_laplacian, hls_ratio, hs_inner, l2_inner, riesz_potential, sobolev_ratio, Field, Grid};
use fracbubble_core::num::gamma_fn;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sharp constant S in ‖u‖²_{2*} ≤ S·∫((-Δ)^s u)u.
fn sharp_sobolev(n: usize, s: f64) -> f64 {
    let nf = n as f64;
    2f64.powf(-2.0 * s) * std::f64::consts::PI.powf(-s) * gamma_fn((nf - 2.0 * s) / 2.0) / gamma_fn((nf + 2.0 * s) / 2.0)
        * (gamma_fn(nf) / gamma_fn(nf / 2.0)).powf(2.0 * s / nf)
}

/// A smooth compactly supported field: a few random C⁴ bumps.
fn random_field(g: &Grid<f64>, seed: u64) -> Field<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = g.n();
    let bumps: Vec<(Vec<f64>, f64, f64)> = (0..3)
        .map(|_| ((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(), rng.gen_range(0.5..1.5), rng.gen_range(0.2..1.0)))
        .collect();
    Field::from_fn(g, |x| {
        bumps
            .iter()
            .map(|(c, r, a)| {
                let d2 = x.iter().zip(c).map(|(v, c)| (v - c) * (v - c)).sum::<f64>() / (r * r);
                if d2 < 1.0 {
                    a * (1.0 - d2).powi(4)
                } else {
                    0.0
                }
            })
            .sum()
    })
}

fn bubble(g: &Grid<f64>, s: f64) -> Field<f64> {
    let a = (g.n() as f64 - 2.0 * s) / 2.0;
    Field::from_fn(g, |x| (1.0 + x.iter().map(|v| v * v).sum::<f64>()).powf(-a))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn riesz_inverts_laplacian_1d(seed in any::<u64>(), s in 0.05f64..0.24) {
        let g = Grid::<f64>::new(1, 1.0, 256).unwrap();
        let u = random_field(&g, seed);
        let back = riesz_potential(&frac_laplacian(&u, s), s);
        prop_assert!(back.sub(&u).unwrap().sup_norm() <= 1e-10 * u.sup_norm());
    }

    #[test]
    fn riesz_inverts_laplacian_2d_on_resolved_fields(seed in any::<u64>(), s in 0.05f64..0.49) {
        let g = Grid::<f64>::new(2, 1.0, 32).unwrap();
        let u = riesz_potential(&frac_laplacian(&random_field(&g, seed), s), s);
        let back = riesz_potential(&frac_laplacian(&u, s), s);
        prop_assert!(back.sub(&u).unwrap().sup_norm() <= 1e-10 * u.sup_norm());
    }

    #[test]
    fn hs_inner_is_symmetric_and_positive(seed in any::<u64>(), s in 0.05f64..0.24) {
        let g = Grid::<f64>::new(1, 1.0, 128).unwrap();
        let u = random_field(&g, seed);
        let v = random_field(&g, seed.wrapping_add(1));
        let uv = hs_inner(&u, &v, s).unwrap();
        let vu = hs_inner(&v, &u, s).unwrap();
        prop_assert!((uv - vu).abs() <= 1e-12 * uv.abs().max(1e-300));
        prop_assert!(hs_inner(&u, &u, s).unwrap() > 0.0);
        // ⟨Jψ, φ⟩_{H^s} = ∫ψφ
        let lhs = hs_inner(&riesz_potential(&u, s), &v, s).unwrap();
        let rhs = l2_inner(&u, &v).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1e-12));
    }

    #[test]
    fn sobolev_and_hls_below_sharp_constant(seed in any::<u64>()) {
        let s = 0.2;
        let g = Grid::<f64>::new(1, 1.0, 512).unwrap();
        let u = random_field(&g, seed);
        let sharp = sharp_sobolev(1, s);
        prop_assert!(sobolev_ratio(&u, s).powi(2) <= sharp * (1.0 + 1e-8));
        prop_assert!(hls_ratio(&u, s) <= sharp * (1.0 + 1e-8));
    }
}

#[test]
fn bubble_attains_sharp_constants() {
    for (n, s, size) in [(1usize, 0.2, 512usize), (1, 0.1, 512), (2, 0.4, 64)] {
        let g = Grid::<f64>::new(n, 1.0, size).unwrap();
        let z = bubble(&g, s);
        let sharp = sharp_sobolev(n, s);
        let sob = sobolev_ratio(&z, s).powi(2);
        assert!((sob / sharp - 1.0).abs() < 1e-6, "n={n} s={s}: {sob} vs {sharp}");
        let p = (n as f64 + 2.0 * s) / (n as f64 - 2.0 * s);
        let hls = hls_ratio(&z.map(|v| v.powf(p)), s);
        assert!((hls / sharp - 1.0).abs() < 1e-6, "n={n} s={s}: {hls} vs {sharp}");
    }
}

#[test]
fn snapshot_roundtrip() {
    let g = Grid::<f64>::with_center(2, &[0.5, -1.0], 0.7, 16).unwrap();
    let u = random_field(&g, 7);
    let bytes = raw_bytes(&u);
    assert_eq!(bytes.len(), 8 * g.len());
    assert_eq!(read_raw(&bytes), u.values());
    let meta = sidecar(&u);
    assert_eq!((meta.n, meta.size, meta.len, meta.scale), (2, 16, g.len(), 0.7));
    let back: Sidecar = serde_json::from_str(&serde_json::to_string(&meta).unwrap()).unwrap();
    assert_eq!(back, meta);
    let rebuilt = Grid::<f64>::with_center(back.n, &back.center, back.scale, back.size).unwrap();
    assert_eq!(&rebuilt, u.grid());
    let mut csv = Vec::new();
    write_csv(&u, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), g.len() + 1);
    assert_eq!(text.lines().next().unwrap(), "x_1,x_2,value");
}
