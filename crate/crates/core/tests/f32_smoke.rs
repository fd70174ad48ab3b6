use fracbubble_core::bubble::{alpha_ns, BubblePoint};
use fracbubble_core::field::Grid;
use fracbubble_core::landscape::Landscape;
use fracbubble_core::model::{CompactWeight, ProblemParams};
use fracbubble_core::reduction::{NewtonOptions, Reduction};
use fracbubble_core::regularity::{derive_growth, run_iteration, RawTerm};

#[test]
fn single_precision_pipeline() {
    let p32 = ProblemParams::<f32>::validate(1, 0.2, 1.5, 0.0).unwrap();
    let p64 = ProblemParams::<f64>::validate(1, 0.2, 1.5, 0.0).unwrap();
    assert!((p32.p() as f64 - p64.p()).abs() < 1e-6);

    let a32 = alpha_ns(&p32).unwrap();
    let a64 = alpha_ns(&p64).unwrap();
    assert!((a32 as f64 / a64 - 1.0).abs() < 1e-5, "{a32} vs {a64}");

    let g = Grid::<f32>::with_center(1, &[0.0], 0.5, 128).unwrap();
    let b = BubblePoint::new(&p32, a32, 0.5, vec![0.0]).unwrap();
    assert!(b.pde_residual(&g, p32.p()) < 1e-4);

    let h32 = CompactWeight::<f32>::single(vec![0.0], 1.0, 1.0, 2).unwrap();
    let h64 = CompactWeight::<f64>::single(vec![0.0], 1.0, 1.0, 2).unwrap();
    let g32 = Landscape::new(&p32, &h32).unwrap().gamma(0.5, &[0.2]).unwrap().gamma;
    let g64 = Landscape::new(&p64, &h64).unwrap().gamma(0.5, &[0.2]).unwrap().gamma;
    assert!((g32 as f64 / g64 - 1.0).abs() < 1e-4, "{g32} vs {g64}");

    let red = Reduction::new(&p32, &h32, &g).unwrap();
    let s = red.solve_auxiliary(&b, 1e-2, &NewtonOptions::default()).unwrap();
    assert!(s.w_hs() > 0.0 && s.orthogonality < 1e-3, "{}", s.orthogonality);

    let spec = derive_growth(&p32, &[RawTerm::new(0.0, None)]).unwrap();
    let t = run_iteration(&b.sample(&g), &spec, 0.1).unwrap();
    assert!(t.monotone && t.subset_chain && t.phi_bound);
}
