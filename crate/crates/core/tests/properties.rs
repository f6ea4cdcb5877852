use fockherald::design::solve_chi;
use fockherald::filtering::{overlap_matrices, FilterKind, FilterSpec};
use fockherald::herald::{indexed, HeraldModel};
use fockherald::linalg::max_abs_diff;
use fockherald::oracle::{check_case, random_case, random_jsa};
use fockherald::pdc::{build_jsa, CrystalSpec, PmfKind, PumpSpec};
use fockherald::schmidt::{reconstruct_jsa, schmidt_decompose, SchmidtDecomposition};
use fockherald::units::GridSpec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn decomp(seed: u64, bins: usize, k: usize, complex: bool) -> SchmidtDecomposition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jsa = random_jsa(&mut rng, bins, k, complex).unwrap();
    schmidt_decompose(&jsa, 1e-9).unwrap()
}

fn peak(m: &nalgebra::DMatrix<num_complex::Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn gaussian(d: &SchmidtDecomposition, width: f64, eta: f64) -> FilterSpec {
    let center = d.idler.center;
    let span = d.idler.step * (d.idler.len() - 1) as f64;
    FilterSpec::new(
        FilterKind::Gaussian {
            mu_f: center,
            sigma_f: width * span,
        },
        eta,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn schmidt_invariants(seed in any::<u64>(), bins in 4usize..24, k in 1usize..4, complex in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let jsa = random_jsa(&mut rng, bins, k, complex).unwrap();
        let d = schmidt_decompose(&jsa, 0.0).unwrap();
        let s2: f64 = d.b.iter().map(|b| b * b).sum();
        let s4: f64 = d.b.iter().map(|b| b.powi(4)).sum();
        prop_assert!((s2 - 1.0).abs() < 1e-8);
        prop_assert!(s4 <= 1.0 + 1e-12);
        prop_assert!(d.entropy() >= 0.0);
        prop_assert!(d.b.windows(2).all(|w| w[0] >= w[1] - 1e-14));
        let back = reconstruct_jsa(&d);
        prop_assert!(max_abs_diff(&back.amplitude, &jsa.amplitude) < 1e-10 * peak(&jsa.amplitude).max(1.0));
    }

    #[test]
    fn metrics_are_gauge_invariant(
        seed in any::<u64>(),
        bins in 6usize..20,
        k in 1usize..4,
        width in 0.05f64..0.6,
        eta in 0.1f64..1.0,
        chi in 0.0f64..0.5,
        theta in proptest::collection::vec(-3.2f64..3.2, 4),
    ) {
        let d = decomp(seed, bins, k, true);
        let g = d.regauged(&theta);
        let f = gaussian(&d, width, eta);
        let a = HeraldModel::new(&d, &f).unwrap();
        let b = HeraldModel::new(&g, &f).unwrap();
        for n in [1, 2] {
            let (ra, rb) = (a.report(chi, n).unwrap(), b.report(chi, n).unwrap());
            prop_assert!((ra.probability - rb.probability).abs() < 1e-12);
            for (x, y) in [(ra.g2(), rb.g2()), (ra.purity(), rb.purity()), (ra.fidelity(), rb.fidelity())] {
                prop_assert!((x.unwrap() - y.unwrap()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn metrics_are_physical(
        seed in any::<u64>(),
        bins in 6usize..20,
        k in 1usize..4,
        width in 0.05f64..0.6,
        eta in 0.05f64..1.0,
        chi in 0.0f64..0.5,
    ) {
        let d = decomp(seed, bins, k, false);
        for f in [gaussian(&d, width, eta), FilterSpec::none(eta), FilterSpec::new(FilterKind::Delta { mu_f: d.idler.center }, eta).unwrap()] {
            let m = HeraldModel::new(&d, &f).unwrap();
            for n in [1, 2] {
                let r = m.report(chi, n).unwrap();
                prop_assert!((0.0..=1.0).contains(&r.probability));
                let (p, fid) = (r.purity().unwrap(), r.fidelity().unwrap());
                prop_assert!(p > 0.0 && p <= 1.0 + 1e-12);
                prop_assert!((0.0..=1.0 + 1e-12).contains(&fid));
                prop_assert!(fid * fid <= p + 1e-12 || n == 2);
                if n == 2 {
                    prop_assert!((r.g2().unwrap() - 0.5).abs() < 1e-12);
                } else {
                    prop_assert!(r.g2().unwrap() >= 0.0);
                }
            }
        }
    }

    #[test]
    fn index_sums_match_trace_forms(
        seed in any::<u64>(),
        bins in 6usize..16,
        k in 1usize..4,
        width in 0.05f64..0.6,
        eta in 0.1f64..1.0,
        chi in 0.0f64..0.5,
    ) {
        let d = decomp(seed, bins, k, true);
        let f = gaussian(&d, width, eta);
        let o = overlap_matrices(&d, &f).unwrap();
        let m = HeraldModel::new(&d, &f).unwrap();
        let p1 = m.report(chi, 1).unwrap().purity().unwrap();
        let p2 = m.report(chi, 2).unwrap().purity().unwrap();
        prop_assert!((indexed::purity_single_filtered(chi, &d.b, &o) - p1).abs() < 1e-10);
        prop_assert!((indexed::purity_double_filtered(&d.b, &o) - p2).abs() < 1e-10);
    }

    #[test]
    fn solved_chi_meets_target(seed in any::<u64>(), bins in 8usize..20, k in 2usize..4, target in 0.5f64..0.99) {
        let d = decomp(seed, bins, k, false);
        let f = FilterSpec::new(FilterKind::Delta { mu_f: d.idler.center }, 0.5).unwrap();
        let m = HeraldModel::new(&d, &f).unwrap();
        let out = solve_chi(&m, 1, target, 0.5).unwrap();
        if let Some(chi) = out.chi_star(0.5) {
            let fid = m.report(chi, 1).unwrap().fidelity().unwrap();
            prop_assert!(fid >= target);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn closed_forms_match_oracle(seed in any::<u64>(), index in 0usize..6) {
        let r = check_case(&random_case(seed, index).unwrap()).unwrap();
        prop_assert!(r.pass, "{:?}", r.metrics);
    }

    #[test]
    fn swapping_arms_transposes(
        ks in 5.8e-9f64..6.6e-9,
        ki in 5.8e-9f64..6.6e-9,
        kp in 5.8e-9f64..7.2e-9,
        length in 1e-3f64..3e-2,
        gauss in any::<bool>(),
    ) {
        let pump = PumpSpec::new(2.39e15, 0.9e12).unwrap();
        let crystal = CrystalSpec::new(length, kp, ks, ki).unwrap();
        let grid = GridSpec::new(24, 0.02e15, pump.mu()).unwrap();
        let kind = if gauss { PmfKind::Gaussian } else { PmfKind::Sinc };
        let a = build_jsa(&pump, &crystal, &grid, kind).unwrap();
        let b = build_jsa(&pump, &crystal.swapped(), &grid, kind).unwrap();
        prop_assert_eq!(a.transpose().amplitude, b.amplitude);
    }

    #[test]
    fn translation_covariant(shift in -1e12f64..1e12, length in 1e-3f64..3e-2) {
        let crystal = CrystalSpec::new(length, 6.4e-9, 6.0e-9, 6.2e-9).unwrap();
        let p0 = PumpSpec::new(2.39e15, 0.9e12).unwrap();
        let p1 = PumpSpec::new(2.39e15 + 2.0 * shift, 0.9e12).unwrap();
        let a = build_jsa(&p0, &crystal, &GridSpec::new(24, 0.02e15, p0.mu()).unwrap(), PmfKind::Sinc).unwrap();
        let b = build_jsa(&p1, &crystal, &GridSpec::new(24, 0.02e15, p1.mu()).unwrap(), PmfKind::Sinc).unwrap();
        prop_assert!(max_abs_diff(&a.amplitude, &b.amplitude) < 1e-9 * peak(&a.amplitude));
    }
}
