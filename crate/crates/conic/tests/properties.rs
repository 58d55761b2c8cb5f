use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ris_conic::hermitian::{quad_form, trace_product, HermitianEigen};
use ris_conic::{gaussian_randomization, solve_sdp, CMat, Complex64, ConeProgram, Projector, SdpStatus, Sense};

fn hermitian(n: usize, entries: &[(f64, f64)]) -> CMat {
    let mut m = CMat::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            let (re, im) = entries[k % entries.len()];
            k += 1;
            if i == j {
                m[(i, i)] = Complex64::new(re, 0.0);
            } else {
                m[(i, j)] = Complex64::new(re, im);
                m[(j, i)] = Complex64::new(re, -im);
            }
        }
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn feasible_points_reverify(
        n in 1usize..4,
        entries in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 6..12),
        rhs in prop::collection::vec(-2.0f64..2.0, 1..4),
        diag_one in any::<bool>(),
    ) {
        let mut prog = ConeProgram::new(n).with_trace_bound(10.0);
        prog.diag_one = diag_one;
        if !diag_one {
            prog.push(CMat::identity(n, n), Sense::Le, 10.0);
        }
        for (i, &b) in rhs.iter().enumerate() {
            let rotated: Vec<_> = entries.iter().cycle().skip(i).take(entries.len()).copied().collect();
            prog.push(hermitian(n, &rotated), Sense::Le, b);
        }
        let sol = solve_sdp(&prog).unwrap();
        prop_assert!(sol.status != SdpStatus::NumericalFailure);
        if sol.status == SdpStatus::Optimal {
            for con in &prog.constraints {
                let scale = con.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1.0);
                prop_assert!(trace_product(&con.matrix, &sol.x) - con.rhs <= 1e-7 * scale);
            }
            if diag_one {
                for j in 0..n {
                    prop_assert!((sol.x[(j, j)].re - 1.0).abs() <= 1e-8);
                }
            }
            let eig = HermitianEigen::new(&sol.x);
            prop_assert!(eig.min_value() >= -1e-7 * eig.max_value().abs().max(1e-300));
            prop_assert_eq!(sol.value, 0.0);
        }
    }

    #[test]
    fn objective_programs_are_psd_and_bounded(
        n in 1usize..5,
        entries in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 10..16),
    ) {
        let c = hermitian(n, &entries);
        let sol = solve_sdp(&ConeProgram::new(n).maximize(c.clone()).with_diag_one()).unwrap();
        prop_assert_eq!(sol.status, SdpStatus::Optimal);
        let eig = HermitianEigen::new(&sol.x);
        prop_assert!(eig.min_value() >= -1e-7 * eig.max_value());
        // Bounded above by n·λ_max(C) and below by the best basis-vector choice.
        let top = HermitianEigen::new(&c).max_value();
        prop_assert!(sol.value <= n as f64 * top.max(0.0) + 1e-7 || sol.value <= c.trace().re + 1e-7);
        prop_assert!(sol.value >= c.trace().re - 1e-7);
    }

    #[test]
    fn randomization_score_monotone_in_samples(
        seed in 0u64..1000,
        entries in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 6..10),
        c1 in 1usize..30,
        extra in 0usize..30,
    ) {
        let r = hermitian(3, &entries);
        let x = CMat::identity(3, 3) + &r * Complex64::new(0.2, 0.0);
        let x = if HermitianEigen::new(&x).min_value() < 0.0 { CMat::identity(3, 3) } else { x };
        let run = |count: usize| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            gaussian_randomization(&x, count, Projector::UnitModulus, &mut rng, |v| quad_form(&r, v)).unwrap().score
        };
        prop_assert!(run(c1 + extra) >= run(c1));
    }
}
