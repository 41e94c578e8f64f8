use permfield::arith::{arithmetic_distance, classify, torus_norm};
use permfield::cycles::{block_index_of, sample_cycle_structure};
use permfield::field::{eval_point, split_field};
use permfield::ratefn::{lambda_derivs, legendre};
use permfield::rng::stream;
use permfield::{Block, CycleCounts, CycleStructure, ExtReal, FieldSpec, Mesh, TorusPoint};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn csv_round_trip(lengths in prop::collection::vec(1u64..500, 1..40)) {
        let s = CycleStructure::from_lengths(&lengths).unwrap();
        prop_assert_eq!(CycleStructure::from_csv(&s.to_csv()).unwrap(), s);
    }

    #[test]
    fn sampled_lengths_sum_to_n(n in 1u64..5_000_000, seed in any::<u64>()) {
        let s = sample_cycle_structure(n, &mut stream(seed, &[])).unwrap();
        let total: u128 = s.counts().iter().map(|(&l, &c)| l as u128 * c as u128).sum();
        prop_assert_eq!(total, n as u128);
    }

    #[test]
    fn torus_norm_is_even_and_periodic(x in -1e6f64..1e6, k in -1000i32..1000) {
        let a = torus_norm(x);
        prop_assert!((0.0..=0.5).contains(&a));
        prop_assert!((a - torus_norm(-x)).abs() < 1e-9);
        prop_assert!((a - torus_norm(x + k as f64)).abs() < 1e-9);
    }

    #[test]
    fn classification_witness_is_valid(t in 0.0f64..1.0, xi0 in 1u64..50, kappa in 1e-6f64..0.49) {
        let c = classify(TorusPoint::float(t), xi0, kappa).unwrap();
        prop_assert_eq!(c.is_major(), c.witness.is_some());
        if let Some(xi) = c.witness {
            prop_assert!(xi >= 1 && xi <= xi0);
            prop_assert!(torus_norm(xi as f64 * t) <= kappa + 1e-12);
            for smaller in 1..xi {
                prop_assert!(torus_norm(smaller as f64 * t) > kappa - 1e-12);
            }
        }
    }

    #[test]
    fn distance_is_symmetric_and_bounded(s in 0.0f64..1.0, t in 0.0f64..1.0, xi0 in 1u64..15) {
        let d = arithmetic_distance(s, t, xi0);
        prop_assert_eq!(d.to_bits(), arithmetic_distance(t, s, xi0).to_bits());
        prop_assert!(d <= torus_norm(s - t) + 1e-12);
    }

    #[test]
    fn legendre_inverts_the_derivative(beta in 1.0f64..20.0) {
        let (d1, _) = lambda_derivs(beta).unwrap();
        let (_, back) = legendre(d1).unwrap();
        prop_assert!((back - beta).abs() < 1e-8);
    }

    #[test]
    fn neg_inf_absorbs(x in -1e300f64..1e300) {
        prop_assert_eq!(ExtReal::NegInf + ExtReal::Finite(x), ExtReal::NegInf);
        prop_assert_eq!(ExtReal::Finite(x) + ExtReal::NegInf, ExtReal::NegInf);
        prop_assert!(ExtReal::NegInf < ExtReal::Finite(x));
    }

    #[test]
    fn block_index_contains_length(l in 1u64..10_000_000_000, rho in 0.01f64..0.49) {
        let k = block_index_of(l, rho);
        prop_assert!(Block::new(k, rho).unwrap().contains(l));
    }

    #[test]
    fn mesh_points_are_exact(q in 1u64..100_000, j_frac in 0.0f64..1.0, num in 0i64..7, den in 1u64..8) {
        let num = num.min(den as i64);
        let mesh = Mesh::new(q, num, den).unwrap();
        let j = ((j_frac * q as f64) as u64).min(q - 1);
        let p = mesh.point(j);
        let d = mesh.denominator().unwrap();
        let expected = (j as u128 * q as u128 * den as u128 + num as u128) % d;
        prop_assert_eq!(p.num() * (d / p.den()), expected);
    }

    #[test]
    fn split_is_consistent(n in 2u64..20_000, seed in any::<u64>(), w_frac in 0.0f64..1.0, t in 0.0f64..1.0) {
        let s = sample_cycle_structure(n, &mut stream(seed, &[])).unwrap();
        let w = 2 + ((n - 2) as f64 * w_frac) as u64;
        let spec = FieldSpec::real(&s);
        let tp = TorusPoint::float(t);
        let (low, high) = split_field(&spec, w, tp).unwrap();
        match (low + high, eval_point(&spec, tp).unwrap()) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => prop_assert!((a - b).abs() < 1e-9 * (1.0 + b.abs())),
            (a, b) => prop_assert_eq!(a, b),
        }
    }
}
