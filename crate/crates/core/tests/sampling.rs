use permfield::cycles::{
    all_cycle_types, block_mass, exact_cycle_type_probability, sample_block_cycle, sample_block_occupancy,
    sample_cycle_structure, sample_poisson_counts, Block,
};
use permfield::rng::stream;
use permfield::stats::chi_square_gof;
use permfield::CycleCounts;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[test]
fn cycle_types_match_cauchy_formula() {
    for n in 3..=6u64 {
        let types = all_cycle_types(n);
        let probs: Vec<f64> = types.iter().map(exact_cycle_type_probability).collect();
        let mut observed = vec![0u64; types.len()];
        let mut rng = stream(11, &[n]);
        for _ in 0..100_000 {
            let s = sample_cycle_structure(n, &mut rng).unwrap();
            let total: u64 = s.counts().iter().map(|(l, c)| l * c).sum();
            assert_eq!(total, n);
            let i = types.iter().position(|t| *t == s).expect("sampled type is enumerated");
            observed[i] += 1;
        }
        let (_, _, p) = chi_square_gof(&observed, &probs);
        assert!(p > 1e-3, "n={n}: p={p}");
    }
}

#[test]
fn conservation_at_large_sizes() {
    let mut rng = stream(12, &[]);
    for &n in &[1u64, 2, 17, 1_000, 123_456_789, 1_000_000_000] {
        let s = sample_cycle_structure(n, &mut rng).unwrap();
        let total: u128 = s.counts().iter().map(|(&l, &c)| l as u128 * c as u128).sum();
        assert_eq!(total, n as u128);
    }
}

#[test]
fn first_and_mixed_moments() {
    let n = 1_000;
    let draws = 200_000;
    let mut rng = stream(13, &[]);
    let mut first = [0.0f64; 11];
    let mut mixed = [[0.0f64; 11]; 11];
    for _ in 0..draws {
        let s = sample_cycle_structure(n, &mut rng).unwrap();
        let c: Vec<f64> = (0..=10).map(|l| if l == 0 { 0.0 } else { s.count(l) as f64 }).collect();
        for k in 1..=10 {
            first[k] += c[k];
            for l in (k + 1)..=10 {
                mixed[k][l] += c[k] * c[l];
            }
        }
    }
    let d = draws as f64;
    for k in 1..=10usize {
        let mean = first[k] / d;
        let target = 1.0 / k as f64;
        // Var C_k = 1/k for k <= n/2.
        let se = (target / d).sqrt();
        assert!((mean - target).abs() < 3.0 * se + 1e-12, "E C_{k} = {mean}");
        for l in (k + 1)..=10usize {
            let m = mixed[k][l] / d;
            let target = 1.0 / (k * l) as f64;
            // C_k C_l is approximately a product of independent Poissons.
            let var =
                (1.0 / k as f64 + 1.0 / (k * k) as f64) * (1.0 / l as f64 + 1.0 / (l * l) as f64) - target * target;
            assert!((m - target).abs() < 3.0 * (var / d).sqrt(), "E C_{k} C_{l} = {m}");
        }
    }
}

#[test]
fn poisson_surrogate_means() {
    let draws = 1_000_000;
    let mut rng = stream(14, &[]);
    let mut z10 = 0u64;
    for _ in 0..draws {
        z10 += sample_poisson_counts(10, &mut rng).unwrap().counts().get(&10).copied().unwrap_or(0);
    }
    let mean = z10 as f64 / draws as f64;
    assert!((mean - 0.1).abs() < 3.0 * (0.1 / draws as f64).sqrt(), "E Z_10 = {mean}");

    let m = 1_000u64;
    let draws = 400_000;
    let mut total = 0u64;
    for _ in 0..draws {
        total += sample_poisson_counts(m, &mut rng).unwrap().total_cycles();
    }
    let mean = total as f64 / draws as f64;
    let harmonic: f64 = (1..=m).map(|l| 1.0 / l as f64).sum();
    assert!((mean - harmonic).abs() < 3.0 * (harmonic / draws as f64).sqrt());
    assert!((mean - ((m as f64).ln() + EULER_GAMMA)).abs() < 0.01, "mean {mean}");
}

#[test]
fn poisson_one_has_poisson_pmf() {
    let mut rng = stream(15, &[]);
    let mut observed = [0u64; 6];
    let draws = 100_000;
    for _ in 0..draws {
        let k = sample_poisson_counts(1, &mut rng).unwrap().total_cycles();
        observed[(k as usize).min(5)] += 1;
    }
    let mut probs: Vec<f64> = (0..5).map(|k| (-1.0f64).exp() / (1..=k).product::<u64>().max(1) as f64).collect();
    probs.push(1.0 - probs.iter().sum::<f64>());
    let (_, _, p) = chi_square_gof(&observed, &probs);
    assert!(p > 1e-3, "p={p}");
}

#[test]
fn block_cycle_pmf() {
    let block = Block::from_range(10, 20).unwrap();
    let rho_k: f64 = (10..20).map(|l| 1.0 / l as f64).sum();
    let probs: Vec<f64> = (10..20).map(|l| 1.0 / (l as f64 * rho_k)).collect();
    let mut observed = vec![0u64; 10];
    let sampler = permfield::cycles::BlockSampler::new(block).unwrap();
    let mut rng = stream(16, &[]);
    for _ in 0..1_000_000 {
        let l = sampler.sample(&mut rng);
        assert!(block.contains(l));
        observed[(l - 10) as usize] += 1;
    }
    let (_, _, p) = chi_square_gof(&observed, &probs);
    assert!(p > 1e-3, "p={p}");
}

#[test]
fn block_cycle_by_index_stays_in_block() {
    let mut rng = stream(17, &[]);
    for k in [100u64, 230, 400] {
        let block = Block::new(k, 0.05).unwrap();
        for _ in 0..1_000 {
            assert!(block.contains(sample_block_cycle(k, 0.05, &mut rng).unwrap()));
        }
    }
}

#[test]
fn occupancy_concentration() {
    let (rho, m, n) = (0.1, 200u64, 2_200u64);
    let replicas = 2_000;
    let mut rng = stream(18, &[]);
    let (mut q1, mut q2, mut total) = (0.0, 0.0, 0.0);
    for _ in 0..replicas {
        let occ = sample_block_occupancy(rho, m, n, &mut rng).unwrap();
        assert_eq!(occ.q0.len() + occ.q1.len() + occ.q2plus.len(), (n - m) as usize);
        q1 += occ.q1.len() as f64;
        q2 += occ.q2plus.len() as f64;
        total += occ.total as f64;
    }
    let r = replicas as f64;
    let width = (n - m) as f64;
    let expected_total: f64 = (m..n).map(|k| block_mass(k, rho)).sum();
    assert!((total / r / (rho * width) - 1.0).abs() < 0.02);
    assert!((total / r - expected_total).abs() < 3.0 * (expected_total / r).sqrt());
    assert!((q1 / r - width * rho * (1.0 - rho)).abs() < 0.1 * width * rho);
    assert!(q2 / r <= 5.0 * rho * rho * width);
}
