//! Fixtures shared by the benchmarks.

use permfield::rng::stream;
use permfield::{CycleStructure, FieldSpec};

/// A reproducible permutation of `n` and its real field.
pub fn fixture(n: u64, seed: u64) -> (CycleStructure, FieldSpec) {
    let mut rng = stream(seed, &[n]);
    let c = permfield::cycles::sample_cycle_structure(n, &mut rng).expect("valid size");
    let spec = FieldSpec::real(&c);
    (c, spec)
}
