//! Random step functions for fuzzing and property tests.

use num_rational::BigRational;
use rand::Rng;

use super::{pow, StepFunction};

/// Leaf values mix zeros, plateaus (repeated neighbours) and heavy-tailed
/// spikes so that ties, empty supports and deep maxima all occur.
pub fn random_step<R: Rng + ?Sized>(rng: &mut R, m: u32, depth: u32) -> StepFunction<f64> {
    let n = pow(m, depth) as usize;
    let scale = 10f64.powf(rng.gen_range(-1.0..1.0));
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let roll: f64 = rng.gen();
        let v = if i > 0 && roll < 0.3 {
            values[i - 1]
        } else if roll < 0.5 {
            0.0
        } else if roll < 0.9 {
            scale * -(1.0 - rng.gen::<f64>()).ln()
        } else {
            scale * 10f64.powf(rng.gen_range(0.0..2.0))
        };
        values.push(v);
    }
    if values.iter().all(|&v| v == 0.0) {
        let i = rng.gen_range(0..n);
        values[i] = scale;
    }
    StepFunction::from_leaves(m, depth, values).expect("valid leaf values")
}

/// Small numerators and denominators, so equal averages are common.
pub fn random_rational_step<R: Rng + ?Sized>(
    rng: &mut R,
    m: u32,
    depth: u32,
) -> StepFunction<BigRational> {
    let n = pow(m, depth) as usize;
    let mut values: Vec<BigRational> = Vec::with_capacity(n);
    for i in 0..n {
        let v = if i > 0 && rng.gen_bool(0.25) {
            values[i - 1].clone()
        } else {
            let num: i64 = rng.gen_range(0..7);
            let den: i64 = rng.gen_range(1..4);
            BigRational::new(num.into(), den.into())
        };
        values.push(v);
    }
    StepFunction::from_leaves(m, depth, values).expect("valid leaf values")
}

/// A random union of depth-`depth` cells as sorted disjoint unit ranges.
pub fn random_set<R: Rng + ?Sized>(rng: &mut R, m: u32, depth: u32) -> Vec<(u64, u64)> {
    let n = pow(m, depth);
    let density: f64 = rng.gen_range(0.05..1.0);
    let mut out: Vec<(u64, u64)> = Vec::new();
    for x in 0..n {
        if rng.gen_bool(density) {
            match out.last_mut() {
                Some(last) if last.1 == x => last.1 = x + 1,
                _ => out.push((x, x + 1)),
            }
        }
    }
    if out.is_empty() {
        let x = rng.gen_range(0..n);
        out.push((x, x + 1));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generators_produce_valid_functions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let phi = random_step(&mut rng, 2, 5);
            assert!(phi.integral() > 0.0);
            let r = random_rational_step(&mut rng, 3, 3);
            assert_eq!(r.depth(), 3);
            let set = random_set(&mut rng, 2, 4);
            assert!(set.windows(2).all(|w| w[0].1 < w[1].0));
        }
    }
}
