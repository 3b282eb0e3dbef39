//! Starting points shaped like the limiting extremal profile.

use rand::Rng;

use crate::kernel::BellmanParams;

/// Shape controls for one starting point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct InitShape {
    /// Multiplies `c^{1/q}`, the ratio between `M_T φ` and `φ` inside `E`.
    pub ratio_factor: f64,
    /// Multiplies the target measure `k₀` of `E`.
    pub measure_factor: f64,
    /// Pick the continuing child at random instead of the first one.
    pub shuffle: bool,
    /// Relative multiplicative noise on every leaf.
    pub noise: f64,
}

impl InitShape {
    pub const CENTRED: InitShape = InitShape {
        ratio_factor: 1.0,
        measure_factor: 1.0,
        shuffle: false,
        noise: 0.0,
    };

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        InitShape {
            ratio_factor: rng.gen_range(0.8..1.25),
            measure_factor: rng.gen_range(0.85..1.15),
            shuffle: rng.gen_bool(0.5),
            noise: rng.gen_range(0.0..0.05),
        }
    }
}

/// Leaf values of the starting point.
///
/// `E` is the union of the maximal tree intervals covering
/// `[0, round(k₀ m^N) / m^N)`. Each such interval gets average `L` and a
/// nested structure: at every level one child continues and the other
/// `m − 1` children take the constant `y / C`, where `y` is the current
/// average and `C = c^{1/q}`, so that `M_T φ = C φ` there. Off `E` the value
/// is `τ = L / C`.
pub(crate) fn annulus<R: Rng + ?Sized>(
    params: &BellmanParams,
    m: u32,
    depth: u32,
    shape: InitShape,
    rng: &mut R,
) -> Vec<f64> {
    let mu = m as usize;
    let n = mu.pow(depth);
    let k0 = params.excess_measure().unwrap_or(0.5);
    let ratio = (params.eigenvalue() * shape.ratio_factor).max(1.0 + 1e-9);
    let tau = params.threshold / ratio;
    let e_units = ((k0 * shape.measure_factor).clamp(0.0, 1.0) * n as f64).round() as usize;

    let mut values = vec![tau; n];
    let mut pos = 0usize;
    while pos < e_units {
        let mut size = 1usize;
        while pos.is_multiple_of(size * mu) && pos + size * mu <= e_units {
            size *= mu;
        }
        fill_block(
            &mut values[pos..pos + size],
            mu,
            params.threshold,
            ratio,
            shape.shuffle,
            rng,
        );
        pos += size;
    }
    if shape.noise > 0.0 {
        for v in values.iter_mut() {
            *v *= 1.0 + shape.noise * rng.gen_range(-1.0..1.0);
        }
    }
    values
}

fn fill_block<R: Rng + ?Sized>(
    block: &mut [f64],
    m: usize,
    average: f64,
    ratio: f64,
    shuffle: bool,
    rng: &mut R,
) {
    if block.len() == 1 {
        block[0] = average;
        return;
    }
    let width = block.len() / m;
    let keep = if shuffle { rng.gen_range(0..m) } else { 0 };
    let side = average / ratio;
    let next = average * (m as f64 - (m as f64 - 1.0) / ratio);
    for c in 0..m {
        let child = &mut block[c * width..(c + 1) * width];
        if c == keep {
            fill_block(child, m, next, ratio, shuffle, rng);
        } else {
            child.fill(side);
        }
    }
}
