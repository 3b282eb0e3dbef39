//! Fast evaluation on a full leaf vector, used inside the search loops.

/// Scratch buffers for the maximal function of a depth-`N` leaf vector.
#[derive(Debug, Clone)]
pub(crate) struct DenseTree {
    m: usize,
    depth: usize,
    /// `sums[d][i]`: sum of leaf values under node `(d, i)`.
    sums: Vec<Vec<f64>>,
    best: Vec<Vec<f64>>,
}

impl DenseTree {
    pub fn new(m: u32, depth: u32) -> Self {
        let m = m as usize;
        let depth = depth as usize;
        let sizes: Vec<usize> = (0..=depth).map(|d| m.pow(d as u32)).collect();
        DenseTree {
            m,
            depth,
            sums: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            best: sizes.iter().map(|&s| vec![0.0; s]).collect(),
        }
    }

    pub fn leaves(&self) -> usize {
        self.sums[self.depth].len()
    }

    /// Fills the buffers and returns `M_T φ` on every leaf.
    pub fn maxima(&mut self, values: &[f64]) -> &[f64] {
        let m = self.m;
        let n = self.depth;
        self.sums[n].copy_from_slice(values);
        for d in (0..n).rev() {
            let (upper, lower) = self.sums.split_at_mut(d + 1);
            let parent = &mut upper[d];
            let child = &lower[0];
            for (i, p) in parent.iter_mut().enumerate() {
                *p = child[i * m..(i + 1) * m].iter().sum();
            }
        }
        let mut width = self.leaves() as f64;
        self.best[0][0] = self.sums[0][0] / width;
        for d in 1..=n {
            width /= m as f64;
            let (upper, lower) = self.best.split_at_mut(d);
            let parent = &upper[d - 1];
            let row = &mut lower[0];
            for (i, b) in row.iter_mut().enumerate() {
                *b = parent[i / m].max(self.sums[d][i] / width);
            }
        }
        &self.best[n]
    }

    /// `∫ max(M_T φ, L)^q`.
    pub fn objective(&mut self, values: &[f64], threshold: f64, q: f64) -> f64 {
        let lq = threshold.powf(q);
        let n = self.leaves() as f64;
        let acc: f64 = self
            .maxima(values)
            .iter()
            .map(|&b| if b > threshold { b.powf(q) } else { lq })
            .sum();
        acc / n
    }
}

/// `(∫φ, ∫φ^q)` of a leaf vector.
pub(crate) fn leaf_moments(values: &[f64], q: f64) -> (f64, f64) {
    let n = values.len() as f64;
    let mut f = 0.0;
    let mut h = 0.0;
    for &v in values {
        f += v;
        if v > 0.0 {
            h += v.powf(q);
        }
    }
    (f / n, h / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{maximal_function, StepFunction, TreeSpec};
    use crate::transforms::objective;

    #[test]
    fn agrees_with_exact_tree() {
        let values = vec![0.0, 2.0, 1.0, 0.5, 3.0, 0.0, 0.2, 0.9, 1.1];
        let spec = TreeSpec::new(3, 2).unwrap();
        let phi = StepFunction::from_leaves(3, 2, values.clone()).unwrap();
        let exact = maximal_function(&phi, &spec)
            .unwrap()
            .leaf_values(2)
            .unwrap();
        let mut dense = DenseTree::new(3, 2);
        for (a, b) in dense.maxima(&values).iter().zip(&exact) {
            assert!((a - b).abs() < 1e-15);
        }
        let o = dense.objective(&values, 1.1, 0.3);
        assert!((o - objective(&phi, 1.1, 0.3, &spec).unwrap()).abs() < 1e-14);
    }
}
