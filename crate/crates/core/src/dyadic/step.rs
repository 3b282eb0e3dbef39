use num_rational::BigRational;
use serde::{Deserialize, Serialize, Serializer};

use super::{checked_pow, pow, Scalar, MAX_LEAVES};
use crate::error::{Error, Result};

/// Nonnegative piecewise-constant function on `[0, 1)` with breakpoints at
/// multiples of `m^{-depth}`.
///
/// Piece `i` is `[breaks[i], breaks[i+1]) / m^depth` with value `values[i]`.
/// Adjacent pieces never share a value.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction<T = f64> {
    base: u32,
    depth: u32,
    breaks: Vec<u64>,
    values: Vec<T>,
}

/// Dyadic-rational endpoint `num / m^den_pow`, reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endpoint {
    pub num: u64,
    pub den_pow: u32,
}

impl Endpoint {
    fn reduced(mut num: u64, mut den_pow: u32, base: u32) -> Self {
        while den_pow > 0 && num.is_multiple_of(base as u64) {
            num /= base as u64;
            den_pow -= 1;
        }
        Endpoint { num, den_pow }
    }
}

/// Serialized form of one constant piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub start: Endpoint,
    pub end: Endpoint,
    pub value: serde_json::Value,
}

impl<T: Scalar> StepFunction<T> {
    pub fn new(base: u32, depth: u32, breaks: Vec<u64>, values: Vec<T>) -> Result<Self> {
        let total = units_total(base, depth)?;
        if breaks.len() != values.len() + 1 || values.is_empty() {
            return Err(Error::InvalidStepFunction(format!(
                "{} breakpoints for {} values",
                breaks.len(),
                values.len()
            )));
        }
        if breaks[0] != 0 || *breaks.last().unwrap() != total {
            return Err(Error::InvalidStepFunction(format!(
                "breakpoints must run from 0 to {base}^{depth}"
            )));
        }
        if breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidStepFunction(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        for v in &values {
            let x = v.as_f64();
            if !(x >= 0.0) || x.is_infinite() {
                return Err(Error::InvalidStepFunction(format!(
                    "value {v:?} is not a finite nonnegative number"
                )));
            }
        }
        Ok(Self::merged(base, depth, breaks, values))
    }

    /// One value per depth-`depth` cell.
    pub fn from_leaves(base: u32, depth: u32, values: Vec<T>) -> Result<Self> {
        let total = units_total(base, depth)?;
        if values.len() as u64 != total {
            return Err(Error::InvalidStepFunction(format!(
                "expected {total} leaf values, got {}",
                values.len()
            )));
        }
        Self::new(base, depth, (0..=total).collect(), values)
    }

    pub fn constant(base: u32, value: T) -> Result<Self> {
        Self::new(base, 0, vec![0, 1], vec![value])
    }

    fn merged(base: u32, depth: u32, breaks: Vec<u64>, values: Vec<T>) -> Self {
        let mut out_breaks = Vec::with_capacity(breaks.len());
        let mut out_values: Vec<T> = Vec::with_capacity(values.len());
        out_breaks.push(0);
        for (i, v) in values.into_iter().enumerate() {
            if out_values.last() == Some(&v) {
                *out_breaks.last_mut().unwrap() = breaks[i + 1];
            } else {
                out_values.push(v);
                out_breaks.push(breaks[i + 1]);
            }
        }
        StepFunction {
            base,
            depth,
            breaks: out_breaks,
            values: out_values,
        }
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    /// Resolution of the breakpoints: numerators are over `m^depth`.
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn breaks(&self) -> &[u64] {
        &self.breaks
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `m^depth`, the number of units in `[0, 1)`.
    pub fn total_units(&self) -> u64 {
        pow(self.base, self.depth)
    }

    /// Index of the piece containing unit position `x < m^depth`.
    pub fn piece_at(&self, x: u64) -> usize {
        self.breaks.partition_point(|&b| b <= x) - 1
    }

    pub fn value_at(&self, x: u64) -> &T {
        &self.values[self.piece_at(x)]
    }

    /// `∫_{[lo, hi)} φ`, scaled by `m^depth`.
    pub fn mass_units(&self, lo: u64, hi: u64) -> T {
        let mut acc = T::zero();
        let mut p = self.piece_at(lo);
        while p < self.values.len() && self.breaks[p] < hi {
            let a = self.breaks[p].max(lo);
            let b = self.breaks[p + 1].min(hi);
            acc = acc + self.values[p].clone() * T::from_units(b - a);
            p += 1;
        }
        acc
    }

    /// `∫_0^1 φ`.
    pub fn integral(&self) -> T {
        self.mass_units(0, self.total_units()) / T::from_units(self.total_units())
    }

    /// The same function with breakpoints expressed at a finer depth.
    pub fn refine_to(&self, depth: u32) -> Result<Self> {
        if depth < self.depth {
            return Err(Error::InvalidStepFunction(format!(
                "cannot coarsen depth {} to {depth}",
                self.depth
            )));
        }
        units_total(self.base, depth)?;
        let scale = pow(self.base, depth - self.depth);
        Ok(StepFunction {
            base: self.base,
            depth,
            breaks: self.breaks.iter().map(|b| b * scale).collect(),
            values: self.values.clone(),
        })
    }

    /// Values on every depth-`depth` cell.
    pub fn leaf_values(&self, depth: u32) -> Result<Vec<T>> {
        let fine = self.refine_to(depth)?;
        let mut out = Vec::with_capacity(fine.total_units() as usize);
        for (i, v) in fine.values.iter().enumerate() {
            for _ in fine.breaks[i]..fine.breaks[i + 1] {
                out.push(v.clone());
            }
        }
        Ok(out)
    }

    /// Walks the common refinement of two functions with the same base,
    /// yielding `(lo, hi, a, b)` in units of `m^{-max depth}`.
    pub fn zip<'a>(&'a self, other: &'a Self) -> Result<Vec<(u64, u64, &'a T, &'a T)>> {
        if self.base != other.base {
            return Err(Error::InvalidStepFunction(format!(
                "bases {} and {} differ",
                self.base, other.base
            )));
        }
        let depth = self.depth.max(other.depth);
        let sa = pow(self.base, depth - self.depth);
        let sb = pow(self.base, depth - other.depth);
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        let mut lo = 0;
        while i < self.values.len() && j < other.values.len() {
            let ea = self.breaks[i + 1] * sa;
            let eb = other.breaks[j + 1] * sb;
            let hi = ea.min(eb);
            out.push((lo, hi, &self.values[i], &other.values[j]));
            if ea == hi {
                i += 1;
            }
            if eb == hi {
                j += 1;
            }
            lo = hi;
        }
        Ok(out)
    }

    pub fn to_f64(&self) -> StepFunction<f64> {
        StepFunction::merged(
            self.base,
            self.depth,
            self.breaks.clone(),
            self.values.iter().map(Scalar::as_f64).collect(),
        )
    }

    pub fn pieces(&self) -> Vec<Piece> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| Piece {
                start: Endpoint::reduced(self.breaks[i], self.depth, self.base),
                end: Endpoint::reduced(self.breaks[i + 1], self.depth, self.base),
                value: v.to_json(),
            })
            .collect()
    }

    pub fn from_pieces(base: u32, pieces: &[Piece]) -> Result<Self> {
        let depth = pieces
            .iter()
            .flat_map(|p| [p.start.den_pow, p.end.den_pow])
            .max()
            .unwrap_or(0);
        units_total(base, depth)?;
        let scale = |e: &Endpoint| -> Result<u64> {
            e.num
                .checked_mul(pow(base, depth - e.den_pow))
                .ok_or_else(|| Error::InvalidStepFunction(format!("endpoint {e:?} overflows")))
        };
        let mut breaks = vec![0];
        let mut values = Vec::with_capacity(pieces.len());
        for p in pieces {
            if scale(&p.start)? != *breaks.last().unwrap() {
                return Err(Error::InvalidStepFunction(format!(
                    "piece starting at {:?} leaves a gap or overlap",
                    p.start
                )));
            }
            breaks.push(scale(&p.end)?);
            values.push(T::from_json(&p.value).ok_or_else(|| {
                Error::InvalidStepFunction(format!("unreadable value {}", p.value))
            })?);
        }
        Self::new(base, depth, breaks, values)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.pieces()).expect("pieces serialize")
    }

    pub fn from_json_str(base: u32, text: &str) -> Result<Self> {
        let pieces: Vec<Piece> = serde_json::from_str(text)?;
        Self::from_pieces(base, &pieces)
    }
}

impl StepFunction<f64> {
    /// `(∫φ, ∫φ^q)`.
    pub fn moments(&self, q: f64) -> (f64, f64) {
        let total = self.total_units() as f64;
        let mut f = 0.0;
        let mut h = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            let len = (self.breaks[i + 1] - self.breaks[i]) as f64 / total;
            f += v * len;
            if *v > 0.0 {
                h += v.powf(q) * len;
            }
        }
        (f, h)
    }

    /// Applies `g` to every value.
    pub fn map(&self, g: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.base,
            self.depth,
            self.breaks.clone(),
            self.values.iter().map(|&v| g(v)).collect(),
        )
    }
}

impl StepFunction<BigRational> {
    pub fn from_f64(phi: &StepFunction<f64>) -> Result<Self> {
        let values = phi
            .values
            .iter()
            .map(|&v| {
                BigRational::from_float(v)
                    .ok_or_else(|| Error::InvalidStepFunction(format!("{v} has no rational form")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(phi.base, phi.depth, phi.breaks.clone(), values)
    }
}

impl<T: Scalar> Serialize for StepFunction<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.pieces().serialize(serializer)
    }
}

fn units_total(base: u32, depth: u32) -> Result<u64> {
    if base < 2 {
        return Err(Error::InvalidStepFunction(format!(
            "base {base} must be >= 2"
        )));
    }
    match checked_pow(base, depth) {
        Some(n) if n <= MAX_LEAVES => Ok(n),
        _ => Err(Error::InvalidStepFunction(format!(
            "{base}^{depth} exceeds 2^53 units"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_step() -> StepFunction {
        StepFunction::new(2, 1, vec![0, 1, 2], vec![2.0, 0.0]).unwrap()
    }

    #[test]
    fn validation() {
        assert!(StepFunction::new(2, 1, vec![0, 2], vec![1.0, 2.0]).is_err());
        assert!(StepFunction::new(2, 1, vec![0, 1, 1], vec![1.0, 2.0]).is_err());
        assert!(StepFunction::new(2, 1, vec![0, 1, 2], vec![-1.0, 2.0]).is_err());
        assert!(StepFunction::new(2, 1, vec![0, 1, 2], vec![f64::NAN, 2.0]).is_err());
        assert!(StepFunction::new(2, 1, vec![0, 1, 3], vec![1.0, 2.0]).is_err());
        assert!(StepFunction::<f64>::from_leaves(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn equal_neighbours_merge() {
        let phi = StepFunction::from_leaves(2, 2, vec![1.0, 1.0, 3.0, 1.0]).unwrap();
        assert_eq!(phi.breaks(), &[0, 2, 3, 4]);
        assert_eq!(phi.values(), &[1.0, 3.0, 1.0]);
    }

    #[test]
    fn moments_and_integral() {
        let phi = half_step();
        assert_eq!(phi.integral(), 1.0);
        let (f, h) = phi.moments(0.5);
        assert_eq!(f, 1.0);
        assert!((h - 0.5 * 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(phi.mass_units(0, 1), 2.0);
        assert_eq!(phi.mass_units(1, 2), 0.0);
    }

    #[test]
    fn zip_walks_common_refinement() {
        let a = half_step();
        let b = StepFunction::from_leaves(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let z = a.zip(&b).unwrap();
        assert_eq!(z.len(), 4);
        assert_eq!((z[1].0, z[1].1, *z[1].2, *z[1].3), (1, 2, 2.0, 2.0));
        assert_eq!((z[3].0, z[3].1, *z[3].2, *z[3].3), (3, 4, 0.0, 4.0));
    }

    #[test]
    fn json_reduces_endpoints() {
        let phi = half_step().refine_to(4).unwrap();
        let pieces = phi.pieces();
        assert_eq!(pieces[0].end, Endpoint { num: 1, den_pow: 1 });
        assert_eq!(pieces[1].end, Endpoint { num: 1, den_pow: 0 });
        let back = StepFunction::<f64>::from_pieces(2, &pieces).unwrap();
        assert_eq!(back, half_step());
    }

    #[test]
    fn rational_json_roundtrip() {
        let v = |n: i64, d: i64| BigRational::new(n.into(), d.into());
        let phi =
            StepFunction::from_leaves(3, 2, (0..9).map(|i| v(i % 4, 1 + i % 3)).collect()).unwrap();
        let text = phi.to_json_string();
        let back = StepFunction::<BigRational>::from_json_str(3, &text).unwrap();
        assert_eq!(back, phi);
        assert!(text.contains("\"1/2\""));
    }

    #[test]
    fn rejects_gaps() {
        let text = r#"[{"start":{"num":0,"den_pow":0},"end":{"num":1,"den_pow":1},"value":1.0},
                       {"start":{"num":3,"den_pow":2},"end":{"num":1,"den_pow":0},"value":2.0}]"#;
        assert!(StepFunction::<f64>::from_json_str(2, text).is_err());
    }
}
