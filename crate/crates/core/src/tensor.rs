//! Jet-valued tensor components in a coordinate frame.
//!
//! Indices are laid out row-major with the `up` contravariant slots first,
//! then the `low` covariant slots. Derivative operators append a new lower
//! index at the end.

use crate::error::Result;
use crate::jet::{Jet, JetSpace};

#[derive(Debug, Clone)]
pub struct Tensor {
    n: usize,
    up: usize,
    low: usize,
    comps: Vec<Jet>,
}

impl Tensor {
    pub fn new(n: usize, up: usize, low: usize, comps: Vec<Jet>) -> Tensor {
        assert_eq!(comps.len(), n.pow((up + low) as u32), "component count");
        Tensor { n, up, low, comps }
    }

    pub fn scalar(n: usize, f: Jet) -> Tensor {
        Tensor {
            n,
            up: 0,
            low: 0,
            comps: vec![f],
        }
    }

    pub fn from_fn(
        n: usize,
        up: usize,
        low: usize,
        mut f: impl FnMut(&[usize]) -> Result<Jet>,
    ) -> Result<Tensor> {
        let rank = up + low;
        let total = n.pow(rank as u32);
        let mut idx = vec![0usize; rank];
        let mut comps = Vec::with_capacity(total);
        for flat in 0..total {
            decode(flat, n, &mut idx);
            comps.push(f(&idx)?);
        }
        Ok(Tensor { n, up, low, comps })
    }

    pub fn zeros(space: JetSpace, n: usize, up: usize, low: usize, degree: usize) -> Tensor {
        let total = n.pow((up + low) as u32);
        Tensor {
            n,
            up,
            low,
            comps: vec![space.zero(degree); total],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn up(&self) -> usize {
        self.up
    }

    pub fn low(&self) -> usize {
        self.low
    }

    pub fn rank(&self) -> usize {
        self.up + self.low
    }

    pub fn comps(&self) -> &[Jet] {
        &self.comps
    }

    pub fn into_comps(self) -> Vec<Jet> {
        self.comps
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn get(&self, idx: &[usize]) -> &Jet {
        &self.comps[self.flat(idx)]
    }

    /// Lowest jet degree among the components.
    pub fn degree(&self) -> usize {
        self.comps.iter().map(Jet::degree).min().unwrap_or(0)
    }

    pub fn values(&self) -> Vec<f64> {
        self.comps.iter().map(Jet::value).collect()
    }

    pub fn map(&self, f: impl Fn(&Jet) -> Jet) -> Tensor {
        Tensor {
            n: self.n,
            up: self.up,
            low: self.low,
            comps: self.comps.iter().map(f).collect(),
        }
    }

    pub fn try_map(&self, f: impl Fn(&Jet) -> Result<Jet>) -> Result<Tensor> {
        Ok(Tensor {
            n: self.n,
            up: self.up,
            low: self.low,
            comps: self.comps.iter().map(f).collect::<Result<_>>()?,
        })
    }

    pub fn scale(&self, s: f64) -> Tensor {
        self.map(|c| c.scale(s))
    }

    pub fn add(&self, other: &Tensor) -> Tensor {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Tensor) -> Tensor {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &Tensor, s: f64) -> Tensor {
        assert_eq!((self.n, self.up, self.low), (other.n, other.up, other.low));
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| {
                let mut c = a.clone();
                c.add_scaled(b, s);
                c
            })
            .collect();
        Tensor {
            n: self.n,
            up: self.up,
            low: self.low,
            comps,
        }
    }

    /// Appends a lower index `k` holding `∂/∂y^k` of every component.
    /// `y_slot0` is the jet variable of `y^1`.
    pub fn vderiv(&self, y_slot0: usize) -> Result<Tensor> {
        let n = self.n;
        let mut comps = Vec::with_capacity(self.comps.len() * n);
        for c in &self.comps {
            for k in 0..n {
                comps.push(c.deriv(y_slot0 + k)?);
            }
        }
        Ok(Tensor {
            n,
            up: self.up,
            low: self.low + 1,
            comps,
        })
    }

    /// Sums over an upper slot `a` paired with a lower slot `b` (absolute
    /// index positions), removing both.
    pub fn contract(&self, a: usize, b: usize) -> Tensor {
        assert!(a < self.up && b >= self.up && b < self.rank());
        let rank = self.rank();
        let n = self.n;
        let out_rank = rank - 2;
        let mut full = vec![0usize; rank];
        let mut out_idx = vec![0usize; out_rank];
        let total = n.pow(out_rank as u32);
        let mut comps = Vec::with_capacity(total);
        for flat in 0..total {
            decode(flat, n, &mut out_idx);
            let mut it = out_idx.iter();
            for (p, slot) in full.iter_mut().enumerate() {
                if p != a && p != b {
                    *slot = *it.next().expect("index");
                }
            }
            let mut acc: Option<Jet> = None;
            for m in 0..n {
                full[a] = m;
                full[b] = m;
                let c = self.get(&full);
                match acc.as_mut() {
                    None => acc = Some(c.clone()),
                    Some(s) => *s += c,
                }
            }
            comps.push(acc.expect("n >= 1"));
        }
        Tensor {
            n,
            up: self.up - 1,
            low: self.low - 1,
            comps,
        }
    }

    /// Contracts lower slot `b` (absolute position) with the coordinate
    /// vector field `y`, i.e. `T_{..m..} y^m`.
    pub fn contract_y(&self, b: usize, y: &[f64], y_slot0: usize) -> Tensor {
        assert!(b >= self.up && b < self.rank());
        let rank = self.rank();
        let n = self.n;
        let out_rank = rank - 1;
        let mut full = vec![0usize; rank];
        let mut out_idx = vec![0usize; out_rank];
        let total = n.pow(out_rank as u32);
        let mut comps = Vec::with_capacity(total);
        for flat in 0..total {
            decode(flat, n, &mut out_idx);
            let mut it = out_idx.iter();
            for (p, slot) in full.iter_mut().enumerate() {
                if p != b {
                    *slot = *it.next().expect("index");
                }
            }
            let mut acc: Option<Jet> = None;
            for (m, &ym) in y.iter().enumerate() {
                full[b] = m;
                let term = self.get(&full).mul_coordinate(y_slot0 + m, ym);
                match acc.as_mut() {
                    None => acc = Some(term),
                    Some(s) => *s += &term,
                }
            }
            comps.push(acc.expect("n >= 1"));
        }
        let (up, low) = (self.up, self.low - 1);
        Tensor {
            n,
            up,
            low,
            comps,
        }
    }

    /// The single component of a rank-0 tensor.
    pub fn as_scalar(&self) -> &Jet {
        assert_eq!(self.rank(), 0);
        &self.comps[0]
    }

    /// Largest absolute component value.
    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .map(|c| c.value().abs())
            .fold(0.0, f64::max)
    }
}

/// Row-major decode of `flat` into base-`n` digits.
pub fn decode(mut flat: usize, n: usize, idx: &mut [usize]) {
    for slot in idx.iter_mut().rev() {
        *slot = flat % n;
        flat /= n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contraction_of_identity_is_dimension() {
        let s = JetSpace::new(4).unwrap();
        let id = Tensor::from_fn(2, 1, 1, |ix| {
            Ok(s.constant(if ix[0] == ix[1] { 1.0 } else { 0.0 }, 2))
        })
        .unwrap();
        let tr = id.contract(0, 1);
        assert_eq!(tr.rank(), 0);
        assert_eq!(tr.as_scalar().value(), 2.0);
    }

    #[test]
    fn contract_y_on_identity_gives_y() {
        let s = JetSpace::new(4).unwrap();
        let id = Tensor::from_fn(2, 1, 1, |ix| {
            Ok(s.constant(if ix[0] == ix[1] { 1.0 } else { 0.0 }, 2))
        })
        .unwrap();
        let y = [0.7, -1.3];
        let v = id.contract_y(1, &y, 2);
        assert_eq!(v.values(), vec![0.7, -1.3]);
        // and its y-derivative is the identity again
        let back = v.vderiv(2).unwrap();
        assert_eq!(back.values(), vec![1.0, 0.0, 0.0, 1.0]);
    }
}
