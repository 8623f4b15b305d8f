//! Axis-aligned search boxes and a Halton low-discrepancy sequence.

use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Domain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::Domain("bounds must be non-empty and of equal length"));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(h > l) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::Domain("box is degenerate"));
        }
        Ok(Domain { lo, hi })
    }

    pub fn unit(dim: usize) -> Self {
        Domain { lo: alloc::vec![0.0; dim], hi: alloc::vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (l, h)) in x.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.clamp(*l, *h);
        }
    }

    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.lo.iter().zip(&self.hi)).map(|(v, (l, h))| (v - l) / (h - l)).collect()
    }

    /// Inverse of [`Domain::to_unit`], clamped so rounding never leaves the box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(self.lo.iter().zip(&self.hi)).map(|(v, (l, h))| (l + v * (h - l)).clamp(*l, *h)).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).collect()
    }
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Halton points in `[0, 1)^dim` with an optional Cranley–Patterson shift.
/// Index 0 is the origin when unshifted.
#[derive(Clone, Debug)]
pub struct Halton {
    shift: Vec<f64>,
    index: u64,
}

impl Halton {
    pub fn new(dim: usize) -> Self {
        assert!(dim <= PRIMES.len(), "Halton sequence supports up to 16 dimensions");
        Halton { shift: alloc::vec![0.0; dim], index: 0 }
    }

    pub fn shifted(shift: Vec<f64>) -> Self {
        assert!(shift.len() <= PRIMES.len(), "Halton sequence supports up to 16 dimensions");
        Halton { shift, index: 0 }
    }

    pub fn point(&self, index: u64) -> Vec<f64> {
        self.shift
            .iter()
            .zip(PRIMES)
            .map(|(s, p)| {
                let v = radical_inverse(index, p) + s;
                v - libm::floor(v)
            })
            .collect()
    }
}

impl Iterator for Halton {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let p = self.point(self.index);
        self.index += 1;
        Some(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_first_points() {
        let pts: Vec<_> = Halton::new(2).take(4).collect();
        assert_eq!(pts[0], [0.0, 0.0]);
        assert_eq!(pts[1], [0.5, 1.0 / 3.0]);
        assert_eq!(pts[2], [0.25, 2.0 / 3.0]);
        assert_eq!(pts[3], [0.75, 1.0 / 9.0]);
    }

    #[test]
    fn unit_round_trip() {
        let d = Domain::new(alloc::vec![-5.0, 0.0], alloc::vec![10.0, 15.0]).unwrap();
        let x = [1.5, 7.0];
        let back = d.from_unit(&d.to_unit(&x));
        assert!((back[0] - 1.5).abs() < 1e-14 && (back[1] - 7.0).abs() < 1e-14);
        assert!(Domain::new(alloc::vec![1.0], alloc::vec![1.0]).is_err());
    }
}
