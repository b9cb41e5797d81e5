//! Residue arithmetic over Z/p^l and square matrices over it.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::GroupError;

/// A residue modulo `p^l`, with `p` prime and `l >= 1`.
///
/// The modulus is carried by every value; mixing moduli is a programming
/// error and panics.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Zmod {
    pub value: u32,
    pub modulus: u32,
}

impl fmt::Debug for Zmod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}m{}", self.value, self.modulus)
    }
}

impl fmt::Display for Zmod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl Zmod {
    pub fn new(value: i64, modulus: u32) -> Self {
        let m = modulus as i64;
        Zmod {
            value: (value.rem_euclid(m)) as u32,
            modulus,
        }
    }

    pub fn zero(modulus: u32) -> Self {
        Zmod { value: 0, modulus }
    }

    pub fn one(modulus: u32) -> Self {
        Zmod { value: 1 % modulus, modulus }
    }

    fn check(self, other: Zmod) {
        assert_eq!(self.modulus, other.modulus, "modulus mismatch");
    }

    pub fn add(self, other: Zmod) -> Zmod {
        self.check(other);
        Zmod {
            value: (self.value + other.value) % self.modulus,
            modulus: self.modulus,
        }
    }

    pub fn sub(self, other: Zmod) -> Zmod {
        self.check(other);
        Zmod {
            value: (self.value + self.modulus - other.value) % self.modulus,
            modulus: self.modulus,
        }
    }

    pub fn mul(self, other: Zmod) -> Zmod {
        self.check(other);
        Zmod {
            value: ((self.value as u64 * other.value as u64) % self.modulus as u64) as u32,
            modulus: self.modulus,
        }
    }

    pub fn neg(self) -> Zmod {
        Zmod {
            value: (self.modulus - self.value) % self.modulus,
            modulus: self.modulus,
        }
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    /// Units of Z/p^l are exactly the residues coprime to p.
    pub fn is_unit(self) -> bool {
        gcd(self.value as u64, self.modulus as u64) == 1
    }

    /// Multiplicative inverse, if this residue is a unit.
    pub fn inverse(self) -> Option<Zmod> {
        let (g, x, _) = ext_gcd(self.value as i64, self.modulus as i64);
        if g != 1 {
            return None;
        }
        Some(Zmod::new(x, self.modulus))
    }

    pub fn pow(self, mut e: u64) -> Zmod {
        let mut base = self;
        let mut acc = Zmod::one(self.modulus);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(base);
            }
            base = base.mul(base);
            e >>= 1;
        }
        acc
    }
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        (a, 1, 0)
    } else {
        let (g, x, y) = ext_gcd(b, a % b);
        (g, y, x - (a / b) * y)
    }
}

/// A square matrix over Z/p^l, row-major, all entries sharing one modulus.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ZmodMatrix {
    pub n: usize,
    pub modulus: u32,
    /// Row-major entries, each reduced modulo `modulus`.
    pub entries: Vec<u8>,
}

impl fmt::Debug for ZmodMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.n {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.n {
                if j > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{}", self.get(i, j).value)?;
            }
        }
        write!(f, "] mod {}", self.modulus)
    }
}

impl ZmodMatrix {
    pub fn zero(n: usize, modulus: u32) -> Self {
        assert!(modulus >= 2 && modulus <= 255, "modulus must fit in a byte");
        ZmodMatrix {
            n,
            modulus,
            entries: vec![0u8; n * n],
        }
    }

    pub fn identity(n: usize, modulus: u32) -> Self {
        let mut m = Self::zero(n, modulus);
        for i in 0..n {
            m.set(i, i, Zmod::one(modulus));
        }
        m
    }

    pub fn from_rows(rows: &[&[i64]], modulus: u32) -> Self {
        let n = rows.len();
        let mut m = Self::zero(n, modulus);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "matrix must be square");
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, Zmod::new(v, modulus));
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Zmod {
        Zmod {
            value: self.entries[i * self.n + j] as u32,
            modulus: self.modulus,
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Zmod) {
        debug_assert_eq!(v.modulus, self.modulus);
        self.entries[i * self.n + j] = v.value as u8;
    }

    pub fn mul(&self, other: &ZmodMatrix) -> ZmodMatrix {
        assert_eq!(self.n, other.n);
        assert_eq!(self.modulus, other.modulus);
        let n = self.n;
        let m = self.modulus as u32;
        let mut out = ZmodMatrix::zero(n, m);
        for i in 0..n {
            for k in 0..n {
                let a = self.entries[i * n + k] as u32;
                if a == 0 {
                    continue;
                }
                for j in 0..n {
                    let b = other.entries[k * n + j] as u32;
                    let c = out.entries[i * n + j] as u32;
                    out.entries[i * n + j] = ((c + a * b) % m) as u8;
                }
            }
        }
        out
    }

    pub fn add(&self, other: &ZmodMatrix) -> ZmodMatrix {
        assert_eq!(self.n, other.n);
        assert_eq!(self.modulus, other.modulus);
        let mut out = self.clone();
        for (o, b) in out.entries.iter_mut().zip(other.entries.iter()) {
            *o = ((*o as u32 + *b as u32) % self.modulus) as u8;
        }
        out
    }

    pub fn scale(&self, c: Zmod) -> ZmodMatrix {
        let mut out = self.clone();
        for o in out.entries.iter_mut() {
            *o = ((*o as u64 * c.value as u64) % self.modulus as u64) as u8;
        }
        out
    }

    pub fn neg(&self) -> ZmodMatrix {
        let mut out = self.clone();
        for o in out.entries.iter_mut() {
            *o = ((self.modulus - *o as u32) % self.modulus) as u8;
        }
        out
    }

    pub fn transpose(&self) -> ZmodMatrix {
        let mut out = ZmodMatrix::zero(self.n, self.modulus);
        for i in 0..self.n {
            for j in 0..self.n {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn is_identity(&self) -> bool {
        *self == ZmodMatrix::identity(self.n, self.modulus)
    }

    pub fn trace(&self) -> Zmod {
        let mut t = Zmod::zero(self.modulus);
        for i in 0..self.n {
            t = t.add(self.get(i, i));
        }
        t
    }

    /// Determinant by fraction-free cofactor expansion.
    ///
    /// Fine for the small n used here (n <= 4).
    pub fn det(&self) -> Zmod {
        fn det_rec(m: &ZmodMatrix, rows: &[usize], cols: &[usize]) -> Zmod {
            let k = rows.len();
            if k == 1 {
                return m.get(rows[0], cols[0]);
            }
            let mut acc = Zmod::zero(m.modulus);
            let sub_rows = &rows[1..];
            for (idx, &c) in cols.iter().enumerate() {
                let a = m.get(rows[0], c);
                if a.is_zero() {
                    continue;
                }
                let sub_cols: Vec<usize> =
                    cols.iter().copied().filter(|&x| x != c).collect();
                let minor = det_rec(m, sub_rows, &sub_cols);
                let term = a.mul(minor);
                if idx % 2 == 0 {
                    acc = acc.add(term);
                } else {
                    acc = acc.sub(term);
                }
            }
            acc
        }
        let idx: Vec<usize> = (0..self.n).collect();
        det_rec(self, &idx, &idx)
    }

    pub fn is_invertible(&self) -> bool {
        self.det().is_unit()
    }

    /// Inverse over Z/p^l via Gauss-Jordan with unit pivots.
    ///
    /// Over a local ring any invertible matrix admits such a pivot in every
    /// elimination step.
    pub fn inverse(&self) -> Result<ZmodMatrix, GroupError> {
        let n = self.n;
        let mut a = self.clone();
        let mut inv = ZmodMatrix::identity(n, self.modulus);
        for col in 0..n {
            let pivot_row = (col..n)
                .find(|&r| a.get(r, col).is_unit())
                .ok_or(GroupError::NotInvertible)?;
            if pivot_row != col {
                for j in 0..n {
                    let t = a.get(col, j);
                    a.set(col, j, a.get(pivot_row, j));
                    a.set(pivot_row, j, t);
                    let t = inv.get(col, j);
                    inv.set(col, j, inv.get(pivot_row, j));
                    inv.set(pivot_row, j, t);
                }
            }
            let p_inv = a.get(col, col).inverse().unwrap();
            for j in 0..n {
                a.set(col, j, a.get(col, j).mul(p_inv));
                inv.set(col, j, inv.get(col, j).mul(p_inv));
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a.get(r, col);
                if f.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let v = a.get(r, j).sub(f.mul(a.get(col, j)));
                    a.set(r, j, v);
                    let v = inv.get(r, j).sub(f.mul(inv.get(col, j)));
                    inv.set(r, j, v);
                }
            }
        }
        Ok(inv)
    }

    /// Canonical fixed-width encoding: row-major entries packed little-endian
    /// with a fixed bit width per entry. All deterministic orderings in the
    /// library derive from this key.
    pub fn encode(&self) -> u128 {
        let bits = bit_width(self.modulus);
        debug_assert!(self.n * self.n * bits as usize <= 128);
        let mut key: u128 = 0;
        for (idx, &e) in self.entries.iter().enumerate() {
            key |= (e as u128) << (bits as usize * idx);
        }
        key
    }

    pub fn decode(key: u128, n: usize, modulus: u32) -> ZmodMatrix {
        let bits = bit_width(modulus);
        let mask = (1u128 << bits) - 1;
        let mut m = ZmodMatrix::zero(n, modulus);
        for idx in 0..n * n {
            m.entries[idx] = ((key >> (bits as usize * idx)) & mask) as u8;
        }
        m
    }

    /// Entry-wise reduction to a divisor modulus (e.g. Z/9 -> Z/3).
    pub fn reduce_mod(&self, new_modulus: u32) -> ZmodMatrix {
        assert_eq!(self.modulus % new_modulus, 0);
        let mut out = ZmodMatrix::zero(self.n, new_modulus);
        for (o, &e) in out.entries.iter_mut().zip(self.entries.iter()) {
            *o = (e as u32 % new_modulus) as u8;
        }
        out
    }

    /// Entry-wise lift to a multiple modulus, choosing least residues.
    pub fn lift_to(&self, new_modulus: u32) -> ZmodMatrix {
        assert_eq!(new_modulus % self.modulus, 0);
        let mut out = ZmodMatrix::zero(self.n, new_modulus);
        out.entries.copy_from_slice(&self.entries);
        out
    }
}

/// Bits needed per entry for the canonical encoding.
pub fn bit_width(modulus: u32) -> u32 {
    32 - (modulus - 1).leading_zeros()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unit_detection() {
        // Units of Z/9 are exactly residues coprime to 3.
        let units: Vec<u32> = (0..9)
            .filter(|&v| Zmod::new(v as i64, 9).is_unit())
            .collect();
        assert_eq!(units, vec![1, 2, 4, 5, 7, 8]);
    }

    #[test]
    fn inverse_roundtrip() {
        for m in [4u32, 8, 9, 3, 5, 25] {
            for v in 0..m {
                let z = Zmod::new(v as i64, m);
                if let Some(zi) = z.inverse() {
                    assert_eq!(z.mul(zi), Zmod::one(m));
                } else {
                    assert!(!z.is_unit());
                }
            }
        }
    }

    #[test]
    fn matrix_inverse_and_det() {
        let a = ZmodMatrix::from_rows(&[&[1, 1], &[0, 1]], 9);
        let ai = a.inverse().unwrap();
        assert!(a.mul(&ai).is_identity());

        let b = ZmodMatrix::from_rows(&[&[1, 2], &[2, 4]], 9);
        assert!(!b.is_invertible());
        assert_eq!(b.det(), Zmod::zero(9));
    }

    #[test]
    fn transpose_involutive() {
        let a = ZmodMatrix::from_rows(&[&[1, 2, 3], &[4, 5, 6], &[7, 8, 0]], 9);
        assert_eq!(a.transpose().transpose(), a);
    }

    #[test]
    fn encode_decode_roundtrip() {
        let a = ZmodMatrix::from_rows(&[&[3, 7], &[8, 0]], 9);
        assert_eq!(ZmodMatrix::decode(a.encode(), 2, 9), a);
        let b = ZmodMatrix::identity(4, 9);
        assert_eq!(ZmodMatrix::decode(b.encode(), 4, 9), b);
    }

    proptest! {
        #[test]
        fn det_multiplicative(av in prop::collection::vec(0i64..9, 4),
                              bv in prop::collection::vec(0i64..9, 4)) {
            let a = ZmodMatrix::from_rows(&[&av[0..2], &av[2..4]], 9);
            let b = ZmodMatrix::from_rows(&[&bv[0..2], &bv[2..4]], 9);
            prop_assert_eq!(a.mul(&b).det(), a.det().mul(b.det()));
        }

        #[test]
        fn inverse_involutive(av in prop::collection::vec(0i64..8, 9)) {
            let rows: Vec<&[i64]> = av.chunks(3).collect();
            let a = ZmodMatrix::from_rows(&rows, 8);
            if a.is_invertible() {
                let ai = a.inverse().unwrap();
                prop_assert_eq!(ai.inverse().unwrap(), a.clone());
                prop_assert!(a.mul(&ai).is_identity());
            }
        }
    }
}
