//! Exact arithmetic in rings of cyclotomic integers Z[zeta_m].
//!
//! Values are stored as integer polynomials in zeta_m of degree < phi(m),
//! reduced modulo the m-th cyclotomic polynomial. This canonical form makes
//! equality a coefficient comparison and keeps all character arithmetic
//! exact; the complex embedding is only used for final numeric rounding.

use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Integer polynomial, dense, lowest degree first.
type Poly = Vec<i64>;

/// Cyclotomic polynomials are cached per conductor.
static PHI_CACHE: Mutex<Option<HashMap<u64, Poly>>> = Mutex::new(None);

/// The m-th cyclotomic polynomial, computed by exact division of x^m - 1 by
/// the cyclotomic polynomials of the proper divisors of m.
pub fn cyclotomic_polynomial(m: u64) -> Poly {
    let mut guard = PHI_CACHE.lock().unwrap();
    let cache = guard.get_or_insert_with(HashMap::new);
    if let Some(p) = cache.get(&m) {
        return p.clone();
    }
    let mut result: Poly = vec![-1];
    result.resize(m as usize, 0);
    result.push(1); // x^m - 1
    for d in 1..m {
        if m % d == 0 {
            let phi_d = if let Some(p) = cache.get(&d) {
                p.clone()
            } else {
                drop_guard_compute(cache, d)
            };
            result = poly_div_exact(&result, &phi_d);
        }
    }
    cache.insert(m, result.clone());
    result
}

fn drop_guard_compute(cache: &mut HashMap<u64, Poly>, d: u64) -> Poly {
    // Recompute recursively without re-locking: inline the same algorithm.
    let mut result: Poly = vec![-1];
    result.resize(d as usize, 0);
    result.push(1);
    for e in 1..d {
        if d % e == 0 {
            let phi_e = if let Some(p) = cache.get(&e) {
                p.clone()
            } else {
                drop_guard_compute(cache, e)
            };
            result = poly_div_exact(&result, &phi_e);
        }
    }
    cache.insert(d, result.clone());
    result
}

/// Exact division of integer polynomials (divisor monic).
fn poly_div_exact(num: &Poly, den: &Poly) -> Poly {
    assert_eq!(*den.last().unwrap(), 1, "divisor must be monic");
    let mut rem = num.clone();
    let dn = den.len() - 1;
    let qn = rem.len() - 1 - dn;
    let mut quot = vec![0i64; qn + 1];
    for qi in (0..=qn).rev() {
        let c = rem[qi + dn];
        quot[qi] = c;
        if c != 0 {
            for (k, &dc) in den.iter().enumerate() {
                rem[qi + k] -= c * dc;
            }
        }
    }
    assert!(rem.iter().all(|&c| c == 0), "non-exact polynomial division");
    quot
}

pub fn euler_phi(m: u64) -> u64 {
    let mut result = m;
    let mut n = m;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            while n % p == 0 {
                n /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if n > 1 {
        result -= result / n;
    }
    result
}

/// An exact cyclotomic integer: an element of Z[zeta_m] in the reduced power
/// basis 1, zeta, ..., zeta^{phi(m)-1}.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cyclotomic {
    pub conductor: u64,
    /// Coefficients in the power basis, length phi(conductor), reduced.
    pub coeffs: Vec<i64>,
}

impl fmt::Debug for Cyclotomic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(n) = self.as_integer() {
            return write!(f, "{n}");
        }
        write!(f, "cyc{}{:?}", self.conductor, self.coeffs)
    }
}

impl Cyclotomic {
    pub fn zero(conductor: u64) -> Self {
        Cyclotomic {
            conductor,
            coeffs: vec![0; euler_phi(conductor) as usize],
        }
    }

    pub fn from_integer(n: i64, conductor: u64) -> Self {
        let mut c = Self::zero(conductor);
        if !c.coeffs.is_empty() {
            c.coeffs[0] = n;
        } else {
            // conductor 1: phi(1) = 1 as well, never empty
            unreachable!()
        }
        c
    }

    pub fn one(conductor: u64) -> Self {
        Self::from_integer(1, conductor)
    }

    /// zeta_m^k as an element of Z[zeta_m].
    pub fn root_of_unity(conductor: u64, k: i64) -> Self {
        let m = conductor as i64;
        let k = k.rem_euclid(m) as usize;
        let mut poly = vec![0i64; k + 1];
        poly[k] = 1;
        Self::from_poly(poly, conductor)
    }

    fn from_poly(mut poly: Poly, conductor: u64) -> Self {
        let phi = cyclotomic_polynomial(conductor);
        let deg = phi.len() - 1;
        if poly.len() > deg {
            // Reduce modulo the cyclotomic polynomial.
            for qi in (deg..poly.len()).rev() {
                let c = poly[qi];
                if c != 0 {
                    poly[qi] = 0;
                    for (k, &dc) in phi.iter().enumerate().take(deg) {
                        poly[qi - deg + k] -= c * dc;
                    }
                }
            }
        }
        poly.resize(deg, 0);
        Cyclotomic {
            conductor,
            coeffs: poly,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }

    pub fn as_integer(&self) -> Option<i64> {
        if self.coeffs[1..].iter().all(|&c| c == 0) {
            Some(self.coeffs[0])
        } else {
            None
        }
    }

    /// Re-express in Z[zeta_M] for a multiple M of the conductor.
    pub fn lift_to(&self, new_conductor: u64) -> Cyclotomic {
        assert_eq!(new_conductor % self.conductor, 0);
        if new_conductor == self.conductor {
            return self.clone();
        }
        let stride = (new_conductor / self.conductor) as usize;
        let mut poly = vec![0i64; self.coeffs.len() * stride];
        for (k, &c) in self.coeffs.iter().enumerate() {
            poly[k * stride] = c;
        }
        Self::from_poly(poly, new_conductor)
    }

    fn common(a: &Cyclotomic, b: &Cyclotomic) -> (Cyclotomic, Cyclotomic) {
        if a.conductor == b.conductor {
            (a.clone(), b.clone())
        } else {
            let m = num_lcm(a.conductor, b.conductor);
            (a.lift_to(m), b.lift_to(m))
        }
    }

    pub fn add(&self, other: &Cyclotomic) -> Cyclotomic {
        let (mut a, b) = Self::common(self, other);
        for (x, y) in a.coeffs.iter_mut().zip(b.coeffs.iter()) {
            *x += *y;
        }
        a
    }

    pub fn sub(&self, other: &Cyclotomic) -> Cyclotomic {
        let (mut a, b) = Self::common(self, other);
        for (x, y) in a.coeffs.iter_mut().zip(b.coeffs.iter()) {
            *x -= *y;
        }
        a
    }

    pub fn neg(&self) -> Cyclotomic {
        let mut a = self.clone();
        for x in a.coeffs.iter_mut() {
            *x = -*x;
        }
        a
    }

    pub fn mul(&self, other: &Cyclotomic) -> Cyclotomic {
        let (a, b) = Self::common(self, other);
        let mut poly = vec![0i64; a.coeffs.len() + b.coeffs.len()];
        for (i, &x) in a.coeffs.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.coeffs.iter().enumerate() {
                if y == 0 {
                    continue;
                }
                let prod = (x as i128) * (y as i128);
                let cur = poly[i + j] as i128 + prod;
                poly[i + j] = i128::try_into(cur).expect("cyclotomic coefficient overflow");
            }
        }
        Self::from_poly(poly, a.conductor)
    }

    pub fn scale(&self, n: i64) -> Cyclotomic {
        let mut a = self.clone();
        for x in a.coeffs.iter_mut() {
            *x *= n;
        }
        a
    }

    /// Galois twist zeta -> zeta^k, for k coprime to the conductor.
    pub fn galois(&self, k: u64) -> Cyclotomic {
        assert_eq!(
            crate::zmod::gcd(k, self.conductor),
            1,
            "galois exponent must be a unit"
        );
        let m = self.conductor;
        let mut poly = vec![0i64; m as usize];
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c != 0 {
                poly[((i as u64 * k) % m) as usize] += c;
            }
        }
        Self::from_poly(poly, m)
    }

    /// Complex conjugation (zeta -> zeta^{-1}).
    pub fn conj(&self) -> Cyclotomic {
        if self.conductor == 1 {
            return self.clone();
        }
        self.galois(self.conductor - 1)
    }

    /// Exact division by an integer; None if any coefficient is not divisible.
    pub fn div_exact(&self, n: i64) -> Option<Cyclotomic> {
        let mut a = self.clone();
        for x in a.coeffs.iter_mut() {
            if *x % n != 0 {
                return None;
            }
            *x /= n;
        }
        Some(a)
    }

    /// Numeric embedding zeta_m -> exp(2 pi i / m).
    pub fn embed(&self) -> Complex64 {
        let m = self.conductor as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c != 0 {
                let angle = 2.0 * std::f64::consts::PI * (k as f64) / m;
                acc += Complex64::new(angle.cos(), angle.sin()) * (c as f64);
            }
        }
        acc
    }

    /// Canonical byte encoding used for deterministic tie-breaking.
    pub fn sort_key(&self) -> (u64, Vec<i64>) {
        (self.conductor, self.coeffs.clone())
    }
}

fn num_lcm(a: u64, b: u64) -> u64 {
    a / crate::zmod::gcd(a, b) * b
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cyclotomic_polynomials() {
        assert_eq!(cyclotomic_polynomial(1), vec![-1, 1]);
        assert_eq!(cyclotomic_polynomial(2), vec![1, 1]);
        assert_eq!(cyclotomic_polynomial(3), vec![1, 1, 1]);
        assert_eq!(cyclotomic_polynomial(4), vec![1, 0, 1]);
        assert_eq!(cyclotomic_polynomial(6), vec![1, -1, 1]);
        assert_eq!(cyclotomic_polynomial(8), vec![1, 0, 0, 0, 1]);
        assert_eq!(cyclotomic_polynomial(12), vec![1, 0, -1, 0, 1]);
    }

    #[test]
    fn roots_of_unity_sum_to_zero() {
        for m in [3u64, 4, 6, 8, 9, 12, 24] {
            let mut acc = Cyclotomic::zero(m);
            for k in 0..m {
                acc = acc.add(&Cyclotomic::root_of_unity(m, k as i64));
            }
            assert!(acc.is_zero(), "sum of all {m}-th roots");
        }
    }

    #[test]
    fn conjugation_and_norm() {
        let z = Cyclotomic::root_of_unity(12, 5);
        let n = z.mul(&z.conj());
        assert_eq!(n.as_integer(), Some(1));
    }

    #[test]
    fn lift_preserves_value() {
        let z3 = Cyclotomic::root_of_unity(3, 1);
        let z12 = z3.lift_to(12);
        assert!((z3.embed() - z12.embed()).norm() < 1e-12);
        // zeta_3 = zeta_12^4
        assert_eq!(z12, Cyclotomic::root_of_unity(12, 4));
    }

    #[test]
    fn embedding_matches_roots() {
        for m in [5u64, 7, 8, 9, 12] {
            for k in 0..m {
                let z = Cyclotomic::root_of_unity(m, k as i64);
                let expect = Complex64::from_polar(
                    1.0,
                    2.0 * std::f64::consts::PI * k as f64 / m as f64,
                );
                assert!((z.embed() - expect).norm() < 1e-12, "m={m} k={k}");
            }
        }
    }

    fn arb_cyc(m: u64) -> impl Strategy<Value = Cyclotomic> {
        prop::collection::vec(-20i64..20, euler_phi(m) as usize).prop_map(move |coeffs| {
            Cyclotomic { conductor: m, coeffs }
        })
    }

    proptest! {
        #[test]
        fn ring_laws_conductor_12(a in arb_cyc(12), b in arb_cyc(12), c in arb_cyc(12)) {
            // Associativity and distributivity, checked exactly.
            prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
            prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
            prop_assert_eq!(a.mul(&b), b.mul(&a));
        }

        #[test]
        fn embedding_is_a_ring_hom(a in arb_cyc(9), b in arb_cyc(9)) {
            let lhs = a.mul(&b).embed();
            let rhs = a.embed() * b.embed();
            // Relative error per the declared 1e-12 contract.
            let scale = 1.0 + lhs.norm().max(rhs.norm());
            prop_assert!((lhs - rhs).norm() / scale < 1e-10);
        }
    }
}
