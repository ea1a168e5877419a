//! Exact diagram amplitudes: the ring Z[ω, q^(-1/2)] for ω a primitive p-th
//! root of unity and q = p^t.
//!
//! A [`CycloInt`] is an element of Z[ω] stored as p-1 integer coordinates on
//! the basis {1, ω, ..., ω^(p-2)}, with ω^(p-1) = -(1 + ω + ... + ω^(p-2)).
//! A [`Scalar`] is a value (a + b√q) / q^k with a, b cyclotomic integers and
//! k ≥ 0, kept canonical by cancelling common factors of q.
//!
//! Equality of scalars is decided exactly up to the sign of a √q component:
//! after clearing denominators, x = y iff the cyclotomic parts coincide or
//! the difference satisfies u² = q·v² with the floating evaluations within
//! 1e-6 of each other. The float only disambiguates ±√q; the squaring
//! identity itself is checked in exact integer arithmetic (it also covers
//! fields where √q already lies in Z[ω], e.g. the quadratic Gauss sum for
//! p ≡ 1 mod 4).

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::field::FieldSpec;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScalarError {
    #[error("scalars belong to different rings (p or t differ)")]
    ContextMismatch,
    #[error("malformed scalar representation")]
    BadRepr,
}

/// Element of Z[ω]: p-1 coordinates on {1, ω, ..., ω^(p-2)}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycloInt {
    p: u64,
    coords: Vec<BigInt>,
}

impl CycloInt {
    pub fn zero(p: u64) -> CycloInt {
        CycloInt {
            p,
            coords: vec![BigInt::zero(); (p - 1) as usize],
        }
    }

    pub fn from_int(p: u64, n: impl Into<BigInt>) -> CycloInt {
        let mut c = CycloInt::zero(p);
        c.coords[0] = n.into();
        c
    }

    pub fn one(p: u64) -> CycloInt {
        CycloInt::from_int(p, 1)
    }

    /// ω^e for e reduced mod p; the exponent p-1 folds through the relation
    /// ω^(p-1) = -(1 + ω + ... + ω^(p-2)).
    pub fn omega(p: u64, e: u64) -> CycloInt {
        let e = (e % p) as usize;
        let mut c = CycloInt::zero(p);
        if e == (p - 1) as usize {
            for x in c.coords.iter_mut() {
                *x = BigInt::from(-1);
            }
        } else {
            c.coords[e] = BigInt::one();
        }
        c
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn coords(&self) -> &[BigInt] {
        &self.coords
    }

    pub fn from_coords(p: u64, coords: Vec<BigInt>) -> Result<CycloInt, ScalarError> {
        if coords.len() != (p - 1) as usize {
            return Err(ScalarError::BadRepr);
        }
        Ok(CycloInt { p, coords })
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }

    pub fn add(&self, other: &CycloInt) -> CycloInt {
        assert_eq!(self.p, other.p, "cyclotomic rings differ");
        CycloInt {
            p: self.p,
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn neg(&self) -> CycloInt {
        CycloInt {
            p: self.p,
            coords: self.coords.iter().map(|a| -a).collect(),
        }
    }

    pub fn sub(&self, other: &CycloInt) -> CycloInt {
        self.add(&other.neg())
    }

    pub fn scale(&self, n: &BigInt) -> CycloInt {
        CycloInt {
            p: self.p,
            coords: self.coords.iter().map(|a| a * n).collect(),
        }
    }

    pub fn mul(&self, other: &CycloInt) -> CycloInt {
        assert_eq!(self.p, other.p, "cyclotomic rings differ");
        let p = self.p as usize;
        // accumulate on exponents 0..p-1, then fold the exponent p-1
        let mut acc = vec![BigInt::zero(); p];
        for (i, a) in self.coords.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coords.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                let mut e = i + j;
                if e >= p {
                    e -= p;
                }
                acc[e] += a * b;
            }
        }
        let top = acc.pop().unwrap();
        let coords = acc.into_iter().map(|c| c - &top).collect();
        CycloInt { p: self.p, coords }
    }

    /// Galois conjugation ω ↦ ω^(-1); complex conjugation on the standard
    /// embedding.
    pub fn conj(&self) -> CycloInt {
        let p = self.p as usize;
        let mut acc = vec![BigInt::zero(); p];
        for (i, a) in self.coords.iter().enumerate() {
            let e = if i == 0 { 0 } else { p - i };
            acc[e] += a;
        }
        let top = acc.pop().unwrap();
        let coords = acc.into_iter().map(|c| c - &top).collect();
        CycloInt { p: self.p, coords }
    }

    fn divisible(&self, n: u64) -> bool {
        let n = BigInt::from(n);
        self.coords.iter().all(|c| (c % &n).is_zero())
    }

    fn div_exact(&self, n: u64) -> CycloInt {
        let n = BigInt::from(n);
        CycloInt {
            p: self.p,
            coords: self.coords.iter().map(|c| c / &n).collect(),
        }
    }

    pub fn to_complex(&self) -> Complex64 {
        let p = self.p as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, c) in self.coords.iter().enumerate() {
            let phi = 2.0 * std::f64::consts::PI * (i as f64) / p;
            acc += Complex64::new(phi.cos(), phi.sin()) * c.to_f64().unwrap();
        }
        acc
    }
}

/// Exact amplitude (a + b√q) / q^k over GF(p^t).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scalar {
    p: u64,
    t: u32,
    a: CycloInt,
    b: CycloInt,
    k: u32,
}

impl Scalar {
    pub fn zero(p: u64, t: u32) -> Scalar {
        Scalar {
            p,
            t,
            a: CycloInt::zero(p),
            b: CycloInt::zero(p),
            k: 0,
        }
    }

    pub fn one(p: u64, t: u32) -> Scalar {
        Scalar {
            p,
            t,
            a: CycloInt::one(p),
            b: CycloInt::zero(p),
            k: 0,
        }
    }

    pub fn from_int(p: u64, t: u32, n: impl Into<BigInt>) -> Scalar {
        Scalar {
            p,
            t,
            a: CycloInt::from_int(p, n),
            b: CycloInt::zero(p),
            k: 0,
        }
    }

    pub fn from_cyclo(t: u32, a: CycloInt) -> Scalar {
        Scalar {
            p: a.p(),
            t,
            b: CycloInt::zero(a.p()),
            a,
            k: 0,
        }
    }

    /// ω^e.
    pub fn omega_pow(p: u64, t: u32, e: u64) -> Scalar {
        Scalar {
            p,
            t,
            a: CycloInt::omega(p, e),
            b: CycloInt::zero(p),
            k: 0,
        }
    }

    /// q^(n/2) for any integer n (negative allowed).
    pub fn sqrtq_pow(p: u64, t: u32, n: i64) -> Scalar {
        let q = p.pow(t);
        let (k, num_pow) = if n >= 0 {
            (0u32, n)
        } else {
            let k = ((-n) as u32 + 1) / 2;
            (k, n + 2 * k as i64)
        };
        debug_assert!(num_pow >= 0);
        let whole = (num_pow / 2) as u32;
        let mut big = BigInt::one();
        for _ in 0..whole {
            big *= q;
        }
        let (a, b) = if num_pow % 2 == 0 {
            (CycloInt::from_int(p, big), CycloInt::zero(p))
        } else {
            (CycloInt::zero(p), CycloInt::from_int(p, big))
        };
        Scalar { p, t, a, b, k }.canonical()
    }

    /// Build from parts; canonicalizes.
    pub fn from_parts(t: u32, a: CycloInt, b: CycloInt, k: u32) -> Result<Scalar, ScalarError> {
        if a.p() != b.p() {
            return Err(ScalarError::ContextMismatch);
        }
        Ok(Scalar {
            p: a.p(),
            t,
            a,
            b,
            k,
        }
        .canonical())
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn q(&self) -> u64 {
        self.p.pow(self.t)
    }

    pub fn numer_a(&self) -> &CycloInt {
        &self.a
    }

    pub fn numer_b(&self) -> &CycloInt {
        &self.b
    }

    pub fn denom_log(&self) -> u32 {
        self.k
    }

    pub fn same_context(&self, other: &Scalar) -> bool {
        self.p == other.p && self.t == other.t
    }

    fn canonical(mut self) -> Scalar {
        let q = self.q();
        while self.k > 0 && self.a.divisible(q) && self.b.divisible(q) {
            self.a = self.a.div_exact(q);
            self.b = self.b.div_exact(q);
            self.k -= 1;
        }
        if self.a.is_zero() && self.b.is_zero() {
            self.k = 0;
        }
        self
    }

    pub fn checked_add(&self, other: &Scalar) -> Result<Scalar, ScalarError> {
        if !self.same_context(other) {
            return Err(ScalarError::ContextMismatch);
        }
        let q = self.q();
        let (x, y) = (self, other);
        let k = x.k.max(y.k);
        let scale = |c: &CycloInt, dk: u32| -> CycloInt {
            let mut m = BigInt::one();
            for _ in 0..dk {
                m *= q;
            }
            c.scale(&m)
        };
        let a = scale(&x.a, k - x.k).add(&scale(&y.a, k - y.k));
        let b = scale(&x.b, k - x.k).add(&scale(&y.b, k - y.k));
        Ok(Scalar {
            p: self.p,
            t: self.t,
            a,
            b,
            k,
        }
        .canonical())
    }

    pub fn checked_mul(&self, other: &Scalar) -> Result<Scalar, ScalarError> {
        if !self.same_context(other) {
            return Err(ScalarError::ContextMismatch);
        }
        let q = BigInt::from(self.q());
        // (a1 + b1√q)(a2 + b2√q) = (a1a2 + q b1b2) + (a1b2 + b1a2)√q
        let a = self.a.mul(&other.a).add(&self.b.mul(&other.b).scale(&q));
        let b = self.a.mul(&other.b).add(&self.b.mul(&other.a));
        Ok(Scalar {
            p: self.p,
            t: self.t,
            a,
            b,
            k: self.k + other.k,
        }
        .canonical())
    }

    pub fn add(&self, other: &Scalar) -> Scalar {
        self.checked_add(other).expect("scalar context mismatch")
    }

    pub fn mul(&self, other: &Scalar) -> Scalar {
        self.checked_mul(other).expect("scalar context mismatch")
    }

    pub fn neg(&self) -> Scalar {
        Scalar {
            p: self.p,
            t: self.t,
            a: self.a.neg(),
            b: self.b.neg(),
            k: self.k,
        }
    }

    pub fn sub(&self, other: &Scalar) -> Scalar {
        self.add(&other.neg())
    }

    /// Complex conjugation: ω ↦ ω^(-1), √q fixed.
    pub fn conj(&self) -> Scalar {
        Scalar {
            p: self.p,
            t: self.t,
            a: self.a.conj(),
            b: self.b.conj(),
            k: self.k,
        }
    }

    /// Squared modulus s·conj(s).
    pub fn norm_sq(&self) -> Scalar {
        self.mul(&self.conj())
    }

    /// Multiply by q^(n/2) in place of a scalar gadget.
    pub fn mul_sqrtq(&self, n: i64) -> Scalar {
        self.mul(&Scalar::sqrtq_pow(self.p, self.t, n))
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.equal(&Scalar::one(self.p, self.t))
    }

    /// Exact equality decision. The cyclotomic identity u² = q·v² is checked
    /// in integer arithmetic; the floating comparison (tolerance 1e-6) only
    /// settles the sign of the square root.
    pub fn equal(&self, other: &Scalar) -> bool {
        if !self.same_context(other) {
            return false;
        }
        let q = self.q();
        let k = self.k.max(other.k);
        let scale = |c: &CycloInt, dk: u32| {
            let mut m = BigInt::one();
            for _ in 0..dk {
                m *= q;
            }
            c.scale(&m)
        };
        let u = scale(&self.a, k - self.k).sub(&scale(&other.a, k - other.k));
        let v = scale(&other.b, k - other.k).sub(&scale(&self.b, k - self.k));
        if u.is_zero() && v.is_zero() {
            return true;
        }
        // x - y = (u - v√q)/q^k; zero iff u = v√q
        let lhs = u.mul(&u);
        let rhs = v.mul(&v).scale(&BigInt::from(q));
        if lhs != rhs {
            return false;
        }
        (self.to_complex() - other.to_complex()).norm() < 1e-6
    }

    /// If the value is q^(n/2) exactly, return n.
    pub fn as_sqrtq_pow(&self) -> Option<i64> {
        let s = self.clone().canonical();
        let int_part = |c: &CycloInt| -> Option<BigInt> {
            if c.coords()[1..].iter().all(|x| x.is_zero()) {
                Some(c.coords()[0].clone())
            } else {
                None
            }
        };
        let q = BigInt::from(self.q());
        let pow_of_q = |mut n: BigInt| -> Option<i64> {
            if n <= BigInt::zero() {
                return None;
            }
            let mut e = 0i64;
            while n > BigInt::one() {
                if (&n % &q).is_zero() {
                    n /= &q;
                    e += 1;
                } else {
                    return None;
                }
            }
            Some(e)
        };
        if s.b.is_zero() {
            let a = int_part(&s.a)?;
            let e = pow_of_q(a)?;
            Some(2 * (e - s.k as i64))
        } else if s.a.is_zero() {
            let b = int_part(&s.b)?;
            let e = pow_of_q(b)?;
            Some(2 * (e - s.k as i64) + 1)
        } else {
            None
        }
    }

    /// r^e for a residue exponent 0 ≤ e < p, with 0^0 = 1.
    pub fn pow_residue(&self, e: u64) -> Scalar {
        let mut acc = Scalar::one(self.p, self.t);
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn to_complex(&self) -> Complex64 {
        let q = self.q() as f64;
        let num = self.a.to_complex() + self.b.to_complex() * q.sqrt();
        num / q.powi(self.k as i32)
    }

    /// Exact rational value, if the scalar is rational. For even t the √q
    /// component folds into the integer part (√q = p^(t/2)); for odd t a
    /// nonzero √q component makes the value irrational whenever √q is not a
    /// cyclotomic integer, and this conversion declines rather than decide
    /// the Gauss-sum cases.
    pub fn to_rational(&self) -> Option<BigRational> {
        let s = self.clone().canonical();
        let (a, b) = if s.t % 2 == 0 {
            let root = BigInt::from(s.p.pow(s.t / 2));
            (s.a.add(&s.b.scale(&root)), CycloInt::zero(s.p))
        } else {
            (s.a.clone(), s.b.clone())
        };
        if !b.is_zero() {
            return None;
        }
        if a.coords()[1..].iter().any(|c| !c.is_zero()) {
            return None;
        }
        let mut den = BigInt::one();
        for _ in 0..s.k {
            den *= s.q();
        }
        Some(BigRational::new(a.coords()[0].clone(), den))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let ser = |c: &CycloInt| -> serde_json::Value {
            serde_json::Value::Array(
                c.coords()
                    .iter()
                    .map(|n| match n.to_i64() {
                        Some(v) => serde_json::json!(v),
                        None => serde_json::json!(n.to_string()),
                    })
                    .collect(),
            )
        };
        serde_json::json!({ "a": ser(&self.a), "b": ser(&self.b), "k": self.k })
    }

    pub fn from_json(v: &serde_json::Value, p: u64, t: u32) -> Result<Scalar, ScalarError> {
        let parse_coords = |v: &serde_json::Value| -> Result<CycloInt, ScalarError> {
            let arr = v.as_array().ok_or(ScalarError::BadRepr)?;
            let coords = arr
                .iter()
                .map(|x| {
                    if let Some(n) = x.as_i64() {
                        Ok(BigInt::from(n))
                    } else if let Some(s) = x.as_str() {
                        s.parse::<BigInt>().map_err(|_| ScalarError::BadRepr)
                    } else {
                        Err(ScalarError::BadRepr)
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            CycloInt::from_coords(p, coords)
        };
        let a = parse_coords(v.get("a").ok_or(ScalarError::BadRepr)?)?;
        let b = parse_coords(v.get("b").ok_or(ScalarError::BadRepr)?)?;
        let k = v
            .get("k")
            .and_then(|x| x.as_u64())
            .ok_or(ScalarError::BadRepr)? as u32;
        Scalar::from_parts(t, a, b, k)
    }

    /// Context helpers bound to a field.
    pub fn ring_of(field: &FieldSpec) -> (u64, u32) {
        (field.p(), field.t() as u32)
    }
}

impl std::fmt::Display for Scalar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let part = |c: &CycloInt| -> String {
            let terms: Vec<String> = c
                .coords()
                .iter()
                .enumerate()
                .filter(|(_, n)| !n.is_zero())
                .map(|(i, n)| match i {
                    0 => format!("{n}"),
                    1 => format!("{n}ω"),
                    _ => format!("{n}ω^{i}"),
                })
                .collect();
            if terms.is_empty() {
                "0".into()
            } else {
                terms.join("+")
            }
        };
        write!(f, "({} + ({})√q)/q^{}", part(&self.a), part(&self.b), self.k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn omega_reduction() {
        // p = 3: ω² = -1 - ω
        let w2 = CycloInt::omega(3, 2);
        assert_eq!(w2.coords(), &[BigInt::from(-1), BigInt::from(-1)]);
        // p = 2: ω = -1
        let w = CycloInt::omega(2, 1);
        assert_eq!(w.coords(), &[BigInt::from(-1)]);
        // ω^p = 1
        for p in [2u64, 3, 5, 7] {
            assert_eq!(CycloInt::omega(p, p), CycloInt::one(p));
        }
    }

    #[test]
    fn omega_products_cycle() {
        for p in [2u64, 3, 5, 7] {
            for e1 in 0..p {
                for e2 in 0..p {
                    let lhs = CycloInt::omega(p, e1).mul(&CycloInt::omega(p, e2));
                    assert_eq!(lhs, CycloInt::omega(p, (e1 + e2) % p));
                }
            }
        }
    }

    #[test]
    fn conj_inverts_omega() {
        for p in [2u64, 3, 5, 7] {
            for e in 0..p {
                assert_eq!(CycloInt::omega(p, e).conj(), CycloInt::omega(p, (p - e) % p));
            }
        }
    }

    #[test]
    fn canonical_denominators() {
        // q/q^1 collapses to 1
        let s = Scalar::from_parts(
            2,
            CycloInt::from_int(2, 4),
            CycloInt::zero(2),
            1,
        )
        .unwrap();
        assert_eq!(s, Scalar::one(2, 2));
        // √q·√q = q
        let r = Scalar::sqrtq_pow(2, 2, 1);
        assert_eq!(r.mul(&r), Scalar::from_int(2, 2, 4));
        // q^(-1/2) squared is q^(-1)
        let d = Scalar::sqrtq_pow(2, 2, -1);
        assert!(d.mul(&d).equal(&Scalar::sqrtq_pow(2, 2, -2)));
    }

    #[test]
    fn sqrtq_pow_ladder() {
        for (p, t) in [(2u64, 1u32), (2, 2), (3, 1), (3, 2), (5, 1)] {
            let q = p.pow(t) as f64;
            for n in -5i64..=5 {
                let s = Scalar::sqrtq_pow(p, t, n);
                let expect = q.powf(n as f64 / 2.0);
                assert!((s.to_complex().re - expect).abs() < 1e-9 * expect.max(1.0));
                assert!(s.to_complex().im.abs() < 1e-12);
                assert_eq!(s.as_sqrtq_pow(), Some(n));
            }
        }
    }

    #[test]
    fn gauss_sum_is_sqrt_five() {
        // Σ_k ω^(k²) over F_5 equals √5: the equality decision must take the
        // squaring branch since the left side has no √q component.
        let mut g = Scalar::zero(5, 1);
        for k in 0u64..5 {
            g = g.add(&Scalar::omega_pow(5, 1, (k * k) % 5));
        }
        // after folding ω⁴: 1 + 2ω + 2ω⁴ = -1 - 2ω² - 2ω³
        let expect: Vec<BigInt> = [-1, 0, -2, -2].iter().map(|&n| BigInt::from(n)).collect();
        assert_eq!(g.numer_a().coords(), &expect[..]);
        assert_eq!(g.mul(&g), Scalar::from_int(5, 1, 5));
        assert!(g.equal(&Scalar::sqrtq_pow(5, 1, 1)));
        assert!(!g.equal(&Scalar::sqrtq_pow(5, 1, 1).neg()));
        assert!(g.neg().equal(&Scalar::sqrtq_pow(5, 1, 1).neg()));
    }

    #[test]
    fn equality_rejects_near_misses() {
        let one = Scalar::one(3, 1);
        assert!(!one.equal(&Scalar::from_int(3, 1, 2)));
        assert!(!one.equal(&Scalar::omega_pow(3, 1, 1)));
        assert!(!one.equal(&Scalar::zero(3, 1)));
        assert!(!one.equal(&Scalar::one(3, 2)));
    }

    #[test]
    fn context_mismatch_errors() {
        let x = Scalar::one(2, 1);
        let y = Scalar::one(3, 1);
        assert_eq!(x.checked_add(&y).unwrap_err(), ScalarError::ContextMismatch);
        assert_eq!(x.checked_mul(&y).unwrap_err(), ScalarError::ContextMismatch);
    }

    #[test]
    fn rational_extraction() {
        // 1/q
        let s = Scalar::sqrtq_pow(2, 2, -2);
        assert_eq!(s.to_rational().unwrap(), BigRational::new(1.into(), 4.into()));
        // √q irrational for odd t
        assert_eq!(Scalar::sqrtq_pow(2, 1, 1).to_rational(), None);
        // but √q = 3 for q = 9
        assert_eq!(
            Scalar::sqrtq_pow(3, 2, 1).to_rational().unwrap(),
            BigRational::from(BigInt::from(3))
        );
        // ω is not rational
        assert_eq!(Scalar::omega_pow(5, 1, 1).to_rational(), None);
        // but 1 + ω + ... + ω^(p-1) = 0 is
        let mut s = Scalar::zero(5, 1);
        for e in 0..5 {
            s = s.add(&Scalar::omega_pow(5, 1, e));
        }
        assert_eq!(s.to_rational().unwrap(), BigRational::zero());
    }

    #[test]
    fn json_round_trip() {
        let s = Scalar::omega_pow(5, 1, 3)
            .mul(&Scalar::sqrtq_pow(5, 1, -3))
            .add(&Scalar::from_int(5, 1, 7));
        let back = Scalar::from_json(&s.to_json(), 5, 1).unwrap();
        assert_eq!(s, back);
    }

    fn arb_scalar(p: u64, t: u32) -> impl Strategy<Value = Scalar> {
        let dim = (p - 1) as usize;
        (
            proptest::collection::vec(-6i64..=6, dim),
            proptest::collection::vec(-6i64..=6, dim),
            0u32..3,
        )
            .prop_map(move |(a, b, k)| {
                let a = CycloInt::from_coords(p, a.into_iter().map(BigInt::from).collect())
                    .unwrap();
                let b = CycloInt::from_coords(p, b.into_iter().map(BigInt::from).collect())
                    .unwrap();
                Scalar::from_parts(t, a, b, k).unwrap()
            })
    }

    proptest! {
        #[test]
        fn ring_axioms_q4(
            x in arb_scalar(2, 2),
            y in arb_scalar(2, 2),
            z in arb_scalar(2, 2),
        ) {
            prop_assert!(x.add(&y).equal(&y.add(&x)));
            prop_assert!(x.mul(&y).equal(&y.mul(&x)));
            prop_assert!(x.add(&y.add(&z)).equal(&x.add(&y).add(&z)));
            prop_assert!(x.mul(&y.mul(&z)).equal(&x.mul(&y).mul(&z)));
            prop_assert!(x.mul(&y.add(&z)).equal(&x.mul(&y).add(&x.mul(&z))));
            prop_assert!(x.add(&x.neg()).is_zero());
        }

        #[test]
        fn ring_axioms_q5(
            x in arb_scalar(5, 1),
            y in arb_scalar(5, 1),
            z in arb_scalar(5, 1),
        ) {
            prop_assert!(x.add(&y).equal(&y.add(&x)));
            prop_assert!(x.mul(&y).equal(&y.mul(&x)));
            prop_assert!(x.mul(&y.mul(&z)).equal(&x.mul(&y).mul(&z)));
            prop_assert!(x.mul(&y.add(&z)).equal(&x.mul(&y).add(&x.mul(&z))));
        }

        #[test]
        fn conj_is_ring_hom_q9(x in arb_scalar(3, 2), y in arb_scalar(3, 2)) {
            prop_assert!(x.conj().conj().equal(&x));
            prop_assert!(x.add(&y).conj().equal(&x.conj().add(&y.conj())));
            prop_assert!(x.mul(&y).conj().equal(&x.conj().mul(&y.conj())));
        }

        #[test]
        fn complex_embedding_is_hom_q3(x in arb_scalar(3, 1), y in arb_scalar(3, 1)) {
            let lhs = x.mul(&y).to_complex();
            let rhs = x.to_complex() * y.to_complex();
            prop_assert!((lhs - rhs).norm() < 1e-7);
            let lhs = x.add(&y).to_complex();
            let rhs = x.to_complex() + y.to_complex();
            prop_assert!((lhs - rhs).norm() < 1e-7);
            prop_assert!((x.conj().to_complex() - x.to_complex().conj()).norm() < 1e-7);
        }
    }
}
