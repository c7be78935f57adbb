//! Phase-free Pauli arithmetic on bit masks.
//!
//! Error tracking never needs phases: a Pauli error either commutes or
//! anticommutes with a measured observable, and crash classification only
//! looks at which logical class the residual belongs to. `Y` is stored as
//! the union of the `X` and `Z` masks.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gf2::BitVec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum PauliOp {
    #[default]
    I,
    X,
    Y,
    Z,
}

impl PauliOp {
    pub const ALL: [PauliOp; 4] = [PauliOp::I, PauliOp::X, PauliOp::Y, PauliOp::Z];

    #[inline]
    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => PauliOp::I,
            (true, false) => PauliOp::X,
            (true, true) => PauliOp::Y,
            (false, true) => PauliOp::Z,
        }
    }

    #[inline]
    pub fn bits(self) -> (bool, bool) {
        match self {
            PauliOp::I => (false, false),
            PauliOp::X => (true, false),
            PauliOp::Y => (true, true),
            PauliOp::Z => (false, true),
        }
    }

    #[inline]
    pub fn has_x(self) -> bool {
        self.bits().0
    }

    #[inline]
    pub fn has_z(self) -> bool {
        self.bits().1
    }

    #[inline]
    pub fn anticommutes(self, other: PauliOp) -> bool {
        let (ax, az) = self.bits();
        let (bx, bz) = other.bits();
        (ax & bz) ^ (az & bx)
    }

    pub fn to_char(self) -> char {
        match self {
            PauliOp::I => 'I',
            PauliOp::X => 'X',
            PauliOp::Y => 'Y',
            PauliOp::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Result<Self> {
        match c {
            'I' | '_' => Ok(PauliOp::I),
            'X' => Ok(PauliOp::X),
            'Y' => Ok(PauliOp::Y),
            'Z' => Ok(PauliOp::Z),
            other => Err(Error::BadPauliChar(other)),
        }
    }

    /// Index in 0..4 matching `ALL`.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::ops::Mul for PauliOp {
    type Output = PauliOp;
    #[inline]
    fn mul(self, rhs: PauliOp) -> PauliOp {
        let (ax, az) = self.bits();
        let (bx, bz) = rhs.bits();
        PauliOp::from_bits(ax ^ bx, az ^ bz)
    }
}

/// Tensor product of single-qubit Paulis, stored as an X mask and a Z mask.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    x: BitVec,
    z: BitVec,
}

/// The Pauli frame uses the same representation as physical errors.
pub type PauliFrame = PauliString;

impl PauliString {
    pub fn identity(n: usize) -> Self {
        Self { x: BitVec::zeros(n), z: BitVec::zeros(n) }
    }

    pub fn from_masks(x: BitVec, z: BitVec) -> Result<Self> {
        if x.len() != z.len() {
            return Err(Error::LengthMismatch { left: x.len(), right: z.len() });
        }
        Ok(Self { x, z })
    }

    pub fn single(n: usize, q: usize, op: PauliOp) -> Result<Self> {
        let mut p = Self::identity(n);
        p.set(q, op)?;
        Ok(p)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.x.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn xmask(&self) -> &BitVec {
        &self.x
    }

    pub fn zmask(&self) -> &BitVec {
        &self.z
    }

    pub fn xmask_mut(&mut self) -> &mut BitVec {
        &mut self.x
    }

    pub fn zmask_mut(&mut self) -> &mut BitVec {
        &mut self.z
    }

    pub fn get(&self, q: usize) -> PauliOp {
        PauliOp::from_bits(self.x.get(q), self.z.get(q))
    }

    pub fn set(&mut self, q: usize, op: PauliOp) -> Result<()> {
        if q >= self.len() {
            return Err(Error::IndexOutOfRange { index: q, len: self.len() });
        }
        let (x, z) = op.bits();
        self.x.set(q, x);
        self.z.set(q, z);
        Ok(())
    }

    /// Multiply a single-qubit Pauli into position `q`.
    pub fn apply(&mut self, q: usize, op: PauliOp) {
        let (x, z) = op.bits();
        if x {
            self.x.flip(q);
        }
        if z {
            self.z.flip(q);
        }
    }

    pub fn is_identity(&self) -> bool {
        self.x.is_zero() && self.z.is_zero()
    }

    pub fn support(&self) -> Vec<usize> {
        self.x.or(&self.z).ones().collect()
    }

    pub fn weight(&self) -> usize {
        self.x.or(&self.z).weight()
    }

    fn check_len(&self, other: &PauliString) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch { left: self.len(), right: other.len() });
        }
        Ok(())
    }

    /// Product of two Pauli strings with the phase dropped.
    pub fn multiply(&self, other: &PauliString) -> Result<PauliString> {
        self.check_len(other)?;
        Ok(PauliString { x: self.x.xor(&other.x), z: self.z.xor(&other.z) })
    }

    pub fn mul_assign(&mut self, other: &PauliString) {
        self.x.xor_assign(&other.x);
        self.z.xor_assign(&other.z);
    }

    /// Symplectic product: `true` when the two strings anticommute.
    pub fn anticommutes(&self, other: &PauliString) -> Result<bool> {
        self.check_len(other)?;
        Ok(self.x.dot(&other.z) ^ self.z.dot(&other.x))
    }

    /// Returns 0 when `a` and `b` commute and 1 when they anticommute.
    pub fn commutes(a: &PauliString, b: &PauliString) -> Result<u8> {
        Ok(a.anticommutes(b)? as u8)
    }

    /// Conjugation by CZ on qubits `a`, `b`: an X on either side picks up a Z
    /// on the other; Z components are untouched.
    pub fn conjugate_cz(&self, a: usize, b: usize) -> Result<PauliString> {
        let n = self.len();
        for i in [a, b] {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
        }
        if a == b {
            return Err(Error::Usage("conjugate_cz needs two distinct qubits".into()));
        }
        let mut out = self.clone();
        if self.x.get(a) {
            out.z.flip(b);
        }
        if self.x.get(b) {
            out.z.flip(a);
        }
        Ok(out)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.len() {
            write!(f, "{}", self.get(q).to_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({self})")
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Leftmost character is qubit 0.
    fn from_str(s: &str) -> Result<Self> {
        let ops = s.chars().map(PauliOp::from_char).collect::<Result<Vec<_>>>()?;
        let mut p = PauliString::identity(ops.len());
        for (q, op) in ops.into_iter().enumerate() {
            p.apply(q, op);
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn multiply_examples() {
        assert_eq!(p("XI").multiply(&p("IZ")).unwrap(), p("XZ"));
        assert_eq!(p("X").multiply(&p("X")).unwrap(), p("I"));
        assert_eq!(p("X").multiply(&p("Z")).unwrap(), p("Y"));
        assert!(matches!(p("X").multiply(&p("XX")), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn commutation_examples() {
        assert_eq!(PauliString::commutes(&p("X"), &p("Z")).unwrap(), 1);
        assert_eq!(PauliString::commutes(&p("X"), &p("X")).unwrap(), 0);
        assert_eq!(PauliString::commutes(&p("XZ"), &p("ZX")).unwrap(), 0);
        assert!(PauliString::commutes(&p("XZ"), &p("Z")).is_err());
    }

    #[test]
    fn cz_conjugation_examples() {
        assert_eq!(p("XI").conjugate_cz(0, 1).unwrap(), p("XZ"));
        assert_eq!(p("ZI").conjugate_cz(0, 1).unwrap(), p("ZI"));
        assert_eq!(p("YI").conjugate_cz(0, 1).unwrap(), p("YZ"));
        assert!(p("XI").conjugate_cz(0, 2).is_err());
        assert!(p("XI").conjugate_cz(1, 1).is_err());
    }

    #[test]
    fn literal_round_trip() {
        let s = "IXZY";
        assert_eq!(p(s).to_string(), s);
        assert_eq!(p(s).get(1), PauliOp::X);
        assert!("IXQ".parse::<PauliString>().is_err());
    }

    fn arb_pauli(n: usize) -> impl Strategy<Value = PauliString> {
        proptest::collection::vec(0u8..4, n).prop_map(|v| {
            let mut s = PauliString::identity(v.len());
            for (i, k) in v.into_iter().enumerate() {
                s.apply(i, PauliOp::ALL[k as usize]);
            }
            s
        })
    }

    proptest! {
        #[test]
        fn group_laws(a in arb_pauli(9), b in arb_pauli(9), c in arb_pauli(9)) {
            let ab_c = a.multiply(&b).unwrap().multiply(&c).unwrap();
            let a_bc = a.multiply(&b.multiply(&c).unwrap()).unwrap();
            prop_assert_eq!(ab_c, a_bc);
            prop_assert!(a.multiply(&a).unwrap().is_identity());
        }

        #[test]
        fn commutation_is_symmetric_and_bilinear(a in arb_pauli(9), b in arb_pauli(9), c in arb_pauli(9)) {
            let ab = PauliString::commutes(&a, &b).unwrap();
            prop_assert_eq!(ab, PauliString::commutes(&b, &a).unwrap());
            let ac = PauliString::commutes(&a, &c).unwrap();
            let a_bc = PauliString::commutes(&a, &b.multiply(&c).unwrap()).unwrap();
            prop_assert_eq!(a_bc, ab ^ ac);
        }

        #[test]
        fn cz_is_an_involution(a in arb_pauli(6), i in 0usize..6, j in 0usize..6) {
            prop_assume!(i != j);
            let twice = a.conjugate_cz(i, j).unwrap().conjugate_cz(i, j).unwrap();
            prop_assert_eq!(twice, a);
        }
    }
}
