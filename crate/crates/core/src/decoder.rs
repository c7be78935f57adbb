//! Maximum-likelihood decoding of CSS syndromes under a mix of located and
//! unlocated errors.
//!
//! A located position carries a uniformly random Pauli, so its value never
//! changes the likelihood. Decoding therefore minimises the number of flips on
//! unlocated positions and treats located positions as free.

use crate::css::{CssCode, ErrorKind};
use crate::error::{Error, Result};
use crate::gf2::BitVec;
use crate::pauli::PauliString;

/// Located sets larger than this are declared a located crash without decoding.
pub const MAX_LOCATED: u32 = 12;

#[derive(Clone, Debug)]
pub struct DecodeInput<'a> {
    pub code: &'a CssCode,
    pub which: ErrorKind,
    pub syndrome: BitVec,
    pub located: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodeOutput {
    pub flips: Vec<usize>,
    pub located_crash: bool,
}

/// Result of the bitmask decoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Decoded {
    pub flips: u64,
    pub located_crash: bool,
}

pub fn decode(input: &DecodeInput<'_>) -> Result<DecodeOutput> {
    let code = input.code;
    let rows = code.n_checks(input.which);
    if input.syndrome.len() != rows {
        return Err(Error::LengthMismatch { left: input.syndrome.len(), right: rows });
    }
    let mut located = 0u64;
    for &i in &input.located {
        if i >= code.n {
            return Err(Error::IndexOutOfRange { index: i, len: code.n });
        }
        located |= 1 << i;
    }
    let syndrome = input.syndrome.ones().fold(0u64, |s, i| s | (1 << i));
    let d = decode_mask(code, input.which, syndrome, located);
    Ok(DecodeOutput { flips: mask_to_indices(d.flips), located_crash: d.located_crash })
}

pub fn mask_to_indices(mut m: u64) -> Vec<usize> {
    let mut v = Vec::with_capacity(m.count_ones() as usize);
    while m != 0 {
        v.push(m.trailing_zeros() as usize);
        m &= m - 1;
    }
    v
}

/// True when flip set `a` precedes `b` comparing their sorted index lists.
#[inline]
pub fn lex_less(a: u64, b: u64) -> bool {
    let d = a ^ b;
    if d == 0 {
        return false;
    }
    let i = d.trailing_zeros();
    if (a >> i) & 1 == 1 {
        // b is a prefix of a only if b has nothing at or above i
        (b >> i) != 0
    } else {
        (a >> i) == 0
    }
}

/// Decode a syndrome given as a check-bit mask with a located-position mask.
pub fn decode_mask(code: &CssCode, which: ErrorKind, syndrome: u64, located: u64) -> Decoded {
    let table = code.table(which);
    let checks = code.checks(which);
    if located.count_ones() > MAX_LOCATED {
        return Decoded { flips: table.leader(syndrome), located_crash: true };
    }
    let unlocated = code.mask() & !located;
    let loc = mask_to_indices(located);
    let cols: Vec<u64> = loc.iter().map(|&i| code.syndrome_u64(which, 1 << i)).collect();

    // Gray-code walk over located assignments
    let mut assign = 0u64;
    let mut s = syndrome;
    let mut best_w = u32::MAX;
    let mut best = 0u64;
    for step in 0u64..(1u64 << loc.len()) {
        if step > 0 {
            let j = step.trailing_zeros() as usize;
            assign ^= 1 << loc[j];
            s ^= cols[j];
        }
        let leader = table.leader(s);
        let w = (leader & unlocated).count_ones();
        if w < best_w {
            best_w = w;
            best = assign ^ leader;
        }
    }
    debug_assert_eq!(crate::css::syndrome_u64(checks, best), syndrome);

    let logical = code.detecting_logical(which);
    let located_crash = located != 0
        && code.kernel(which).iter().any(|&c| {
            (c & logical).count_ones() & 1 == 1 && ((best ^ c) & unlocated).count_ones() == best_w
        });

    let mut flips = best;
    for &g in code.stabilizers(which) {
        let cand = best ^ g;
        if (cand & unlocated).count_ones() == best_w && lex_less(cand, flips) {
            flips = cand;
        }
    }
    Decoded { flips, located_crash }
}

/// Logical left behind by an ideal decode of a residual error.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LogicalError {
    None,
    X,
    Z,
    Y,
}

impl LogicalError {
    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => LogicalError::None,
            (true, false) => LogicalError::X,
            (false, true) => LogicalError::Z,
            (true, true) => LogicalError::Y,
        }
    }

    pub fn is_none(self) -> bool {
        self == LogicalError::None
    }
}

/// Ideal round of correction with no located positions.
pub fn perfect_decode(code: &CssCode, residual: &PauliString) -> Result<LogicalError> {
    if residual.len() != code.n {
        return Err(Error::LengthMismatch { left: residual.len(), right: code.n });
    }
    let x = residual.xmask().ones().fold(0u64, |m, i| m | (1 << i));
    let z = residual.zmask().ones().fold(0u64, |m, i| m | (1 << i));
    Ok(perfect_decode_masks(code, x, z))
}

pub fn perfect_decode_masks(code: &CssCode, x: u64, z: u64) -> LogicalError {
    let bad = |kind: ErrorKind, e: u64| {
        let fixed = e ^ code.table(kind).leader(code.syndrome_u64(kind, e));
        code.is_logical(kind, fixed)
    };
    LogicalError::from_bits(bad(ErrorKind::X, x), bad(ErrorKind::Z, z))
}

/// Brute-force ML reference used by the tests: enumerates the whole syndrome
/// coset and groups minimisers by logical class.
pub mod oracle {
    use super::*;
    use crate::css::syndrome_u64;

    #[derive(Clone, Copy, Debug, PartialEq, Eq)]
    pub struct Reference {
        pub unlocated_weight: u32,
        pub ambiguous: bool,
        /// Lexicographically least minimiser in the class of the first one found.
        pub flips: u64,
    }

    /// Every pattern with the given syndrome, by direct search (small n) or
    /// by shifting one solution through the code kernel.
    pub fn coset(code: &CssCode, which: ErrorKind, syndrome: u64) -> Vec<u64> {
        let checks = code.checks(which);
        if code.n <= 16 {
            (0u64..(1 << code.n)).filter(|&e| syndrome_u64(checks, e) == syndrome).collect()
        } else {
            let m = crate::css::to_matrix(checks, code.n);
            let b = BitVec::from_u64(checks.len(), syndrome);
            let Some(sol) = m.solve(&b) else { return Vec::new() };
            let e0 = crate::css::bits_to_u64(&sol);
            code.kernel(which).iter().map(|c| c ^ e0).collect()
        }
    }

    pub fn reference(code: &CssCode, which: ErrorKind, syndrome: u64, located: u64) -> Reference {
        let unlocated = code.mask() & !located;
        let logical = code.detecting_logical(which);
        let all = coset(code, which, syndrome);
        let w = all.iter().map(|e| (e & unlocated).count_ones()).min().unwrap();
        let mins: Vec<u64> = all.into_iter().filter(|e| (e & unlocated).count_ones() == w).collect();
        let class = |e: u64| (e & logical).count_ones() & 1;
        let c0 = class(mins[0]);
        let ambiguous = mins.iter().any(|&e| class(e) != c0);
        let mut flips = mins[0];
        for &e in &mins {
            if class(e) == c0 && super::lex_less(e, flips) {
                flips = e;
            }
        }
        Reference { unlocated_weight: w, ambiguous, flips }
    }
}


#[cfg(test)]
mod golay_tests {
    use super::*;
    use crate::css::CodeName;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn golay_random_oracle_agreement() {
        let g = CssCode::load(CodeName::Golay23).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let mut located = 0u64;
            for _ in 0..rng.gen_range(0..=8) {
                located |= 1 << rng.gen_range(0..23);
            }
            let syn = rng.gen_range(0..(1u64 << 11));
            let d = decode_mask(&g, ErrorKind::Z, syn, located);
            let r = oracle::reference(&g, ErrorKind::Z, syn, located);
            assert_eq!(d.located_crash, r.ambiguous);
            assert_eq!((d.flips & !located).count_ones(), r.unlocated_weight);
            if !r.ambiguous {
                assert_eq!(d.flips, r.flips);
            }
        }
    }
}
