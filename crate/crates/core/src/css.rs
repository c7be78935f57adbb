//! Steane 7-qubit and Golay 23-qubit CSS codes with precomputed syndrome
//! tables.
//!
//! Both codes use the same classical check matrix for X and Z checks, so the
//! two error types decode through the identical procedure. Blocks are at most
//! 64 qubits, which lets patterns live in a single `u64`.

use std::fmt;

use crate::error::{Error, Result};
use crate::gf2::{BitMatrix, BitVec};

const STEANE_ASSET: &str = include_str!("../assets/steane7.txt");
const GOLAY_ASSET: &str = include_str!("../assets/golay23.txt");

/// Golay generator polynomial x^11+x^10+x^6+x^5+x^4+x^2+1, bit i = coeff of x^i.
pub const GOLAY_GENERATOR: u64 = (1 << 11) | (1 << 10) | (1 << 6) | (1 << 5) | (1 << 4) | (1 << 2) | 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeName {
    Steane7,
    Golay23,
}

impl CodeName {
    pub fn as_str(self) -> &'static str {
        match self {
            CodeName::Steane7 => "steane7",
            CodeName::Golay23 => "golay23",
        }
    }
}

impl std::str::FromStr for CodeName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "steane7" => Ok(CodeName::Steane7),
            "golay23" => Ok(CodeName::Golay23),
            other => Err(Error::UnknownCode(other.to_string())),
        }
    }
}

impl fmt::Display for CodeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which error component a syndrome or decode refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ErrorKind {
    /// Bit flips, detected by the Z checks (`hz`).
    X,
    /// Phase flips, detected by the X checks (`hx`).
    Z,
}

/// Minimum-weight coset leader for every syndrome of one check matrix.
#[derive(Clone, Debug)]
pub struct SyndromeTable {
    leaders: Vec<u64>,
}

impl SyndromeTable {
    /// Breadth-first over error weight; the first pattern reaching a syndrome
    /// is a minimum-weight leader. Patterns of one weight are visited in
    /// increasing numeric order.
    pub fn build(checks: &[u64], n: usize) -> Self {
        let r = checks.len();
        let size = 1usize << r;
        let mut leaders = vec![u64::MAX; size];
        let mut filled = 0;
        for w in 0..=n {
            for_each_weight(n, w, |e| {
                let s = syndrome_u64(checks, e) as usize;
                if leaders[s] == u64::MAX {
                    leaders[s] = e;
                    filled += 1;
                }
            });
            if filled == size {
                break;
            }
        }
        Self { leaders }
    }

    #[inline]
    pub fn leader(&self, syndrome: u64) -> u64 {
        self.leaders[syndrome as usize]
    }

    pub fn len(&self) -> usize {
        self.leaders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaders.is_empty()
    }

    pub fn leaders(&self) -> &[u64] {
        &self.leaders
    }
}

/// Calls `f` on every n-bit pattern of weight w.
pub fn for_each_weight(n: usize, w: usize, mut f: impl FnMut(u64)) {
    if w > n {
        return;
    }
    if w == 0 {
        f(0);
        return;
    }
    // Gosper's hack
    let mut v: u64 = (1u64 << w) - 1;
    let limit: u64 = if n == 64 { u64::MAX } else { 1u64 << n };
    while v < limit {
        f(v);
        let t = v | (v - 1);
        let next = (t + 1) | (((!t & (!t).wrapping_neg()) - 1) >> (v.trailing_zeros() + 1));
        if next <= v {
            break;
        }
        v = next;
    }
}

#[inline]
pub fn syndrome_u64(checks: &[u64], e: u64) -> u64 {
    checks
        .iter()
        .enumerate()
        .fold(0u64, |s, (i, &row)| s | ((((row & e).count_ones() & 1) as u64) << i))
}

/// A CSS code encoding one logical qubit.
#[derive(Clone, Debug)]
pub struct CssCode {
    pub name: CodeName,
    pub n: usize,
    /// X-type checks; they detect Z errors.
    pub hx: Vec<u64>,
    /// Z-type checks; they detect X errors.
    pub hz: Vec<u64>,
    /// Support of a minimum-weight logical X.
    pub lx: u64,
    /// Support of a minimum-weight logical Z.
    pub lz: u64,
    /// Unlocated correction radius.
    pub t: usize,
    table_x: SyndromeTable,
    table_z: SyndromeTable,
    /// ker(hz): every X pattern with trivial syndrome.
    kernel_x: Vec<u64>,
    kernel_z: Vec<u64>,
    /// rowspace(hx): X patterns that act trivially on the code space.
    stab_x: Vec<u64>,
    stab_z: Vec<u64>,
}

impl CssCode {
    pub fn load(name: CodeName) -> Result<Self> {
        let text = match name {
            CodeName::Steane7 => STEANE_ASSET,
            CodeName::Golay23 => GOLAY_ASSET,
        };
        let (n, hx, hz) = parse_asset(text)?;
        let t = match name {
            CodeName::Steane7 => 1,
            CodeName::Golay23 => 3,
        };
        Self::from_checks(name, n, hx, hz, t)
    }

    pub fn from_checks(name: CodeName, n: usize, hx: Vec<u64>, hz: Vec<u64>, t: usize) -> Result<Self> {
        if n == 0 || n > 64 {
            return Err(Error::BadAsset(format!("block length {n} unsupported")));
        }
        let stab_x = span_u64(&hx);
        let stab_z = span_u64(&hz);
        let kernel_x = kernel_u64(&hz, n);
        let kernel_z = kernel_u64(&hx, n);
        let lx = min_weight_outside(&kernel_x, &stab_x).unwrap_or(0);
        let lz = min_weight_outside(&kernel_z, &stab_z).unwrap_or(0);
        Ok(Self {
            name,
            n,
            table_x: SyndromeTable::build(&hz, n),
            table_z: SyndromeTable::build(&hx, n),
            hx,
            hz,
            lx,
            lz,
            t,
            kernel_x,
            kernel_z,
            stab_x,
            stab_z,
        })
    }

    /// Check rows detecting errors of the given kind.
    pub fn checks(&self, kind: ErrorKind) -> &[u64] {
        match kind {
            ErrorKind::X => &self.hz,
            ErrorKind::Z => &self.hx,
        }
    }

    pub fn n_checks(&self, kind: ErrorKind) -> usize {
        self.checks(kind).len()
    }

    pub fn table(&self, kind: ErrorKind) -> &SyndromeTable {
        match kind {
            ErrorKind::X => &self.table_x,
            ErrorKind::Z => &self.table_z,
        }
    }

    /// Error patterns of this kind with zero syndrome.
    pub fn kernel(&self, kind: ErrorKind) -> &[u64] {
        match kind {
            ErrorKind::X => &self.kernel_x,
            ErrorKind::Z => &self.kernel_z,
        }
    }

    /// Error patterns of this kind equivalent to identity.
    pub fn stabilizers(&self, kind: ErrorKind) -> &[u64] {
        match kind {
            ErrorKind::X => &self.stab_x,
            ErrorKind::Z => &self.stab_z,
        }
    }

    /// Logical operator that detects a logical error of this kind.
    pub fn detecting_logical(&self, kind: ErrorKind) -> u64 {
        match kind {
            ErrorKind::X => self.lz,
            ErrorKind::Z => self.lx,
        }
    }

    /// True when a zero-syndrome pattern of this kind is a nontrivial logical.
    pub fn is_logical(&self, kind: ErrorKind, e: u64) -> bool {
        (e & self.detecting_logical(kind)).count_ones() & 1 == 1
    }

    #[inline]
    pub fn syndrome_u64(&self, kind: ErrorKind, e: u64) -> u64 {
        syndrome_u64(self.checks(kind), e)
    }

    /// Syndrome of a pattern given as a bit vector of length n.
    pub fn syndrome(&self, kind: ErrorKind, e: &BitVec) -> Result<BitVec> {
        if e.len() != self.n {
            return Err(Error::LengthMismatch { left: e.len(), right: self.n });
        }
        let s = self.syndrome_u64(kind, bits_to_u64(e));
        Ok(BitVec::from_u64(self.n_checks(kind), s))
    }

    pub fn mask(&self) -> u64 {
        if self.n == 64 {
            u64::MAX
        } else {
            (1u64 << self.n) - 1
        }
    }
}

pub fn bits_to_u64(e: &BitVec) -> u64 {
    e.ones().fold(0u64, |acc, i| acc | (1u64 << i))
}

fn span_u64(rows: &[u64]) -> Vec<u64> {
    let mut basis: Vec<u64> = Vec::new();
    for &r in rows {
        let mut v = r;
        for &b in &basis {
            v = v.min(v ^ b);
        }
        if v != 0 {
            basis.push(v);
        }
    }
    let mut out = Vec::with_capacity(1 << basis.len());
    for mask in 0u64..(1u64 << basis.len()) {
        let mut v = 0;
        for (i, b) in basis.iter().enumerate() {
            if (mask >> i) & 1 == 1 {
                v ^= b;
            }
        }
        out.push(v);
    }
    out.sort_unstable();
    out
}

fn kernel_u64(checks: &[u64], n: usize) -> Vec<u64> {
    let m = to_matrix(checks, n);
    let basis: Vec<u64> = m.nullspace().iter().map(bits_to_u64).collect();
    span_u64(&basis)
}

fn min_weight_outside(kernel: &[u64], stab: &[u64]) -> Option<u64> {
    kernel
        .iter()
        .copied()
        .filter(|v| stab.binary_search(v).is_err())
        .min_by_key(|v| (v.count_ones(), v.reverse_bits()))
}

pub fn to_matrix(rows: &[u64], n: usize) -> BitMatrix {
    BitMatrix::from_rows(
        n,
        rows.iter().map(|&r| BitVec::from_bits((0..n).map(|i| (r >> i) & 1 == 1))).collect(),
    )
}

/// Parse the plain-text asset: header `n rx rz`, then rx rows of Hx and rz
/// rows of Hz as '0'/'1' strings (leftmost character is qubit 0).
pub fn parse_asset(text: &str) -> Result<(usize, Vec<u64>, Vec<u64>)> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| Error::BadAsset("empty asset".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::BadAsset(format!("bad header {header:?}"))))
        .collect::<Result<_>>()?;
    let [n, rx, rz] = dims[..] else {
        return Err(Error::BadAsset(format!("header must be `n rx rz`, got {header:?}")));
    };
    let mut parse_row = |what: &str| -> Result<u64> {
        let line = lines.next().ok_or_else(|| Error::BadAsset(format!("missing {what} row")))?;
        if line.len() != n {
            return Err(Error::BadAsset(format!("row {line:?} has length {} not {n}", line.len())));
        }
        line.chars().enumerate().try_fold(0u64, |acc, (i, c)| match c {
            '0' => Ok(acc),
            '1' => Ok(acc | (1u64 << i)),
            _ => Err(Error::BadAsset(format!("bad character {c:?}"))),
        })
    };
    let hx = (0..rx).map(|_| parse_row("Hx")).collect::<Result<Vec<_>>>()?;
    let hz = (0..rz).map(|_| parse_row("Hz")).collect::<Result<Vec<_>>>()?;
    Ok((n, hx, hz))
}

pub fn render_asset(n: usize, hx: &[u64], hz: &[u64]) -> String {
    let mut s = format!("{n} {} {}\n", hx.len(), hz.len());
    for &r in hx.iter().chain(hz) {
        for i in 0..n {
            s.push(if (r >> i) & 1 == 1 { '1' } else { '0' });
        }
        s.push('\n');
    }
    s
}

/// Regenerate the check matrix of a shipped code from first principles.
pub fn generate_checks(name: CodeName) -> (usize, Vec<u64>) {
    match name {
        CodeName::Steane7 => {
            // column j holds the binary expansion of j+1
            let rows = (0..3)
                .map(|bit| (0..7).fold(0u64, |acc, j| acc | ((((j + 1) >> bit) & 1) as u64) << j))
                .collect();
            (7, rows)
        }
        CodeName::Golay23 => {
            let n = 23;
            let generator: Vec<u64> = (0..12).map(|s| GOLAY_GENERATOR << s).collect();
            // parity checks span the dual of the cyclic [23,12] code
            let mut dual = to_matrix(&generator, n).nullspace();
            let mut m = BitMatrix::from_rows(n, std::mem::take(&mut dual));
            m.row_reduce();
            (n, m.rows().iter().map(bits_to_u64).collect())
        }
    }
}

/// Asset text that `CssCode::load` expects for `name`.
pub fn build_asset(name: CodeName) -> String {
    let (n, h) = generate_checks(name);
    render_asset(n, &h, &h)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub code: String,
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(CheckResult { name: name.to_string(), passed, detail });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {:<28} {} {}", self.code, c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail)?;
        }
        Ok(())
    }
}

/// Exhaustively check the structural invariants of a code.
pub fn validate(code: &CssCode) -> ValidationReport {
    let mut rep = ValidationReport { code: code.name.to_string(), checks: Vec::new() };
    let n = code.n;

    let orth = code.hx.iter().all(|&a| code.hz.iter().all(|&b| (a & b).count_ones() % 2 == 0));
    rep.push("hx_hz_orthogonal", orth, String::new());

    let lx_ok = syndrome_u64(&code.hz, code.lx) == 0 && code.lx != 0;
    let lz_ok = syndrome_u64(&code.hx, code.lz) == 0 && code.lz != 0;
    rep.push("logicals_commute_with_checks", lx_ok && lz_ok, format!("lx={:#x} lz={:#x}", code.lx, code.lz));
    let anti = (code.lx & code.lz).count_ones() % 2 == 1;
    rep.push("lx_anticommutes_lz", anti, String::new());

    let rank_x = to_matrix(&code.hx, n).rank();
    let rank_z = to_matrix(&code.hz, n).rank();
    let k = n as isize - rank_x as isize - rank_z as isize;
    rep.push("one_logical_qubit", k == 1, format!("k={k}"));

    let dx = code
        .kernel_x
        .iter()
        .filter(|v| code.stab_x.binary_search(v).is_err())
        .map(|v| v.count_ones())
        .min()
        .unwrap_or(0) as usize;
    let dz = code
        .kernel_z
        .iter()
        .filter(|v| code.stab_z.binary_search(v).is_err())
        .map(|v| v.count_ones())
        .min()
        .unwrap_or(0) as usize;
    let d = dx.min(dz);
    rep.push("distance", d > 2 * code.t, format!("dx={dx} dz={dz} need>={}", 2 * code.t + 1));

    for kind in [ErrorKind::X, ErrorKind::Z] {
        let checks = code.checks(kind);
        let mut seen = vec![false; 1 << checks.len()];
        let mut unique = true;
        for w in 0..=code.t {
            for_each_weight(n, w, |e| {
                let s = syndrome_u64(checks, e) as usize;
                if seen[s] {
                    unique = false;
                }
                seen[s] = true;
            });
        }
        rep.push(&format!("unique_syndromes_{kind:?}"), unique, String::new());

        let table = code.table(kind);
        let full = table.leaders().iter().all(|&l| l != u64::MAX) && table.len() == 1 << checks.len();
        let mut minimal = full;
        let mut radius_ok = true;
        if full {
            for (s, &leader) in table.leaders().iter().enumerate() {
                if syndrome_u64(checks, leader) != s as u64 {
                    minimal = false;
                }
                let best = code.kernel(kind).iter().map(|c| (c ^ leader).count_ones()).min().unwrap_or(0);
                if best < leader.count_ones() {
                    minimal = false;
                }
                if leader.count_ones() as usize > code.t {
                    radius_ok = false;
                }
            }
        }
        rep.push(&format!("table_minimal_{kind:?}"), minimal, String::new());
        rep.push(&format!("table_within_radius_{kind:?}"), radius_ok, String::new());
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_assets_match_generators() {
        for name in [CodeName::Steane7, CodeName::Golay23] {
            let text = match name {
                CodeName::Steane7 => STEANE_ASSET,
                CodeName::Golay23 => GOLAY_ASSET,
            };
            assert_eq!(text, build_asset(name), "{name}");
        }
    }

    /// Rewrites the shipped matrices; run with `--ignored` after changing a generator.
    #[test]
    #[ignore]
    fn regenerate_assets() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("assets");
        std::fs::write(dir.join("steane7.txt"), build_asset(CodeName::Steane7)).unwrap();
        std::fs::write(dir.join("golay23.txt"), build_asset(CodeName::Golay23)).unwrap();
    }

    #[test]
    fn load_dimensions() {
        let s = CssCode::load(CodeName::Steane7).unwrap();
        assert_eq!((s.n, s.hx.len(), s.hz.len(), s.t), (7, 3, 3, 1));
        let g = CssCode::load(CodeName::Golay23).unwrap();
        assert_eq!((g.n, g.hx.len(), g.hz.len(), g.t), (23, 11, 11, 3));
        assert!(matches!("surface17".parse::<CodeName>(), Err(Error::UnknownCode(_))));
    }

    #[test]
    fn steane_distance_by_full_enumeration() {
        let s = CssCode::load(CodeName::Steane7).unwrap();
        // brute force over all 2^7 patterns, independent of the kernel cache
        let mut d = usize::MAX;
        for e in 1u64..128 {
            if syndrome_u64(&s.hz, e) == 0 && (e & s.lz).count_ones() % 2 == 1 {
                d = d.min(e.count_ones() as usize);
            }
        }
        assert_eq!(d, 3);
    }

    #[test]
    fn golay_minimum_weight_is_seven() {
        // enumerate all 4096 codewords of the cyclic code from its generator
        let gen: Vec<u64> = (0..12).map(|s| GOLAY_GENERATOR << s).collect();
        let mut min = u32::MAX;
        for m in 1u64..4096 {
            let c = (0..12).filter(|i| (m >> i) & 1 == 1).fold(0, |acc, i| acc ^ gen[i]);
            min = min.min(c.count_ones());
        }
        assert_eq!(min, 7);
        let g = CssCode::load(CodeName::Golay23).unwrap();
        for &c in g.kernel(ErrorKind::X) {
            assert_eq!(syndrome_u64(&g.hz, c), 0);
        }
        assert_eq!(g.kernel(ErrorKind::X).len(), 4096);
    }

    #[test]
    fn syndrome_examples() {
        let s = CssCode::load(CodeName::Steane7).unwrap();
        let zero = BitVec::zeros(7);
        assert!(s.syndrome(ErrorKind::X, &zero).unwrap().is_zero());
        for i in 0..7 {
            let e = BitVec::from_indices(7, &[i]);
            let hz = to_matrix(&s.hz, 7);
            assert_eq!(s.syndrome(ErrorKind::X, &e).unwrap(), hz.column(i));
        }
        // all 16 Hamming codewords have zero syndrome
        let cw: Vec<u64> = (0u64..128).filter(|&e| syndrome_u64(&s.hz, e) == 0).collect();
        assert_eq!(cw.len(), 16);
        for c in cw {
            let v = BitVec::from_bits((0..7).map(|i| (c >> i) & 1 == 1));
            assert!(s.syndrome(ErrorKind::X, &v).unwrap().is_zero());
        }
        assert!(s.syndrome(ErrorKind::X, &BitVec::zeros(6)).is_err());
    }

    #[test]
    fn validate_shipped_codes() {
        for name in [CodeName::Steane7, CodeName::Golay23] {
            let rep = validate(&CssCode::load(name).unwrap());
            assert!(rep.passed(), "{rep}");
        }
    }

    #[test]
    fn mutated_hx_fails_orthogonality() {
        let s = CssCode::load(CodeName::Steane7).unwrap();
        let mut hx = s.hx.clone();
        hx[0] ^= 1;
        let bad = CssCode::from_checks(CodeName::Steane7, 7, hx, s.hz.clone(), 1).unwrap();
        let rep = validate(&bad);
        let orth = rep.checks.iter().find(|c| c.name == "hx_hz_orthogonal").unwrap();
        assert!(!orth.passed);
    }

    #[test]
    fn asset_parser_rejects_garbage() {
        assert!(parse_asset("").is_err());
        assert!(parse_asset("3 1 1\n101\n10\n").is_err());
        assert!(parse_asset("3 1 1\n1a1\n101\n").is_err());
    }
}
