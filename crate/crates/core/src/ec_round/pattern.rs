//! Linear analysis of measurement patterns on graph states.
//!
//! A pattern is a graph whose nodes are either fresh `|+>` qubits or members
//! of encoded input blocks, entangled by CZ on every edge. All nodes except
//! the outputs are measured in the X basis. Pauli errors are expressed at
//! the final time (after every CZ, before any measurement). The compiler
//! finds
//!
//! * detectors: stabilizer elements that are X-only on measured nodes and
//!   identity on the outputs, so their outcome parity is deterministic;
//! * labeled syndrome detectors, which reveal one check of an input block;
//! * output generators, whose outcome parities fix the byproduct on the
//!   outputs, and dual Paulis translating their flips into output errors.
//!
//! Each node then gets a signature per error type: the bits of all of these
//! elements that anticommute with that error.

use crate::css::{CssCode, ErrorKind};
use crate::error::{Error, Result};
use crate::gf2::{BitMatrix, BitVec, EchelonBasis};
use crate::pauli::PauliOp;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    /// X-measured before the data is attached; postselected.
    Pre,
    /// X-measured after the data is attached.
    Post,
    Output,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKind {
    /// Encoded `|0>`.
    Zero,
    /// Unknown encoded state, purified by a reference qubit.
    Logical,
}

#[derive(Clone, Debug)]
pub struct InputBlock {
    pub kind: BlockKind,
    /// Node holding each code position.
    pub nodes: Vec<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct Pattern {
    pub roles: Vec<Role>,
    pub edges: Vec<(usize, usize)>,
    pub blocks: Vec<InputBlock>,
}

impl Pattern {
    pub fn add_node(&mut self, role: Role) -> usize {
        self.roles.push(role);
        self.roles.len() - 1
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        self.edges.push((a, b));
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    pub fn outputs(&self) -> Vec<usize> {
        (0..self.len()).filter(|&v| self.roles[v] == Role::Output).collect()
    }
}

/// Asks for a detector revealing one check of an input block.
#[derive(Clone, Debug)]
pub struct LabelRequest {
    pub block: usize,
    /// Error type the check detects.
    pub kind: ErrorKind,
    pub check: usize,
    /// Measured nodes the detector must not touch.
    pub forbid: Vec<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct CompileOptions {
    pub labels: Vec<LabelRequest>,
    /// Measured nodes the output generators should avoid when possible.
    pub output_forbid: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum GenTag {
    Node,
    Stab { block: usize, kind: ErrorKind, row: usize },
    Logical,
}

/// A stabilizer element with its coefficients over the generators.
#[derive(Clone, Debug)]
struct Element {
    pauli: BitVec,
    coeff: BitVec,
}

impl Element {
    fn xor_assign(&mut self, other: &Element) {
        self.pauli.xor_assign(&other.pauli);
        self.coeff.xor_assign(&other.coeff);
    }
}

fn combine(basis: &[Element], beta: &BitVec) -> Element {
    let mut out = Element {
        pauli: BitVec::zeros(basis[0].pauli.len()),
        coeff: BitVec::zeros(basis[0].coeff.len()),
    };
    for i in beta.ones() {
        out.xor_assign(&basis[i]);
    }
    out
}

/// Matrix whose column `i` is `f(basis[i])`; rows are the coordinates.
fn coordinate_matrix(basis: &[Element], coords: usize, f: impl Fn(&Element) -> BitVec) -> BitMatrix {
    let rows: Vec<BitVec> = basis.iter().map(f).collect();
    BitMatrix::from_rows(coords, rows).transpose()
}

/// Subspace of `basis` on which every selected coordinate vanishes.
fn kernel(basis: &[Element], coords: &[usize]) -> Vec<Element> {
    if basis.is_empty() {
        return Vec::new();
    }
    let m = coordinate_matrix(basis, coords.len(), |e| {
        BitVec::from_bits(coords.iter().map(|&c| e.pauli.get(c)))
    });
    if coords.is_empty() {
        return basis.to_vec();
    }
    m.nullspace().iter().map(|b| combine(basis, b)).collect()
}

#[derive(Clone, Debug)]
pub struct Compiled {
    n_nodes: usize,
    width: usize,
    pub n_pre: usize,
    pub n_labels: usize,
    pub n_out: usize,
    /// Signatures, indexed by `(2 * node + z) * width`.
    sig: Vec<u64>,
    /// Dual Pauli on the outputs for each output generator, as (x, z) masks
    /// over output order.
    duals: Vec<(u64, u64)>,
    /// Output part of each output generator, as (x, z) masks.
    out_proj: Vec<(u64, u64)>,
    outputs: Vec<usize>,
    neighbors: Vec<Vec<usize>>,
    is_input: Vec<bool>,
}

impl Compiled {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    /// Stabilizers of the ideal output state restricted to the outputs.
    pub fn output_stabilizers(&self) -> &[(u64, u64)] {
        &self.out_proj
    }

    pub fn n_bits(&self) -> usize {
        self.n_pre + self.n_labels + self.n_out
    }

    pub fn zero_sig(&self) -> Vec<u64> {
        vec![0; self.width]
    }

    /// Signature of a single-node X (`z = false`) or Z error at final time.
    pub fn node_sig(&self, node: usize, z: bool) -> &[u64] {
        let at = (2 * node + z as usize) * self.width;
        &self.sig[at..at + self.width]
    }

    /// XORs the signature of `op` on `node` (final time) into `acc`.
    pub fn apply(&self, acc: &mut [u64], node: usize, op: PauliOp) {
        let (x, z) = op.bits();
        if x {
            xor_words(acc, self.node_sig(node, false));
        }
        if z {
            xor_words(acc, self.node_sig(node, true));
        }
    }

    /// As `apply`, but for an input-level Pauli on an input node: X is
    /// dressed with Z on the node's neighbors.
    pub fn apply_input(&self, acc: &mut [u64], node: usize, op: PauliOp) {
        debug_assert!(self.is_input[node]);
        self.apply(acc, node, op);
        if op.has_x() {
            for &u in &self.neighbors[node] {
                xor_words(acc, self.node_sig(u, true));
            }
        }
    }

    pub fn pre_clear(&self, acc: &[u64]) -> bool {
        (0..self.n_pre).all(|b| !get_bit(acc, b))
    }

    pub fn label_bit(&self, acc: &[u64], i: usize) -> bool {
        get_bit(acc, self.n_pre + i)
    }

    pub fn out_bit(&self, acc: &[u64], k: usize) -> bool {
        get_bit(acc, self.n_pre + self.n_labels + k)
    }

    /// Output error implied by the output-generator flips in `acc`.
    pub fn residual(&self, acc: &[u64]) -> (u64, u64) {
        let mut x = 0;
        let mut z = 0;
        for (k, &(dx, dz)) in self.duals.iter().enumerate() {
            if self.out_bit(acc, k) {
                x ^= dx;
                z ^= dz;
            }
        }
        (x, z)
    }
}

#[inline]
pub fn xor_words(acc: &mut [u64], other: &[u64]) {
    for (a, b) in acc.iter_mut().zip(other) {
        *a ^= b;
    }
}

#[inline]
pub fn get_bit(words: &[u64], b: usize) -> bool {
    (words[b / 64] >> (b % 64)) & 1 == 1
}

#[inline]
fn set_bit(words: &mut [u64], b: usize) {
    words[b / 64] |= 1 << (b % 64);
}

pub fn compile(pattern: &Pattern, code: &CssCode, opts: &CompileOptions) -> Result<Compiled> {
    let n_nodes = pattern.len();
    let logical_blocks =
        pattern.blocks.iter().filter(|b| b.kind == BlockKind::Logical).count();
    if logical_blocks > 1 {
        return Err(Error::Usage("at most one logical input block is supported".into()));
    }
    let reference = (logical_blocks == 1).then_some(n_nodes);
    let nq = n_nodes + logical_blocks;
    let xi = |q: usize| q;
    let zi = |q: usize| nq + q;

    let mut neighbors = vec![Vec::new(); n_nodes];
    for &(a, b) in &pattern.edges {
        if a == b || neighbors[a].contains(&b) {
            return Err(Error::Usage(format!("bad or repeated edge {a}-{b}")));
        }
        neighbors[a].push(b);
        neighbors[b].push(a);
    }
    let mut is_input = vec![false; n_nodes];
    for block in &pattern.blocks {
        if block.nodes.len() != code.n {
            return Err(Error::LengthMismatch { left: block.nodes.len(), right: code.n });
        }
        for &v in &block.nodes {
            if is_input[v] {
                return Err(Error::Usage(format!("node {v} is in two input blocks")));
            }
            is_input[v] = true;
        }
    }

    // generators of the final state
    let dressed_x = |p: &mut BitVec, v: usize| {
        p.flip(xi(v));
        for &u in &neighbors[v] {
            p.flip(zi(u));
        }
    };
    let mut gens: Vec<(BitVec, GenTag)> = Vec::new();
    for v in (0..n_nodes).filter(|&v| !is_input[v]) {
        let mut p = BitVec::zeros(2 * nq);
        dressed_x(&mut p, v);
        gens.push((p, GenTag::Node));
    }
    for (bi, block) in pattern.blocks.iter().enumerate() {
        for kind in [ErrorKind::X, ErrorKind::Z] {
            for (row, &mask) in code.checks(kind).iter().enumerate() {
                let mut p = BitVec::zeros(2 * nq);
                for i in (0..code.n).filter(|i| mask >> i & 1 == 1) {
                    let v = block.nodes[i];
                    match kind {
                        // X errors are caught by Z-type checks
                        ErrorKind::X => p.flip(zi(v)),
                        ErrorKind::Z => dressed_x(&mut p, v),
                    }
                }
                gens.push((p, GenTag::Stab { block: bi, kind, row }));
            }
        }
        let mut zl = BitVec::zeros(2 * nq);
        for i in (0..code.n).filter(|i| code.lz >> i & 1 == 1) {
            zl.flip(zi(block.nodes[i]));
        }
        if block.kind == BlockKind::Logical {
            let r = reference.expect("reference qubit");
            zl.flip(zi(r));
            let mut xl = BitVec::zeros(2 * nq);
            for i in (0..code.n).filter(|i| code.lx >> i & 1 == 1) {
                dressed_x(&mut xl, block.nodes[i]);
            }
            xl.flip(xi(r));
            gens.push((xl, GenTag::Logical));
        }
        gens.push((zl, GenTag::Logical));
    }
    let n_gens = gens.len();
    let all: Vec<Element> = gens
        .iter()
        .enumerate()
        .map(|(g, (p, _))| Element { pauli: p.clone(), coeff: BitVec::from_indices(n_gens, &[g]) })
        .collect();

    let measured: Vec<usize> = (0..n_nodes).filter(|&v| pattern.roles[v] != Role::Output).collect();
    let outputs = pattern.outputs();
    let mut out_coords: Vec<usize> = outputs.iter().flat_map(|&v| [xi(v), zi(v)]).collect();
    if let Some(r) = reference {
        out_coords.extend([xi(r), zi(r)]);
    }

    // elements whose value is fixed by X outcomes
    let z_on_measured: Vec<usize> = measured.iter().map(|&v| zi(v)).collect();
    let w = kernel(&all, &z_on_measured);
    let detectors = kernel(&w, &out_coords);
    let post_x: Vec<usize> =
        measured.iter().filter(|&&v| pattern.roles[v] == Role::Post).map(|&v| xi(v)).collect();
    let pre_only = kernel(&detectors, &post_x);

    // labeled syndrome detectors
    let mut labels = Vec::new();
    for req in &opts.labels {
        let stab_gens: Vec<(usize, bool)> = gens
            .iter()
            .enumerate()
            .filter_map(|(g, (_, tag))| match *tag {
                GenTag::Stab { block, kind, row } if block == req.block => {
                    Some((g, kind == req.kind && row == req.check))
                }
                _ => None,
            })
            .collect();
        let n_rows = stab_gens.len() + req.forbid.len();
        if detectors.is_empty() {
            return Err(Error::Usage("pattern has no detectors to label".into()));
        }
        let m = coordinate_matrix(&detectors, n_rows, |e| {
            BitVec::from_bits(
                stab_gens
                    .iter()
                    .map(|&(g, _)| e.coeff.get(g))
                    .chain(req.forbid.iter().map(|&v| e.pauli.get(xi(v)))),
            )
        });
        let target = BitVec::from_bits(
            stab_gens.iter().map(|&(_, t)| t).chain(req.forbid.iter().map(|_| false)),
        );
        let beta = m.solve(&target).ok_or_else(|| {
            Error::Usage(format!(
                "no detector reveals {:?} check {} of block {}",
                req.kind, req.check, req.block
            ))
        })?;
        labels.push(combine(&detectors, &beta));
    }

    // output generators, avoiding the forbidden nodes when the span allows
    let out_proj = |e: &Element| BitVec::from_bits(out_coords.iter().map(|&c| e.pauli.get(c)));
    let span_rank = |set: &[Element]| {
        let mut eb = EchelonBasis::new();
        for e in set {
            eb.insert(&out_proj(e));
        }
        eb.dim()
    };
    let full_rank = span_rank(&w);
    let forbid_x: Vec<usize> = opts.output_forbid.iter().map(|&v| xi(v)).collect();
    let restricted = kernel(&w, &forbid_x);
    let source = if span_rank(&restricted) == full_rank { restricted } else { w.clone() };
    let mut eb = EchelonBasis::new();
    let mut out_gens = Vec::new();
    for e in &source {
        if eb.insert(&out_proj(e)) {
            out_gens.push(e.clone());
        }
    }
    let n_out_q = outputs.len() + logical_blocks;
    if out_gens.len() != n_out_q {
        return Err(Error::Usage(format!(
            "outputs are not in a pure state: {} generators for {} qubits",
            out_gens.len(),
            n_out_q
        )));
    }

    // duals on the outputs
    let n_o = outputs.len();
    if n_o > 64 {
        return Err(Error::Usage("more than 64 outputs".into()));
    }
    let sym_rows: Vec<BitVec> = out_gens
        .iter()
        .map(|e| {
            BitVec::from_bits(
                outputs
                    .iter()
                    .map(|&v| e.pauli.get(zi(v)))
                    .chain(outputs.iter().map(|&v| e.pauli.get(xi(v)))),
            )
        })
        .collect();
    let sym = BitMatrix::from_rows(2 * n_o, sym_rows);
    let out_proj: Vec<(u64, u64)> = out_gens
        .iter()
        .map(|e| {
            outputs.iter().enumerate().fold((0, 0), |(x, z), (j, &v)| {
                (x | (e.pauli.get(xi(v)) as u64) << j, z | (e.pauli.get(zi(v)) as u64) << j)
            })
        })
        .collect();
    let mut duals = Vec::new();
    for k in 0..out_gens.len() {
        let d = sym
            .solve(&BitVec::from_indices(out_gens.len(), &[k]))
            .ok_or_else(|| Error::Usage("output generators have no duals".into()))?;
        let mut dx = 0u64;
        let mut dz = 0u64;
        for j in 0..n_o {
            dx |= (d.get(j) as u64) << j;
            dz |= (d.get(n_o + j) as u64) << j;
        }
        duals.push((dx, dz));
    }

    let elements: Vec<&Element> = pre_only.iter().chain(&labels).chain(&out_gens).collect();
    let n_bits = elements.len();
    let width = n_bits.div_ceil(64).max(1);
    let mut sig = vec![0u64; 2 * n_nodes * width];
    for v in 0..n_nodes {
        for (b, e) in elements.iter().enumerate() {
            if e.pauli.get(zi(v)) {
                set_bit(&mut sig[(2 * v) * width..(2 * v + 1) * width], b);
            }
            if e.pauli.get(xi(v)) {
                set_bit(&mut sig[(2 * v + 1) * width..(2 * v + 2) * width], b);
            }
        }
    }
    Ok(Compiled {
        n_nodes,
        width,
        n_pre: pre_only.len(),
        n_labels: labels.len(),
        n_out: out_gens.len(),
        sig,
        duals,
        out_proj,
        outputs,
        neighbors,
        is_input,
    })
}
