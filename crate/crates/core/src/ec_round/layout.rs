//! Physical layout of the telecorrector: template graphs, how every template
//! bond is made from microclusters, and the resulting list of fault sites.
//!
//! Every template node is the root of a star microcluster. A template CZ
//! between two measured nodes is made by fusing an arm end of one star
//! (root, arm node, arm end) with a plain leaf of the other; the two
//! intermediate photons are X-measured, which leaves the CZ up to Pauli
//! byproducts. Links (`a - z - t1`) and the attachment (`d - w - a`) fuse two
//! plain leaves whose merged photon is itself a template node.
//!
//! A Pauli on any photon is mapped to Paulis on template nodes at the final
//! time. Before a photon is consumed, X on it acts as Z on its current
//! neighbor (its root); Z on a leaf survives only if that leaf is the one
//! whose fusion succeeded.

use crate::css::{CssCode, ErrorKind};
use crate::error::Result;
use crate::gf2::{BitMatrix, BitVec};
use crate::microcluster::build_depth;
use crate::pauli::PauliOp;

use super::pattern::{
    compile, BlockKind, CompileOptions, Compiled, InputBlock, LabelRequest, Pattern, Role,
};

/// Time steps of one round, relative to the moment every star is complete.
pub mod schedule {
    pub const ARM_FUSION: u32 = 1;
    pub const BOND_A: u32 = 2;
    pub const MEASURE_A: u32 = 3;
    pub const BOND_B: u32 = 4;
    pub const MEASURE_B: u32 = 5;
    pub const ATTACH: u32 = 6;
    pub const MEASURE_POST: u32 = 7;
    /// Offset between the starts of consecutive rounds.
    pub const PIPELINE: u32 = 2;
}
use schedule::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayoutParams {
    /// Leaf pairs per template bond and per link.
    pub bond_leaves: usize,
    /// Leaf pairs used to attach the data.
    pub attach_leaves: usize,
}

impl Default for LayoutParams {
    fn default() -> Self {
        LayoutParams { bond_leaves: 4, attach_leaves: 8 }
    }
}

/// Where a template Pauli lands.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    /// Node of the ancilla template (current ancilla instance).
    A(u32),
    /// Node of the telecorrector template.
    B(u32),
    /// Output root of a column, at data level.
    Out(u32),
    /// Z on output leaf `j` of a column.
    OutLeaf(u32, u8),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BondKind {
    /// CZ through an arm: `u` carries the arms, `v` the plain leaves.
    Arm,
    /// Two plain leaves fuse into the template node `merged`.
    Merge,
}

#[derive(Clone, Copy, Debug)]
pub struct Bond {
    pub kind: BondKind,
    pub stage: Stage,
    pub u: Target,
    pub v: Target,
    pub merged: Target,
    pub m: u8,
}

/// A bond of the ancilla template whose plain side is a V root; resolved per
/// ancilla block into a telecorrector bond.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BondRef {
    Own(u32),
    /// Telecorrector bond joining code position `pos` of the current block.
    VBond(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LeafRole {
    Arm,
    Plain,
    Merge,
    Extra,
}

#[derive(Clone, Copy, Debug)]
pub struct Leaf {
    pub own: Target,
    pub role: LeafRole,
    pub bond: BondRef,
    pub j: u8,
}

#[derive(Clone, Copy, Debug)]
pub enum Photon {
    /// A root after its star is complete.
    Root(Target),
    /// Root photon of a partial star holding leaves `first..first + len`.
    HalfRoot { root: Target, first: u32, len: u32 },
    Leaf(u32),
    /// Bell-pair partner of an arm end, before it joins the arm leaf.
    ArmPrime { bond: BondRef, j: u8 },
    ArmNode { bond: BondRef, j: u8 },
    ArmEnd { bond: BondRef, j: u8 },
    /// Photon left by the successful fusion of an arm bond.
    Merged { bond: BondRef },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rel {
    Always,
    Le,
    Gt,
    Eq,
    Ne,
}

#[derive(Clone, Copy, Debug)]
pub struct Site {
    pub a: Photon,
    pub b: Option<Photon>,
    pub rel: Rel,
    pub bond: BondRef,
    pub j: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Class {
    Pair,
    Single(u32),
}

impl Class {
    pub fn probability(self, epsilon: f64) -> f64 {
        match self {
            Class::Pair => epsilon,
            Class::Single(c) => 0.75 * (1.0 - (1.0 - 4.0 * epsilon / 3.0).powi(c as i32)),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SiteGroup {
    pub sites: Vec<Site>,
    pub buckets: Vec<(Class, Vec<u32>)>,
}

impl SiteGroup {
    fn push(&mut self, class: Class, site: Site) {
        if class == Class::Single(0) {
            return;
        }
        let id = self.sites.len() as u32;
        self.sites.push(site);
        match self.buckets.iter_mut().find(|(c, _)| *c == class) {
            Some((_, v)) => v.push(id),
            None => self.buckets.push((class, vec![id])),
        }
    }

    fn single(&mut self, count: u32, p: Photon, rel: Rel, bond: BondRef, j: u8) {
        self.push(Class::Single(count), Site { a: p, b: None, rel, bond, j });
    }

    fn pair(&mut self, a: Photon, b: Photon, rel: Rel, bond: BondRef, j: u8) {
        self.push(Class::Pair, Site { a, b: Some(b), rel, bond, j });
    }

    fn always(&mut self, count: u32, p: Photon) {
        self.single(count, p, Rel::Always, BondRef::Own(0), 0);
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }
}

/// Node indices of one telecorrector column.
#[derive(Clone, Copy, Debug)]
pub struct Column {
    pub d: usize,
    pub w: usize,
    pub a: usize,
    pub z: usize,
    pub t1: usize,
    pub t2: usize,
    pub out: usize,
}

/// Template bookkeeping shared by both stages.
#[derive(Clone, Debug, Default)]
struct Builder {
    bonds: Vec<Bond>,
    leaves: Vec<Leaf>,
    /// Star leaves of each template node.
    stars: Vec<Vec<u32>>,
}

impl Builder {
    fn new(nodes: usize) -> Self {
        Builder { stars: vec![Vec::new(); nodes], ..Default::default() }
    }

    fn leaf(&mut self, node: usize, own: Target, role: LeafRole, bond: BondRef, j: u8) -> u32 {
        let id = self.leaves.len() as u32;
        self.leaves.push(Leaf { own, role, bond, j });
        self.stars[node].push(id);
        id
    }
}

/// Everything needed to sample one telecorrector.
#[derive(Clone, Debug)]
pub struct Layout {
    pub code: CssCode,
    pub params: LayoutParams,
    pub anc: Pattern,
    pub anc_comp: Compiled,
    pub tel: Pattern,
    pub tel_comp: Compiled,
    pub columns: Vec<Column>,
    /// V blocks: `v[k][pos]` is a telecorrector node.
    pub v: [Vec<usize>; 4],
    pub bonds_a: Vec<Bond>,
    pub bonds_b: Vec<Bond>,
    pub leaves_a: Vec<Leaf>,
    pub leaves_b: Vec<Leaf>,
    /// Star leaves of every ancilla and telecorrector node.
    pub stars_a: Vec<Vec<u32>>,
    pub stars_b: Vec<Vec<u32>>,
    /// `vbond[k][pos]`: telecorrector bond joining block `k` at `pos`.
    pub vbond: [Vec<u32>; 4],
    /// Attachment bond of each column.
    pub attach: Vec<u32>,
    /// Per block, per ancilla node, X then Z: ancilla words then
    /// telecorrector words.
    pub composite: [Vec<u64>; 4],
    pub group_a: SiteGroup,
    pub group_b: SiteGroup,
    pub group_post: SiteGroup,
    /// Photon-steps of loss exposure on the data side of each column.
    pub loss_exposure: u32,
    /// Output residual caused by an input-level X or Z on each data node.
    pub input_effect: Vec<[(u64, u64); 2]>,
}

/// Systematic generator `[I | A]` of the code space (checks plus logical).
fn systematic_codespace(code: &CssCode) -> Vec<BitVec> {
    let mut rows: Vec<BitVec> =
        code.hz.iter().map(|&h| BitVec::from_u64(code.n, h)).collect();
    rows.push(BitVec::from_u64(code.n, code.lz));
    let mut m = BitMatrix::from_rows(code.n, rows);
    m.row_reduce();
    m.rows().to_vec()
}

impl Layout {
    pub fn new(code: &CssCode, params: LayoutParams) -> Result<Self> {
        let n = code.n;
        let m = params.bond_leaves as u8;

        // ancilla: encoder A (outputs first, in code order) and verifier B
        let rows = systematic_codespace(code);
        let mut anc = Pattern::default();
        let out_a: Vec<usize> = (0..n).map(|_| anc.add_node(Role::Output)).collect();
        let mut edges_a: Vec<(usize, usize)> = Vec::new();
        // X-measuring one node per generator row leaves the kernel of the rows
        let encoder = |pat: &mut Pattern, outs: &[usize], edges: &mut Vec<_>| {
            for row in &rows {
                let r = pat.add_node(Role::Pre);
                edges.extend(row.ones().map(|q| (r, outs[q])));
            }
        };
        encoder(&mut anc, &out_a, &mut edges_a);
        let out_b: Vec<usize> = (0..n).map(|_| anc.add_node(Role::Pre)).collect();
        encoder(&mut anc, &out_b, &mut edges_a);
        for i in 0..n {
            edges_a.push((out_b[i], out_a[i]));
        }
        for &(x, y) in &edges_a {
            anc.add_edge(x, y);
        }
        let verifier: Vec<usize> = (out_b[0]..anc.len()).collect();
        let anc_comp = compile(
            &anc,
            code,
            &CompileOptions { labels: vec![], output_forbid: verifier.clone() },
        )?;

        // telecorrector
        let mut tel = Pattern::default();
        let columns: Vec<Column> = (0..n)
            .map(|_| Column {
                d: tel.add_node(Role::Post),
                w: tel.add_node(Role::Post),
                a: tel.add_node(Role::Post),
                z: tel.add_node(Role::Pre),
                t1: tel.add_node(Role::Pre),
                t2: tel.add_node(Role::Pre),
                out: usize::MAX,
            })
            .collect();
        let mut columns = columns;
        for c in &mut columns {
            c.out = tel.add_node(Role::Output);
        }
        let v: [Vec<usize>; 4] =
            std::array::from_fn(|_| (0..n).map(|_| tel.add_node(Role::Pre)).collect());
        tel.blocks.push(InputBlock { kind: BlockKind::Logical, nodes: columns.iter().map(|c| c.d).collect() });
        for vb in &v {
            tel.blocks.push(InputBlock { kind: BlockKind::Zero, nodes: vb.clone() });
        }
        for c in &columns {
            for (x, y) in [(c.d, c.w), (c.w, c.a), (c.a, c.z), (c.z, c.t1), (c.t1, c.t2), (c.t2, c.out)] {
                tel.add_edge(x, y);
            }
        }
        for (k, vb) in v.iter().enumerate() {
            for (i, &node) in vb.iter().enumerate() {
                let t = if k < 2 { columns[i].t1 } else { columns[i].t2 };
                tel.add_edge(t, node);
            }
        }
        let mut labels = Vec::new();
        for (k, kind) in [(0, ErrorKind::X), (1, ErrorKind::X), (2, ErrorKind::Z), (3, ErrorKind::Z)] {
            let forbid: Vec<usize> =
                (0..4).filter(|&o| o != k).flat_map(|o| v[o].iter().copied()).collect();
            for check in 0..code.checks(kind).len() {
                labels.push(LabelRequest { block: 0, kind, check, forbid: forbid.clone() });
            }
        }
        let all_v: Vec<usize> = v.iter().flatten().copied().collect();
        let tel_comp =
            compile(&tel, code, &CompileOptions { labels, output_forbid: all_v })?;

        let mut layout = Layout {
            code: code.clone(),
            params,
            anc,
            anc_comp,
            tel,
            tel_comp,
            columns,
            v,
            bonds_a: Vec::new(),
            bonds_b: Vec::new(),
            leaves_a: Vec::new(),
            leaves_b: Vec::new(),
            stars_a: Vec::new(),
            stars_b: Vec::new(),
            vbond: Default::default(),
            attach: Vec::new(),
            composite: Default::default(),
            group_a: SiteGroup::default(),
            group_b: SiteGroup::default(),
            group_post: SiteGroup::default(),
            loss_exposure: 0,
            input_effect: Vec::new(),
        };
        layout.build_composite(&out_a);
        layout.build_input_effects();
        layout.build_sites(&edges_a, &out_a, m);
        Ok(layout)
    }

    fn build_composite(&mut self, out_a: &[usize]) {
        let wa = self.anc_comp.width();
        let wb = self.tel_comp.width();
        for k in 0..4 {
            let mut table = vec![0u64; 2 * self.anc.len() * (wa + wb)];
            for node in 0..self.anc.len() {
                for (zi, op) in [(0, PauliOp::X), (1, PauliOp::Z)] {
                    let at = (2 * node + zi) * (wa + wb);
                    let sig = self.anc_comp.node_sig(node, zi == 1);
                    table[at..at + wa].copy_from_slice(sig);
                    let mut b = self.tel_comp.zero_sig();
                    if let Some(pos) = out_a.iter().position(|&o| o == node) {
                        self.tel_comp.apply(&mut b, self.v[k][pos], op);
                    } else {
                        let (x, z) = self.anc_comp.residual(sig);
                        for pos in 0..self.code.n {
                            let p = PauliOp::from_bits(x >> pos & 1 == 1, z >> pos & 1 == 1);
                            if p != PauliOp::I {
                                self.tel_comp.apply_input(&mut b, self.v[k][pos], p);
                            }
                        }
                    }
                    table[at + wa..at + wa + wb].copy_from_slice(&b);
                }
            }
            self.composite[k] = table;
        }
    }

    fn build_input_effects(&mut self) {
        self.input_effect = self
            .columns
            .iter()
            .map(|c| {
                [PauliOp::X, PauliOp::Z].map(|op| {
                    let mut acc = self.tel_comp.zero_sig();
                    self.tel_comp.apply_input(&mut acc, c.d, op);
                    self.tel_comp.residual(&acc)
                })
            })
            .collect();
    }

    fn build_sites(&mut self, edges_a: &[(usize, usize)], out_a: &[usize], m: u8) {
        let ma = self.params.attach_leaves as u8;
        let extra = self.params.attach_leaves as u8;

        // ancilla bonds; output nodes keep plain leaves
        let mut ba = Builder::new(self.anc.len());
        for &(x, y) in edges_a {
            let (u, v) = if out_a.contains(&x) && !out_a.contains(&y) { (y, x) } else { (x, y) };
            let id = ba.bonds.len() as u32;
            ba.bonds.push(Bond {
                kind: BondKind::Arm,
                stage: Stage::A,
                u: Target::A(u as u32),
                v: Target::A(v as u32),
                merged: Target::A(u32::MAX),
                m,
            });
            for j in 0..m {
                ba.leaf(u, Target::A(u as u32), LeafRole::Arm, BondRef::Own(id), j);
                ba.leaf(v, Target::A(v as u32), LeafRole::Plain, BondRef::Own(id), j);
            }
        }

        // telecorrector bonds
        let mut bb = Builder::new(self.tel.len());
        let arm = |bb: &mut Builder, u: usize, v: usize| {
            let id = bb.bonds.len() as u32;
            bb.bonds.push(Bond {
                kind: BondKind::Arm,
                stage: Stage::B,
                u: Target::B(u as u32),
                v: Target::B(v as u32),
                merged: Target::B(u32::MAX),
                m,
            });
            for j in 0..m {
                bb.leaf(u, Target::B(u as u32), LeafRole::Arm, BondRef::Own(id), j);
            }
            id
        };
        let merge = |bb: &mut Builder, u: usize, v: usize, merged: usize, m: u8, leaves_v: bool| {
            let id = bb.bonds.len() as u32;
            bb.bonds.push(Bond {
                kind: BondKind::Merge,
                stage: Stage::B,
                u: Target::B(u as u32),
                v: Target::B(v as u32),
                merged: Target::B(merged as u32),
                m,
            });
            for j in 0..m {
                bb.leaf(u, Target::B(u as u32), LeafRole::Merge, BondRef::Own(id), j);
                if leaves_v {
                    bb.leaf(v, Target::B(v as u32), LeafRole::Merge, BondRef::Own(id), j);
                }
            }
            id
        };
        let mut vbond: [Vec<u32>; 4] = Default::default();
        let mut attach = Vec::new();
        for (i, c) in self.columns.clone().iter().enumerate() {
            merge(&mut bb, c.a, c.t1, c.z, m, true);
            let id = arm(&mut bb, c.t1, c.t2);
            for j in 0..m {
                bb.leaf(c.t2, Target::B(c.t2 as u32), LeafRole::Plain, BondRef::Own(id), j);
            }
            let id = arm(&mut bb, c.t2, c.out);
            for j in 0..m {
                bb.leaf(c.out, Target::Out(i as u32), LeafRole::Plain, BondRef::Own(id), j);
            }
            for j in 0..extra {
                bb.leaf(c.out, Target::Out(i as u32), LeafRole::Extra, BondRef::Own(0), j);
            }
            for (k, vb) in vbond.iter_mut().enumerate() {
                let t = if k < 2 { c.t1 } else { c.t2 };
                vb.push(arm(&mut bb, t, self.v[k][i]));
            }
            // data leaves come from the previous round and are not star leaves here
            attach.push(merge(&mut bb, c.a, c.d, c.w, ma, false));
        }
        // V roots are ancilla outputs: their telecorrector plain leaves live in
        // the ancilla stars
        for (pos, &o) in out_a.iter().enumerate() {
            for j in 0..m {
                ba.leaf(o, Target::A(o as u32), LeafRole::Plain, BondRef::VBond(pos as u32), j);
            }
        }
        self.vbond = vbond;
        self.attach = attach;

        let mut ga = SiteGroup::default();
        let mut gb = SiteGroup::default();
        let mut gp = SiteGroup::default();

        // stars
        let measure_a = |node: usize| -> u32 {
            if self.anc.roles[node] == Role::Output { MEASURE_B } else { MEASURE_A }
        };
        for node in 0..self.anc.len() {
            let root = Target::A(node as u32);
            star_sites(&mut ga, &ba.stars[node], root);
            if self.anc.roles[node] == Role::Output {
                ga.always(MEASURE_A - 1, Photon::Root(root));
            } else {
                ga.always(measure_a(node), Photon::Root(root));
            }
        }
        for (pos, &o) in out_a.iter().enumerate() {
            let _ = o;
            for k in 0..4 {
                gb.always(
                    MEASURE_B - MEASURE_A + 1,
                    Photon::Root(Target::B(self.v[k][pos] as u32)),
                );
            }
        }
        for (i, c) in self.columns.iter().enumerate() {
            for (node, measure) in
                [(c.t1, MEASURE_B), (c.t2, MEASURE_B), (c.a, MEASURE_POST)]
            {
                star_sites(&mut gb, &bb.stars[node], Target::B(node as u32));
                gb.always(measure, Photon::Root(Target::B(node as u32)));
            }
            let out = Target::Out(i as u32);
            star_sites(&mut gb, &bb.stars[c.out], out);
            gb.always(MEASURE_POST, Photon::Root(out));
            gp.always(MEASURE_POST + PIPELINE - ATTACH + 1, Photon::Root(Target::B(c.d as u32)));
            gp.always(MEASURE_POST - ATTACH, Photon::Root(Target::B(c.w as u32)));
            gb.always(MEASURE_B - BOND_B, Photon::Root(Target::B(c.z as u32)));
        }

        // leaf lifetimes and bond fusions
        let depth_a = |node: usize| build_depth(ba.stars[node].len()) as u32;
        let depth_b = |node: usize| build_depth(bb.stars[node].len()) as u32;
        let node_of = |t: Target| match t {
            Target::A(x) | Target::B(x) => x as usize,
            _ => unreachable!(),
        };
        for (id, bond) in ba.bonds.iter().enumerate() {
            let id = BondRef::Own(id as u32);
            let du = depth_a(node_of(bond.u));
            let dv = depth_a(node_of(bond.v));
            arm_bond_sites(&mut ga, &ba.leaves, id, du, dv, BOND_A, MEASURE_A);
        }
        // V plain leaves are created with the ancilla stars but fused in stage B
        for (l, leaf) in ba.leaves.iter().enumerate() {
            if let BondRef::VBond(_) = leaf.bond {
                let dv = depth_a(node_of(leaf.own));
                plain_leaf_sites(&mut ga, l as u32, leaf.bond, leaf.j, dv, BOND_B);
            }
        }
        let v_nodes: Vec<usize> = self.v.iter().flatten().copied().collect();
        for (id, bond) in bb.bonds.clone().into_iter().enumerate() {
            let bref = BondRef::Own(id as u32);
            let du = depth_b(node_of(bond.u));
            match bond.v {
                Target::B(v) if v_nodes.contains(&(v as usize)) => {
                    // the plain leaves belong to the ancilla stars; only the
                    // fusion is sampled here
                    arm_side_sites(&mut gb, &bb.leaves, bref, du, BOND_B, MEASURE_B);
                    for j in 0..bond.m {
                        let l = bb.leaves.len() as u32;
                        bb.leaves.push(Leaf { own: bond.v, role: LeafRole::Plain, bond: bref, j });
                        gb.pair(Photon::ArmEnd { bond: bref, j }, Photon::Leaf(l), Rel::Le, bref, j);
                    }
                }
                Target::Out(c) if bond.kind == BondKind::Arm => {
                    let dv = depth_b(self.columns[c as usize].out);
                    arm_bond_sites(&mut gb, &bb.leaves, bref, du, dv, BOND_B, MEASURE_B);
                }
                _ if bond.kind == BondKind::Arm => {
                    let dv = depth_b(node_of(bond.v));
                    arm_bond_sites(&mut gb, &bb.leaves, bref, du, dv, BOND_B, MEASURE_B);
                }
                _ if self.attach.contains(&(id as u32)) => {
                    for j in 0..bond.m {
                        let l = leaf_of(&bb.leaves, bref, bond.u, j);
                        gb.single(ATTACH + du - 1, Photon::Leaf(l), Rel::Le, bref, j);
                        gb.single(MEASURE_POST + du, Photon::Leaf(l), Rel::Gt, bref, j);
                        let dl = bb.leaves.len() as u32;
                        bb.leaves.push(Leaf { own: bond.v, role: LeafRole::Merge, bond: bref, j });
                        gp.single(MEASURE_POST - ATTACH + 1, Photon::Leaf(dl), Rel::Gt, bref, j);
                        gp.pair(Photon::Leaf(l), Photon::Leaf(dl), Rel::Le, bref, j);
                    }
                }
                _ => {
                    let dv = depth_b(node_of(bond.v));
                    for j in 0..bond.m {
                        let lu = leaf_of(&bb.leaves, bref, bond.u, j);
                        let lv = leaf_of(&bb.leaves, bref, bond.v, j);
                        plain_leaf_sites(&mut gb, lu, bref, j, du, BOND_B);
                        plain_leaf_sites(&mut gb, lv, bref, j, dv, BOND_B);
                        gb.pair(Photon::Leaf(lu), Photon::Leaf(lv), Rel::Le, bref, j);
                    }
                }
            }
        }
        // output leaves age until the end of the round
        for c in &self.columns {
            let d = depth_b(c.out);
            for &l in &bb.stars[c.out] {
                if bb.leaves[l as usize].role == LeafRole::Extra {
                    gb.always(MEASURE_POST + d, Photon::Leaf(l));
                }
            }
        }

        // loss exposure of the data side: d root, data leaves, a root, attach leaves
        let d_out = depth_b(self.columns[0].out);
        let d_a = depth_b(self.columns[0].a);
        let d_root = MEASURE_POST + PIPELINE + 1;
        let data_leaf = ma as u32 * (MEASURE_POST + PIPELINE + d_out);
        let a_root = MEASURE_POST + 1;
        let attach_leaf = ma as u32 * (MEASURE_POST + d_a + 1);
        self.loss_exposure = d_root + data_leaf + a_root + attach_leaf;

        self.bonds_a = ba.bonds;
        self.bonds_b = bb.bonds;
        self.stars_a = ba.stars;
        self.stars_b = bb.stars;
        self.leaves_a = ba.leaves;
        self.leaves_b = bb.leaves;
        self.group_a = ga;
        self.group_b = gb;
        self.group_post = gp;
    }
}

/// Bell pairs and root fusions of a star built by recursive doubling.
fn star_sites(g: &mut SiteGroup, leaves: &[u32], root: Target) {
    fn rec(g: &mut SiteGroup, leaves: &[u32], first: u32, len: u32, root: Target) {
        if len == 1 {
            g.pair(
                Photon::HalfRoot { root, first, len },
                Photon::Leaf(leaves[first as usize]),
                Rel::Always,
                BondRef::Own(0),
                0,
            );
            return;
        }
        let left = len.div_ceil(2);
        rec(g, leaves, first, left, root);
        rec(g, leaves, first + left, len - left, root);
        g.pair(
            Photon::HalfRoot { root, first, len: left },
            Photon::HalfRoot { root, first: first + left, len: len - left },
            Rel::Always,
            BondRef::Own(0),
            0,
        );
    }
    if !leaves.is_empty() {
        rec(g, leaves, 0, leaves.len() as u32, root);
    }
}

fn plain_leaf_sites(g: &mut SiteGroup, l: u32, bond: BondRef, j: u8, depth: u32, t: u32) {
    g.single(t + depth - 1, Photon::Leaf(l), Rel::Le, bond, j);
    g.single(t + depth + 1, Photon::Leaf(l), Rel::Gt, bond, j);
}

/// Arm leaves, arm pairs, arm nodes, arm ends and the merged photon of one
/// arm bond, without the plain side.
fn arm_side_sites(
    g: &mut SiteGroup,
    leaves: &[Leaf],
    bond: BondRef,
    du: u32,
    t: u32,
    measure: u32,
) {
    for (l, leaf) in leaves.iter().enumerate() {
        if leaf.bond != bond || leaf.role != LeafRole::Arm {
            continue;
        }
        let j = leaf.j;
        let l = l as u32;
        g.single(ARM_FUSION + du - 1, Photon::Leaf(l), Rel::Always, bond, j);
        g.pair(Photon::ArmPrime { bond, j }, Photon::ArmEnd { bond, j }, Rel::Always, bond, j);
        g.pair(Photon::Leaf(l), Photon::ArmPrime { bond, j }, Rel::Always, bond, j);
        g.single(measure - ARM_FUSION, Photon::ArmNode { bond, j }, Rel::Eq, bond, j);
        g.single(t + 1 - ARM_FUSION, Photon::ArmNode { bond, j }, Rel::Ne, bond, j);
        g.single(t - 1, Photon::ArmEnd { bond, j }, Rel::Le, bond, j);
        g.single(t + 1, Photon::ArmEnd { bond, j }, Rel::Gt, bond, j);
    }
    g.single(measure - t, Photon::Merged { bond }, Rel::Always, bond, 0);
}

fn arm_bond_sites(
    g: &mut SiteGroup,
    leaves: &[Leaf],
    bond: BondRef,
    du: u32,
    dv: u32,
    t: u32,
    measure: u32,
) {
    arm_side_sites(g, leaves, bond, du, t, measure);
    for (l, leaf) in leaves.iter().enumerate() {
        if leaf.bond != bond || leaf.role != LeafRole::Plain {
            continue;
        }
        let l = l as u32;
        plain_leaf_sites(g, l, bond, leaf.j, dv, t);
        g.pair(Photon::ArmEnd { bond, j: leaf.j }, Photon::Leaf(l), Rel::Le, bond, leaf.j);
    }
}

fn leaf_of(leaves: &[Leaf], bond: BondRef, own: Target, j: u8) -> u32 {
    leaves
        .iter()
        .position(|l| l.bond == bond && l.own == own && l.j == j)
        .expect("bond leaf") as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::css::CodeName;
    use crate::decoder::{perfect_decode_masks, LogicalError};
    use crate::gf2::EchelonBasis;

    fn layout(name: CodeName) -> Layout {
        Layout::new(&CssCode::load(name).unwrap(), LayoutParams::default()).unwrap()
    }

    fn same_coset(code: &CssCode, x: u64, z: u64) -> bool {
        code.syndrome_u64(ErrorKind::X, x) == 0
            && code.syndrome_u64(ErrorKind::Z, z) == 0
            && perfect_decode_masks(code, x, z) == LogicalError::None
    }

    fn stab_vec(n: usize, x: u64, z: u64) -> BitVec {
        BitVec::from_bits((0..n).map(|i| x >> i & 1 == 1).chain((0..n).map(|i| z >> i & 1 == 1)))
    }

    #[test]
    fn ancilla_outputs_hold_logical_zero() {
        for name in [CodeName::Steane7, CodeName::Golay23] {
            let l = layout(name);
            let code = &l.code;
            let mut span = EchelonBasis::new();
            for &(x, z) in l.anc_comp.output_stabilizers() {
                span.insert(&stab_vec(code.n, x, z));
            }
            assert_eq!(span.dim(), code.n);
            for &h in &code.hx {
                assert!(span.contains(&stab_vec(code.n, h, 0)));
            }
            for &h in code.hz.iter().chain([&code.lz]) {
                assert!(span.contains(&stab_vec(code.n, 0, h)));
            }
        }
    }

    #[test]
    fn verifier_sees_every_single_x_on_the_ancilla() {
        let l = layout(CodeName::Steane7);
        let first_b = l.code.n + l.code.hz.len() + 1;
        for pos in 0..l.code.n {
            // X on the output before its CZ with the verifier
            let mut acc = l.anc_comp.zero_sig();
            l.anc_comp.apply(&mut acc, pos, PauliOp::X);
            l.anc_comp.apply(&mut acc, first_b + pos, PauliOp::Z);
            assert!(!l.anc_comp.pre_clear(&acc), "position {pos}");
        }
    }

    fn labels(l: &Layout, acc: &[u64]) -> [u64; 4] {
        let r = l.code.hz.len();
        std::array::from_fn(|k| {
            (0..r).fold(0, |m, i| m | (l.tel_comp.label_bit(acc, k * r + i) as u64) << i)
        })
    }

    fn column(rows: &[u64], i: usize) -> u64 {
        rows.iter().enumerate().fold(0, |m, (h, &row)| m | (row >> i & 1) << h)
    }

    #[test]
    fn input_errors_teleport_with_matching_syndromes() {
        for name in [CodeName::Steane7, CodeName::Golay23] {
            let l = layout(name);
            let code = &l.code;
            for (i, c) in l.columns.iter().enumerate() {
                for op in [PauliOp::X, PauliOp::Z] {
                    let mut acc = l.tel_comp.zero_sig();
                    l.tel_comp.apply_input(&mut acc, c.d, op);
                    assert!(l.tel_comp.pre_clear(&acc));
                    let lab = labels(&l, &acc);
                    let (sx, sz) = if op == PauliOp::X {
                        (column(&code.hz, i), 0)
                    } else {
                        (0, column(&code.hx, i))
                    };
                    assert_eq!(lab, [sx, sx, sz, sz], "{name:?} column {i} {op:?}");
                    let (x, z) = l.tel_comp.residual(&acc);
                    let (ex, ez) = if op == PauliOp::X { (1 << i, 0) } else { (0, 1 << i) };
                    assert!(same_coset(code, x ^ ex, z ^ ez), "{name:?} column {i} {op:?}");
                }
            }
        }
    }

    #[test]
    fn post_errors_never_split_the_syndrome_copies() {
        for name in [CodeName::Steane7, CodeName::Golay23] {
            let l = layout(name);
            for node in 0..l.tel.len() {
                if l.tel.roles[node] != Role::Post {
                    continue;
                }
                for op in [PauliOp::X, PauliOp::Z] {
                    let mut acc = l.tel_comp.zero_sig();
                    l.tel_comp.apply(&mut acc, node, op);
                    let lab = labels(&l, &acc);
                    assert_eq!((lab[0], lab[2]), (lab[1], lab[3]), "{name:?} node {node} {op:?}");
                }
            }
        }
    }

    #[test]
    fn site_groups_are_populated() {
        let l = layout(CodeName::Steane7);
        assert!(!l.group_a.is_empty() && !l.group_b.is_empty() && !l.group_post.is_empty());
        for g in [&l.group_a, &l.group_b, &l.group_post] {
            let total: usize = g.buckets.iter().map(|(_, v)| v.len()).sum();
            assert_eq!(total, g.len());
        }
    }
}
