//! One round of cluster-state error correction.
//!
//! Faults are drawn per fault site of the layout and pushed through the
//! compiled templates, so a round costs time proportional to the number of
//! faults rather than the number of photons.

pub mod layout;
pub mod pattern;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::{random_pauli, random_pauli_pair, NoiseParams};
use crate::css::{CodeName, CssCode, ErrorKind};
use crate::decoder::{decode_mask, perfect_decode_masks, LogicalError};
use crate::error::{Error, Result};
use crate::microcluster::{build_depth, DEFAULT_ATTEMPT_BUDGET};
use crate::pauli::PauliOp;

use layout::{BondRef, Layout, LayoutParams, LeafRole, Photon, Rel, Site, SiteGroup, Stage, Target};
use pattern::xor_words;

/// Default limit on rejected ancillas or assemblies within one round.
pub const DEFAULT_ASSEMBLY_BUDGET: u64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Crash {
    None,
    Unlocated,
    Located,
}

/// Encoded data between rounds, as data-level Pauli errors on the roots and Z
/// errors on their leaves.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedData {
    pub x: u64,
    pub z: u64,
    pub leaf_z: Vec<u16>,
}

impl EncodedData {
    pub fn clean(n: usize) -> Self {
        EncodedData { x: 0, z: 0, leaf_z: vec![0; n] }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundReport {
    pub synd_x: u64,
    pub synd_z: u64,
    /// Second copies of the two syndromes.
    pub synd_x2: u64,
    pub synd_z2: u64,
    pub located: u64,
    pub flips_x: u64,
    pub flips_z: u64,
    pub located_crash: bool,
    pub crash: Crash,
    pub ancilla_rejections: u64,
    pub assembly_rejections: u64,
}

impl RoundReport {
    pub fn syndromes_agree(&self) -> bool {
        self.synd_x == self.synd_x2 && self.synd_z == self.synd_z2
    }
}

/// Classifies the data left by a round: located if either decoder flagged,
/// otherwise unlocated iff an ideal decode leaves a logical.
pub fn classify_crash(code: &CssCode, report: &RoundReport, data: &EncodedData) -> Crash {
    if report.located_crash {
        Crash::Located
    } else if perfect_decode_masks(code, data.x, data.z) != LogicalError::None {
        Crash::Unlocated
    } else {
        Crash::None
    }
}

/// Layout plus the fault rates of one noise point.
#[derive(Clone, Debug)]
pub struct Protocol {
    pub layout: Layout,
    pub noise: NoiseParams,
    pub budget: u64,
    probs: [Vec<f64>; 3],
    p_located: f64,
    p_stall: f64,
}

impl Protocol {
    pub fn new(layout: Layout, noise: NoiseParams) -> Self {
        let rates = |g: &SiteGroup| -> Vec<f64> {
            g.buckets.iter().map(|(c, _)| c.probability(noise.epsilon)).collect()
        };
        let probs = [rates(&layout.group_a), rates(&layout.group_b), rates(&layout.group_post)];
        let all_fail = 0.5f64.powi(layout.params.attach_leaves as i32);
        let survive = (1.0 - noise.gamma).powi(layout.loss_exposure as i32);
        let p_located = 1.0 - survive * (1.0 - all_fail);
        let p_stall = stall_probability(&layout, noise.gamma);
        Protocol { layout, noise, budget: DEFAULT_ASSEMBLY_BUDGET, probs, p_located, p_stall }
    }

    pub fn for_code(name: CodeName, noise: NoiseParams) -> Result<Self> {
        let code = CssCode::load(name)?;
        Ok(Protocol::new(Layout::new(&code, LayoutParams::default())?, noise))
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn code(&self) -> &CssCode {
        &self.layout.code
    }

    /// Probability that the data side of one column is located.
    pub fn located_rate(&self) -> f64 {
        self.p_located
    }
}

/// Chance that some star needs more than the default number of builds
/// because a photon was lost.
fn stall_probability(layout: &Layout, gamma: f64) -> f64 {
    if gamma == 0.0 {
        return 0.0;
    }
    let mut survive_all = 1.0f64;
    for star in layout.stars_a.iter().chain(&layout.stars_b) {
        let k = star.len().max(1);
        let photon_steps = (2 * k) as i32 * (build_depth(k) as i32 + 1);
        let discard = 1.0 - (1.0 - gamma).powi(photon_steps);
        survive_all *= 1.0 - discard.powi(DEFAULT_ATTEMPT_BUDGET as i32);
    }
    1.0 - survive_all
}

/// A verified ancilla block: its contribution to the telecorrector frame.
#[derive(Clone, Debug)]
pub struct VerifiedAncilla {
    pub block: usize,
    pub attempts: u64,
}

/// An accepted telecorrector, before the data is attached.
#[derive(Clone, Debug)]
pub struct Telecorrector {
    pub ancilla_rejections: u64,
    pub assembly_rejections: u64,
}

/// A single forced fault, used to sweep fault sites.
#[derive(Clone, Copy, Debug)]
pub struct Fault {
    pub group: Group,
    pub block: usize,
    pub site: usize,
    pub a: PauliOp,
    pub b: PauliOp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Group {
    Ancilla,
    Telecorrector,
    Post,
}

/// Working state of one round.
pub struct Round<'a> {
    p: &'a Protocol,
    s_a: Vec<u8>,
    s_b: Vec<u8>,
    fixed_s: Option<u8>,
    fault: Option<Fault>,
    block: usize,
    acc_a: Vec<u64>,
    tmp_b: Vec<u64>,
    acc_b: Vec<u64>,
    out_x: u64,
    out_z: u64,
    leaf_z: Vec<u16>,
}

const UNSAMPLED: u8 = u8::MAX;

impl<'a> Round<'a> {
    pub fn new(p: &'a Protocol) -> Self {
        let l = &p.layout;
        Round {
            p,
            s_a: vec![UNSAMPLED; l.bonds_a.len()],
            s_b: vec![UNSAMPLED; l.bonds_b.len()],
            fixed_s: None,
            fault: None,
            block: 0,
            acc_a: l.anc_comp.zero_sig(),
            tmp_b: l.tel_comp.zero_sig(),
            acc_b: l.tel_comp.zero_sig(),
            out_x: 0,
            out_z: 0,
            leaf_z: vec![0; l.code.n],
        }
    }

    /// Fixes the successful attempt of every bond and injects one fault
    /// instead of sampling noise.
    pub fn forced(p: &'a Protocol, s: u8, fault: Option<Fault>) -> Self {
        let mut r = Round::new(p);
        r.fixed_s = Some(s);
        r.fault = fault;
        r
    }

    fn budget(&self) -> u64 {
        if self.fixed_s.is_some() { 1 } else { self.p.budget }
    }

    fn resolve(&self, stage: Stage, bond: BondRef) -> (Stage, usize) {
        match (stage, bond) {
            (stage, BondRef::Own(b)) => (stage, b as usize),
            (_, BondRef::VBond(pos)) => (Stage::B, self.p.layout.vbond[self.block][pos as usize] as usize),
        }
    }

    fn success<R: Rng + ?Sized>(&mut self, stage: Stage, b: usize, rng: &mut R) -> u8 {
        let l = &self.p.layout;
        let (table, m) = match stage {
            Stage::A => (&mut self.s_a, l.bonds_a[b].m),
            Stage::B => (&mut self.s_b, l.bonds_b[b].m),
        };
        if table[b] == UNSAMPLED {
            table[b] = match self.fixed_s {
                Some(s) => s.min(m - 1),
                None => loop {
                    if let Some(j) = (0..m).find(|_| rng.gen_bool(0.5)) {
                        break j;
                    }
                },
            };
        }
        table[b]
    }

    fn target(&mut self, t: Target, op: PauliOp) {
        let l = &self.p.layout;
        match t {
            Target::A(v) => {
                let wa = l.anc_comp.width();
                let wb = l.tel_comp.width();
                for (zi, on) in [(0, op.has_x()), (1, op.has_z())] {
                    if on {
                        let at = (2 * v as usize + zi) * (wa + wb);
                        let row = &l.composite[self.block][at..at + wa + wb];
                        xor_words(&mut self.acc_a, &row[..wa]);
                        xor_words(&mut self.tmp_b, &row[wa..]);
                    }
                }
            }
            Target::B(v) => l.tel_comp.apply(&mut self.acc_b, v as usize, op),
            Target::Out(c) => {
                let (x, z) = op.bits();
                self.out_x ^= (x as u64) << c;
                self.out_z ^= (z as u64) << c;
                if x {
                    self.leaf_z[c as usize] ^= ((1u32 << l.params.attach_leaves) - 1) as u16;
                }
            }
            Target::OutLeaf(c, j) => {
                if op.has_z() {
                    self.leaf_z[c as usize] ^= 1 << j;
                }
            }
        }
    }

    /// Target of a B-stage Pauli while an ancilla is being built.
    fn target_in(&mut self, stage: Stage, t: Target, op: PauliOp) {
        match (stage, t) {
            (Stage::A, Target::B(v)) => self.p.layout.tel_comp.apply(&mut self.tmp_b, v as usize, op),
            _ => self.target(t, op),
        }
    }

    fn leaf_z<R: Rng + ?Sized>(&mut self, stage: Stage, leaf: u32, rng: &mut R) {
        let l = &self.p.layout;
        let leaf = match stage {
            Stage::A => l.leaves_a[leaf as usize],
            Stage::B => l.leaves_b[leaf as usize],
        };
        if leaf.role == LeafRole::Extra {
            if let Target::Out(c) = leaf.own {
                self.target(Target::OutLeaf(c, leaf.j), PauliOp::Z);
            }
            return;
        }
        let (bs, b) = self.resolve(stage, leaf.bond);
        if self.success(bs, b, rng) != leaf.j {
            return;
        }
        let bond = match bs {
            Stage::A => l.bonds_a[b],
            Stage::B => l.bonds_b[b],
        };
        let t = match leaf.role {
            LeafRole::Arm => bond.v,
            LeafRole::Plain => bond.u,
            _ => bond.merged,
        };
        self.target_in(stage, t, PauliOp::Z);
    }

    fn star(&self, stage: Stage, root: Target) -> &'a [u32] {
        let l = &self.p.layout;
        match (stage, root) {
            (Stage::A, Target::A(v)) => &l.stars_a[v as usize],
            (_, Target::B(v)) => &l.stars_b[v as usize],
            (_, Target::Out(c)) => &l.stars_b[l.columns[c as usize].out],
            _ => &[],
        }
    }

    fn photon<R: Rng + ?Sized>(&mut self, stage: Stage, p: Photon, op: PauliOp, rng: &mut R) {
        if op == PauliOp::I {
            return;
        }
        let l = &self.p.layout;
        let (x, z) = op.bits();
        let bond_ends = |r: &mut Self, bond: BondRef, rng: &mut R| {
            let (bs, b) = r.resolve(stage, bond);
            let s = r.success(bs, b, rng);
            let bond = match bs {
                Stage::A => l.bonds_a[b],
                Stage::B => l.bonds_b[b],
            };
            (s, bond.u, bond.v)
        };
        match p {
            Photon::Root(t) => self.target_in(stage, t, op),
            Photon::HalfRoot { root, first, len } => {
                if z {
                    self.target_in(stage, root, PauliOp::Z);
                }
                if x {
                    let star = self.star(stage, root);
                    for &leaf in &star[first as usize..(first + len) as usize] {
                        self.leaf_z(stage, leaf, rng);
                    }
                }
            }
            Photon::Leaf(leaf) => {
                if x {
                    let own = match stage {
                        Stage::A => l.leaves_a[leaf as usize].own,
                        Stage::B => l.leaves_b[leaf as usize].own,
                    };
                    self.target_in(stage, own, PauliOp::Z);
                }
                if z {
                    self.leaf_z(stage, leaf, rng);
                }
            }
            Photon::ArmPrime { bond, j } => {
                let (s, u, v) = bond_ends(self, bond, rng);
                if s == j {
                    if x {
                        self.target_in(stage, u, PauliOp::Z);
                    }
                    if z {
                        self.target_in(stage, v, PauliOp::Z);
                    }
                }
            }
            Photon::ArmNode { bond, j } => {
                let (s, u, v) = bond_ends(self, bond, rng);
                if x && s != j {
                    self.target_in(stage, u, PauliOp::Z);
                }
                if z && s == j {
                    self.target_in(stage, v, PauliOp::Z);
                }
            }
            Photon::ArmEnd { bond, j } => {
                let (s, u, v) = bond_ends(self, bond, rng);
                if s == j {
                    if x {
                        self.target_in(stage, v, PauliOp::Z);
                    }
                    if z {
                        self.target_in(stage, u, PauliOp::Z);
                    }
                }
            }
            Photon::Merged { bond } => {
                if z {
                    let (_, u, _) = bond_ends(self, bond, rng);
                    self.target_in(stage, u, PauliOp::Z);
                }
            }
        }
    }

    fn active<R: Rng + ?Sized>(&mut self, stage: Stage, site: &Site, rng: &mut R) -> bool {
        if site.rel == Rel::Always {
            return true;
        }
        let (bs, b) = self.resolve(stage, site.bond);
        let s = self.success(bs, b, rng);
        match site.rel {
            Rel::Le => site.j <= s,
            Rel::Gt => site.j > s,
            Rel::Eq => site.j == s,
            Rel::Ne => site.j != s,
            Rel::Always => true,
        }
    }

    fn hit<R: Rng + ?Sized>(&mut self, stage: Stage, site: &Site, a: PauliOp, b: PauliOp, rng: &mut R) {
        if !self.active(stage, site, rng) {
            return;
        }
        self.photon(stage, site.a, a, rng);
        if let Some(pb) = site.b {
            self.photon(stage, pb, b, rng);
        }
    }

    fn sample_group<R: Rng + ?Sized>(&mut self, which: Group, rng: &mut R) {
        let l = &self.p.layout;
        let (g, probs, stage) = match which {
            Group::Ancilla => (&l.group_a, &self.p.probs[0], Stage::A),
            Group::Telecorrector => (&l.group_b, &self.p.probs[1], Stage::B),
            Group::Post => (&l.group_post, &self.p.probs[2], Stage::B),
        };
        if let Some(f) = self.fault {
            if f.group == which && (which != Group::Ancilla || f.block == self.block) {
                let site = g.sites[f.site];
                self.hit(stage, &site, f.a, f.b, rng);
            }
            return;
        }
        for ((_, ids), &p) in g.buckets.iter().zip(probs) {
            if p <= 0.0 {
                continue;
            }
            let log_q = (1.0 - p).ln();
            let mut i = 0usize;
            loop {
                if p < 1.0 {
                    let u: f64 = 1.0 - rng.gen::<f64>();
                    i += (u.ln() / log_q) as usize;
                }
                if i >= ids.len() {
                    break;
                }
                let site = g.sites[ids[i] as usize];
                let (a, b) = match site.b {
                    Some(_) => random_pauli_pair(rng),
                    None => (random_pauli(rng), PauliOp::I),
                };
                self.hit(stage, &site, a, b, rng);
                i += 1;
            }
        }
    }

    /// Builds ancilla block `k` until its verifier reads trivially; its
    /// contribution is added to the telecorrector frame.
    pub fn create_verified_ancilla<R: Rng + ?Sized>(&mut self, k: usize, rng: &mut R) -> Result<VerifiedAncilla> {
        self.block = k;
        let mut attempts = 0;
        loop {
            attempts += 1;
            self.s_a.fill(UNSAMPLED);
            self.acc_a.fill(0);
            self.tmp_b.fill(0);
            self.sample_group(Group::Ancilla, rng);
            if self.p.layout.anc_comp.pre_clear(&self.acc_a) {
                xor_words(&mut self.acc_b, &self.tmp_b);
                return Ok(VerifiedAncilla { block: k, attempts });
            }
            if attempts >= self.budget() {
                return Err(Error::PreparationStall { attempts });
            }
        }
    }

    /// Assembles a telecorrector that passes every preagreement detector.
    pub fn assemble_telecorrector<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Telecorrector> {
        if self.p.p_stall > 0.0 && rng.gen_bool(self.p.p_stall.min(1.0)) {
            return Err(Error::PreparationStall { attempts: DEFAULT_ATTEMPT_BUDGET });
        }
        let mut ancilla_rejections = 0;
        let mut assembly_rejections = 0;
        loop {
            self.s_b.fill(UNSAMPLED);
            self.acc_b.fill(0);
            self.out_x = 0;
            self.out_z = 0;
            self.leaf_z.fill(0);
            for k in 0..4 {
                ancilla_rejections += self.create_verified_ancilla(k, rng)?.attempts - 1;
            }
            self.sample_group(Group::Telecorrector, rng);
            if self.p.layout.tel_comp.pre_clear(&self.acc_b) {
                return Ok(Telecorrector { ancilla_rejections, assembly_rejections });
            }
            assembly_rejections += 1;
            if assembly_rejections >= self.budget() {
                return Err(Error::PreparationStall { attempts: assembly_rejections });
            }
        }
    }

    /// Attaches the data, measures, decodes and returns the corrected output.
    pub fn attach<R: Rng + ?Sized>(
        &mut self,
        tel: &Telecorrector,
        data: &EncodedData,
        rng: &mut R,
    ) -> (EncodedData, RoundReport) {
        let l = &self.p.layout;
        let code = &l.code;
        let comp = &l.tel_comp;
        for (i, c) in l.columns.iter().enumerate() {
            let op = PauliOp::from_bits(data.x >> i & 1 == 1, data.z >> i & 1 == 1);
            if op != PauliOp::I {
                comp.apply_input(&mut self.acc_b, c.d, op);
            }
            let s = self.success(Stage::B, l.attach[i] as usize, rng);
            if data.leaf_z[i] >> s & 1 == 1 {
                comp.apply(&mut self.acc_b, c.w, PauliOp::Z);
            }
        }
        self.sample_group(Group::Post, rng);
        let mut located = 0u64;
        if self.fault.is_none() && self.p.p_located > 0.0 {
            for (i, c) in l.columns.iter().enumerate() {
                if rng.gen_bool(self.p.p_located) {
                    located |= 1 << i;
                    comp.apply_input(&mut self.acc_b, c.d, PauliOp::ALL[rng.gen_range(0..4)]);
                }
            }
        }

        let r = code.n_checks(ErrorKind::X);
        let rz = code.n_checks(ErrorKind::Z);
        let block = |off: usize, len: usize| {
            (0..len).fold(0u64, |m, i| m | (comp.label_bit(&self.acc_b, off + i) as u64) << i)
        };
        let synd_x = block(0, r);
        let synd_x2 = block(r, r);
        let synd_z = block(2 * r, rz);
        let synd_z2 = block(2 * r + rz, rz);
        let dx = decode_mask(code, ErrorKind::X, synd_x, located);
        let dz = decode_mask(code, ErrorKind::Z, synd_z, located);

        let (mut x, mut z) = comp.residual(&self.acc_b);
        x ^= self.out_x;
        z ^= self.out_z;
        for i in 0..code.n {
            for (flips, effect) in [(dx.flips, l.input_effect[i][0]), (dz.flips, l.input_effect[i][1])] {
                if flips >> i & 1 == 1 {
                    x ^= effect.0;
                    z ^= effect.1;
                }
            }
        }
        let out = EncodedData { x, z, leaf_z: self.leaf_z.clone() };
        let mut report = RoundReport {
            synd_x,
            synd_z,
            synd_x2,
            synd_z2,
            located,
            flips_x: dx.flips,
            flips_z: dz.flips,
            located_crash: dx.located_crash || dz.located_crash,
            crash: Crash::None,
            ancilla_rejections: tel.ancilla_rejections,
            assembly_rejections: tel.assembly_rejections,
        };
        report.crash = classify_crash(code, &report, &out);
        (out, report)
    }
}

/// Runs one full round on `data`.
pub fn run_round<R: Rng + ?Sized>(
    p: &Protocol,
    data: &EncodedData,
    rng: &mut R,
) -> Result<(EncodedData, RoundReport)> {
    let mut round = Round::new(p);
    let tel = round.assemble_telecorrector(rng)?;
    Ok(round.attach(&tel, data, rng))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrialOutcome {
    /// The first round crashed; the trial does not count.
    Discarded,
    Stall,
    Second(Crash),
}

/// Two rounds from noiseless data; the second round is the one scored.
pub fn run_trial<R: Rng + ?Sized>(p: &Protocol, rng: &mut R) -> TrialOutcome {
    let data = EncodedData::clean(p.code().n);
    let Ok((data, first)) = run_round(p, &data, rng) else {
        return TrialOutcome::Stall;
    };
    if first.crash != Crash::None {
        return TrialOutcome::Discarded;
    }
    match run_round(p, &data, rng) {
        Ok((_, second)) => TrialOutcome::Second(second.crash),
        Err(_) => TrialOutcome::Stall,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::css::syndrome_u64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn protocol(name: CodeName, eps: f64, gamma: f64) -> Protocol {
        Protocol::for_code(name, NoiseParams::new(eps, gamma).unwrap()).unwrap()
    }

    fn column(rows: &[u64], i: usize) -> u64 {
        rows.iter().enumerate().fold(0, |m, (h, &row)| m | (row >> i & 1) << h)
    }

    fn is_clean(code: &CssCode, d: &EncodedData) -> bool {
        code.syndrome_u64(ErrorKind::X, d.x) == 0
            && code.syndrome_u64(ErrorKind::Z, d.z) == 0
            && perfect_decode_masks(code, d.x, d.z) == LogicalError::None
    }

    fn forced_round(p: &Protocol, data: &EncodedData, s: u8, fault: Option<Fault>) -> Option<(EncodedData, RoundReport)> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut round = Round::forced(p, s, fault);
        let tel = round.assemble_telecorrector(&mut rng).ok()?;
        Some(round.attach(&tel, data, &mut rng))
    }

    #[test]
    fn noiseless_round_is_transparent() {
        for name in [CodeName::Steane7, CodeName::Golay23] {
            let p = protocol(name, 0.0, 0.0);
            let clean = EncodedData::clean(p.code().n);
            for s in 0..4 {
                let (out, rep) = forced_round(&p, &clean, s, None).unwrap();
                assert_eq!((rep.synd_x, rep.synd_z, rep.flips_x, rep.flips_z), (0, 0, 0, 0));
                assert_eq!(rep.crash, Crash::None);
                assert_eq!(out, clean);
            }
        }
    }

    #[test]
    fn single_data_error_is_corrected() {
        let p = protocol(CodeName::Steane7, 0.0, 0.0);
        let code = p.code();
        for i in 0..code.n {
            let mut data = EncodedData::clean(code.n);
            data.x = 1 << i;
            let (out, rep) = forced_round(&p, &data, 1, None).unwrap();
            assert_eq!(rep.synd_x, column(&code.hz, i));
            assert_eq!(rep.flips_x, 1 << i);
            assert_eq!(rep.crash, Crash::None);
            assert!(is_clean(code, &out));
        }
    }

    #[test]
    fn aliasing_pairs_are_unlocated_crashes() {
        let p = protocol(CodeName::Steane7, 0.0, 0.0);
        let code = p.code();
        for i in 0..code.n {
            for j in i + 1..code.n {
                let e = (1u64 << i) | (1 << j);
                let leader = code.table(ErrorKind::X).leader(syndrome_u64(&code.hz, e));
                let aliases = code.is_logical(ErrorKind::X, e ^ leader);
                let mut data = EncodedData::clean(code.n);
                data.x = e;
                let (_, rep) = forced_round(&p, &data, 0, None).unwrap();
                assert_eq!(rep.crash == Crash::Unlocated, aliases);
            }
        }
    }

    #[test]
    fn every_single_fault_is_tolerated() {
        let p = protocol(CodeName::Steane7, 0.0, 0.0);
        let code = p.code();
        let clean = EncodedData::clean(code.n);
        let l = &p.layout;
        let mut accepted = 0;
        for (group, sites, blocks) in [
            (Group::Ancilla, &l.group_a, 4),
            (Group::Telecorrector, &l.group_b, 1),
            (Group::Post, &l.group_post, 1),
        ] {
            for block in 0..blocks {
                for (site, spec) in sites.sites.iter().enumerate() {
                    let paulis: Vec<(PauliOp, PauliOp)> = match spec.b {
                        Some(_) => (1..16).map(|k| (PauliOp::ALL[k / 4], PauliOp::ALL[k % 4])).collect(),
                        None => (1..4).map(|k| (PauliOp::ALL[k], PauliOp::I)).collect(),
                    };
                    for (a, b) in paulis {
                        for s in [0, 1] {
                            let fault = Fault { group, block, site, a, b };
                            let Some((out, rep)) = forced_round(&p, &clean, s, Some(fault)) else {
                                continue;
                            };
                            accepted += 1;
                            assert!(rep.syndromes_agree(), "{fault:?} s={s}");
                            assert_ne!(rep.crash, Crash::Unlocated, "{fault:?} s={s}");
                            let (after, rep2) = forced_round(&p, &out, s, None).unwrap();
                            assert_eq!(rep2.crash, Crash::None, "{fault:?} s={s}");
                            assert!(is_clean(code, &after), "{fault:?} s={s}");
                        }
                    }
                }
            }
        }
        assert!(accepted > 0);
    }

    #[test]
    fn accepted_telecorrectors_preagree() {
        let p = protocol(CodeName::Steane7, 3e-3, 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut rejections = 0;
        for _ in 0..2000 {
            let (_, rep) = run_round(&p, &EncodedData::clean(7), &mut rng).unwrap();
            assert!(rep.syndromes_agree());
            rejections += rep.ancilla_rejections + rep.assembly_rejections;
        }
        assert!(rejections > 0);
    }

    #[test]
    fn noiseless_trials_never_crash() {
        for name in [CodeName::Steane7, CodeName::Golay23] {
            let p = protocol(name, 0.0, 0.0);
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            for _ in 0..500 {
                assert_eq!(run_trial(&p, &mut rng), TrialOutcome::Second(Crash::None));
            }
        }
    }

    #[test]
    fn noiseless_located_rate_is_all_attempts_failing() {
        let p = protocol(CodeName::Steane7, 0.0, 0.0);
        assert_eq!(p.located_rate(), 0.5f64.powi(8));
    }
}
