//! Error-tracking cluster-state engine.
//!
//! Nodes carry the deviation of their photon from an ideal reference
//! cluster, split into a physical `error` and a bookkeeping `frame`. Only the
//! product of the two matters for measurement outcomes. Time is a global
//! counter; idle noise is applied lazily the next time a node is touched.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::PauliOp;

pub type NodeId = u32;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub epsilon: f64,
    pub gamma: f64,
}

impl NoiseParams {
    pub const NOISELESS: NoiseParams = NoiseParams { epsilon: 0.0, gamma: 0.0 };

    pub fn new(epsilon: f64, gamma: f64) -> Result<Self> {
        for (field, v) in [("epsilon", epsilon), ("gamma", gamma)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config {
                    field: field.into(),
                    reason: format!("{v} is not in [0, 1]"),
                });
            }
        }
        Ok(NoiseParams { epsilon, gamma })
    }

    pub fn is_noiseless(&self) -> bool {
        self.epsilon == 0.0 && self.gamma == 0.0
    }

    /// Depolarizing probability accumulated over `steps` single-qubit steps.
    pub fn memory_depolarization(&self, steps: u64) -> f64 {
        0.75 * (1.0 - (1.0 - 4.0 * self.epsilon / 3.0).powf(steps as f64))
    }

    /// Loss probability accumulated over `steps` time steps.
    pub fn memory_loss(&self, steps: u64) -> f64 {
        1.0 - (1.0 - self.gamma).powf(steps as f64)
    }
}

/// Uniformly random non-identity single-qubit Pauli.
#[inline]
pub fn random_pauli<R: Rng + ?Sized>(rng: &mut R) -> PauliOp {
    PauliOp::ALL[rng.gen_range(1..4)]
}

/// Uniformly random non-identity two-qubit Pauli.
#[inline]
pub fn random_pauli_pair<R: Rng + ?Sized>(rng: &mut R) -> (PauliOp, PauliOp) {
    let k = rng.gen_range(1..16);
    (PauliOp::ALL[k / 4], PauliOp::ALL[k % 4])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeStatus {
    Live,
    Lost,
    Measured,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocatedCause {
    FusionFailure,
    Loss,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LocatedEvent {
    pub round: u32,
    pub qubit: usize,
    pub cause: LocatedCause,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    X,
    Z,
}

impl Basis {
    fn op(self) -> PauliOp {
        match self {
            Basis::X => PauliOp::X,
            Basis::Z => PauliOp::Z,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeasurementSpec {
    pub node: NodeId,
    pub basis: Basis,
    pub byproduct_rule: Vec<(NodeId, PauliOp)>,
}

impl MeasurementSpec {
    pub fn new(node: NodeId, basis: Basis) -> Self {
        MeasurementSpec { node, basis, byproduct_rule: Vec::new() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasureOutcome {
    Outcome(bool),
    LossDetected,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FusionPolicy {
    Random,
    ForceSuccess,
    ForceFailure,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FusionOutcome {
    Success,
    Failure,
    LossDetected,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FusionResult {
    pub outcome: FusionOutcome,
    pub merged: Option<NodeId>,
    pub consumed: Vec<NodeId>,
}

#[derive(Clone, Copy, Debug)]
struct Node {
    error: PauliOp,
    frame: PauliOp,
    status: NodeStatus,
    leaf_of: Option<NodeId>,
    last_t: u64,
    track_loss: bool,
    code_qubit: Option<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct ClusterState {
    nodes: Vec<Node>,
    adj: Vec<Vec<NodeId>>,
    now: u64,
    round: u32,
    located: Vec<LocatedEvent>,
    trace: Option<Vec<String>>,
}

impl ClusterState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_trace() -> Self {
        ClusterState { trace: Some(Vec::new()), ..Self::default() }
    }

    /// Clears all nodes and logs while keeping allocations.
    pub fn reset(&mut self) {
        self.nodes.clear();
        for a in &mut self.adj {
            a.clear();
        }
        self.now = 0;
        self.round = 0;
        self.located.clear();
        if let Some(t) = &mut self.trace {
            t.clear();
        }
    }

    pub fn trace_lines(&self) -> &[String] {
        self.trace.as_deref().unwrap_or(&[])
    }

    fn log(&mut self, f: impl FnOnce(&Self) -> String) {
        if self.trace.is_some() {
            let line = f(self);
            if let Some(t) = &mut self.trace {
                t.push(line);
            }
        }
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn advance(&mut self, steps: u64) {
        self.now += steps;
    }

    /// Moves the clock. Going backwards is allowed for building independent
    /// resources whose nodes have not been touched since.
    pub fn set_time(&mut self, t: u64) {
        self.now = t;
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn set_round(&mut self, round: u32) {
        self.round = round;
    }

    pub fn located_log(&self) -> &[LocatedEvent] {
        &self.located
    }

    pub fn clear_located_log(&mut self) {
        self.located.clear();
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Adds an error-free node created at the current time.
    pub fn add_node(&mut self, track_loss: bool) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node {
            error: PauliOp::I,
            frame: PauliOp::I,
            status: NodeStatus::Live,
            leaf_of: None,
            last_t: self.now,
            track_loss,
            code_qubit: None,
        });
        if self.adj.len() <= id {
            self.adj.push(Vec::new());
        }
        id as NodeId
    }

    pub fn add_edge(&mut self, a: NodeId, b: NodeId) {
        debug_assert_ne!(a, b);
        if !self.adj[a as usize].contains(&b) {
            self.adj[a as usize].push(b);
            self.adj[b as usize].push(a);
        }
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.adj[a as usize].contains(&b)
    }

    fn remove_edge(&mut self, a: NodeId, b: NodeId) {
        self.adj[a as usize].retain(|&c| c != b);
        self.adj[b as usize].retain(|&c| c != a);
    }

    pub fn neighbors(&self, node: NodeId) -> &[NodeId] {
        &self.adj[node as usize]
    }

    pub fn status(&self, node: NodeId) -> NodeStatus {
        self.nodes[node as usize].status
    }

    pub fn error(&self, node: NodeId) -> PauliOp {
        self.nodes[node as usize].error
    }

    pub fn frame(&self, node: NodeId) -> PauliOp {
        self.nodes[node as usize].frame
    }

    /// Product of physical error and frame.
    pub fn total(&self, node: NodeId) -> PauliOp {
        let n = &self.nodes[node as usize];
        n.error * n.frame
    }

    pub fn apply_error(&mut self, node: NodeId, op: PauliOp) {
        let n = &mut self.nodes[node as usize];
        n.error = n.error * op;
    }

    pub fn apply_frame(&mut self, node: NodeId, op: PauliOp) {
        let n = &mut self.nodes[node as usize];
        n.frame = n.frame * op;
    }

    pub fn leaf_of(&self, node: NodeId) -> Option<NodeId> {
        self.nodes[node as usize].leaf_of
    }

    pub fn set_leaf_of(&mut self, leaf: NodeId, root: Option<NodeId>) {
        self.nodes[leaf as usize].leaf_of = root;
    }

    pub fn code_qubit(&self, node: NodeId) -> Option<usize> {
        self.nodes[node as usize].code_qubit
    }

    pub fn set_code_qubit(&mut self, node: NodeId, qubit: usize) {
        self.nodes[node as usize].code_qubit = Some(qubit);
    }

    pub fn set_track_loss(&mut self, node: NodeId, track: bool) {
        self.nodes[node as usize].track_loss = track;
    }

    pub fn mark_lost(&mut self, node: NodeId) {
        self.nodes[node as usize].status = NodeStatus::Lost;
    }

    fn check_usable(&self, node: NodeId) -> Result<()> {
        match self.nodes.get(node as usize).map(|n| n.status) {
            None => Err(Error::Usage(format!("node {node} does not exist"))),
            Some(NodeStatus::Measured) => {
                Err(Error::Usage(format!("node {node} was already measured")))
            }
            Some(_) => Ok(()),
        }
    }

    fn depolarize<R: Rng + ?Sized>(&mut self, node: NodeId, p: f64, rng: &mut R) {
        if p > 0.0 && rng.gen_bool(p.min(1.0)) {
            let op = random_pauli(rng);
            self.apply_error(node, op);
        }
    }

    fn loss_check<R: Rng + ?Sized>(&mut self, node: NodeId, p: f64, rng: &mut R) {
        let n = &mut self.nodes[node as usize];
        if n.track_loss && n.status == NodeStatus::Live && p > 0.0 && rng.gen_bool(p.min(1.0)) {
            n.status = NodeStatus::Lost;
        }
    }

    /// Applies the idle noise accumulated since the node was last touched.
    pub fn touch<R: Rng + ?Sized>(&mut self, node: NodeId, noise: &NoiseParams, rng: &mut R) {
        let n = &mut self.nodes[node as usize];
        let idle = self.now.saturating_sub(n.last_t + 1);
        n.last_t = n.last_t.max(self.now);
        if idle > 0 && !noise.is_noiseless() {
            self.loss_check(node, noise.memory_loss(idle), rng);
            self.depolarize(node, noise.memory_depolarization(idle), rng);
        }
    }

    /// One explicit memory step at the current time.
    pub fn memory_step<R: Rng + ?Sized>(&mut self, node: NodeId, noise: &NoiseParams, rng: &mut R) {
        self.touch(node, noise, rng);
        self.loss_check(node, noise.gamma, rng);
        self.depolarize(node, noise.epsilon / 3.0, rng);
    }

    fn remove(&mut self, node: NodeId) {
        let nbrs = std::mem::take(&mut self.adj[node as usize]);
        for c in &nbrs {
            self.adj[*c as usize].retain(|&x| x != node);
        }
        self.adj[node as usize] = nbrs;
        self.adj[node as usize].clear();
        self.nodes[node as usize].status = NodeStatus::Measured;
    }

    pub fn new_bell_pair<R: Rng + ?Sized>(
        &mut self,
        noise: &NoiseParams,
        rng: &mut R,
    ) -> (NodeId, NodeId) {
        let a = self.add_node(true);
        let b = self.add_node(true);
        self.add_edge(a, b);
        self.nodes[b as usize].leaf_of = Some(a);
        if noise.epsilon > 0.0 && rng.gen_bool(noise.epsilon) {
            let (pa, pb) = random_pauli_pair(rng);
            self.apply_error(a, pa);
            self.apply_error(b, pb);
        }
        self.loss_check(a, noise.gamma, rng);
        self.loss_check(b, noise.gamma, rng);
        self.log(|c| format!("bell {a} {b} {}{}", c.error(a).to_char(), c.error(b).to_char()));
        (a, b)
    }

    fn depolarize_pair<R: Rng + ?Sized>(
        &mut self,
        a: NodeId,
        b: NodeId,
        noise: &NoiseParams,
        rng: &mut R,
    ) {
        if noise.epsilon > 0.0 && rng.gen_bool(noise.epsilon) {
            let (pa, pb) = random_pauli_pair(rng);
            self.apply_error(a, pa);
            self.apply_error(b, pb);
        }
    }

    /// Merges `b` into `a` following the success propagation rules.
    fn merge(&mut self, a: NodeId, b: NodeId) {
        let eb = self.nodes[b as usize].error;
        let fb = self.nodes[b as usize].frame;
        let na = &mut self.nodes[a as usize];
        na.error = na.error * PauliOp::from_bits(eb.has_x(), false);
        na.frame = na.frame * fb * PauliOp::from_bits(false, eb.has_z());
        if self.has_edge(a, b) {
            self.remove_edge(a, b);
        }
        let nbrs = std::mem::take(&mut self.adj[b as usize]);
        for &c in &nbrs {
            self.adj[c as usize].retain(|&x| x != b);
            self.add_edge(a, c);
            if self.nodes[c as usize].leaf_of == Some(b) {
                self.nodes[c as usize].leaf_of = Some(a);
            }
        }
        self.adj[b as usize] = nbrs;
        self.adj[b as usize].clear();
        let la = self.nodes[a as usize].leaf_of;
        let lb = self.nodes[b as usize].leaf_of;
        // Two leaves merge into a bridge; a root absorbing a leaf stays a root.
        self.nodes[a as usize].leaf_of = match (la, lb) {
            (Some(_), Some(_)) => None,
            (None, _) => None,
            (Some(r), None) => Some(r),
        };
        self.nodes[b as usize].status = NodeStatus::Measured;
    }

    fn z_measure_out(&mut self, node: NodeId) {
        if self.total(node).has_x() {
            let nbrs = self.adj[node as usize].clone();
            for c in nbrs {
                self.apply_error(c, PauliOp::Z);
            }
        }
        self.remove(node);
    }

    fn fuse_inner<R: Rng + ?Sized>(
        &mut self,
        a: NodeId,
        b: NodeId,
        noise: &NoiseParams,
        rng: &mut R,
        policy: FusionPolicy,
    ) -> Result<FusionOutcome> {
        self.check_usable(a)?;
        self.check_usable(b)?;
        if a == b {
            return Err(Error::Usage(format!("cannot fuse node {a} with itself")));
        }
        self.touch(a, noise, rng);
        self.touch(b, noise, rng);
        self.loss_check(a, noise.gamma, rng);
        self.loss_check(b, noise.gamma, rng);
        if self.status(a) == NodeStatus::Lost || self.status(b) == NodeStatus::Lost {
            return Ok(FusionOutcome::LossDetected);
        }
        self.depolarize_pair(a, b, noise, rng);
        let success = match policy {
            FusionPolicy::Random => rng.gen_bool(0.5),
            FusionPolicy::ForceSuccess => true,
            FusionPolicy::ForceFailure => false,
        };
        Ok(if success { FusionOutcome::Success } else { FusionOutcome::Failure })
    }

    pub fn fusion_gate<R: Rng + ?Sized>(
        &mut self,
        a: NodeId,
        b: NodeId,
        noise: &NoiseParams,
        rng: &mut R,
        policy: FusionPolicy,
    ) -> Result<FusionResult> {
        let outcome = self.fuse_inner(a, b, noise, rng, policy)?;
        let result = match outcome {
            FusionOutcome::Success => {
                self.merge(a, b);
                FusionResult { outcome, merged: Some(a), consumed: vec![b] }
            }
            FusionOutcome::Failure => {
                self.z_measure_out(a);
                self.z_measure_out(b);
                FusionResult { outcome, merged: None, consumed: vec![a, b] }
            }
            FusionOutcome::LossDetected => {
                self.remove(a);
                self.remove(b);
                FusionResult { outcome, merged: None, consumed: vec![a, b] }
            }
        };
        self.log(|_| format!("fuse {a} {b} {:?}", result.outcome));
        Ok(result)
    }

    /// Fusion touching encoded data: failures and losses are converted into
    /// a located error on `data_root` and the graph proceeds as on success.
    pub fn fuse_onto_data<R: Rng + ?Sized>(
        &mut self,
        data_leaf: NodeId,
        other: NodeId,
        data_root: NodeId,
        noise: &NoiseParams,
        rng: &mut R,
        policy: FusionPolicy,
    ) -> Result<FusionResult> {
        self.check_usable(data_root)?;
        if self.leaf_of(data_leaf) != Some(data_root) {
            return Err(Error::Usage(format!(
                "node {data_leaf} is not a leaf of data root {data_root}"
            )));
        }
        let outcome = self.fuse_inner(data_leaf, other, noise, rng, policy)?;
        if outcome != FusionOutcome::Success {
            let cause = if outcome == FusionOutcome::Failure {
                LocatedCause::FusionFailure
            } else {
                LocatedCause::Loss
            };
            self.randomize_data(data_root, cause, rng)?;
            for n in [data_leaf, other] {
                self.nodes[n as usize].status = NodeStatus::Live;
            }
        }
        self.merge(data_leaf, other);
        self.log(|_| format!("fuse-data {data_leaf} {other} root {data_root} {outcome:?}"));
        Ok(FusionResult { outcome, merged: Some(data_leaf), consumed: vec![other] })
    }

    /// Applies a uniformly random Pauli to the frame of `data_root` and logs a
    /// located event on its code qubit.
    pub fn randomize_data<R: Rng + ?Sized>(
        &mut self,
        data_root: NodeId,
        cause: LocatedCause,
        rng: &mut R,
    ) -> Result<()> {
        let qubit = self
            .code_qubit(data_root)
            .ok_or_else(|| Error::Usage(format!("node {data_root} carries no code qubit")))?;
        let op = PauliOp::ALL[rng.gen_range(0..4)];
        self.apply_frame(data_root, op);
        self.located.push(LocatedEvent { round: self.round, qubit, cause });
        Ok(())
    }

    pub fn measure<R: Rng + ?Sized>(
        &mut self,
        spec: &MeasurementSpec,
        noise: &NoiseParams,
        rng: &mut R,
    ) -> Result<MeasureOutcome> {
        let node = spec.node;
        self.check_usable(node)?;
        self.touch(node, noise, rng);
        self.loss_check(node, noise.gamma, rng);
        if self.status(node) == NodeStatus::Lost {
            self.remove(node);
            self.log(|_| format!("measure {node} lost"));
            return Ok(MeasureOutcome::LossDetected);
        }
        self.depolarize(node, noise.epsilon / 3.0, rng);
        let total = self.total(node);
        let flipped = total.anticommutes(spec.basis.op());
        if flipped {
            for &(t, op) in &spec.byproduct_rule {
                self.apply_frame(t, op);
            }
        }
        if spec.basis == Basis::Z {
            self.z_measure_out(node);
        } else {
            self.remove(node);
        }
        self.log(|_| format!("measure {node} {:?} {}", spec.basis, flipped as u8));
        Ok(MeasureOutcome::Outcome(flipped))
    }
}
