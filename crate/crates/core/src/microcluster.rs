//! Star-shaped microclusters built from Bell pairs, and parallel fusion
//! between leaf sets.

use rand::Rng;

use crate::cluster::{
    Basis, ClusterState, FusionOutcome, FusionPolicy, LocatedCause, MeasureOutcome,
    MeasurementSpec, NodeId, NodeStatus, NoiseParams,
};
use crate::error::{Error, Result};

pub const DEFAULT_ATTEMPT_BUDGET: u64 = 64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Resources {
    pub bell_pairs_consumed: u64,
    pub timesteps: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Microcluster {
    pub root: NodeId,
    pub leaves: Vec<NodeId>,
    pub resources: Resources,
}

/// Number of fusion levels needed to grow a `k`-leaf star from Bell pairs.
pub fn build_depth(k: usize) -> u64 {
    (k.max(1) as u64).next_power_of_two().trailing_zeros() as u64
}

/// Builds a `k`-leaf star by recursive doubling: two half-size stars are
/// joined by fusing their roots, and both halves are rebuilt whenever that
/// fusion fails or detects a loss.
pub fn build_microcluster<R: Rng + ?Sized>(
    state: &mut ClusterState,
    k: usize,
    noise: &NoiseParams,
    batch: u64,
    rng: &mut R,
) -> Result<Microcluster> {
    if k == 0 || batch == 0 {
        return Err(Error::Usage("microcluster needs k >= 1 and batch >= 1".into()));
    }
    let t0 = state.now();
    let depth = build_depth(k);
    let mut bell_pairs = 0;
    let (root, leaves) = build_star(state, k, t0, noise, batch, rng, &mut bell_pairs)?;
    state.set_time(t0 + depth);
    Ok(Microcluster {
        root,
        leaves,
        resources: Resources { bell_pairs_consumed: bell_pairs, timesteps: 1 + depth },
    })
}

#[allow(clippy::too_many_arguments)]
fn build_star<R: Rng + ?Sized>(
    state: &mut ClusterState,
    k: usize,
    t0: u64,
    noise: &NoiseParams,
    batch: u64,
    rng: &mut R,
    bell_pairs: &mut u64,
) -> Result<(NodeId, Vec<NodeId>)> {
    let fuse_time = t0 + build_depth(k);
    if k == 1 {
        state.set_time(t0);
        let (root, leaf) = state.new_bell_pair(noise, rng);
        *bell_pairs += 1;
        return Ok((root, vec![leaf]));
    }
    let left = k.div_ceil(2);
    for _ in 0..batch {
        let (ra, mut la) = build_star(state, left, t0, noise, batch, rng, bell_pairs)?;
        let (rb, lb) = build_star(state, k - left, t0, noise, batch, rng, bell_pairs)?;
        state.set_time(fuse_time);
        let res = state.fusion_gate(ra, rb, noise, rng, FusionPolicy::Random)?;
        if res.outcome == FusionOutcome::Success {
            for &leaf in &lb {
                state.set_leaf_of(leaf, Some(ra));
            }
            la.extend(lb);
            return Ok((ra, la));
        }
        // discard whatever survived of both halves
        for leaf in la.into_iter().chain(lb) {
            if state.status(leaf) != NodeStatus::Measured {
                state.measure(&MeasurementSpec::new(leaf, Basis::Z), noise, rng)?;
            }
        }
    }
    Err(Error::PreparationStall { attempts: batch })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParallelFusion {
    /// One leaf pair fused; `merged` is the bridging node.
    Fused { merged: NodeId, attempts: usize },
    /// Every attempt failed and no data was involved.
    Failed,
    /// Data was touched by a failure or loss; the bond exists and the data
    /// frame was randomized.
    Located { merged: NodeId },
}

/// Attempts fusions between paired leaves in order until one succeeds, then
/// Z-measures every unused leaf. When `data_side` is set, `a_leaves` belong
/// to that data root.
pub fn parallel_fusion<R: Rng + ?Sized>(
    state: &mut ClusterState,
    a_leaves: &[NodeId],
    b_leaves: &[NodeId],
    data_side: Option<NodeId>,
    noise: &NoiseParams,
    policy: FusionPolicy,
    rng: &mut R,
) -> Result<ParallelFusion> {
    if a_leaves.is_empty() || a_leaves.len() != b_leaves.len() {
        return Err(Error::Usage(format!(
            "parallel fusion needs equal nonempty leaf lists, got {} and {}",
            a_leaves.len(),
            b_leaves.len()
        )));
    }
    let m = a_leaves.len();
    let mut merged = None;
    let mut damage = None;
    let mut randomized = false;
    let mut used = 0;
    for i in 0..m {
        used = i + 1;
        let (a, b) = (a_leaves[i], b_leaves[i]);
        if let (Some(root), true) = (data_side, i + 1 == m) {
            let res = state.fuse_onto_data(a, b, root, noise, rng, policy)?;
            randomized = res.outcome != FusionOutcome::Success;
            merged = res.merged;
            break;
        }
        let res = state.fusion_gate(a, b, noise, rng, policy)?;
        match res.outcome {
            FusionOutcome::Success => {
                merged = res.merged;
                break;
            }
            FusionOutcome::Failure => {}
            FusionOutcome::LossDetected => damage = Some(LocatedCause::Loss),
        }
    }
    for &leaf in a_leaves[used..].iter().chain(&b_leaves[used..]) {
        let out = state.measure(&MeasurementSpec::new(leaf, Basis::Z), noise, rng)?;
        if out == MeasureOutcome::LossDetected && a_leaves.contains(&leaf) {
            damage = Some(LocatedCause::Loss);
        }
    }
    match (data_side, merged) {
        (Some(root), Some(merged)) => {
            if let (Some(cause), false) = (damage, randomized) {
                state.randomize_data(root, cause, rng)?;
                randomized = true;
            }
            Ok(if randomized {
                ParallelFusion::Located { merged }
            } else {
                ParallelFusion::Fused { merged, attempts: used }
            })
        }
        (None, Some(merged)) => Ok(ParallelFusion::Fused { merged, attempts: used }),
        (_, None) => Ok(ParallelFusion::Failed),
    }
}
