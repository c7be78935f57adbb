//! Deterministic gate-based telecorrection under located and unlocated noise.
//!
//! Each round teleports the data block D through an encoded Bell pair: A is
//! prepared in |+>, B in |0>, then CNOT A->B, CNOT D->A, D is measured in X
//! and A in Z, and B carries the data on. Errors are tracked as X and Z bit
//! masks over the code positions.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::css::{CssCode, ErrorKind};
use crate::decoder::decode_mask;
use crate::ec_round::{classify_crash, Crash, EncodedData, RoundReport, TrialOutcome};
use crate::error::{Error, Result};
use crate::sim::{run_trials, Tally};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetNoiseParams {
    /// Located error probability per location.
    pub p: f64,
    /// Probability of an unlocated X flip, and independently of a Z flip,
    /// per location.
    pub q: f64,
}

impl DetNoiseParams {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        for (field, v) in [("p", p), ("q", q)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config { field: field.into(), reason: format!("{v} not in [0, 1]") });
            }
        }
        Ok(DetNoiseParams { p, q })
    }
}

/// Blocks of the round.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    D,
    A,
    B,
}

/// Noise locations in time order; every entry is one location per code
/// position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    Hook(Block),
    /// Transversal CNOT from the first block to the second.
    Cnot(Block, Block),
}

/// The schedule of one round: preparations, the two CNOTs, then the
/// measurements of D and A while B waits.
pub const SCHEDULE: [Step; 11] = [
    Step::Hook(Block::A),
    Step::Hook(Block::B),
    Step::Cnot(Block::A, Block::B),
    Step::Hook(Block::A),
    Step::Hook(Block::B),
    Step::Cnot(Block::D, Block::A),
    Step::Hook(Block::D),
    Step::Hook(Block::A),
    Step::Hook(Block::D),
    Step::Hook(Block::A),
    Step::Hook(Block::B),
];

/// Number of noise locations per code position.
pub fn locations_per_position() -> usize {
    SCHEDULE.iter().filter(|s| matches!(s, Step::Hook(_))).count()
}

/// Carried state: data errors plus positions located in the previous round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DetData {
    pub x: u64,
    pub z: u64,
    pub located: u64,
}

impl DetData {
    pub fn clean() -> Self {
        DetData { x: 0, z: 0, located: 0 }
    }
}

#[derive(Clone, Copy, Default)]
struct Blocks {
    x: [u64; 3],
    z: [u64; 3],
    located: [u64; 3],
}

fn idx(b: Block) -> usize {
    b as usize
}

/// Positions hit by a Bernoulli(`p`) process over `n` sites.
fn bernoulli_mask<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> u64 {
    if p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return (1u64 << n) - 1;
    }
    let log_q = (1.0 - p).ln();
    let mut mask = 0;
    let mut i = 0usize;
    loop {
        let u: f64 = 1.0 - rng.gen::<f64>();
        i += (u.ln() / log_q) as usize;
        if i >= n {
            return mask;
        }
        mask |= 1 << i;
        i += 1;
    }
}

fn hook<R: Rng + ?Sized>(s: &mut Blocks, b: Block, n: usize, noise: &DetNoiseParams, rng: &mut R) {
    let k = idx(b);
    let loc = bernoulli_mask(n, noise.p, rng);
    if loc != 0 {
        let keep = !loc;
        s.x[k] = (s.x[k] & keep) | (rng.gen::<u64>() & loc);
        s.z[k] = (s.z[k] & keep) | (rng.gen::<u64>() & loc);
        s.located[k] |= loc;
    }
    s.x[k] ^= bernoulli_mask(n, noise.q, rng);
    s.z[k] ^= bernoulli_mask(n, noise.q, rng);
}

/// Runs one round on `data`; returns the output block and the report.
pub fn run_det_round_on<R: Rng + ?Sized>(
    code: &CssCode,
    noise: &DetNoiseParams,
    data: &DetData,
    rng: &mut R,
) -> (DetData, RoundReport) {
    let n = code.n;
    let mut s = Blocks::default();
    s.x[idx(Block::D)] = data.x;
    s.z[idx(Block::D)] = data.z;
    s.located[idx(Block::D)] = data.located;
    for step in SCHEDULE {
        match step {
            Step::Hook(b) => hook(&mut s, b, n, noise, rng),
            Step::Cnot(c, t) => {
                s.x[idx(t)] ^= s.x[idx(c)];
                s.z[idx(c)] ^= s.z[idx(t)];
            }
        }
    }
    let (d, a, b) = (idx(Block::D), idx(Block::A), idx(Block::B));
    let located = s.located[d] | s.located[a];
    // X outcomes of D see its Z errors; Z outcomes of A see its X errors
    let synd_z = code.syndrome_u64(ErrorKind::Z, s.z[d]);
    let synd_x = code.syndrome_u64(ErrorKind::X, s.x[a]);
    let dx = decode_mask(code, ErrorKind::X, synd_x, located);
    let dz = decode_mask(code, ErrorKind::Z, synd_z, located);
    let out = DetData {
        x: s.x[b] ^ s.x[a] ^ dx.flips,
        z: s.z[b] ^ s.z[d] ^ dz.flips,
        located: s.located[b],
    };
    let mut report = RoundReport {
        synd_x,
        synd_z,
        synd_x2: synd_x,
        synd_z2: synd_z,
        located,
        flips_x: dx.flips,
        flips_z: dz.flips,
        located_crash: dx.located_crash || dz.located_crash,
        crash: Crash::None,
        ancilla_rejections: 0,
        assembly_rejections: 0,
    };
    let as_data = EncodedData { x: out.x, z: out.z, leaf_z: Vec::new() };
    report.crash = classify_crash(code, &report, &as_data);
    (out, report)
}

/// One round from clean data.
pub fn run_det_round<R: Rng + ?Sized>(code: &CssCode, noise: &DetNoiseParams, rng: &mut R) -> RoundReport {
    run_det_round_on(code, noise, &DetData::clean(), rng).1
}

/// Two rounds from clean data; the second is scored.
pub fn det_trial<R: Rng + ?Sized>(code: &CssCode, noise: &DetNoiseParams, rng: &mut R) -> TrialOutcome {
    let (data, first) = run_det_round_on(code, noise, &DetData::clean(), rng);
    if first.crash != Crash::None {
        return TrialOutcome::Discarded;
    }
    TrialOutcome::Second(run_det_round_on(code, noise, &data, rng).1.crash)
}

pub fn monte_carlo_det(code: &CssCode, noise: &DetNoiseParams, trials: u64, seed: u64) -> Result<Tally> {
    if trials == 0 {
        return Err(Error::Config { field: "trials".into(), reason: "must be at least 1".into() });
    }
    Ok(monte_carlo_det_point(code, noise, trials, seed, 0))
}

/// Trials of grid point `point`, with streams keyed by (seed, point, trial).
pub fn monte_carlo_det_point(code: &CssCode, noise: &DetNoiseParams, trials: u64, seed: u64, point: u64) -> Tally {
    run_trials(trials, seed, point, |rng: &mut ChaCha8Rng| det_trial(code, noise, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::css::CodeName;
    use crate::sim::trial_rng;
    use rand::SeedableRng;

    fn steane() -> CssCode {
        CssCode::load(CodeName::Steane7).unwrap()
    }

    #[test]
    fn nine_locations_per_position() {
        assert_eq!(locations_per_position(), 9);
    }

    #[test]
    fn noiseless_rounds_never_crash() {
        let code = CssCode::load(CodeName::Golay23).unwrap();
        let t = monte_carlo_det(&code, &DetNoiseParams::new(0.0, 0.0).unwrap(), 2000, 1).unwrap();
        assert_eq!(t.n_n, 2000);
    }

    #[test]
    fn single_data_error_is_corrected() {
        let code = steane();
        let noise = DetNoiseParams::new(0.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for i in 0..7 {
            let data = DetData { x: 1 << i, z: 1 << ((i + 3) % 7), located: 0 };
            let (out, rep) = run_det_round_on(&code, &noise, &data, &mut rng);
            assert_eq!(rep.synd_x, code.syndrome_u64(ErrorKind::X, 1 << i));
            assert_eq!(rep.crash, Crash::None);
            assert_eq!((out.x, out.z), (0, 0));
        }
    }

    #[test]
    fn x_and_z_flips_are_independent() {
        let n = 20usize;
        let q = 0.1;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (mut both, mut total) = (0u64, 0u64);
        for _ in 0..50_000 {
            let mut s = Blocks::default();
            hook(&mut s, Block::A, n, &DetNoiseParams { p: 0.0, q }, &mut rng);
            both += (s.x[1] & s.z[1]).count_ones() as u64;
            total += n as u64;
        }
        let rate = both as f64 / total as f64;
        let sigma = (q * q * (1.0 - q * q) / total as f64).sqrt();
        assert!((rate - q * q).abs() < 4.0 * sigma, "{rate}");
    }

    #[test]
    fn bernoulli_mask_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials = 20_000;
        let ones: u32 = (0..trials).map(|_| bernoulli_mask(50, 0.03, &mut rng).count_ones()).sum();
        let mean = ones as f64 / (trials * 50) as f64;
        let sigma = (0.03 * 0.97 / (trials * 50) as f64).sqrt();
        assert!((mean - 0.03).abs() < 4.0 * sigma);
        assert_eq!(bernoulli_mask(10, 1.0, &mut rng), 1023);
    }

    #[test]
    fn located_only_noise_crashes_only_beyond_erasure_capacity() {
        let code = steane();
        let noise = DetNoiseParams::new(0.05, 0.0).unwrap();
        for t in 0..3000 {
            let mut rng = trial_rng(2, 0, t);
            let (out, rep) = run_det_round_on(&code, &noise, &DetData::clean(), &mut rng);
            if rep.crash == Crash::Unlocated {
                assert!((rep.located | out.located).count_ones() >= 2);
            }
        }
    }

    #[test]
    fn fixed_seed_repeats() {
        let code = steane();
        let noise = DetNoiseParams::new(0.01, 0.001).unwrap();
        let a = monte_carlo_det(&code, &noise, 3000, 11).unwrap();
        assert_eq!(a, monte_carlo_det(&code, &noise, 3000, 11).unwrap());
        assert!(a.is_consistent());
    }
}
