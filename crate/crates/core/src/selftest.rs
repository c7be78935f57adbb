//! A quick invariant suite for the command line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{trace_threshold, PolyModel, RateMap, ThresholdConfig};
use crate::cluster::NoiseParams;
use crate::css::{validate, CodeName, CssCode, ErrorKind};
use crate::decoder::{decode_mask, oracle};
use crate::det::{monte_carlo_det, DetNoiseParams};
use crate::ec_round::{run_round, EncodedData, Protocol};
use crate::harness::{Mode, TallyTable};
use crate::sim::{run_trials, Tally};

fn codes_validate() -> bool {
    [CodeName::Steane7, CodeName::Golay23]
        .into_iter()
        .all(|c| CssCode::load(c).map(|code| validate(&code).passed()).unwrap_or(false))
}

fn steane_decoder_matches_oracle() -> bool {
    let Ok(code) = CssCode::load(CodeName::Steane7) else { return false };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (0..2000).all(|_| {
        let syndrome = rng.gen_range(0..8);
        let located = rng.gen::<u64>() & rng.gen::<u64>() & code.mask();
        let got = decode_mask(&code, ErrorKind::X, syndrome, located);
        let want = oracle::reference(&code, ErrorKind::X, syndrome, located);
        got.located_crash == want.ambiguous && (want.ambiguous || got.flips == want.flips)
    })
}

fn noiseless_trials_are_clean() -> bool {
    let Ok(noise) = NoiseParams::new(0.0, 0.0) else { return false };
    let Ok(p) = Protocol::for_code(CodeName::Steane7, noise) else { return false };
    let t = run_trials(200, 1, 0, |rng| crate::ec_round::run_trial(&p, rng));
    let Ok(code) = CssCode::load(CodeName::Steane7) else { return false };
    let d = monte_carlo_det(&code, &DetNoiseParams { p: 0.0, q: 0.0 }, 200, 1);
    t.n_n == 200 && d.map(|d| d.n_n == 200).unwrap_or(false)
}

fn telecorrectors_preagree() -> bool {
    let Ok(noise) = NoiseParams::new(1e-4, 1e-4) else { return false };
    let Ok(p) = Protocol::for_code(CodeName::Steane7, noise) else { return false };
    let data = EncodedData::clean(p.code().n);
    (0..500).all(|i| {
        let mut rng = ChaCha8Rng::seed_from_u64(i);
        run_round(&p, &data, &mut rng).map(|(_, r)| r.syndromes_agree()).unwrap_or(true)
    })
}

fn tally_files_round_trip() -> bool {
    let t = TallyTable {
        mode: Mode::Cluster,
        rows: vec![((1e-4, 2.5e-3), Tally { trials: 9, n_u: 1, n_l: 2, n_n: 3, discarded: 2, stalls: 1 })],
    };
    TallyTable::from_csv(&t.to_csv()).map(|u| u == t).unwrap_or(false)
}

fn toy_threshold_is_recovered() -> bool {
    let f = RateMap::unbounded(PolyModel::new(&[((0, 1), 1.0)]), PolyModel::zero());
    let g = RateMap::unbounded(PolyModel::new(&[((0, 2), 100.0)]), PolyModel::zero());
    let curve = trace_threshold("toy", &f, &g, &ThresholdConfig { rays: 2, ..Default::default() });
    (curve.boundary()[1].1 - 0.01).abs() < 1e-4
}

type Check = (&'static str, fn() -> bool);

/// Named checks and whether each passed.
pub fn run_selftest() -> Vec<(&'static str, bool)> {
    let checks: [Check; 6] = [
        ("code validation", codes_validate),
        ("Steane decoder matches brute force", steane_decoder_matches_oracle),
        ("noiseless trials never crash", noiseless_trials_are_clean),
        ("telecorrector syndromes preagree", telecorrectors_preagree),
        ("tally files round-trip", tally_files_round_trip),
        ("toy threshold at 0.01", toy_threshold_is_recovered),
    ];
    checks.iter().map(|&(name, check)| (name, check())).collect()
}

#[cfg(test)]
mod tests {
    #[test]
    fn selftest_passes() {
        for (name, passed) in super::run_selftest() {
            assert!(passed, "{name}");
        }
    }
}
