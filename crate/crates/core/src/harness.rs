//! Grid runs, tally files and the fit and threshold pipeline.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{
    default_basis, estimate_rates, fit_rate_map, trace_threshold, Monomial, PolyModel, RateKind, RateMap,
    RatePoint, ThresholdConfig, ThresholdCurve,
};
use crate::cluster::NoiseParams;
use crate::css::{CodeName, CssCode};
use crate::det::{det_trial, DetNoiseParams};
use crate::ec_round::layout::{Layout, LayoutParams};
use crate::ec_round::{run_trial, Crash, Protocol, TrialOutcome, DEFAULT_ASSEMBLY_BUDGET};
use crate::error::{Error, Result};
use crate::sim::{run_trials, trial_outcomes, Tally};

/// Which layer a run simulates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Cluster,
    Deterministic,
}

impl Mode {
    fn axes(self) -> (&'static str, &'static str) {
        match self {
            Mode::Cluster => ("eps", "gamma"),
            Mode::Deterministic => ("p", "q"),
        }
    }
}

fn default_bond_leaves() -> usize {
    LayoutParams::default().bond_leaves
}

fn default_attach_leaves() -> usize {
    LayoutParams::default().attach_leaves
}

fn default_budget() -> u64 {
    DEFAULT_ASSEMBLY_BUDGET
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub code: CodeName,
    pub mode: Mode,
    /// (ε, γ) points for the cluster layer, (p, q) for the deterministic layer.
    pub grid: Vec<(f64, f64)>,
    pub trials: u64,
    pub seed: u64,
    /// Worker threads; the global pool when absent.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_bond_leaves")]
    pub bond_leaves: usize,
    #[serde(default = "default_attach_leaves")]
    pub attach_leaves: usize,
    /// Attempts per ancilla and per telecorrector before a stall.
    #[serde(default = "default_budget")]
    pub budget: u64,
    /// Tally CSV path.
    pub output: PathBuf,
    /// Optional per-trial record CSV path.
    #[serde(default)]
    pub records: Option<PathBuf>,
}

fn config_error(field: &str, reason: impl Into<String>) -> Error {
    Error::Config { field: field.into(), reason: reason.into() }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| config_error("json", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| config_error("path", format!("{}: {e}", path.display())))?;
        RunConfig::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(config_error("grid", "must not be empty"));
        }
        let (a, b) = self.mode.axes();
        for &(x, y) in &self.grid {
            for (name, v) in [(a, x), (b, y)] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(config_error("grid", format!("{name}={v} not in [0, 1]")));
                }
            }
        }
        if self.trials == 0 {
            return Err(config_error("trials", "must be at least 1"));
        }
        if self.workers == Some(0) {
            return Err(config_error("workers", "must be at least 1"));
        }
        if !(1..=16).contains(&self.bond_leaves) {
            return Err(config_error("bond_leaves", "must be in 1..=16"));
        }
        if !(1..=16).contains(&self.attach_leaves) {
            return Err(config_error("attach_leaves", "must be in 1..=16"));
        }
        if self.budget == 0 {
            return Err(config_error("budget", "must be at least 1"));
        }
        Ok(())
    }

    pub fn layout_params(&self) -> LayoutParams {
        LayoutParams { bond_leaves: self.bond_leaves, attach_leaves: self.attach_leaves }
    }
}

/// Per-point tallies of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct TallyTable {
    pub mode: Mode,
    pub rows: Vec<((f64, f64), Tally)>,
}

impl TallyTable {
    pub fn to_csv(&self) -> String {
        let (a, b) = self.mode.axes();
        let mut s = format!("{a},{b},trials,N_U,N_L,N_N,discarded,stalls\n");
        for ((x, y), t) in &self.rows {
            let _ = writeln!(s, "{x},{y},{},{},{},{},{},{}", t.trials, t.n_u, t.n_l, t.n_n, t.discarded, t.stalls);
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty tally file".into()))?;
        let mode = [Mode::Cluster, Mode::Deterministic]
            .into_iter()
            .find(|m| {
                let (a, b) = m.axes();
                header == format!("{a},{b},trials,N_U,N_L,N_N,discarded,stalls")
            })
            .ok_or_else(|| Error::Parse(format!("unexpected tally header {header:?}")))?;
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(Error::Parse(format!("tally line {}: expected 8 fields", i + 2)));
            }
            let bad = |e: &dyn std::fmt::Display| Error::Parse(format!("tally line {}: {e}", i + 2));
            let x: f64 = f[0].parse().map_err(|e| bad(&e))?;
            let y: f64 = f[1].parse().map_err(|e| bad(&e))?;
            let n: Vec<u64> = f[2..].iter().map(|v| v.parse()).collect::<std::result::Result<_, _>>().map_err(|e| bad(&e))?;
            let t = Tally { trials: n[0], n_u: n[1], n_l: n[2], n_n: n[3], discarded: n[4], stalls: n[5] };
            if !t.is_consistent() {
                return Err(bad(&"counts do not add up to trials"));
            }
            rows.push(((x, y), t));
        }
        Ok(TallyTable { mode, rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::MissingInput(format!("{}: {e}", path.display())))?;
        TallyTable::from_csv(&text)
    }

    /// Rate estimates of every point that has a non-empty denominator.
    pub fn rate_points(&self) -> Vec<RatePoint> {
        self.rows.iter().filter_map(|(x, t)| estimate_rates(t, *x).ok()).collect()
    }
}

/// A prepared simulator for one grid point.
enum Sim<'a> {
    Cluster(Box<Protocol>),
    Det(&'a CssCode, DetNoiseParams),
}

impl Sim<'_> {
    fn trial(&self, rng: &mut rand_chacha::ChaCha8Rng) -> TrialOutcome {
        match self {
            Sim::Cluster(p) => run_trial(p, rng),
            Sim::Det(code, noise) => det_trial(code, noise, rng),
        }
    }
}

fn outcome_label(o: TrialOutcome) -> &'static str {
    match o {
        TrialOutcome::Second(Crash::None) => "none",
        TrialOutcome::Second(Crash::Unlocated) => "unlocated",
        TrialOutcome::Second(Crash::Located) => "located",
        TrialOutcome::Discarded => "discarded_warmup",
        TrialOutcome::Stall => "stall",
    }
}

/// Runs every grid point of `cfg` and returns the tallies; per-trial
/// records are returned as CSV text when requested.
pub fn simulate(cfg: &RunConfig) -> Result<(TallyTable, Option<String>)> {
    cfg.validate()?;
    let code = CssCode::load(cfg.code)?;
    let layout = match cfg.mode {
        Mode::Cluster => Some(Layout::new(&code, cfg.layout_params())?),
        Mode::Deterministic => None,
    };
    let mut sims = Vec::with_capacity(cfg.grid.len());
    for &(x, y) in &cfg.grid {
        sims.push(match &layout {
            Some(l) => Sim::Cluster(Box::new(Protocol::new(l.clone(), NoiseParams::new(x, y)?).with_budget(cfg.budget))),
            None => Sim::Det(&code, DetNoiseParams::new(x, y)?),
        });
    }
    let body = || {
        let mut rows = Vec::with_capacity(sims.len());
        let mut records = cfg.records.as_ref().map(|_| {
            let (a, b) = cfg.mode.axes();
            format!("point,{a},{b},trial,outcome\n")
        });
        for (i, (sim, &x)) in sims.iter().zip(&cfg.grid).enumerate() {
            let trial = |rng: &mut rand_chacha::ChaCha8Rng| sim.trial(rng);
            let tally = match records.as_mut() {
                Some(out) => {
                    let outcomes = trial_outcomes(cfg.trials, cfg.seed, i as u64, trial);
                    let mut t = Tally::default();
                    for (k, o) in outcomes.into_iter().enumerate() {
                        t.record(o);
                        let _ = writeln!(out, "{i},{},{},{k},{}", x.0, x.1, outcome_label(o));
                    }
                    t
                }
                None => run_trials(cfg.trials, cfg.seed, i as u64, trial),
            };
            rows.push((x, tally));
        }
        (TallyTable { mode: cfg.mode, rows }, records)
    };
    match cfg.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Io(format!("thread pool: {e}")))?;
            Ok(pool.install(body))
        }
        None => Ok(body()),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Runs the grid and writes the tally file and, if configured, the records.
pub fn run_grid(cfg: &RunConfig) -> Result<TallyTable> {
    let (table, records) = simulate(cfg)?;
    write_file(&cfg.output, &table.to_csv())?;
    if let (Some(path), Some(text)) = (&cfg.records, records) {
        write_file(path, &text)?;
    }
    Ok(table)
}

/// Fit bases of both layers for one code.
#[derive(Clone, Debug, PartialEq)]
pub struct FitBases {
    pub f_unlocated: Vec<Monomial>,
    pub f_located: Vec<Monomial>,
    pub g_unlocated: Vec<Monomial>,
    pub g_located: Vec<Monomial>,
}

impl FitBases {
    pub fn defaults(code: CodeName) -> Self {
        FitBases {
            f_unlocated: default_basis(code, RateKind::Unlocated),
            f_located: default_basis(code, RateKind::Located),
            g_unlocated: default_basis(code, RateKind::Unlocated),
            g_located: default_basis(code, RateKind::Located),
        }
    }
}

/// Fitted maps of one code: `f` for the cluster layer, `g` for the
/// deterministic layer.
#[derive(Clone, Debug, PartialEq)]
pub struct CodeModels {
    pub code: CodeName,
    pub f: RateMap,
    pub g: RateMap,
}

pub fn fit_models(code: CodeName, cluster: &TallyTable, det: &TallyTable, bases: &FitBases) -> Result<CodeModels> {
    if cluster.mode != Mode::Cluster {
        return Err(Error::MissingInput("cluster tallies have the deterministic header".into()));
    }
    if det.mode != Mode::Deterministic {
        return Err(Error::MissingInput("deterministic tallies have the cluster header".into()));
    }
    let f = fit_rate_map(&cluster.rate_points(), &bases.f_unlocated, &bases.f_located)?;
    let g = fit_rate_map(&det.rate_points(), &bases.g_unlocated, &bases.g_located)?;
    Ok(CodeModels { code, f, g })
}

fn model_files(dir: &Path, code: CodeName) -> [PathBuf; 5] {
    ["f_unlocated", "f_located", "g_unlocated", "g_located", "domain"].map(|s| dir.join(format!("{code}_{s}.csv")))
}

fn domain_csv(f: &RateMap, g: &RateMap) -> String {
    format!("map,x_max,y_max\nf,{},{}\ng,{},{}\n", f.domain.0, f.domain.1, g.domain.0, g.domain.1)
}

fn parse_domains(text: &str) -> Result<[(f64, f64); 2]> {
    let bad = || Error::Parse(format!("malformed domain file {text:?}"));
    let mut lines = text.lines();
    if lines.next() != Some("map,x_max,y_max") {
        return Err(bad());
    }
    let mut out = [(0.0, 0.0); 2];
    for (slot, name) in out.iter_mut().zip(["f", "g"]) {
        let line = lines.next().ok_or_else(bad)?;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 || f[0] != name {
            return Err(bad());
        }
        *slot = (f[1].parse().map_err(|_| bad())?, f[2].parse().map_err(|_| bad())?);
    }
    Ok(out)
}

impl CodeModels {
    pub fn save(&self, dir: &Path) -> Result<()> {
        let [fe, fl, ge, gl, dom] = model_files(dir, self.code);
        write_file(&fe, &self.f.e.to_csv())?;
        write_file(&fl, &self.f.gamma.to_csv())?;
        write_file(&ge, &self.g.e.to_csv())?;
        write_file(&gl, &self.g.gamma.to_csv())?;
        write_file(&dom, &domain_csv(&self.f, &self.g))
    }

    pub fn load(dir: &Path, code: CodeName) -> Result<Self> {
        let text = |p: &PathBuf| fs::read_to_string(p).map_err(|e| Error::MissingInput(format!("{}: {e}", p.display())));
        let read = |p: &PathBuf| PolyModel::from_csv(&text(p)?);
        let [fe, fl, ge, gl, dom] = model_files(dir, code);
        let [fd, gd] = parse_domains(&text(&dom)?)?;
        Ok(CodeModels {
            code,
            f: RateMap { e: read(&fe)?, gamma: read(&fl)?, domain: fd },
            g: RateMap { e: read(&ge)?, gamma: read(&gl)?, domain: gd },
        })
    }

    pub fn trace(&self, cfg: &ThresholdConfig) -> ThresholdCurve {
        trace_threshold(self.code.as_str(), &self.f, &self.g, cfg)
    }
}

/// Plot-ready boundary points of several codes on shared axes.
pub fn region_csv(curves: &[ThresholdCurve]) -> String {
    let mut s = String::from("code,theta,eps,gamma\n");
    for c in curves {
        for (&t, (e, g)) in c.thetas.iter().zip(c.boundary()) {
            let _ = writeln!(s, "{},{t},{e:e},{g:e}", c.code);
        }
    }
    s
}

/// Traces every code and writes one curve file per code plus the region file.
pub fn write_threshold(models: &[CodeModels], cfg: &ThresholdConfig, out: &Path) -> Result<Vec<ThresholdCurve>> {
    let curves: Vec<ThresholdCurve> = models.iter().map(|m| m.trace(cfg)).collect();
    for c in &curves {
        write_file(&out.join(format!("{}_curve.csv", c.code)), &c.to_csv())?;
    }
    write_file(&out.join("region.csv"), &region_csv(&curves))?;
    Ok(curves)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(mode: Mode, grid: Vec<(f64, f64)>) -> RunConfig {
        RunConfig {
            code: CodeName::Steane7,
            mode,
            grid,
            trials: 200,
            seed: 7,
            workers: Some(2),
            bond_leaves: 4,
            attach_leaves: 8,
            budget: 1000,
            output: PathBuf::from("unused.csv"),
            records: None,
        }
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let text = r#"{"code":"steane7","mode":"cluster","grid":[[0,0]],"trials":1,"seed":0,"output":"a.csv","colour":1}"#;
        match RunConfig::from_json(text) {
            Err(Error::Config { reason, .. }) => assert!(reason.contains("colour")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_names_the_bad_field() {
        let ok = r#"{"code":"golay23","mode":"deterministic","grid":[[0.01,0.001]],"trials":5,"seed":1,"output":"a.csv"}"#;
        let cfg = RunConfig::from_json(ok).unwrap();
        assert_eq!(cfg.bond_leaves, 4);
        let bad = ok.replace("0.001", "1.5");
        assert!(matches!(RunConfig::from_json(&bad), Err(Error::Config { field, .. }) if field == "grid"));
        let bad = ok.replace("\"trials\":5", "\"trials\":0");
        assert!(matches!(RunConfig::from_json(&bad), Err(Error::Config { field, .. }) if field == "trials"));
        let bad = ok.replace("[[0.01,0.001]]", "[]");
        assert!(matches!(RunConfig::from_json(&bad), Err(Error::Config { field, .. }) if field == "grid"));
    }

    #[test]
    fn tally_csv_round_trips() {
        let t = TallyTable {
            mode: Mode::Deterministic,
            rows: vec![
                ((0.1, 3e-7), Tally { trials: 10, n_u: 1, n_l: 2, n_n: 3, discarded: 4, stalls: 0 }),
                ((1.0 / 3.0, 0.0), Tally::default()),
            ],
        };
        let text = t.to_csv();
        assert!(text.starts_with("p,q,trials,N_U,N_L,N_N,discarded,stalls\n"));
        assert_eq!(TallyTable::from_csv(&text).unwrap(), t);
        assert!(TallyTable::from_csv("a,b\n").is_err());
        assert!(TallyTable::from_csv("eps,gamma,trials,N_U,N_L,N_N,discarded,stalls\n0,0,5,1,1,1,1,0\n").is_err());
    }

    #[test]
    fn models_round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let m = |c: f64| PolyModel::new(&[((1, 0), c), ((0, 2), -c / 3.0)]);
        let models = CodeModels {
            code: CodeName::Golay23,
            f: RateMap { e: m(1.5), gamma: m(0.1), domain: (1e-4, 2e-3) },
            g: RateMap { e: m(7.0), gamma: m(0.3), domain: (0.03, 4e-3) },
        };
        models.save(dir.path()).unwrap();
        assert_eq!(CodeModels::load(dir.path(), CodeName::Golay23).unwrap(), models);
        assert!(matches!(CodeModels::load(dir.path(), CodeName::Steane7), Err(Error::MissingInput(_))));
    }

    #[test]
    fn noiseless_points_never_crash() {
        for mode in [Mode::Cluster, Mode::Deterministic] {
            let (table, _) = simulate(&config(mode, vec![(0.0, 0.0)])).unwrap();
            assert_eq!(table.rows[0].1.n_n, 200);
        }
    }

    #[test]
    fn records_match_the_tally() {
        let mut cfg = config(Mode::Deterministic, vec![(0.05, 0.01), (0.0, 0.02)]);
        cfg.records = Some(PathBuf::from("unused_records.csv"));
        let (table, records) = simulate(&cfg).unwrap();
        let records = records.unwrap();
        assert_eq!(records.lines().count(), 1 + 2 * 200);
        let unlocated = records.lines().filter(|l| l.ends_with(",unlocated")).count() as u64;
        assert_eq!(unlocated, table.rows.iter().map(|r| r.1.n_u).sum::<u64>());
        cfg.records = None;
        assert_eq!(simulate(&cfg).unwrap().0, table);
    }
}
