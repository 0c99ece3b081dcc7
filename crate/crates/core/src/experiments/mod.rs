//! Batch runs that turn the library into CSV data series.
//!
//! A run reads one [`ExperimentConfig`], evaluates every parameter point on the
//! rayon pool, merges results in parameter order and writes
//! `<out>/<experiment>*.csv` plus `<out>/manifest.json`. Points that exceed the
//! amplitude cap become `capped` rows instead of aborting the run.

mod runs;

use crate::error::{Error, Result};
use crate::fit;
use crate::gates::{appe_gate, du_gate};
use crate::geometry::{self, Cut, InitialKind, PathKind};
use crate::influence::{Circuit, GateField};
use crate::rng::{substream, Role};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    SchmidtHist,
    PurityPlateau,
    RenyiInfBound,
    PkProfile,
    RhokEntropy,
    VnSlope,
    VerticalGrowth,
    RbarDecay,
    TemporalVsSpatial,
    Membrane,
    Correlate,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 11] = [
        ExperimentId::SchmidtHist,
        ExperimentId::PurityPlateau,
        ExperimentId::RenyiInfBound,
        ExperimentId::PkProfile,
        ExperimentId::RhokEntropy,
        ExperimentId::VnSlope,
        ExperimentId::VerticalGrowth,
        ExperimentId::RbarDecay,
        ExperimentId::TemporalVsSpatial,
        ExperimentId::Membrane,
        ExperimentId::Correlate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::SchmidtHist => "schmidt-hist",
            ExperimentId::PurityPlateau => "purity-plateau",
            ExperimentId::RenyiInfBound => "renyi-inf-bound",
            ExperimentId::PkProfile => "pk-profile",
            ExperimentId::RhokEntropy => "rhok-entropy",
            ExperimentId::VnSlope => "vn-slope",
            ExperimentId::VerticalGrowth => "vertical-growth",
            ExperimentId::RbarDecay => "rbar-decay",
            ExperimentId::TemporalVsSpatial => "temporal-vs-spatial",
            ExperimentId::Membrane => "membrane",
            ExperimentId::Correlate => "correlate",
        }
    }
}

impl std::fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Units {
    Nats,
    Logd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateFamily {
    /// `U(p)` with the fixed one-site dressings.
    Appe,
    /// Bare `U(p)`.
    Du,
    /// `U(p)` with fresh Haar dressings on every gate.
    DressedDu,
    /// Independent Haar gates.
    Haar,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateSpec {
    pub family: GateFamily,
    pub p: Vec<f64>,
    pub seed: u64,
}

impl Default for GateSpec {
    fn default() -> Self {
        Self { family: GateFamily::Appe, p: vec![0.6], seed: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PathSpec {
    Lightcone,
    Vertical,
    Slope { v: f64 },
}

impl PathSpec {
    pub fn kind(self) -> PathKind {
        match self {
            PathSpec::Lightcone => PathKind::Lightcone,
            PathSpec::Vertical => PathKind::Vertical,
            PathSpec::Slope { v } => PathKind::ConstantSlope(v),
        }
    }

    pub fn slope(self) -> f64 {
        match self {
            PathSpec::Lightcone => 1.0,
            PathSpec::Vertical => 0.0,
            PathSpec::Slope { v } => v,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CutPolicy {
    Half,
    Max,
    Ratio { r: f64 },
}

impl CutPolicy {
    /// Fraction of the path in `A`; `Max` reports one half.
    pub fn ratio(self) -> f64 {
        match self {
            CutPolicy::Ratio { r } => r,
            _ => 0.5,
        }
    }

    /// The fixed cut for `n` sites, `None` for `Max`.
    pub fn fixed(self, n: usize) -> Option<Result<Cut>> {
        match self {
            CutPolicy::Max => None,
            _ => {
                let k = ((self.ratio() * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1));
                Some(Cut::new(k, n))
            }
        }
    }
}

/// Everything a run needs. Unknown keys are rejected; missing keys take the defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Optional; when present it must agree with the id given on the command line.
    pub experiment: Option<ExperimentId>,
    pub d: usize,
    pub t_min: usize,
    pub t_max: usize,
    pub gates: GateSpec,
    pub initial: InitialKind,
    pub path: PathSpec,
    pub cut: CutPolicy,
    pub samples: usize,
    pub out: PathBuf,
    pub units: Units,
    /// Memory budget per state in bytes; one amplitude is 16 bytes.
    pub max_mem: u64,
    /// Local dimensions for `rbar-decay` and `membrane`.
    pub d_values: Vec<usize>,
    /// Fit window for `rbar-decay`.
    pub fit_lo: usize,
    pub fit_hi: usize,
    /// Points per axis for `membrane`.
    pub grid: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            d: 2,
            t_min: 1,
            t_max: 4,
            gates: GateSpec::default(),
            initial: InitialKind::Product { i0: 0, j0: 0 },
            path: PathSpec::Lightcone,
            cut: CutPolicy::Half,
            samples: 1,
            out: PathBuf::from("out"),
            units: Units::Nats,
            max_mem: 1 << 32,
            d_values: vec![2, 3, 4, 5],
            fit_lo: 100,
            fit_hi: 600,
            grid: 50,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Amplitude cap derived from `max_mem`.
    pub fn cap(&self) -> u128 {
        (self.max_mem / 16) as u128
    }

    pub fn validate(&self, id: ExperimentId) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if let Some(e) = self.experiment {
            if e != id {
                return bad(format!("config is for {e}, asked to run {id}"));
            }
        }
        if self.d < 2 {
            return bad(format!("d = {} must be at least 2", self.d));
        }
        if self.t_min == 0 || self.t_min > self.t_max {
            return bad(format!("need 1 <= t_min <= t_max, got {}..{}", self.t_min, self.t_max));
        }
        if self.samples == 0 {
            return bad("samples must be positive".into());
        }
        if matches!(self.gates.family, GateFamily::Appe | GateFamily::Du | GateFamily::DressedDu) {
            if self.d != 2 {
                return bad(format!("gate family {:?} is qubit-only", self.gates.family));
            }
            if self.gates.p.is_empty() {
                return bad("gate family needs at least one p".into());
            }
        }
        if let CutPolicy::Ratio { r } = self.cut {
            if !(r > 0.0 && r < 1.0) {
                return bad(format!("cut ratio {r} outside (0, 1)"));
            }
        }
        if let PathSpec::Slope { v } = self.path {
            if !(-1.0..=1.0).contains(&v) {
                return bad(format!("path slope {v} outside [-1, 1]"));
            }
        }
        if self.d_values.iter().any(|&d| d < 2) || self.d_values.is_empty() {
            return bad("d_values must be nonempty and at least 2".into());
        }
        if self.grid < 2 {
            return bad("grid needs at least 2 points".into());
        }
        Ok(())
    }

    /// Entropy in the configured unit.
    pub fn unit(&self, nats: f64) -> f64 {
        self.unit_d(nats, self.d)
    }

    pub fn unit_d(&self, nats: f64, d: usize) -> f64 {
        match self.units {
            Units::Nats => nats,
            Units::Logd => nats / (d as f64).ln(),
        }
    }
}

/// One circuit of a run: a gate parameter, a sample index and the circuit itself.
#[derive(Clone, Debug)]
pub struct Instance {
    pub p: Option<f64>,
    pub sample: usize,
    pub circuit: Circuit,
}

/// The circuits a config describes, in `(p, sample)` order.
pub fn instances(cfg: &ExperimentConfig) -> Result<Vec<Instance>> {
    let seed = cfg.gates.seed;
    let ps: Vec<Option<f64>> = match cfg.gates.family {
        GateFamily::Haar => vec![None],
        _ => cfg.gates.p.iter().map(|&p| Some(p)).collect(),
    };
    let mut out = Vec::new();
    for p in ps {
        for sample in 0..cfg.samples {
            let sub = substream(seed, sample as i64, 0, Role::Gate).next_u64();
            let gates = match (cfg.gates.family, p) {
                (GateFamily::Appe, Some(p)) => GateField::uniform(appe_gate(p)?)?,
                (GateFamily::Du, Some(p)) => GateField::uniform(du_gate(p, cfg.d)?)?,
                (GateFamily::DressedDu, Some(p)) => GateField::dressed_du(du_gate(p, cfg.d)?, sub)?,
                _ => GateField::haar(cfg.d, sub),
            };
            let mut rng = substream(seed, sample as i64, 0, Role::InitialState);
            let m = geometry::initial_state(cfg.initial, cfg.d, &mut rng)?;
            out.push(Instance { p, sample, circuit: Circuit::new(gates, m)? });
        }
    }
    Ok(out)
}

/// A CSV field.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    /// No value: a missing parameter or a capped output.
    Empty,
}

impl Cell {
    fn render(&self, out: &mut String) {
        match self {
            Cell::Int(i) => write!(out, "{i}").unwrap(),
            Cell::Float(x) => write!(out, "{x:.16e}").unwrap(),
            Cell::Text(s) => out.push_str(s),
            Cell::Empty => {}
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Float)
    }
}

/// One output file. Every row is prefixed with `experiment,seed` and ends with `status`.
#[derive(Clone, Debug)]
pub struct Table {
    pub suffix: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<(Vec<Cell>, bool)>,
}

impl Table {
    pub fn new(suffix: &'static str, columns: &[&'static str]) -> Self {
        Self { suffix, columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push((row, false));
    }

    /// A capped point: its parameters, then empty outputs.
    pub fn push_gap(&mut self, mut params: Vec<Cell>) {
        params.resize(self.columns.len(), Cell::Empty);
        self.rows.push((params, true));
    }

    pub fn gaps(&self) -> usize {
        self.rows.iter().filter(|r| r.1).count()
    }

    pub fn to_csv(&self, experiment: ExperimentId, seed: u64) -> String {
        let mut s = String::from("experiment,seed");
        for c in &self.columns {
            s.push(',');
            s.push_str(c);
        }
        s.push_str(",status\n");
        for (row, gap) in &self.rows {
            write!(s, "{experiment},{seed}").unwrap();
            for c in row {
                s.push(',');
                c.render(&mut s);
            }
            s.push_str(if *gap { ",capped\n" } else { ",ok\n" });
        }
        s
    }
}

/// What a point evaluation produced.
pub(crate) enum Outcome<T> {
    Done(T),
    Capped,
}

pub(crate) fn capped<T>(r: Result<T>) -> Result<Outcome<T>> {
    match r {
        Ok(v) => Ok(Outcome::Done(v)),
        Err(Error::Size { .. }) => Ok(Outcome::Capped),
        Err(e) => Err(e),
    }
}

/// Evaluates `f` on every point in parallel; results keep the order of `points`.
pub(crate) fn par_points<P: Sync, T: Send>(points: &[P], f: impl Fn(&P) -> Result<T> + Sync) -> Result<Vec<Outcome<T>>> {
    use rayon::prelude::*;
    let out: Vec<Result<Outcome<T>>> = points.par_iter().map(|p| capped(f(p))).collect();
    out.into_iter().collect()
}

/// Least-squares fit of the increments `(S_i - S_{i-1}) / (t_i - t_{i-1}) = A + B / t_i`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SlopeFit {
    pub a: f64,
    pub b: f64,
}

pub fn extrapolate_slope(series: &[(f64, f64)]) -> Result<SlopeFit> {
    if series.len() < 3 {
        return Err(Error::Domain(format!("slope extrapolation needs at least 3 points, got {}", series.len())));
    }
    let mut xs = Vec::with_capacity(series.len() - 1);
    let mut ys = Vec::with_capacity(series.len() - 1);
    for w in series.windows(2) {
        let (t0, s0) = w[0];
        let (t1, s1) = w[1];
        if t1 <= t0 {
            return Err(Error::Domain("series times must increase".into()));
        }
        xs.push(1.0 / t1);
        ys.push((s1 - s0) / (t1 - t0));
    }
    let f = fit::line(&xs, &ys)?;
    Ok(SlopeFit { a: f.intercept, b: f.slope })
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: ExperimentId,
    crate_name: &'static str,
    version: &'static str,
    seed: u64,
    config: &'a ExperimentConfig,
    files: Vec<String>,
    rows: usize,
    capped: usize,
}

/// Files written by a run and how many points were capped.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub capped: usize,
}

/// Computes the tables of an experiment without touching the disk.
pub fn compute(id: ExperimentId, cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    cfg.validate(id)?;
    match id {
        ExperimentId::SchmidtHist => runs::schmidt_hist(cfg),
        ExperimentId::PurityPlateau => runs::purity_plateau(cfg),
        ExperimentId::RenyiInfBound => runs::renyi_inf_bound(cfg),
        ExperimentId::PkProfile => runs::pk_profile(cfg),
        ExperimentId::RhokEntropy => runs::rhok_entropy(cfg),
        ExperimentId::VnSlope => runs::vn_slope(cfg),
        ExperimentId::VerticalGrowth => runs::vertical_growth(cfg),
        ExperimentId::RbarDecay => runs::rbar_decay(cfg),
        ExperimentId::TemporalVsSpatial => runs::temporal_vs_spatial(cfg),
        ExperimentId::Membrane => runs::membrane(cfg),
        ExperimentId::Correlate => runs::correlate(cfg),
    }
}

/// Runs an experiment and writes its CSVs and manifest under `cfg.out`.
pub fn run(id: ExperimentId, cfg: &ExperimentConfig) -> Result<RunReport> {
    let tables = compute(id, cfg)?;
    std::fs::create_dir_all(&cfg.out)?;
    let seed = cfg.gates.seed;
    let mut files = Vec::new();
    let mut names = Vec::new();
    for t in &tables {
        let name = format!("{id}{}.csv", t.suffix);
        let path = cfg.out.join(&name);
        std::fs::write(&path, t.to_csv(id, seed))?;
        files.push(path);
        names.push(name);
    }
    let capped = tables.iter().map(Table::gaps).sum();
    let mut resolved = cfg.clone();
    resolved.experiment = Some(id);
    let manifest = Manifest {
        experiment: id,
        crate_name: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        seed,
        config: &resolved,
        files: names,
        rows: tables.iter().map(|t| t.rows.len()).sum(),
        capped,
    };
    let path = cfg.out.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    files.push(path);
    Ok(RunReport { files, capped })
}
