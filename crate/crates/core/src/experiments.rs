//! The three experiment topologies and their seeded event loops.
//!
//! * detuning runs: source -> stage 2 (SF2, SA2, SF3) -> stage 3 (SF4, SA3) -> detector,
//!   once per setting pair `(S1, S2)` with absorbing analyzers;
//! * the filtering triple: three levels of splitting analyzers along `b`, `c`, `d`;
//! * the Robertson sweep: single absorbing analyzers along `+-x`, `+-y`, `+-z`.
//!
//! Each run owns its devices and random streams, so runs are independent and
//! are executed in parallel. Messengers within a run are processed strictly
//! one at a time.

use std::f64::consts::{FRAC_PI_2, TAU};

use rayon::prelude::*;

use crate::devices::{
    detune, spin_flip, spin_flip_by, Analyzer, AnalyzerConfig, AnalyzerMode, AnalyzerModel,
    DetectorCounter, Outcome, Sign, SourceConfig,
};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, sign_tag, UniformStream};
use crate::spin::{MagneticMoment, Message, Vec3};

/// Messengers each DLM analyzer processes before counting starts.
pub const DEFAULT_DLM_WARMUP: u64 = 1000;
/// Messengers per setting used for the published figures.
pub const DEFAULT_EVENTS: u64 = 10_000;
/// Learning parameter used for the published DLM figures.
pub const DEFAULT_GAMMA: f64 = 0.999;
/// Default detuning step, `pi/24`.
pub const DEFAULT_PHI_STEP: f64 = std::f64::consts::PI / 24.0;
/// Default `a_z` step of the Robertson sweep.
pub const DEFAULT_AZ_STEP: f64 = 0.05;

const TAG_DETUNING: u64 = 0x4445_5455;
const TAG_TRIPLE: u64 = 0x5452_4950;
const TAG_ROBERTSON: u64 = 0x524f_4245;
const TAG_DIRECTION: u64 = 0x4449_5245;

const DEVICE_SA2: u64 = 2;
const DEVICE_SA3: u64 = 3;

/// Upper bound on warm-up messengers, as a multiple of the warm-up length,
/// for analyzers that are rarely reached.
const WARMUP_CAP: u64 = 100;

fn moment_tags(a: MagneticMoment) -> [u64; 3] {
    let v = a.vec();
    // +0.0 and -0.0 describe the same direction
    [v.x + 0.0, v.y + 0.0, v.z + 0.0].map(f64::to_bits)
}

/// Half-open grid `start, start + step, ... < end`.
pub fn phi_grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && end.is_finite() && step.is_finite()) {
        return Err(Error::InvalidConfig("grid bounds must be finite".into()));
    }
    if step <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "grid step {step} must be positive"
        )));
    }
    let mut grid = Vec::new();
    let mut k = 0u64;
    loop {
        let v = start + step * k as f64;
        if v >= end - 1e-9 * step {
            break;
        }
        grid.push(v);
        k += 1;
    }
    if grid.is_empty() {
        return Err(Error::InvalidConfig(format!("empty grid [{start}, {end})")));
    }
    Ok(grid)
}

/// Default detuning grid `[0, 2pi)` in steps of `pi/24`.
pub fn default_phi_grid() -> Vec<f64> {
    phi_grid(0.0, TAU, DEFAULT_PHI_STEP).expect("default grid is valid")
}

/// `a_z = -1, -1 + step, ..., 1` (the last point is clamped to 1).
pub fn az_grid(step: f64) -> Result<Vec<f64>> {
    if !(step.is_finite() && step > 0.0 && step <= 2.0) {
        return Err(Error::InvalidConfig(format!(
            "a_z step {step} must lie in (0, 2]"
        )));
    }
    let mut grid = Vec::new();
    let mut k = 0u64;
    loop {
        let v = -1.0 + step * k as f64;
        if v > 1.0 + 1e-9 * step {
            break;
        }
        grid.push(v.min(1.0));
        k += 1;
    }
    Ok(grid)
}

/// Configuration of a detuning experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyRunConfig {
    pub detuning_grid: Vec<f64>,
    pub events_per_setting: u64,
    pub model: AnalyzerModel,
    pub master_seed: u64,
    /// Messengers each DLM analyzer processes before counting starts.
    pub dlm_warmup: u64,
    /// Guide-field angle between SF2 and SA2.
    pub theta3: f64,
    /// Guide-field angle between SF4 and SA3.
    pub theta5: f64,
    /// Prepare messengers with an explicit stage 1 (SF1 plus precession)
    /// instead of emitting them in the post-stage-1 state.
    pub explicit_stage1: bool,
}

impl UncertaintyRunConfig {
    pub fn new(
        detuning_grid: Vec<f64>,
        events_per_setting: u64,
        model: AnalyzerModel,
        master_seed: u64,
    ) -> Self {
        Self {
            detuning_grid,
            events_per_setting,
            model,
            master_seed,
            dlm_warmup: DEFAULT_DLM_WARMUP,
            theta3: 0.0,
            theta5: 0.0,
            explicit_stage1: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.detuning_grid.is_empty() {
            return Err(Error::InvalidConfig("detuning grid is empty".into()));
        }
        if let Some(phi) = self.detuning_grid.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "detuning angle {phi} is not finite"
            )));
        }
        if !(self.theta3.is_finite() && self.theta5.is_finite()) {
            return Err(Error::InvalidConfig("stage angles must be finite".into()));
        }
        self.model.validate()
    }

    fn warmup(&self) -> u64 {
        match self.model {
            AnalyzerModel::Dlm { .. } => self.dlm_warmup,
            AnalyzerModel::Probabilistic => 0,
        }
    }
}

/// Outcome tallies of one `(phi, a, S1, S2)` run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PairCount {
    pub emitted: u64,
    pub detected: u64,
    pub destroyed: u64,
}

/// Counts `N(S1, S2 | a)` for the four setting pairs at one detuning angle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CountTable {
    cells: [[PairCount; 2]; 2],
}

fn sidx(s: Sign) -> usize {
    match s {
        Sign::Plus => 0,
        Sign::Minus => 1,
    }
}

impl CountTable {
    pub fn from_detected(f: impl Fn(Sign, Sign) -> u64) -> Self {
        let mut t = Self::default();
        for s1 in Sign::BOTH {
            for s2 in Sign::BOTH {
                let n = f(s1, s2);
                t.set(
                    s1,
                    s2,
                    PairCount {
                        emitted: n,
                        detected: n,
                        destroyed: 0,
                    },
                );
            }
        }
        t
    }

    pub fn set(&mut self, s1: Sign, s2: Sign, cell: PairCount) {
        self.cells[sidx(s1)][sidx(s2)] = cell;
    }

    pub fn cell(&self, s1: Sign, s2: Sign) -> PairCount {
        self.cells[sidx(s1)][sidx(s2)]
    }

    pub fn count(&self, s1: Sign, s2: Sign) -> u64 {
        self.cell(s1, s2).detected
    }

    pub fn detected(&self) -> u64 {
        self.cells.iter().flatten().map(|c| c.detected).sum()
    }

    pub fn emitted(&self) -> u64 {
        self.cells.iter().flatten().map(|c| c.emitted).sum()
    }

    pub fn destroyed(&self) -> u64 {
        self.cells.iter().flatten().map(|c| c.destroyed).sum()
    }
}

fn prepare(cfg: &UncertaintyRunConfig, a: MagneticMoment) -> Message {
    if !cfg.explicit_stage1 {
        return SourceConfig::new(a).emit();
    }
    // SA1 prepares spin-up along z; SF1 tilts it towards +y by the polar
    // angle, and precession in the guide field sets the azimuth.
    let v = a.vec();
    let tilt = v.x.hypot(v.y).atan2(v.z);
    let theta1 = v.x.atan2(v.y);
    let msg = spin_flip_by(&Message::pole(true), tilt);
    detune(&msg, theta1)
}

fn analyzer_z(model: AnalyzerModel, s: Sign, seed: u64) -> Analyzer {
    let cfg = AnalyzerConfig::new(Vec3::Z, s, model, AnalyzerMode::Absorbing)
        .expect("validated model and unit axis");
    Analyzer::new(cfg, UniformStream::new(seed))
}

/// Sends `cfg.events_per_setting` messengers with initial moment `a` through
/// stages 2 and 3 at detuning `phi` with analyzer orientations `(s1, s2)`.
pub fn run_setting_pair(
    cfg: &UncertaintyRunConfig,
    a: MagneticMoment,
    phi: f64,
    s1: Sign,
    s2: Sign,
) -> PairCount {
    let [ax, ay, az] = moment_tags(a);
    let base = [
        TAG_DETUNING,
        ax,
        ay,
        az,
        phi.to_bits(),
        sign_tag(s1.value()),
        sign_tag(s2.value()),
    ];
    let seed = |device: u64| {
        let mut tags = base.to_vec();
        tags.push(device);
        derive_seed(cfg.master_seed, &tags)
    };
    let mut sa2 = analyzer_z(cfg.model, s1, seed(DEVICE_SA2));
    let mut sa3 = analyzer_z(cfg.model, s2, seed(DEVICE_SA3));
    let mut detector = DetectorCounter::new();

    // by construction theta2 + theta4 = 0
    let theta2 = phi + FRAC_PI_2;
    let theta4 = -phi - FRAC_PI_2;

    // (reached SA3, detected)
    let mut lifecycle = |detector: &mut DetectorCounter| -> (bool, bool) {
        let msg = prepare(cfg, a);
        let msg = detune(&msg, theta2);
        let msg = spin_flip(&msg);
        let msg = detune(&msg, cfg.theta3);
        let msg = match sa2.process(&msg) {
            Outcome::Pass(m) => m,
            _ => return (false, false),
        };
        let msg = spin_flip(&msg);
        let msg = detune(&msg, theta4);
        let msg = spin_flip(&msg);
        let msg = detune(&msg, cfg.theta5);
        match sa3.process(&msg) {
            Outcome::Pass(m) => {
                detector.hit(m);
                (true, true)
            }
            _ => (true, false),
        }
    };

    // warm up until SA3 (and hence SA2) has seen `warmup` messengers
    let mut discard = DetectorCounter::new();
    let (mut sent, mut seen3) = (0u64, 0u64);
    while seen3 < cfg.warmup() && sent < cfg.warmup().saturating_mul(WARMUP_CAP) {
        seen3 += lifecycle(&mut discard).0 as u64;
        sent += 1;
    }
    let mut destroyed = 0;
    for _ in 0..cfg.events_per_setting {
        if !lifecycle(&mut detector).1 {
            destroyed += 1;
        }
    }
    PairCount {
        emitted: cfg.events_per_setting,
        detected: detector.count(),
        destroyed,
    }
}

/// All four setting pairs at one detuning angle.
pub fn run_count_table(cfg: &UncertaintyRunConfig, a: MagneticMoment, phi: f64) -> CountTable {
    let mut table = CountTable::default();
    for s1 in Sign::BOTH {
        for s2 in Sign::BOTH {
            table.set(s1, s2, run_setting_pair(cfg, a, phi, s1, s2));
        }
    }
    table
}

/// Count tables with `a = x` and `a = y` at one detuning angle.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyPoint {
    pub phi: f64,
    pub table_x: CountTable,
    pub table_y: CountTable,
}

/// Count tables for every `(phi, a)` with `a` ranging over `moments`.
pub fn run_detuning_scan(
    cfg: &UncertaintyRunConfig,
    moments: &[MagneticMoment],
) -> Result<Vec<Vec<CountTable>>> {
    cfg.validate()?;
    let tasks: Vec<(usize, usize, Sign, Sign)> = (0..cfg.detuning_grid.len())
        .flat_map(|i| {
            (0..moments.len()).flat_map(move |j| {
                Sign::BOTH
                    .into_iter()
                    .flat_map(move |s1| Sign::BOTH.into_iter().map(move |s2| (i, j, s1, s2)))
            })
        })
        .collect();
    let cells: Vec<PairCount> = tasks
        .par_iter()
        .map(|&(i, j, s1, s2)| run_setting_pair(cfg, moments[j], cfg.detuning_grid[i], s1, s2))
        .collect();
    let mut out = vec![vec![CountTable::default(); moments.len()]; cfg.detuning_grid.len()];
    for (&(i, j, s1, s2), cell) in tasks.iter().zip(cells) {
        out[i][j].set(s1, s2, cell);
    }
    Ok(out)
}

/// Runs the detuning experiment with `a = x` and `a = y` at every grid angle.
pub fn run_uncertainty_sweep(cfg: &UncertaintyRunConfig) -> Result<Vec<UncertaintyPoint>> {
    let scan = run_detuning_scan(cfg, &[MagneticMoment::X, MagneticMoment::Y])?;
    Ok(cfg
        .detuning_grid
        .iter()
        .zip(scan)
        .map(|(&phi, tables)| UncertaintyPoint {
            phi,
            table_x: tables[0],
            table_y: tables[1],
        })
        .collect())
}

/// Three levels of splitting analyzers along `b`, `c` and `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilteringTripleConfig {
    pub initial_moment: MagneticMoment,
    pub b: Vec3,
    pub c: Vec3,
    pub d: Vec3,
    pub n_events: u64,
    pub model: AnalyzerModel,
    pub seed: u64,
    pub dlm_warmup: u64,
}

impl FilteringTripleConfig {
    /// The master-distribution arrangement `c = y`, `b = d = x cos(phi) + y sin(phi)`.
    pub fn master(
        initial_moment: MagneticMoment,
        phi: f64,
        n_events: u64,
        model: AnalyzerModel,
        seed: u64,
    ) -> Self {
        let b = Vec3::in_plane(phi);
        Self {
            initial_moment,
            b,
            c: Vec3::Y,
            d: b,
            n_events,
            model,
            seed,
            dlm_warmup: DEFAULT_DLM_WARMUP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("b", self.b), ("c", self.c), ("d", self.d)] {
            if !v.is_unit() {
                return Err(Error::InvalidConfig(format!(
                    "direction {name} = {v} is not a unit vector"
                )));
            }
        }
        if self.n_events == 0 {
            return Err(Error::InvalidConfig("n_events must be at least 1".into()));
        }
        self.model.validate()
    }
}

/// Counts in the eight output beams of the filtering triple.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TripleCountTable {
    counts: [[[u64; 2]; 2]; 2],
    pub emitted: u64,
}

impl TripleCountTable {
    pub fn count(&self, s1: Sign, s2: Sign, s3: Sign) -> u64 {
        self.counts[sidx(s1)][sidx(s2)][sidx(s3)]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().flatten().sum()
    }

    pub fn add(&mut self, s1: Sign, s2: Sign, s3: Sign) {
        self.counts[sidx(s1)][sidx(s2)][sidx(s3)] += 1;
    }

    /// Empirical average of `f(S1, S2, S3)`.
    pub fn mean(&self, f: impl Fn(f64, f64, f64) -> f64) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for s1 in Sign::BOTH {
            for s2 in Sign::BOTH {
                for s3 in Sign::BOTH {
                    acc += f(s1.as_f64(), s2.as_f64(), s3.as_f64()) * self.count(s1, s2, s3) as f64;
                }
            }
        }
        acc / total as f64
    }
}

/// Runs `n_events` messengers through the filtering triple. Every messenger
/// lands in exactly one of the eight beams.
pub fn run_filtering_triple(cfg: &FilteringTripleConfig) -> Result<TripleCountTable> {
    cfg.validate()?;
    let make = |axis: Vec3, device: u64| {
        let acfg = AnalyzerConfig::new(axis, Sign::Plus, cfg.model, AnalyzerMode::Splitting)?;
        Ok::<_, Error>(Analyzer::new(
            acfg,
            UniformStream::from_tags(cfg.seed, &[TAG_TRIPLE, device]),
        ))
    };
    // one magnet along b, two along c, four along d
    let mut first = make(cfg.b, 0)?;
    let mut second = [make(cfg.c, 1)?, make(cfg.c, 2)?];
    let mut third = [
        make(cfg.d, 3)?,
        make(cfg.d, 4)?,
        make(cfg.d, 5)?,
        make(cfg.d, 6)?,
    ];
    let source = SourceConfig::new(cfg.initial_moment);

    let mut lifecycle = || {
        let split = |a: &mut Analyzer, m: &Message| match a.process(m) {
            Outcome::Branch(x, out) => (x, out),
            _ => unreachable!("splitting analyzers always branch"),
        };
        let (s1, m) = split(&mut first, &source.emit());
        let (s2, m) = split(&mut second[sidx(s1)], &m);
        let (s3, _) = split(&mut third[2 * sidx(s1) + sidx(s2)], &m);
        (s1, s2, s3)
    };

    if matches!(cfg.model, AnalyzerModel::Dlm { .. }) {
        // warm up until every analyzer has seen `dlm_warmup` messengers;
        // branches that are (almost) never taken are given up on at the cap
        let mut seen = TripleCountTable::default();
        let mut sent = 0u64;
        let warmed = |t: &TripleCountTable| {
            Sign::BOTH.iter().all(|&s1| {
                Sign::BOTH.iter().all(|&s2| {
                    t.count(s1, s2, Sign::Plus) + t.count(s1, s2, Sign::Minus) >= cfg.dlm_warmup
                })
            })
        };
        while !warmed(&seen) && sent < cfg.dlm_warmup.saturating_mul(WARMUP_CAP) {
            let (s1, s2, s3) = lifecycle();
            seen.add(s1, s2, s3);
            sent += 1;
        }
    }
    let mut table = TripleCountTable {
        emitted: cfg.n_events,
        ..Default::default()
    };
    for _ in 0..cfg.n_events {
        let (s1, s2, s3) = lifecycle();
        table.add(s1, s2, s3);
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobertsonRunConfig {
    pub az_grid: Vec<f64>,
    pub events_per_axis: u64,
    pub model: AnalyzerModel,
    pub master_seed: u64,
    pub dlm_warmup: u64,
}

impl RobertsonRunConfig {
    pub fn new(az_grid: Vec<f64>, events_per_axis: u64, master_seed: u64) -> Self {
        Self {
            az_grid,
            events_per_axis,
            model: AnalyzerModel::Probabilistic,
            master_seed,
            dlm_warmup: DEFAULT_DLM_WARMUP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.az_grid.is_empty() {
            return Err(Error::InvalidConfig("a_z grid is empty".into()));
        }
        if let Some(az) = self.az_grid.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::InvalidConfig(format!("a_z = {az} outside [-1, 1]")));
        }
        self.model.validate()
    }
}

/// Pass counts `N(+-n | a)` for `n = x, y, z` at one `a_z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobertsonPoint {
    pub az: f64,
    /// The randomly oriented initial moment.
    pub moment: MagneticMoment,
    /// `passed[axis][orientation]`, axis order x, y, z.
    pub passed: [[u64; 2]; 3],
    pub events_per_axis: u64,
}

impl RobertsonPoint {
    pub fn passed(&self, axis: usize, s: Sign) -> u64 {
        self.passed[axis][sidx(s)]
    }
}

/// Initial moment for `a_z`: azimuth `2 pi r` with one uniform draw `r`.
pub fn robertson_moment(master_seed: u64, az: f64) -> MagneticMoment {
    let r = UniformStream::from_tags(master_seed, &[TAG_ROBERTSON, TAG_DIRECTION, az.to_bits()])
        .next_open01();
    let rho = (1.0 - az * az).max(0.0).sqrt();
    let (s, c) = (TAU * r).sin_cos();
    MagneticMoment::normalized(Vec3::new(rho * c, rho * s, az)).expect("nonzero")
}

fn run_single_analyzer(
    cfg: &RobertsonRunConfig,
    a: MagneticMoment,
    axis: usize,
    s: Sign,
    seed: u64,
) -> u64 {
    let dir = [Vec3::X, Vec3::Y, Vec3::Z][axis];
    let acfg = AnalyzerConfig::new(dir, s, cfg.model, AnalyzerMode::Absorbing).expect("validated");
    let mut analyzer = Analyzer::new(acfg, UniformStream::new(seed));
    let source = SourceConfig::new(a);
    let mut detector = DetectorCounter::new();
    if matches!(cfg.model, AnalyzerModel::Dlm { .. }) {
        for _ in 0..cfg.dlm_warmup {
            analyzer.process(&source.emit());
        }
    }
    for _ in 0..cfg.events_per_axis {
        if let Outcome::Pass(m) = analyzer.process(&source.emit()) {
            detector.hit(m);
        }
    }
    detector.count()
}

/// For every `a_z`: pick a random azimuth, then count messengers passing
/// analyzers along `+-x`, `+-y`, `+-z`.
pub fn run_robertson_sweep(cfg: &RobertsonRunConfig) -> Result<Vec<RobertsonPoint>> {
    cfg.validate()?;
    Ok(cfg
        .az_grid
        .par_iter()
        .map(|&az| {
            let moment = robertson_moment(cfg.master_seed, az);
            let mut passed = [[0u64; 2]; 3];
            for (axis, row) in passed.iter_mut().enumerate() {
                for s in Sign::BOTH {
                    let seed = derive_seed(
                        cfg.master_seed,
                        &[
                            TAG_ROBERTSON,
                            az.to_bits(),
                            axis as u64,
                            sign_tag(s.value()),
                        ],
                    );
                    row[sidx(s)] = run_single_analyzer(cfg, moment, axis, s, seed);
                }
            }
            RobertsonPoint {
                az,
                moment,
                passed,
                events_per_axis: cfg.events_per_axis,
            }
        })
        .collect())
}
