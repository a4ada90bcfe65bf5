//! Event-processing rules of the devices in the beam line: source, spin
//! flipper, detuning field, spin analyzer and detector.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::rng::UniformStream;
use crate::spin::{rotate, MagneticMoment, Message, RotationSpec, Vec3};

/// Orientation label `S = +1 | -1` of an analyzer, or an outcome `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn from_bool(plus: bool) -> Self {
        if plus {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn value(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.value())
    }
}

impl std::ops::Mul for Sign {
    type Output = Sign;
    fn mul(self, rhs: Sign) -> Sign {
        Sign::from_bool(self == rhs)
    }
}

/// Source emitting messengers with a fixed moment direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceConfig {
    pub initial_moment: MagneticMoment,
}

impl SourceConfig {
    pub fn new(initial_moment: MagneticMoment) -> Self {
        Self { initial_moment }
    }

    /// Creates a fresh messenger. For moments in the x-y plane this gives
    /// `theta = pi/2`, `psi2 = 0` and `psi1` the azimuth.
    pub fn emit(&self) -> Message {
        Message::from_moment(self.initial_moment)
    }
}

/// Passage through a field region along `axis` with exposure angle `exposure`.
pub fn field_region(msg: &Message, axis: Vec3, exposure: f64) -> Message {
    let spec =
        RotationSpec::field_exposure(axis, exposure).expect("field axis must be a unit vector");
    rotate(msg, &spec)
}

/// Spin flipper: a quarter turn in a field along `x`.
pub fn spin_flip(msg: &Message) -> Message {
    rotate(msg, &RotationSpec::about_x(-FRAC_PI_2))
}

/// Spin flipper with an arbitrary exposure angle about `x`.
pub fn spin_flip_by(msg: &Message, exposure: f64) -> Message {
    rotate(msg, &RotationSpec::about_x(-exposure))
}

/// Precession in the guide field along `z` by the exposure angle `phi`.
pub fn detune(msg: &Message, phi: f64) -> Message {
    rotate(msg, &RotationSpec::about_z(-phi))
}

/// Rule deciding the outcome `x` of a spin analyzer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyzerModel {
    /// `x = +1` iff `(1 + m.n S)/2 > r` with a fresh uniform `r` per event.
    Probabilistic,
    /// Deterministic learning machine with learning parameter `gamma`.
    Dlm { gamma: f64 },
}

impl AnalyzerModel {
    pub fn name(&self) -> &'static str {
        match self {
            AnalyzerModel::Probabilistic => "probabilistic",
            AnalyzerModel::Dlm { .. } => "dlm",
        }
    }

    /// Learning parameter, or `None` for the probabilistic rule.
    pub fn gamma(&self) -> Option<f64> {
        match self {
            AnalyzerModel::Probabilistic => None,
            AnalyzerModel::Dlm { gamma } => Some(*gamma),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AnalyzerModel::Dlm { gamma } if !(0.0..1.0).contains(&gamma) => Err(
                Error::InvalidConfig(format!("DLM gamma {gamma} outside [0, 1)")),
            ),
            _ => Ok(()),
        }
    }
}

/// Absorbing analyzers pass `x = +1` and destroy `x = -1`; splitting
/// analyzers route every messenger into one of two output beams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyzerMode {
    Absorbing,
    Splitting,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyzerConfig {
    pub axis: Vec3,
    pub orientation: Sign,
    pub model: AnalyzerModel,
    pub mode: AnalyzerMode,
}

impl AnalyzerConfig {
    pub fn new(
        axis: Vec3,
        orientation: Sign,
        model: AnalyzerModel,
        mode: AnalyzerMode,
    ) -> Result<Self> {
        if !axis.is_unit() {
            return Err(Error::InvalidConfig(format!(
                "analyzer axis {axis} does not have unit norm"
            )));
        }
        model.validate()?;
        Ok(Self {
            axis,
            orientation,
            model,
            mode,
        })
    }
}

/// Mutable per-run state of an analyzer.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)] // the stream is used on every event; keep it inline
pub enum AnalyzerState {
    Probabilistic(UniformStream),
    Dlm { u: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Pass(Message),
    Absorb,
    Branch(Sign, Message),
}

#[derive(Debug, Clone)]
pub struct Analyzer {
    config: AnalyzerConfig,
    state: AnalyzerState,
}

impl Analyzer {
    /// Builds an analyzer. `stream` is consumed only by the probabilistic
    /// rule; a DLM starts from `u = 0`.
    pub fn new(config: AnalyzerConfig, stream: UniformStream) -> Self {
        let state = match config.model {
            AnalyzerModel::Probabilistic => AnalyzerState::Probabilistic(stream),
            AnalyzerModel::Dlm { .. } => AnalyzerState::Dlm { u: 0.0 },
        };
        Self { config, state }
    }

    pub fn with_dlm_state(config: AnalyzerConfig, u: f64) -> Result<Self> {
        if !matches!(config.model, AnalyzerModel::Dlm { .. }) {
            return Err(Error::InvalidConfig(
                "internal state only applies to DLM analyzers".into(),
            ));
        }
        if !(-1.0..=1.0).contains(&u) {
            return Err(Error::InvalidConfig(format!(
                "DLM state {u} outside [-1, 1]"
            )));
        }
        Ok(Self {
            config,
            state: AnalyzerState::Dlm { u },
        })
    }

    pub fn config(&self) -> &AnalyzerConfig {
        &self.config
    }

    pub fn state(&self) -> &AnalyzerState {
        &self.state
    }

    /// DLM internal variable, if any.
    pub fn internal_u(&self) -> Option<f64> {
        match self.state {
            AnalyzerState::Dlm { u } => Some(u),
            AnalyzerState::Probabilistic(_) => None,
        }
    }

    /// Outcome `x` for a moment whose projection on the analyzer axis is
    /// `projection`. Updates the internal state.
    pub fn decide(&mut self, projection: f64) -> Sign {
        let signed = projection * self.config.orientation.as_f64();
        match (&mut self.state, self.config.model) {
            (AnalyzerState::Probabilistic(stream), _) => {
                let r = stream.next_open01();
                Sign::from_bool((1.0 + signed) / 2.0 - r > 0.0)
            }
            (AnalyzerState::Dlm { u }, AnalyzerModel::Dlm { gamma }) => {
                let x = Sign::from_bool(signed - gamma * *u > 0.0);
                *u = gamma * *u + (1.0 - gamma) * x.as_f64();
                debug_assert!(u.abs() <= 1.0, "DLM state left [-1, 1]: {u}");
                x
            }
            (AnalyzerState::Dlm { .. }, AnalyzerModel::Probabilistic) => {
                unreachable!("state and model are built together")
            }
        }
    }

    /// Processes one messenger.
    pub fn process(&mut self, msg: &Message) -> Outcome {
        let m = crate::spin::moment_of(msg).vec();
        let x = self.decide(m.dot(self.config.axis));
        let s = self.config.orientation;
        match self.config.mode {
            AnalyzerMode::Absorbing => match x {
                Sign::Plus => Outcome::Pass(self.eigenstate(s)),
                Sign::Minus => Outcome::Absorb,
            },
            AnalyzerMode::Splitting => Outcome::Branch(x, self.eigenstate(x * s)),
        }
    }

    fn eigenstate(&self, along: Sign) -> Message {
        let axis = self.config.axis;
        if axis == Vec3::Z {
            return Message::pole(along == Sign::Plus);
        }
        Message::from_moment(MagneticMoment::new(axis * along.as_f64()).expect("unit axis"))
    }
}

/// Counting detector with unit efficiency.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DetectorCounter {
    count: u64,
}

impl DetectorCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_count(count: u64) -> Self {
        Self { count }
    }

    /// Registers a messenger; the messenger is consumed.
    pub fn hit(&mut self, _msg: Message) {
        self.count += 1;
    }

    pub fn count(&self) -> u64 {
        self.count
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::moment_of;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{PI, TAU};

    fn assert_vec(a: Vec3, b: Vec3, tol: f64) {
        assert!((a - b).norm() < tol, "{a} != {b}");
    }

    fn prob(axis: Vec3, s: Sign, mode: AnalyzerMode, seed: u64) -> Analyzer {
        let cfg = AnalyzerConfig::new(axis, s, AnalyzerModel::Probabilistic, mode).unwrap();
        Analyzer::new(cfg, UniformStream::new(seed))
    }

    #[test]
    fn source_examples() {
        let m = SourceConfig::new(MagneticMoment::X).emit();
        assert_eq!((m.psi1(), m.psi2(), m.theta()), (0.0, 0.0, PI / 2.0));
        let m = SourceConfig::new(MagneticMoment::Z).emit();
        assert_eq!((m.psi1(), m.psi2(), m.theta()), (0.0, 0.0, 0.0));
        let m = SourceConfig::new(MagneticMoment::Y).emit();
        assert_eq!((m.psi1(), m.psi2(), m.theta()), (PI / 2.0, 0.0, PI / 2.0));
        assert_vec(moment_of(&m).vec(), Vec3::Y, 1e-15);
    }

    #[test]
    fn spin_flip_takes_z_to_y() {
        let out = spin_flip(&Message::pole(true));
        assert_vec(moment_of(&out).vec(), Vec3::Y, 1e-15);
    }

    #[test]
    fn four_flips_are_identity() {
        let start = Message::new(0.4, 1.2, 0.9).unwrap();
        let mut m = start;
        for _ in 0..4 {
            m = spin_flip(&m);
        }
        assert_vec(moment_of(&m).vec(), moment_of(&start).vec(), 1e-10);
    }

    #[test]
    fn flip_keeps_x() {
        let out = spin_flip(&SourceConfig::new(MagneticMoment::X).emit());
        assert_vec(moment_of(&out).vec(), Vec3::X, 1e-15);
    }

    #[test]
    fn detune_examples() {
        let m = Message::new(0.3, 0.1, 1.2).unwrap();
        assert_eq!(detune(&m, 0.0), m);
        let back = detune(&m, TAU);
        assert_vec(moment_of(&back).vec(), moment_of(&m).vec(), 1e-10);

        let x = SourceConfig::new(MagneticMoment::X).emit();
        let out = moment_of(&detune(&x, PI / 2.0)).vec();
        assert_vec(out, Vec3::new(0.0, -1.0, 0.0), 1e-15);
    }

    #[test]
    fn config_validation() {
        let bad_axis = AnalyzerConfig::new(
            Vec3::new(1.0, 1.0, 0.0),
            Sign::Plus,
            AnalyzerModel::Probabilistic,
            AnalyzerMode::Absorbing,
        );
        assert!(bad_axis.is_err());
        for gamma in [-0.1, 1.0, 1.5, f64::NAN] {
            let cfg = AnalyzerConfig::new(
                Vec3::Z,
                Sign::Plus,
                AnalyzerModel::Dlm { gamma },
                AnalyzerMode::Absorbing,
            );
            assert!(cfg.is_err(), "gamma {gamma}");
        }
    }

    #[test]
    fn aligned_spin_always_passes() {
        let mut a = prob(Vec3::Z, Sign::Plus, AnalyzerMode::Absorbing, 1);
        for _ in 0..10_000 {
            match a.process(&Message::pole(true)) {
                Outcome::Pass(m) => assert_eq!(moment_of(&m).vec(), Vec3::Z),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn anti_aligned_spin_never_passes() {
        let mut a = prob(Vec3::Z, Sign::Minus, AnalyzerMode::Absorbing, 2);
        for _ in 0..10_000 {
            assert_eq!(a.process(&Message::pole(true)), Outcome::Absorb);
        }
    }

    #[test]
    fn pass_resets_to_oriented_eigenstate() {
        let mut a = prob(Vec3::Z, Sign::Minus, AnalyzerMode::Absorbing, 3);
        let msg = Message::pole(false);
        match a.process(&msg) {
            Outcome::Pass(m) => {
                assert_eq!(m.theta(), PI);
                assert_eq!((m.psi1(), m.psi2()), (0.0, 0.0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn splitting_routes_every_messenger() {
        let axis = Vec3::in_plane(0.3);
        let mut a = prob(axis, Sign::Plus, AnalyzerMode::Splitting, 4);
        let msg = SourceConfig::new(MagneticMoment::Y).emit();
        for _ in 0..1000 {
            match a.process(&msg) {
                Outcome::Branch(x, m) => assert_vec(moment_of(&m).vec(), axis * x.as_f64(), 1e-12),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn probabilistic_pass_rate_half_for_transverse_moment() {
        let mut a = prob(Vec3::Z, Sign::Plus, AnalyzerMode::Absorbing, 5);
        let msg = SourceConfig::new(MagneticMoment::X).emit();
        let n = 1_000_000;
        let passed = (0..n)
            .filter(|_| matches!(a.process(&msg), Outcome::Pass(_)))
            .count();
        let rate = passed as f64 / n as f64;
        assert_abs_diff_eq!(rate, 0.5, epsilon = 0.002);
    }

    #[test]
    fn dlm_state_stays_bounded_and_tracks_input() {
        let cfg = AnalyzerConfig::new(
            Vec3::Z,
            Sign::Plus,
            AnalyzerModel::Dlm { gamma: 0.999 },
            AnalyzerMode::Absorbing,
        )
        .unwrap();
        let mut a = Analyzer::new(cfg, UniformStream::new(0));
        for _ in 0..10_000 {
            a.decide(0.3);
            assert!(a.internal_u().unwrap().abs() <= 1.0);
        }
        let n = 100_000;
        let sum: i64 = (0..n).map(|_| i64::from(a.decide(0.3).value())).sum();
        assert_abs_diff_eq!(sum as f64 / n as f64, 0.3, epsilon = 0.02);
    }

    #[test]
    fn dlm_is_deterministic() {
        let cfg = AnalyzerConfig::new(
            Vec3::Z,
            Sign::Minus,
            AnalyzerModel::Dlm { gamma: 0.9 },
            AnalyzerMode::Splitting,
        )
        .unwrap();
        let mut a = Analyzer::with_dlm_state(cfg, 0.25).unwrap();
        let mut b = Analyzer::with_dlm_state(cfg, 0.25).unwrap();
        for k in 0..1000 {
            let p = (k as f64 * 0.37).sin();
            assert_eq!(a.decide(p), b.decide(p));
        }
        assert!(Analyzer::with_dlm_state(cfg, 1.5).is_err());
    }

    #[test]
    fn detector_counts() {
        let mut d = DetectorCounter::new();
        d.hit(Message::pole(true));
        assert_eq!(d.count(), 1);
        let mut d = DetectorCounter::with_count(41);
        d.hit(Message::pole(true));
        assert_eq!(d.count(), 42);
        let mut d = DetectorCounter::new();
        for _ in 0..500 {
            d.hit(Message::pole(false));
        }
        assert_eq!(d.count(), 500);
    }

    #[test]
    fn sign_product() {
        assert_eq!(Sign::Plus * Sign::Minus, Sign::Minus);
        assert_eq!(Sign::Minus * Sign::Minus, Sign::Plus);
    }
}
