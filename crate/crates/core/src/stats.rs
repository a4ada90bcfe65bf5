//! Estimators computed from detection counts, with standard errors.
//!
//! Standard errors use the delta method. Averages of `+-1` variables over
//! `n` detected messengers are treated as multinomial means with variance
//! `(1 - mean^2) / n`.

use log::debug;

use crate::devices::Sign;
use crate::error::{Error, Result};
use crate::experiments::{CountTable, RobertsonPoint};
use crate::oracle::{Expectations, TwoOutcomeDistribution};

/// Relative frequencies `F(S1, S2 | a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyTable {
    pub f: TwoOutcomeDistribution,
    pub total_detected: u64,
}

impl FrequencyTable {
    /// A table that assigns exactly the probabilities of `dist` to
    /// `total_detected` messengers.
    pub fn from_distribution(dist: TwoOutcomeDistribution, total_detected: u64) -> Self {
        Self {
            f: dist,
            total_detected,
        }
    }
}

pub fn frequencies(table: &CountTable) -> Result<FrequencyTable> {
    let total = table.detected();
    if total == 0 {
        return Err(Error::EmptyTable);
    }
    let f = TwoOutcomeDistribution::from_fn(|s1, s2| table.count(s1, s2) as f64 / total as f64);
    Ok(FrequencyTable {
        f,
        total_detected: total,
    })
}

pub fn moments_of(freq: &FrequencyTable) -> Expectations {
    freq.f.expectations()
}

/// Standard error of the mean of a `+-1` variable with mean `mean` over `n`
/// samples.
pub fn sign_mean_stderr(mean: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    ((1.0 - mean * mean).max(0.0) / n as f64).sqrt()
}

/// Expectations with their standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectationEstimate {
    pub value: Expectations,
    pub stderr: Expectations,
    pub detected: u64,
}

pub fn estimate_expectations(table: &CountTable) -> Result<ExpectationEstimate> {
    let freq = frequencies(table)?;
    let value = moments_of(&freq);
    let n = freq.total_detected;
    Ok(ExpectationEstimate {
        value,
        stderr: Expectations {
            s1: sign_mean_stderr(value.s1, n),
            s2: sign_mean_stderr(value.s2, n),
            s1s2: sign_mean_stderr(value.s1s2, n),
        },
        detected: n,
    })
}

/// Error and disturbance estimated from the `a = x` and `a = y` experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonEtaEstimate {
    pub epsilon: f64,
    pub eta: f64,
    pub stderr_epsilon: f64,
    pub stderr_eta: f64,
}

/// `sqrt(max(0, 2 - 2 s))` and its standard error for a `+-1` average `s`
/// over `n` samples.
///
/// With `Var(s) = (1 - s^2)/n` the delta method gives
/// `(1 - s^2) / (n (2 - 2 s)) = (1 + s) / (2 n)`, which stays finite at `s = 1`.
fn root_estimator(s: f64, n: u64, label: &str) -> (f64, f64) {
    let radicand = 2.0 - 2.0 * s;
    if radicand < 0.0 {
        debug!("{label}: negative radicand {radicand} clamped to 0");
    }
    let value = radicand.max(0.0).sqrt();
    let stderr = ((1.0 + s).max(0.0) / (2.0 * n as f64)).sqrt();
    (value, stderr)
}

pub fn epsilon_eta_from_frequencies(
    freq_x: &FrequencyTable,
    freq_y: &FrequencyTable,
) -> EpsilonEtaEstimate {
    let sx = moments_of(freq_x).s1;
    let sy = moments_of(freq_y).s2;
    let (epsilon, stderr_epsilon) = root_estimator(sx, freq_x.total_detected, "epsilon");
    let (eta, stderr_eta) = root_estimator(sy, freq_y.total_detected, "eta");
    EpsilonEtaEstimate {
        epsilon,
        eta,
        stderr_epsilon,
        stderr_eta,
    }
}

/// `eps^2 = 2 - 2 <S1>_x`, `eta^2 = 2 - 2 <S2>_y`.
pub fn epsilon_eta_from_counts(
    table_x: &CountTable,
    table_y: &CountTable,
) -> Result<EpsilonEtaEstimate> {
    Ok(epsilon_eta_from_frequencies(
        &frequencies(table_x)?,
        &frequencies(table_y)?,
    ))
}

/// Evaluation of the error-disturbance relations at one detuning angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyRecord {
    pub epsilon: f64,
    pub eta: f64,
    pub ozawa_lhs: f64,
    pub heisenberg_product: f64,
    /// `|<[A, B]>| / 2`, equal to 1 for the z-polarized state.
    pub bound: f64,
    pub stderr_epsilon: f64,
    pub stderr_eta: f64,
    pub stderr_ozawa_lhs: f64,
    pub stderr_product: f64,
}

impl UncertaintyRecord {
    pub fn ozawa_holds(&self, sigmas: f64) -> bool {
        self.ozawa_lhs >= self.bound - sigmas * self.stderr_ozawa_lhs
    }

    /// True when the naive product lies below the bound by more than
    /// `sigmas` standard errors.
    pub fn heisenberg_violated(&self, sigmas: f64) -> bool {
        self.bound - self.heisenberg_product > sigmas * self.stderr_product
    }
}

/// `eps eta + eps sigma_b + sigma_a eta` against the bound 1, with errors
/// propagated from independent `eps` and `eta`.
pub fn ozawa_check(est: &EpsilonEtaEstimate, sigma_a: f64, sigma_b: f64) -> UncertaintyRecord {
    let (e, h) = (est.epsilon, est.eta);
    let (se, sh) = (est.stderr_epsilon, est.stderr_eta);
    UncertaintyRecord {
        epsilon: e,
        eta: h,
        ozawa_lhs: e * h + e * sigma_b + sigma_a * h,
        heisenberg_product: e * h,
        bound: 1.0,
        stderr_epsilon: se,
        stderr_eta: sh,
        stderr_ozawa_lhs: ((h + sigma_b) * se).hypot((e + sigma_a) * sh),
        stderr_product: (h * se).hypot(e * sh),
    }
}

/// Estimates `<sigma_n>` from the pass counts of analyzers along `+n` and
/// `-n`, with the delta-method error of the ratio of two independent
/// binomial counts out of `n_events` each.
pub fn signed_ratio(plus: u64, minus: u64, n_events: u64) -> Result<(f64, f64)> {
    let total = plus + minus;
    if total == 0 || n_events == 0 {
        return Err(Error::EmptyTable);
    }
    let (p, m, t) = (plus as f64, minus as f64, total as f64);
    let value = (p - m) / t;
    let n = n_events as f64;
    let var_p = p * (1.0 - p / n);
    let var_m = m * (1.0 - m / n);
    // d/dp = 2m/t^2, d/dm = -2p/t^2
    let var = 4.0 * (m * m * var_p + p * p * var_m) / t.powi(4);
    Ok((value, var.max(0.0).sqrt()))
}

/// `(1 - <sx>^2)(1 - <sy>^2)` against `<sz>^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobertsonRecord {
    pub az: f64,
    pub sigma: [f64; 3],
    pub stderr_sigma: [f64; 3],
    pub lhs: f64,
    pub rhs: f64,
    pub stderr_lhs: f64,
    pub stderr_rhs: f64,
}

impl RobertsonRecord {
    pub fn holds(&self, sigmas: f64) -> bool {
        self.lhs >= self.rhs - sigmas * self.stderr_lhs
    }
}

/// Standard error of `v^2` when `v` has standard error `s`, including the
/// second-order term that dominates near `v = 0`.
fn square_stderr(v: f64, s: f64) -> f64 {
    (4.0 * v * v * s * s + 2.0 * s.powi(4)).sqrt()
}

/// Robertson relation from estimated `<sigma_x>`, `<sigma_y>`, `<sigma_z>`
/// and their standard errors.
pub fn robertson_check(az: f64, sigma: [f64; 3], stderr_sigma: [f64; 3]) -> RobertsonRecord {
    let [sx, sy, sz] = sigma;
    let [ex, ey, ez] = stderr_sigma;
    let fx = 1.0 - sx * sx;
    let fy = 1.0 - sy * sy;
    RobertsonRecord {
        az,
        sigma,
        stderr_sigma,
        lhs: fx * fy,
        rhs: sz * sz,
        stderr_lhs: (fy * square_stderr(sx, ex)).hypot(fx * square_stderr(sy, ey)),
        stderr_rhs: square_stderr(sz, ez),
    }
}

/// Same as [`robertson_check`] with binomial errors for `n` messengers per
/// analyzer, when only the estimates are at hand.
pub fn robertson_check_n(az: f64, sigma: [f64; 3], n: u64) -> RobertsonRecord {
    // each estimate combines two runs of n messengers: Var = (1 - s^4) / (2n)
    let err = sigma.map(|s| ((1.0 - s.powi(4)).max(0.0) / (2.0 * n as f64)).sqrt());
    robertson_check(az, sigma, err)
}

pub fn robertson_from_point(point: &RobertsonPoint) -> Result<RobertsonRecord> {
    let mut sigma = [0.0; 3];
    let mut err = [0.0; 3];
    for axis in 0..3 {
        let (v, e) = signed_ratio(
            point.passed(axis, Sign::Plus),
            point.passed(axis, Sign::Minus),
            point.events_per_axis,
        )?;
        sigma[axis] = v;
        err[axis] = e;
    }
    Ok(robertson_check(point.az, sigma, err))
}
