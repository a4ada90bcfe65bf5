//! Closed-form quantum-theoretical predictions for the simulated experiments.
//!
//! `a` is the Bloch vector of the incoming state `rho = (1 + sigma.a)/2`,
//! `|a| <= 1`. Analyzer directions `b`, `c`, `d` are unit vectors.

use std::f64::consts::SQRT_2;

use crate::devices::Sign;
use crate::error::{Error, Result};
use crate::spin::Vec3;

const NORM_SLACK: f64 = 1e-9;

fn idx(s: Sign) -> usize {
    match s {
        Sign::Plus => 0,
        Sign::Minus => 1,
    }
}

fn check_state(a: Vec3) -> Result<()> {
    let norm = a.norm();
    if norm.is_finite() && norm <= 1.0 + NORM_SLACK {
        Ok(())
    } else {
        Err(Error::UnphysicalState { norm })
    }
}

/// The three averages that fully determine a two-outcome distribution.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Expectations {
    pub s1: f64,
    pub s2: f64,
    pub s1s2: f64,
}

/// Joint distribution of `(S1, S2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoOutcomeDistribution {
    p: [[f64; 2]; 2],
}

impl TwoOutcomeDistribution {
    pub fn from_fn(mut f: impl FnMut(Sign, Sign) -> f64) -> Self {
        let mut p = [[0.0; 2]; 2];
        for s1 in Sign::BOTH {
            for s2 in Sign::BOTH {
                p[idx(s1)][idx(s2)] = f(s1, s2);
            }
        }
        Self { p }
    }

    pub fn get(&self, s1: Sign, s2: Sign) -> f64 {
        self.p[idx(s1)][idx(s2)]
    }

    pub fn total(&self) -> f64 {
        self.p.iter().flatten().sum()
    }

    pub fn expectations(&self) -> Expectations {
        let mut e = Expectations::default();
        for s1 in Sign::BOTH {
            for s2 in Sign::BOTH {
                let p = self.get(s1, s2);
                e.s1 += s1.as_f64() * p;
                e.s2 += s2.as_f64() * p;
                e.s1s2 += (s1 * s2).as_f64() * p;
            }
        }
        e
    }
}

/// Joint distribution of `(S1, S2, S3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripleOutcomeDistribution {
    p: [[[f64; 2]; 2]; 2],
}

impl TripleOutcomeDistribution {
    pub fn get(&self, s1: Sign, s2: Sign, s3: Sign) -> f64 {
        self.p[idx(s1)][idx(s2)][idx(s3)]
    }

    pub fn total(&self) -> f64 {
        self.p.iter().flatten().flatten().sum()
    }

    /// Sum over `S3`.
    pub fn marginal_12(&self) -> TwoOutcomeDistribution {
        TwoOutcomeDistribution::from_fn(|s1, s2| {
            Sign::BOTH.iter().map(|&s3| self.get(s1, s2, s3)).sum()
        })
    }

    /// Average of `f(S1, S2, S3)`.
    pub fn mean(&self, f: impl Fn(f64, f64, f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for s1 in Sign::BOTH {
            for s2 in Sign::BOTH {
                for s3 in Sign::BOTH {
                    acc += f(s1.as_f64(), s2.as_f64(), s3.as_f64()) * self.get(s1, s2, s3);
                }
            }
        }
        acc
    }
}

/// Detection probability of the neutron setup as a function of the detuning
/// angle `phi`.
pub fn prob_detuned(a: Vec3, phi: f64) -> Result<TwoOutcomeDistribution> {
    check_state(a)?;
    let (sin, cos) = phi.sin_cos();
    let proj = a.x * cos + a.y * sin;
    Ok(TwoOutcomeDistribution::from_fn(|s1, s2| {
        let (s1, s2) = (s1.as_f64(), s2.as_f64());
        (1.0 + (s1 + s2 * sin) * proj + s1 * s2 * sin) / 4.0
    }))
}

/// Detection probability for general stage rotation angles; independent of
/// the angles of the remaining guide-field segments.
pub fn prob_general(
    a: Vec3,
    theta1: f64,
    theta2: f64,
    theta4: f64,
) -> Result<TwoOutcomeDistribution> {
    check_state(a)?;
    let (sin12, cos12) = (theta1 + theta2).sin_cos();
    let cos4 = theta4.cos();
    let proj = a.x * sin12 - a.y * cos12;
    Ok(TwoOutcomeDistribution::from_fn(|s1, s2| {
        let (s1, s2) = (s1.as_f64(), s2.as_f64());
        (1.0 + (s1 - s2 * cos4) * proj - s1 * s2 * cos4) / 4.0
    }))
}

/// Two successive filtering analyzers along `b` then `c`.
pub fn prob_filter(a: Vec3, b: Vec3, c: Vec3) -> Result<TwoOutcomeDistribution> {
    check_state(a)?;
    let ab = a.dot(b);
    let bc = b.dot(c);
    Ok(TwoOutcomeDistribution::from_fn(|s1, s2| {
        let (s1, s2) = (s1.as_f64(), s2.as_f64());
        (1.0 + (s1 + bc * s2) * ab + bc * s1 * s2) / 4.0
    }))
}

/// Three successive filtering analyzers along `b`, `c`, `d`.
pub fn prob_triple(a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> Result<TripleOutcomeDistribution> {
    check_state(a)?;
    let ab = a.dot(b);
    let bc = b.dot(c);
    let cd = c.dot(d);
    let mut p = [[[0.0; 2]; 2]; 2];
    for s1 in Sign::BOTH {
        for s2 in Sign::BOTH {
            for s3 in Sign::BOTH {
                let (x1, x2, x3) = (s1.as_f64(), s2.as_f64(), s3.as_f64());
                p[idx(s1)][idx(s2)][idx(s3)] = (1.0
                    + ab * x1
                    + ab * bc * x2
                    + ab * bc * cd * x3
                    + ab * cd * x1 * x2 * x3
                    + bc * x1 * x2
                    + bc * cd * x1 * x3
                    + cd * x2 * x3)
                    / 8.0;
            }
        }
    }
    Ok(TripleOutcomeDistribution { p })
}

/// `<S1> = a_x cos(phi) + a_y sin(phi)`, `<S2> = sin(phi) <S1>`,
/// `<S1 S2> = sin(phi)`.
pub fn expectations(a: Vec3, phi: f64) -> Expectations {
    let (sin, cos) = phi.sin_cos();
    let s1 = a.x * cos + a.y * sin;
    Expectations {
        s1,
        s2: sin * s1,
        s1s2: sin,
    }
}

/// Error of `A = sigma_x`, disturbance of `B = sigma_y` and their standard
/// deviations for the z-polarized state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorDisturbance {
    pub epsilon: f64,
    pub eta: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
}

impl ErrorDisturbance {
    /// `eps eta + eps sigma(B) + sigma(A) eta`.
    pub fn ozawa_lhs(&self) -> f64 {
        self.epsilon * self.eta + self.epsilon * self.sigma_b + self.sigma_a * self.eta
    }

    /// `eps eta`.
    pub fn heisenberg_product(&self) -> f64 {
        self.epsilon * self.eta
    }
}

pub fn theory_epsilon_eta(phi: f64) -> ErrorDisturbance {
    ErrorDisturbance {
        epsilon: 2.0 * (phi / 2.0).sin().abs(),
        eta: SQRT_2 * phi.cos().abs(),
        sigma_a: 1.0,
        sigma_b: 1.0,
    }
}

/// Left-hand side of the error-disturbance relation, valid for every `phi`.
pub fn ozawa_lhs_theory(phi: f64) -> f64 {
    theory_epsilon_eta(phi).ozawa_lhs()
}

/// `2 sqrt2 cos(phi) sin(phi/2) + 2 sin(phi/2) + sqrt2 cos(phi)`.
///
/// Agrees with [`ozawa_lhs_theory`] only where `cos(phi) >= 0` and
/// `sin(phi/2) >= 0`, i.e. on `[0, pi/2]`.
pub fn ozawa_lhs_closed_form(phi: f64) -> f64 {
    let (s, c) = ((phi / 2.0).sin(), phi.cos());
    2.0 * SQRT_2 * c * s + 2.0 * s + SQRT_2 * c
}

/// `(1 - a_x^2)(1 - a_y^2)` and `a_z^2` for the state `a`.
pub fn robertson_theory(a: Vec3) -> (f64, f64) {
    ((1.0 - a.x * a.x) * (1.0 - a.y * a.y), a.z * a.z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI, TAU};

    // -- brute-force 2x2 complex matrix evaluation of Tr rho T^dagger T --

    type C = (f64, f64);
    type M = [[C; 2]; 2];

    fn cadd(a: C, b: C) -> C {
        (a.0 + b.0, a.1 + b.1)
    }
    fn cmul(a: C, b: C) -> C {
        (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
    }
    fn conj(a: C) -> C {
        (a.0, -a.1)
    }
    fn mmul(a: M, b: M) -> M {
        let mut r = [[(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    r[i][j] = cadd(r[i][j], cmul(a[i][k], b[k][j]));
                }
            }
        }
        r
    }
    fn dagger(a: M) -> M {
        [
            [conj(a[0][0]), conj(a[1][0])],
            [conj(a[0][1]), conj(a[1][1])],
        ]
    }
    fn sigma_dot(v: Vec3) -> M {
        [[(v.z, 0.0), (v.x, -v.y)], [(v.x, v.y), (-v.z, 0.0)]]
    }
    fn scale(a: M, s: C) -> M {
        let mut r = a;
        for row in r.iter_mut() {
            for e in row.iter_mut() {
                *e = cmul(*e, s);
            }
        }
        r
    }
    fn madd(a: M, b: M) -> M {
        let mut r = a;
        for i in 0..2 {
            for j in 0..2 {
                r[i][j] = cadd(a[i][j], b[i][j]);
            }
        }
        r
    }
    const ID: M = [[(1.0, 0.0), (0.0, 0.0)], [(0.0, 0.0), (1.0, 0.0)]];

    /// Field region with exposure angle `t` about `e`: `exp(i t sigma.e / 2)`.
    fn u(e: Vec3, t: f64) -> M {
        madd(
            scale(ID, ((t / 2.0).cos(), 0.0)),
            scale(sigma_dot(e), (0.0, (t / 2.0).sin())),
        )
    }
    fn proj(s: Sign, n: Vec3) -> M {
        scale(madd(ID, scale(sigma_dot(n), (s.as_f64(), 0.0))), (0.5, 0.0))
    }
    fn trace_rho(a: Vec3, op: M) -> f64 {
        let rho = scale(madd(ID, sigma_dot(a)), (0.5, 0.0));
        let p = mmul(rho, op);
        cadd(p[0][0], p[1][1]).0
    }

    #[allow(clippy::too_many_arguments)]
    fn brute_force(
        a: Vec3,
        t1: f64,
        t2: f64,
        t3: f64,
        t4: f64,
        t5: f64,
        s1: Sign,
        s2: Sign,
    ) -> f64 {
        let u1 = u(Vec3::Z, t1);
        let t2m = [
            u(Vec3::Z, t4),
            u(Vec3::X, FRAC_PI_2),
            proj(s1, Vec3::Z),
            u(Vec3::Z, t3),
            u(Vec3::X, FRAC_PI_2),
            u(Vec3::Z, t2),
        ]
        .into_iter()
        .reduce(mmul)
        .unwrap();
        let t3m = [proj(s2, Vec3::Z), u(Vec3::Z, t5), u(Vec3::X, FRAC_PI_2)]
            .into_iter()
            .reduce(mmul)
            .unwrap();
        let total = mmul(t3m, mmul(t2m, u1));
        trace_rho(a, mmul(dagger(total), total))
    }

    fn random_ball(rng: &mut ChaCha8Rng) -> Vec3 {
        loop {
            let v = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if v.norm() <= 1.0 {
                return v;
            }
        }
    }

    fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
        loop {
            let v = random_ball(rng);
            let n = v.norm();
            if n > 0.1 {
                return v * (1.0 / n);
            }
        }
    }

    #[test]
    fn general_form_matches_matrix_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let a = random_ball(&mut rng);
            let t: Vec<f64> = (0..5).map(|_| rng.random_range(-PI..PI)).collect();
            let dist = prob_general(a, t[0], t[1], t[3]).unwrap();
            for s1 in Sign::BOTH {
                for s2 in Sign::BOTH {
                    let want = brute_force(a, t[0], t[1], t[2], t[3], t[4], s1, s2);
                    assert_abs_diff_eq!(dist.get(s1, s2), want, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn detuned_examples() {
        let d = prob_detuned(Vec3::X, 0.0).unwrap();
        assert_abs_diff_eq!(d.get(Sign::Plus, Sign::Plus), 0.5);
        assert_abs_diff_eq!(d.get(Sign::Plus, Sign::Minus), 0.5);
        assert_abs_diff_eq!(d.get(Sign::Minus, Sign::Plus), 0.0);
        assert_abs_diff_eq!(d.get(Sign::Minus, Sign::Minus), 0.0);
        for phi in [0.0, 0.7, 2.0, 4.5] {
            let d = prob_detuned(Vec3::Z, phi).unwrap();
            for s1 in Sign::BOTH {
                for s2 in Sign::BOTH {
                    assert_abs_diff_eq!(
                        d.get(s1, s2),
                        (1.0 + (s1 * s2).as_f64() * phi.sin()) / 4.0,
                        epsilon = 1e-15
                    );
                }
            }
        }
    }

    #[test]
    fn rejects_unphysical_state() {
        assert!(matches!(
            prob_detuned(Vec3::new(1.0, 1.0, 0.0), 0.0),
            Err(Error::UnphysicalState { .. })
        ));
        assert!(prob_filter(Vec3::new(0.0, 0.0, 1.1), Vec3::X, Vec3::Y).is_err());
        assert!(prob_triple(Vec3::new(2.0, 0.0, 0.0), Vec3::X, Vec3::Y, Vec3::Z).is_err());
        assert!(prob_detuned(Vec3::new(0.0, 0.0, 1.0 + 1e-10), 0.0).is_ok());
    }

    #[test]
    fn detuned_is_special_case_of_general_and_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let a = random_ball(&mut rng);
            let phi = rng.random_range(0.0..TAU);
            let d = prob_detuned(a, phi).unwrap();
            let g = prob_general(a, 0.0, phi + FRAC_PI_2, -phi - FRAC_PI_2).unwrap();
            let f = prob_filter(a, Vec3::in_plane(phi), Vec3::Y).unwrap();
            for s1 in Sign::BOTH {
                for s2 in Sign::BOTH {
                    assert_abs_diff_eq!(d.get(s1, s2), g.get(s1, s2), epsilon = 1e-12);
                    assert_abs_diff_eq!(d.get(s1, s2), f.get(s1, s2), epsilon = 1e-12);
                }
            }
            assert_abs_diff_eq!(d.total(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn filter_examples() {
        let a = Vec3::in_plane(0.4);
        let d = prob_filter(a, a, a).unwrap();
        assert_abs_diff_eq!(d.get(Sign::Plus, Sign::Plus), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.total(), 1.0, epsilon = 1e-15);

        let d = prob_filter(Vec3::X, Vec3::X, Vec3::Z).unwrap();
        for s1 in Sign::BOTH {
            for s2 in Sign::BOTH {
                assert_abs_diff_eq!(d.get(s1, s2), (1.0 + s1.as_f64()) / 4.0);
            }
        }
    }

    #[test]
    fn distributions_are_normalized_and_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let a = random_ball(&mut rng);
            let (b, c, d) = (
                random_unit(&mut rng),
                random_unit(&mut rng),
                random_unit(&mut rng),
            );
            let phi = rng.random_range(-10.0..10.0);
            let two = prob_detuned(a, phi).unwrap();
            let filt = prob_filter(a, b, c).unwrap();
            let tri = prob_triple(a, b, c, d).unwrap();
            assert_abs_diff_eq!(two.total(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(filt.total(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(tri.total(), 1.0, epsilon = 1e-12);
            for s1 in Sign::BOTH {
                for s2 in Sign::BOTH {
                    assert!(two.get(s1, s2) >= -1e-15);
                    assert!(filt.get(s1, s2) >= -1e-15);
                    for s3 in Sign::BOTH {
                        assert!(tri.get(s1, s2, s3) >= -1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn triple_marginal_is_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let a = random_ball(&mut rng);
            let (b, c, d) = (
                random_unit(&mut rng),
                random_unit(&mut rng),
                random_unit(&mut rng),
            );
            let m = prob_triple(a, b, c, d).unwrap().marginal_12();
            let f = prob_filter(a, b, c).unwrap();
            for s1 in Sign::BOTH {
                for s2 in Sign::BOTH {
                    assert_abs_diff_eq!(m.get(s1, s2), f.get(s1, s2), epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn triple_aligned_puts_all_mass_in_one_cell() {
        let t = prob_triple(Vec3::Z, Vec3::Z, Vec3::Z, Vec3::Z).unwrap();
        assert_abs_diff_eq!(t.get(Sign::Plus, Sign::Plus, Sign::Plus), 1.0);
    }

    #[test]
    fn master_distribution_reproduces_both_experiments() {
        for phi in [0.1, FRAC_PI_4, FRAC_PI_3, 2.0, 4.0] {
            let b = Vec3::in_plane(phi);
            let t = prob_triple(Vec3::X, b, Vec3::Y, b).unwrap();
            let ex = prob_filter(Vec3::X, b, Vec3::Y).unwrap().expectations();
            let ey = prob_filter(Vec3::Y, b, Vec3::Y).unwrap().expectations();
            assert_abs_diff_eq!(t.mean(|s1, _, _| s1), ex.s1, epsilon = 1e-12);
            assert_abs_diff_eq!(t.mean(|_, s2, _| s2), ex.s2, epsilon = 1e-12);
            assert_abs_diff_eq!(t.mean(|s1, s2, _| s1 * s2), ex.s1s2, epsilon = 1e-12);
            assert_abs_diff_eq!(t.mean(|_, s2, s3| s2 * s3), ey.s1, epsilon = 1e-12);
            assert_abs_diff_eq!(t.mean(|s1, _, s3| s1 * s3), ey.s2, epsilon = 1e-12);
            assert_abs_diff_eq!(t.mean(|s1, s2, _| s1 * s2), ey.s1s2, epsilon = 1e-12);
        }
    }

    #[test]
    fn expectations_examples() {
        for phi in [0.0, 0.3, 1.9, 5.0] {
            let e = expectations(Vec3::X, phi);
            assert_abs_diff_eq!(e.s1, phi.cos());
            assert_abs_diff_eq!(e.s2, phi.sin() * phi.cos());
            assert_abs_diff_eq!(e.s1s2, phi.sin());
            let e = expectations(Vec3::Y, phi);
            assert_abs_diff_eq!(e.s1, phi.sin());
            assert_abs_diff_eq!(e.s2, phi.sin().powi(2));
            assert_abs_diff_eq!(e.s1s2, phi.sin());
        }
        assert_eq!(expectations(Vec3::Y, 0.0), Expectations::default());
    }

    #[test]
    fn expectations_match_distribution_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let a = random_ball(&mut rng);
            let phi = rng.random_range(0.0..TAU);
            let from_p = prob_detuned(a, phi).unwrap().expectations();
            let closed = expectations(a, phi);
            assert_abs_diff_eq!(from_p.s1, closed.s1, epsilon = 1e-14);
            assert_abs_diff_eq!(from_p.s2, closed.s2, epsilon = 1e-14);
            assert_abs_diff_eq!(from_p.s1s2, closed.s1s2, epsilon = 1e-14);
        }
    }

    #[test]
    fn epsilon_eta_examples() {
        let e = theory_epsilon_eta(0.0);
        assert_eq!(
            (e.epsilon, e.eta, e.sigma_a, e.sigma_b),
            (0.0, SQRT_2, 1.0, 1.0)
        );
        let e = theory_epsilon_eta(PI);
        assert_abs_diff_eq!(e.epsilon, 2.0);
        assert_abs_diff_eq!(e.eta, SQRT_2);
        let e = theory_epsilon_eta(FRAC_PI_2);
        assert_abs_diff_eq!(e.epsilon, SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(e.eta, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn epsilon_eta_from_incompatible_experiments() {
        for k in 0..100 {
            let phi = TAU * k as f64 / 100.0;
            let sx = prob_detuned(Vec3::X, phi).unwrap().expectations().s1;
            let sy = prob_detuned(Vec3::Y, phi).unwrap().expectations().s2;
            let th = theory_epsilon_eta(phi);
            assert_abs_diff_eq!(2.0 - 2.0 * sx, th.epsilon.powi(2), epsilon = 1e-12);
            assert_abs_diff_eq!(2.0 - 2.0 * sy, th.eta.powi(2), epsilon = 1e-12);
        }
    }

    #[test]
    fn ozawa_lhs_values() {
        assert_abs_diff_eq!(ozawa_lhs_theory(0.0), SQRT_2);
        assert_abs_diff_eq!(ozawa_lhs_theory(FRAC_PI_2), SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(ozawa_lhs_theory(PI), 3.0 * SQRT_2 + 2.0, epsilon = 1e-14);
        for k in 0..=480 {
            let phi = TAU * k as f64 / 480.0;
            assert!(ozawa_lhs_theory(phi) >= 1.0, "phi = {phi}");
            if phi <= FRAC_PI_2 {
                assert_abs_diff_eq!(
                    ozawa_lhs_theory(phi),
                    ozawa_lhs_closed_form(phi),
                    epsilon = 1e-14
                );
            }
        }
    }

    #[test]
    fn naive_product_drops_below_one() {
        let below: Vec<f64> = (0..480)
            .map(|k| TAU * k as f64 / 480.0)
            .filter(|&phi| theory_epsilon_eta(phi).heisenberg_product() < 1.0)
            .collect();
        assert!(below.iter().any(|&phi| (phi - FRAC_PI_2).abs() < 0.05));
        assert!(theory_epsilon_eta(FRAC_PI_2).heisenberg_product() < 1e-15);
    }

    #[test]
    fn robertson_bound_holds_in_ball() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10_000 {
            let (lhs, rhs) = robertson_theory(random_ball(&mut rng));
            assert!(lhs >= rhs - 1e-15);
        }
    }
}
