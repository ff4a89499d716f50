//! Conditional semicircle process.
//!
//! Four conditions move a noisy von Mises cloud along semicircles of radius
//! `r_nom` centred at `(∓1, 0)`:
//!
//! | c | centre | mean angle |
//! |---|--------|------------|
//! | 1 | (−1, 0) | `tπ` |
//! | 2 | (−1, 0) | `−tπ` |
//! | 3 | (+1, 0) | `(1−t)π` |
//! | 4 | (+1, 0) | `(t−1)π` |
//!
//! The radius is `LogNormal(ln r_nom, σ_rad²)` and the angle is
//! `VonMises(μ(c, t), κ_ang)`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::condition::Condition;
use super::observation::{ObservationSet, Record, TimeMap};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemicircleConfig {
    pub r_nom: f64,
    pub sigma_rad: f64,
    pub kappa_ang: f64,
    /// Samples per (condition, time).
    pub n: usize,
    pub times: Vec<f64>,
    pub seed: u64,
}

impl Default for SemicircleConfig {
    fn default() -> Self {
        Self {
            r_nom: 1.0,
            sigma_rad: 0.05,
            kappa_ang: 5.0,
            n: 100,
            times: vec![0.0, 0.5, 1.0],
            seed: 0,
        }
    }
}

pub const CONDITIONS: [i64; 4] = [1, 2, 3, 4];

/// Horizontal centre of the semicircle followed under condition `c`.
pub fn x_offset(c: i64) -> f64 {
    match c {
        1 | 2 => -1.0,
        3 | 4 => 1.0,
        _ => panic!("semicircle condition must be in 1..=4, got {c}"),
    }
}

/// Mean angle `μ_ang(c, t)`.
pub fn mean_angle(c: i64, t: f64) -> f64 {
    match c {
        1 => t * PI,
        2 => -t * PI,
        3 => (1.0 - t) * PI,
        4 => (t - 1.0) * PI,
        _ => panic!("semicircle condition must be in 1..=4, got {c}"),
    }
}

/// Best–Fisher rejection sampler for `VonMises(mu, kappa)`, result in `(−π, π]`.
///
/// `kappa = ∞` returns `mu` (wrapped); `kappa = 0` is uniform.
pub fn sample_von_mises<R: Rng + ?Sized>(mu: f64, kappa: f64, rng: &mut R) -> f64 {
    if kappa.is_infinite() {
        return wrap_angle(mu);
    }
    if kappa < 1e-8 {
        return wrap_angle(rng.random_range(-PI..PI));
    }
    let a = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let b = (a - (2.0 * a).sqrt()) / (2.0 * kappa);
    let r = (1.0 + b * b) / (2.0 * b);
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let u3: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let theta = f.clamp(-1.0, 1.0).acos();
            let signed = if u3 > 0.5 { theta } else { -theta };
            return wrap_angle(mu + signed);
        }
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Draws one point of the process. `sigma_rad = 0` and `kappa_ang = ∞`
/// suppress the respective noise.
pub fn gen_semicircle<R: Rng + ?Sized>(cfg: &SemicircleConfig, c: i64, t: f64, rng: &mut R) -> [f64; 2] {
    assert!(CONDITIONS.contains(&c), "semicircle condition must be in 1..=4, got {c}");
    assert!((0.0..=1.0).contains(&t), "semicircle time must be in [0, 1], got {t}");
    let log_r = if cfg.sigma_rad > 0.0 {
        Normal::new(cfg.r_nom.ln(), cfg.sigma_rad).unwrap().sample(rng)
    } else {
        cfg.r_nom.ln()
    };
    let radius = log_r.exp();
    let phi = sample_von_mises(mean_angle(c, t), cfg.kappa_ang, rng);
    [x_offset(c) + radius * phi.cos(), radius * phi.sin()]
}

/// Draws `n` samples for every condition at time `t`.
pub fn sample_truth(cfg: &SemicircleConfig, c: i64, t: f64, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| gen_semicircle(cfg, c, t, &mut rng).to_vec()).collect()
}

/// `n` samples per (condition, time), ordered by time, then condition.
pub fn gen_dataset(cfg: &SemicircleConfig) -> Result<ObservationSet> {
    if cfg.n == 0 {
        return Err(Error::Config("samples per condition must be positive".into()));
    }
    if cfg.times.is_empty() {
        return Err(Error::Config("at least one time is required".into()));
    }
    if !(cfg.r_nom > 0.0 && cfg.sigma_rad > 0.0 && cfg.kappa_ang > 0.0) {
        return Err(Error::Config("r_nom, sigma_rad and kappa_ang must be positive".into()));
    }
    if cfg.times.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::Config("semicircle times must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut records = Vec::with_capacity(cfg.n * 4 * cfg.times.len());
    for &t in &cfg.times {
        for c in CONDITIONS {
            for _ in 0..cfg.n {
                records.push(Record {
                    y: gen_semicircle(cfg, c, t, &mut rng).to_vec(),
                    x: Condition::Discrete(c),
                    t,
                    key: None,
                });
            }
        }
    }
    ObservationSet::new(records, TimeMap::IDENTITY, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noiseless() -> SemicircleConfig {
        SemicircleConfig {
            sigma_rad: 0.0,
            kappa_ang: f64::INFINITY,
            ..SemicircleConfig::default()
        }
    }

    #[test]
    fn noiseless_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = gen_semicircle(&noiseless(), 1, 0.0, &mut rng);
        assert!(p[0].abs() < 1e-15 && p[1].abs() < 1e-15);
        let p = gen_semicircle(&noiseless(), 1, 1.0, &mut rng);
        assert!((p[0] + 2.0).abs() < 1e-15 && p[1].abs() < 1e-15);
        for c in CONDITIONS {
            let p = gen_semicircle(&noiseless(), c, 0.5, &mut rng);
            let expected_y = if c == 1 || c == 3 { 1.0 } else { -1.0 };
            assert!((p[0] - x_offset(c)).abs() < 1e-12 && (p[1] - expected_y).abs() < 1e-12, "{c}: {p:?}");
        }
    }

    #[test]
    fn log_radius_moments() {
        let cfg = SemicircleConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| {
                let p = gen_semicircle(&cfg, 3, 0.3, &mut rng);
                ((p[0] - 1.0).hypot(p[1])).ln()
            })
            .sum::<f64>()
            / n as f64;
        let band = 3.0 * cfg.sigma_rad / (n as f64).sqrt();
        assert!(mean.abs() < band, "{mean} outside ±{band}");
    }

    #[test]
    fn von_mises_circular_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for mu in [0.0, 1.2, -2.5, PI] {
            let (mut s, mut c) = (0.0, 0.0);
            for _ in 0..100_000 {
                let a = sample_von_mises(mu, 5.0, &mut rng);
                s += a.sin();
                c += a.cos();
            }
            let circ_mean = s.atan2(c);
            assert!(wrap_angle(circ_mean - mu).abs() < 0.02, "mu={mu}: {circ_mean}");
        }
    }

    #[test]
    fn von_mises_concentration_matches_bessel_ratio() {
        // E[cos(Φ − μ)] = I1(κ)/I0(κ); for κ = 5 this is 0.893303...
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 200_000;
        let r: f64 = (0..n).map(|_| sample_von_mises(0.0, 5.0, &mut rng).cos()).sum::<f64>() / n as f64;
        assert!((r - 0.893_303).abs() < 3e-3, "{r}");
    }

    #[test]
    fn dataset_shape_and_determinism() {
        let cfg = SemicircleConfig {
            seed: 7,
            ..SemicircleConfig::default()
        };
        let a = gen_dataset(&cfg).unwrap();
        assert_eq!(a.len(), 1200);
        assert_eq!(a.anchor_times(), &[0.0, 0.5, 1.0]);
        assert_eq!(a, gen_dataset(&cfg).unwrap());
        assert!(gen_dataset(&SemicircleConfig { n: 0, ..cfg }).is_err());
    }

    #[test]
    fn radial_concentration_and_side() {
        let set = gen_dataset(&SemicircleConfig::default()).unwrap();
        for c in [1, 2] {
            let pts = set.samples(1, &Condition::Discrete(c));
            let mean_x: f64 = pts.iter().map(|p| p[0]).sum::<f64>() / pts.len() as f64;
            assert!(mean_x < 0.0);
        }
        for c in CONDITIONS {
            for k in 0..3 {
                let pts = set.samples(k, &Condition::Discrete(c));
                let dev: f64 = pts.iter().map(|p| ((p[0] - x_offset(c)).hypot(p[1]) - 1.0).abs()).sum::<f64>() / pts.len() as f64;
                assert!(dev <= 3.0 * 0.05, "{dev}");
            }
        }
    }
}
