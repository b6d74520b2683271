//! Synthetic-data generators: ground-truth oracles for dating and estimation.
//!
//! Streams are reproducible across platforms: every generator runs ChaCha8
//! seeded per group as `splitmix64(seed ^ group_index)`, so parallel
//! generation cannot change results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dating::{CensoringRules, Phase, PointKind, TurningPoint};
use crate::error::{Error, Result};
use crate::panel::{QuarterIndex, QuarterlySeries};
use crate::survival::{SurvivalData, SurvivalSpell};

/// RNG algorithm recorded in output metadata.
pub const RNG_ALGORITHM: &str = "chacha8";

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-group stream: the seed is hashed before the group
/// index is mixed in, so streams never collide across nearby seeds
/// (plain `seed ^ group` would make seed 1/group 3 and seed 3/group 1
/// identical).
pub fn group_rng(seed: u64, group_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(splitmix64(seed) ^ group_index))
}

/// Michael-Schucany-Haas transformation sampler for the inverse-Gaussian
/// distribution with mean `mu` and shape `lambda` (exact, no rejection).
pub fn sample_inverse_gaussian(rng: &mut impl Rng, mu: f64, lambda: f64) -> f64 {
    let nu: f64 = StandardNormal.sample(rng);
    let y = nu * nu;
    let x = mu + mu * mu * y / (2.0 * lambda)
        - mu / (2.0 * lambda) * (4.0 * mu * lambda * y + mu * mu * y * y).sqrt();
    let u: f64 = rng.gen();
    if u <= mu / (mu + x) {
        x
    } else {
        mu * mu / x
    }
}

/// Frailty draw with mean 1 and variance theta; theta = 0 degenerates to 1.
pub fn sample_frailty(rng: &mut impl Rng, theta: f64) -> f64 {
    if theta == 0.0 {
        1.0
    } else {
        sample_inverse_gaussian(rng, 1.0, 1.0 / theta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SpellCount {
    Fixed(usize),
    Range(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CovariateLaw {
    /// `k` independent standard-normal covariates.
    StandardNormal(usize),
    /// Bernoulli dummies with the given success rates.
    Bernoulli(Vec<f64>),
}

impl CovariateLaw {
    fn width(&self) -> usize {
        match self {
            CovariateLaw::StandardNormal(k) => *k,
            CovariateLaw::Bernoulli(rates) => rates.len(),
        }
    }

    fn draw(&self, rng: &mut impl Rng) -> Vec<f64> {
        match self {
            CovariateLaw::StandardNormal(k) => {
                (0..*k).map(|_| StandardNormal.sample(rng)).collect()
            }
            CovariateLaw::Bernoulli(rates) => rates
                .iter()
                .map(|&r| if rng.gen::<f64>() < r { 1.0 } else { 0.0 })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub groups: usize,
    pub spells_per_group: SpellCount,
    /// True AFT coefficients, intercept first.
    pub beta_aft: Vec<f64>,
    pub p: f64,
    pub theta: f64,
    pub covariates: CovariateLaw,
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if self.groups == 0 {
            return Err(Error::InvalidSimConfig("need at least one group".into()));
        }
        if !self.p.is_finite() || self.p <= 0.0 {
            return Err(Error::InvalidSimConfig(format!(
                "p must be > 0, got {}",
                self.p
            )));
        }
        if self.theta < 0.0 {
            return Err(Error::InvalidSimConfig(format!(
                "theta must be >= 0, got {}",
                self.theta
            )));
        }
        if self.beta_aft.len() != self.covariates.width() + 1 {
            return Err(Error::InvalidSimConfig(format!(
                "beta_aft has {} entries, expected intercept + {} covariates",
                self.beta_aft.len(),
                self.covariates.width()
            )));
        }
        if let SpellCount::Range(lo, hi) = self.spells_per_group {
            if lo == 0 || hi < lo {
                return Err(Error::InvalidSimConfig("bad spell count range".into()));
            }
        }
        if matches!(self.spells_per_group, SpellCount::Fixed(0)) {
            return Err(Error::InvalidSimConfig("need at least one spell".into()));
        }
        Ok(())
    }
}

/// Draw durations from the frailty model by survivor inversion:
/// `t = [-ln U / (alpha * exp(x' beta_tilde))]^(1/p)` with
/// `beta_tilde = -p * beta_aft`. Deterministic given the seed.
pub fn simulate_frailty_durations(cfg: &SimConfig) -> Result<SurvivalData> {
    cfg.validate()?;
    let k = cfg.covariates.width();
    let names: Vec<String> = (1..=k).map(|i| format!("x{i}")).collect();
    let mut spells = Vec::new();
    for g in 0..cfg.groups {
        let mut rng = group_rng(cfg.seed, g as u64);
        let alpha = sample_frailty(&mut rng, cfg.theta);
        let n_spells = match cfg.spells_per_group {
            SpellCount::Fixed(n) => n,
            SpellCount::Range(lo, hi) => rng.gen_range(lo..=hi),
        };
        for _ in 0..n_spells {
            let x = cfg.covariates.draw(&mut rng);
            let mut xb = cfg.beta_aft[0];
            for (v, b) in x.iter().zip(&cfg.beta_aft[1..]) {
                xb += v * b;
            }
            let xb_tilde = -cfg.p * xb;
            let mut u: f64 = rng.gen();
            while u == 0.0 {
                u = rng.gen();
            }
            let t = (-u.ln() / (alpha * xb_tilde.exp())).powf(1.0 / cfg.p);
            spells.push(SurvivalSpell {
                group: format!("g{g:04}"),
                duration: t,
                covariates: x,
            });
        }
    }
    SurvivalData::new(names, spells)
}

/// Marginal survivor function of the simulated durations at covariate row
/// zero: S(t) = L(t^p * exp(-p * beta0)).
pub fn marginal_survivor(t: f64, beta0: f64, p: f64, theta: f64) -> f64 {
    let h = t.powf(p) * (-p * beta0).exp();
    crate::survival::ig_log_laplace(theta, h).exp()
}

/// Piecewise-linear series through alternating knots, plus Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurningSchedule {
    pub knots: Vec<(QuarterIndex, f64)>,
    pub noise_sd: f64,
}

impl TurningSchedule {
    /// Spacing must respect the target rules so the knots are the true,
    /// datable turning points.
    pub fn validate(&self, rules: &CensoringRules) -> Result<()> {
        if self.knots.len() < 2 {
            return Err(Error::InvalidSchedule("need at least two knots".into()));
        }
        if self.noise_sd < 0.0 {
            return Err(Error::InvalidSchedule("noise sd must be >= 0".into()));
        }
        for w in self.knots.windows(2) {
            let span = w[1].0.quarters_since(w[0].0);
            if span < rules.min_phase {
                return Err(Error::InvalidSchedule(format!(
                    "knot spacing {span} at {} is below min_phase {}",
                    w[0].0, rules.min_phase
                )));
            }
            if w[1].1 == w[0].1 {
                return Err(Error::InvalidSchedule(format!(
                    "equal knot values at {} and {}",
                    w[0].0, w[1].0
                )));
            }
        }
        for w in self.knots.windows(3) {
            let d1 = w[1].1 - w[0].1;
            let d2 = w[2].1 - w[1].1;
            if d1 * d2 >= 0.0 {
                return Err(Error::InvalidSchedule(format!(
                    "knot values do not alternate around {}",
                    w[1].0
                )));
            }
            let span = w[2].0.quarters_since(w[0].0);
            if span < rules.min_cycle {
                return Err(Error::InvalidSchedule(format!(
                    "cycle span {span} at {} is below min_cycle {}",
                    w[0].0, rules.min_cycle
                )));
            }
        }
        Ok(())
    }

    /// The turning points and phases the knots imply.
    pub fn true_points(&self) -> Vec<TurningPoint> {
        self.knots
            .iter()
            .enumerate()
            .map(|(i, &(time, value))| {
                let rising_into = if i > 0 {
                    value > self.knots[i - 1].1
                } else {
                    self.knots[1].1 < value
                };
                TurningPoint {
                    kind: if rising_into {
                        PointKind::Peak
                    } else {
                        PointKind::Trough
                    },
                    time,
                    value,
                }
            })
            .collect()
    }

    pub fn true_phases(&self) -> Vec<Phase> {
        crate::dating::extract_phases(&self.true_points())
    }
}

/// Generate the series implied by a schedule. The series is padded by
/// `rules.window` quarters on each side, mirroring the boundary segments so
/// the first and last knots are datable interior extrema; the padding
/// segments are discarded by phase extraction as incomplete.
pub fn simulate_turning_series(
    schedule: &TurningSchedule,
    rules: &CensoringRules,
    seed: u64,
) -> Result<(QuarterlySeries, Vec<Phase>)> {
    schedule.validate(rules)?;
    let pad = rules.window as i64;
    let first = schedule.knots[0].0;
    let last = schedule.knots[schedule.knots.len() - 1].0;
    let start = first.offset(-pad);
    let len = last.quarters_since(first) + 2 * pad + 1;

    let interpolate = |q: QuarterIndex| -> f64 {
        // Mirror-reflect queries outside the knot range.
        let mut o = q.quarters_since(first);
        let total = last.quarters_since(first);
        if o < 0 {
            o = -o;
        }
        if o > total {
            o = 2 * total - o;
        }
        let target = first.offset(o);
        let seg = schedule
            .knots
            .windows(2)
            .find(|w| w[0].0 <= target && target <= w[1].0)
            .expect("target inside knot range");
        let span = seg[1].0.quarters_since(seg[0].0) as f64;
        let frac = target.quarters_since(seg[0].0) as f64 / span;
        seg[0].1 + frac * (seg[1].1 - seg[0].1)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
    let values: Vec<f64> = (0..len)
        .map(|i| {
            let noise: f64 = if schedule.noise_sd > 0.0 {
                let z: f64 = StandardNormal.sample(&mut rng);
                schedule.noise_sd * z
            } else {
                0.0
            };
            interpolate(start.offset(i)) + noise
        })
        .collect();

    let series = QuarterlySeries::new("sim", "sim", start, values);
    Ok((series, schedule.true_phases()))
}
