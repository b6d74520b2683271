//! Independent oracles for the integration suites. Each re-implements its
//! target from scratch (different data layout and control flow) so agreement
//! with the library is a meaningful check, with the same frozen tie rules.

#![allow(dead_code)]

use debtcycle::dating::{CensoringRules, PhaseKind, PointKind, TurningPoint};
use debtcycle::panel::{QuarterIndex, QuarterlySeries};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// A dated phase in plain offsets, as the reference sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct RefPhase {
    pub expansion: bool,
    pub start_offset: usize,
    pub end_offset: usize,
}

/// Reference dating pipeline: candidate scan, then a naive loop that
/// rescans the whole list for the highest-priority leftmost violation and
/// applies one deletion at a time.
pub fn reference_date(values: &[f64], rules: &CensoringRules) -> Vec<RefPhase> {
    let w = rules.window;
    assert!(values.len() >= 2 * w + 1, "series too short");

    // Candidates: strictly above/below all compared neighbours.
    let mut offsets: Vec<usize> = Vec::new();
    let mut is_peak: Vec<bool> = Vec::new();
    for t in w..values.len() - w {
        let mut peak = true;
        let mut trough = true;
        for k in 1..=w {
            peak &= values[t] > values[t - k] && values[t] > values[t + k];
            trough &= values[t] < values[t - k] && values[t] < values[t + k];
        }
        if peak || trough {
            offsets.push(t);
            is_peak.push(peak);
        }
    }

    loop {
        let n = offsets.len();
        let val = |i: usize| values[offsets[i]];
        let mut deletion: Option<usize> = None;

        // R1: adjacent same-kind pair.
        for i in 0..n.saturating_sub(1) {
            if is_peak[i] == is_peak[i + 1] {
                let first_wins = if is_peak[i] {
                    val(i) >= val(i + 1)
                } else {
                    val(i) <= val(i + 1)
                };
                deletion = Some(if first_wins { i + 1 } else { i });
                break;
            }
        }
        // R2: ordering between opposite kinds.
        if deletion.is_none() {
            for i in 0..n.saturating_sub(1) {
                let bad = if is_peak[i + 1] {
                    val(i + 1) <= val(i)
                } else {
                    val(i + 1) >= val(i)
                };
                if bad {
                    let pa = if i > 0 {
                        (val(i) - val(i - 1)).abs()
                    } else {
                        -1.0
                    };
                    let pb = if i + 2 < n {
                        (val(i + 1) - val(i + 2)).abs()
                    } else {
                        -1.0
                    };
                    deletion = Some(if pb <= pa { i + 1 } else { i });
                    break;
                }
            }
        }
        // R3: minimum phase length.
        if deletion.is_none() {
            let total: f64 = (1..n).map(|i| (val(i) - val(i - 1)).abs()).sum();
            let without = |skip: usize| -> f64 {
                let kept: Vec<f64> = (0..n).filter(|&i| i != skip).map(val).collect();
                kept.windows(2).map(|p| (p[1] - p[0]).abs()).sum()
            };
            let _ = total;
            for i in 0..n.saturating_sub(1) {
                if (offsets[i + 1] - offsets[i]) < rules.min_phase as usize {
                    deletion = Some(if without(i + 1) >= without(i) {
                        i + 1
                    } else {
                        i
                    });
                    break;
                }
            }
        }
        // Minimum cycle length.
        if deletion.is_none() {
            for i in 0..n.saturating_sub(2) {
                if is_peak[i] == is_peak[i + 2]
                    && (offsets[i + 2] - offsets[i]) < rules.min_cycle as usize
                {
                    deletion = Some(i + 1);
                    break;
                }
            }
        }

        match deletion {
            Some(i) => {
                offsets.remove(i);
                is_peak.remove(i);
            }
            None => break,
        }
    }

    offsets
        .windows(2)
        .zip(is_peak.windows(2))
        .map(|(o, k)| RefPhase {
            expansion: !k[0],
            start_offset: o[0],
            end_offset: o[1],
        })
        .collect()
}

/// Does a turning-point subset satisfy every censoring rule outright?
pub fn subset_is_valid(
    offsets: &[usize],
    is_peak: &[bool],
    values: &[f64],
    rules: &CensoringRules,
) -> bool {
    for i in 1..offsets.len() {
        if is_peak[i] == is_peak[i - 1] {
            return false;
        }
        let (lo, hi) = (values[offsets[i - 1]], values[offsets[i]]);
        if is_peak[i] && hi <= lo {
            return false;
        }
        if !is_peak[i] && hi >= lo {
            return false;
        }
        if offsets[i] - offsets[i - 1] < rules.min_phase as usize {
            return false;
        }
    }
    for i in 2..offsets.len() {
        if offsets[i] - offsets[i - 2] < rules.min_cycle as usize {
            return false;
        }
    }
    true
}

/// All rule-satisfying subsets of the candidate extrema of a (small) series.
pub fn enumerate_valid_subsets(
    values: &[f64],
    rules: &CensoringRules,
) -> Vec<(Vec<usize>, Vec<bool>)> {
    let w = rules.window;
    let mut cand: Vec<(usize, bool)> = Vec::new();
    for t in w..values.len() - w {
        let peak = (1..=w).all(|k| values[t] > values[t - k] && values[t] > values[t + k]);
        let trough = (1..=w).all(|k| values[t] < values[t - k] && values[t] < values[t + k]);
        if peak || trough {
            cand.push((t, peak));
        }
    }
    assert!(
        cand.len() <= 20,
        "enumeration only for small candidate sets"
    );
    let mut out = Vec::new();
    for mask in 0u32..(1 << cand.len()) {
        let mut offsets = Vec::new();
        let mut kinds = Vec::new();
        for (bit, &(o, k)) in cand.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                offsets.push(o);
                kinds.push(k);
            }
        }
        if subset_is_valid(&offsets, &kinds, values, rules) {
            out.push((offsets, kinds));
        }
    }
    out
}

/// Pipeline output converted to reference form for comparison.
pub fn phases_to_ref(
    series: &QuarterlySeries,
    phases: &[debtcycle::dating::Phase],
) -> Vec<RefPhase> {
    phases
        .iter()
        .map(|p| RefPhase {
            expansion: p.kind == PhaseKind::Expansion,
            start_offset: series.offset_of(p.start.time).expect("start in series"),
            end_offset: series.offset_of(p.end.time).expect("end in series"),
        })
        .collect()
}

/// Random test series: linear trend + sinusoid + Gaussian noise.
pub fn random_series(seed: u64, len: usize) -> QuarterlySeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trend: f64 = rng.gen_range(-0.3..0.3);
    let amplitude: f64 = rng.gen_range(2.0..10.0);
    let period: f64 = rng.gen_range(8.0..40.0);
    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let noise_sd: f64 = rng.gen_range(0.0..2.0);
    let values: Vec<f64> = (0..len)
        .map(|t| {
            let z: f64 = StandardNormal.sample(&mut rng);
            60.0 + trend * t as f64
                + amplitude * (std::f64::consts::TAU * t as f64 / period + phase).sin()
                + noise_sd * z
        })
        .collect();
    QuarterlySeries::new("sim", "debt", QuarterIndex::new(1990, 1).unwrap(), values)
}

/// Adaptive Simpson quadrature.
fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 60)
}

/// Inverse-Gaussian density with mean mu and shape lambda.
pub fn inverse_gaussian_pdf(x: f64, mu: f64, lambda: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (lambda / (2.0 * std::f64::consts::PI * x.powi(3))).sqrt()
        * (-lambda * (x - mu) * (x - mu) / (2.0 * mu * mu * x)).exp()
}

/// One spell for the quadrature oracle.
pub struct OracleSpell {
    pub group: usize,
    pub duration: f64,
    pub covariates: Vec<f64>,
}

/// Marginal log-likelihood by numerical integration over the frailty:
/// per group, integrate prod_j [alpha h0_ij exp(-alpha H_ij)] against the
/// inverse-Gaussian density.
pub fn quadrature_loglik(
    beta_aft: &[f64],
    ln_p: f64,
    ln_theta: f64,
    spells: &[OracleSpell],
) -> f64 {
    let p = ln_p.exp();
    let theta = ln_theta.exp();
    let lambda = 1.0 / theta;
    let n_groups = spells.iter().map(|s| s.group).max().unwrap() + 1;
    let mut total = 0.0;
    for g in 0..n_groups {
        let members: Vec<&OracleSpell> = spells.iter().filter(|s| s.group == g).collect();
        let d = members.len();
        let mut cum_hazard = 0.0;
        let mut ln_h0_sum = 0.0;
        for s in &members {
            let mut xb = beta_aft[0];
            for (x, b) in s.covariates.iter().zip(&beta_aft[1..]) {
                xb += x * b;
            }
            let xb_tilde = -p * xb;
            ln_h0_sum += p.ln() + (p - 1.0) * s.duration.ln() + xb_tilde;
            cum_hazard += s.duration.powf(p) * xb_tilde.exp();
        }
        let integrand = move |alpha: f64| -> f64 {
            alpha.powi(d as i32)
                * (-alpha * cum_hazard).exp()
                * inverse_gaussian_pdf(alpha, 1.0, lambda)
        };
        // Expand the upper bound until the tail is negligible, then sum
        // log-spaced panels so narrow peaks are always sampled.
        let mut upper = 4.0;
        while integrand(upper) > 1e-280 && upper < 1e6 {
            upper *= 2.0;
        }
        let mut breaks = vec![0.0];
        let mut b = 1.0 / 64.0;
        while b < upper {
            breaks.push(b);
            b *= 2.0;
        }
        breaks.push(upper);
        let coarse: f64 = breaks
            .windows(2)
            .map(|w| integrate(&integrand, w[0], w[1], 1e-12))
            .sum();
        let integral: f64 = breaks
            .windows(2)
            .map(|w| integrate(&integrand, w[0], w[1], coarse * 1e-13))
            .sum();
        total += integral.ln() + ln_h0_sum;
    }
    total
}

/// Dummy-variable (LSDV) OLS oracle: regress y on [x | group dummies] and
/// return the slope block.
pub fn lsdv_slopes(y: &DVector<f64>, x: &DMatrix<f64>, groups: &[String]) -> Vec<f64> {
    let n = y.len();
    let k = x.ncols();
    let mut labels: Vec<&String> = Vec::new();
    for g in groups {
        if !labels.contains(&g) {
            labels.push(g);
        }
    }
    let g = labels.len();
    let mut design = DMatrix::zeros(n, k + g);
    for i in 0..n {
        for j in 0..k {
            design[(i, j)] = x[(i, j)];
        }
        let gi = labels.iter().position(|&l| l == &groups[i]).unwrap();
        design[(i, k + gi)] = 1.0;
    }
    let svd = design.svd(true, true);
    let coef = svd
        .solve(y, svd.singular_values.max() * 1e-12 * n as f64)
        .expect("full-rank LSDV design");
    coef.iter().take(k).copied().collect()
}

/// Independent no-frailty Weibull AFT log-likelihood.
pub fn weibull_nofrailty_loglik(
    beta_aft: &[f64],
    ln_p: f64,
    durations: &[f64],
    covariates: &[Vec<f64>],
) -> f64 {
    let p = ln_p.exp();
    durations
        .iter()
        .zip(covariates)
        .map(|(&t, x)| {
            let mut xb = beta_aft[0];
            for (v, b) in x.iter().zip(&beta_aft[1..]) {
                xb += v * b;
            }
            let xb_tilde = -p * xb;
            ln_p + (p - 1.0) * t.ln() + xb_tilde - t.powf(p) * xb_tilde.exp()
        })
        .sum()
}

/// Maximize the no-frailty likelihood with the generic optimizer.
pub fn weibull_nofrailty_mle(durations: &[f64], covariates: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let k = covariates[0].len() + 1;
    let objective = |v: &DVector<f64>| -> f64 {
        let beta: Vec<f64> = v.iter().take(k).copied().collect();
        weibull_nofrailty_loglik(&beta, v[k], durations, covariates)
    };
    let mean = durations.iter().sum::<f64>() / durations.len() as f64;
    let mut x0 = DVector::zeros(k + 1);
    x0[0] = mean.ln();
    let res = debtcycle::optim::maximize(
        &objective,
        x0,
        &debtcycle::optim::MaximizeOptions::default(),
    );
    assert!(res.converged, "no-frailty MLE did not converge");
    (res.x.iter().take(k).copied().collect(), res.x[k])
}

/// Convenience: library turning points from raw values.
pub fn library_points(values: &[f64], rules: &CensoringRules) -> Vec<TurningPoint> {
    let series = QuarterlySeries::new(
        "sim",
        "debt",
        QuarterIndex::new(1990, 1).unwrap(),
        values.to_vec(),
    );
    let cand = debtcycle::dating::find_candidate_extrema(&series, rules).expect("long enough");
    debtcycle::dating::censor_turning_points(&cand, rules)
}

pub fn point_kind_is_peak(p: &TurningPoint) -> bool {
    p.kind == PointKind::Peak
}
