//! Property suites for the spec-level invariants.

mod common;

use debtcycle::assoc::{associate_phase, AssociationWindow};
use debtcycle::dating::{
    censor_turning_points, find_candidate_extrema, CensoringRules, Phase, PhaseKind, PointKind,
    TurningPoint,
};
use debtcycle::optim::{gradient_central, gradient_fd};
use debtcycle::panel::{load_panel, parse_quarter, QuarterIndex, QuarterlySeries};
use debtcycle::survival::{marginal_loglik, SurvivalData, SurvivalSpell};
use nalgebra::DVector;
use proptest::prelude::*;

fn q(offset: i64) -> QuarterIndex {
    QuarterIndex::new(2000, 1).unwrap().offset(offset)
}

proptest! {
    #[test]
    fn quarter_roundtrip(year in -500i32..3000, quarter in 1u8..=4) {
        let qi = QuarterIndex::new(year, quarter).unwrap();
        prop_assert_eq!(parse_quarter(&qi.to_string()).unwrap(), qi);
    }

    #[test]
    fn quarter_offset_roundtrip(year in 0i32..3000, quarter in 1u8..=4, step in -200i64..200) {
        let qi = QuarterIndex::new(year, quarter).unwrap();
        prop_assert_eq!(qi.offset(step).quarters_since(qi), step);
    }

    #[test]
    fn geometric_series_has_constant_pct_change(
        start in 0.5f64..500.0,
        ratio in 0.5f64..2.0,
        len in 3usize..40,
    ) {
        let mut values = Vec::with_capacity(len);
        let mut v = start;
        for _ in 0..len {
            values.push(v);
            v *= ratio;
        }
        let series = QuarterlySeries::new("XX", "v", q(0), values);
        let expected = 100.0 * (ratio - 1.0);
        for c in series.pct_change().unwrap().values {
            prop_assert!((c - expected).abs() <= 1e-12 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn panel_load_is_order_insensitive(perm in Just(()).prop_perturb(|_, mut rng| {
        let mut idx: Vec<usize> = (0..6).collect();
        for i in (1..idx.len()).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            idx.swap(i, j);
        }
        idx
    })) {
        let rows = [
            "AU,2000Q1,debt,20.0",
            "AU,2000Q2,debt,21.0",
            "AU,2000Q3,debt,19.5",
            "BR,2001Q3,debt,30.0",
            "BR,2001Q4,debt,31.0",
            "AU,2000Q1,credit,75.0",
        ];
        let groups = "country,group\nAU,AE\nBR,EM\n";
        let sorted = {
            let csv = format!("country,quarter,variable,value\n{}\n", rows.join("\n"));
            load_panel(csv.as_bytes(), groups.as_bytes()).unwrap()
        };
        let body: Vec<&str> = perm.iter().map(|&i| rows[i]).collect();
        let csv = format!("country,quarter,variable,value\n{}\n", body.join("\n"));
        let shuffled = load_panel(csv.as_bytes(), groups.as_bytes()).unwrap();
        prop_assert_eq!(sorted, shuffled);
    }

    #[test]
    fn dating_matches_reference_and_invariants(
        values in prop::collection::vec(-50.0f64..50.0, 10..60),
        medium in any::<bool>(),
    ) {
        let rules = if medium {
            CensoringRules::medium_term()
        } else {
            CensoringRules::short_term()
        };
        let series = QuarterlySeries::new("XX", "v", q(0), values.clone());
        let phases = debtcycle::dating::date_cycles(&series, &rules).unwrap();
        let reference = common::reference_date(&values, &rules);
        prop_assert_eq!(common::phases_to_ref(&series, &phases), reference);

        for w in phases.windows(2) {
            prop_assert_ne!(w[0].kind, w[1].kind);
            prop_assert!(w[1].end.time.quarters_since(w[0].start.time) >= rules.min_cycle);
        }
        for ph in &phases {
            prop_assert!(ph.duration >= rules.min_phase);
            match ph.kind {
                PhaseKind::Expansion => prop_assert!(ph.end.value > ph.start.value),
                PhaseKind::Contraction => prop_assert!(ph.end.value < ph.start.value),
            }
        }
    }

    #[test]
    fn dating_output_is_a_valid_enumerated_subset(
        values in prop::collection::vec(-20.0f64..20.0, 8..22),
    ) {
        let rules = CensoringRules::short_term();
        let series = QuarterlySeries::new("XX", "v", q(0), values.clone());
        let candidates = find_candidate_extrema(&series, &rules).unwrap();
        prop_assume!(candidates.len() <= 12);
        let kept = censor_turning_points(&candidates, &rules);
        let offsets: Vec<usize> = kept
            .iter()
            .map(|p| series.offset_of(p.time).unwrap())
            .collect();
        let kinds: Vec<bool> = kept.iter().map(common::point_kind_is_peak).collect();
        let valid = common::enumerate_valid_subsets(&values, &rules);
        prop_assert!(
            valid.iter().any(|(o, k)| o == &offsets && k == &kinds),
            "censored output must satisfy every rule"
        );
    }

    #[test]
    fn association_flags_ignore_points_outside_window(
        trough_at in 0i64..40,
        duration in 2i64..20,
        outside_offsets in prop::collection::vec(2i64..50, 0..6),
        inside in any::<bool>(),
    ) {
        let phase = Phase {
            kind: PhaseKind::Expansion,
            start: TurningPoint { kind: PointKind::Trough, time: q(trough_at), value: 1.0 },
            end: TurningPoint { kind: PointKind::Peak, time: q(trough_at + duration), value: 2.0 },
            duration,
        };
        let win = AssociationWindow::new(1).unwrap();
        let mut points: Vec<TurningPoint> = outside_offsets
            .iter()
            .map(|&d| TurningPoint {
                kind: PointKind::Peak,
                time: q(trough_at + if d % 2 == 0 { d } else { -d }),
                value: 0.0,
            })
            .collect();
        let base = associate_phase(&phase, &points, win);
        prop_assert!(!base, "points at distance >= 2 must not fire a w=1 flag");

        if inside {
            points.push(TurningPoint { kind: PointKind::Peak, time: q(trough_at + 1), value: 0.0 });
            prop_assert!(associate_phase(&phase, &points, win));
        }
    }

    #[test]
    fn association_flag_is_monotone_in_window(
        trough_at in 0i64..40,
        point_offset in -6i64..6,
    ) {
        let phase = Phase {
            kind: PhaseKind::Expansion,
            start: TurningPoint { kind: PointKind::Trough, time: q(trough_at), value: 1.0 },
            end: TurningPoint { kind: PointKind::Peak, time: q(trough_at + 8), value: 2.0 },
            duration: 8,
        };
        let points = vec![TurningPoint {
            kind: PointKind::Peak,
            time: q(trough_at + point_offset),
            value: 0.0,
        }];
        let narrow = associate_phase(&phase, &points, AssociationWindow::new(1).unwrap());
        let wide = associate_phase(&phase, &points, AssociationWindow::new(2).unwrap());
        prop_assert!(!narrow || wide);
    }

    #[test]
    fn single_spell_groups_with_tiny_theta_match_no_frailty(
        durations in prop::collection::vec(0.2f64..5.0, 3..12),
        beta0 in -1.0f64..1.0,
        slope in -0.8f64..0.8,
        ln_p in -0.3f64..0.6,
    ) {
        let spells: Vec<SurvivalSpell> = durations
            .iter()
            .enumerate()
            .map(|(i, &t)| SurvivalSpell {
                group: format!("g{i}"),
                duration: t,
                covariates: vec![(i as f64 * 0.37).sin()],
            })
            .collect();
        let covs: Vec<Vec<f64>> = spells.iter().map(|s| s.covariates.clone()).collect();
        let data = SurvivalData::new(vec!["x".into()], spells).unwrap();
        let beta = [beta0, slope];
        let with_frailty = marginal_loglik(&beta, ln_p, (1e-12f64).ln(), &data);
        let without = common::weibull_nofrailty_loglik(&beta, ln_p, &durations, &covs);
        prop_assert!((with_frailty - without).abs() < 1e-6,
            "frailty {with_frailty} vs plain {without}");
    }

    #[test]
    fn forward_gradient_matches_central(seed in 0u64..30) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let spells: Vec<SurvivalSpell> = (0..12)
            .map(|i| SurvivalSpell {
                group: format!("g{}", i % 4),
                duration: rng.gen_range(0.3..4.0),
                covariates: vec![rng.gen_range(-1.0..1.0)],
            })
            .collect();
        let data = SurvivalData::new(vec!["x".into()], spells).unwrap();
        let objective = move |v: &DVector<f64>| -> f64 {
            marginal_loglik(&[v[0], v[1]], v[2], v[3], &data)
        };
        for _ in 0..3 {
            let x = DVector::from_vec(vec![
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.3..0.5),
                rng.gen_range(-2.0..0.3),
            ]);
            let fx = objective(&x);
            let forward = gradient_fd(&objective, &x, fx);
            let central = gradient_central(&objective, &x);
            for i in 0..4 {
                let denom = central[i].abs().max(1.0);
                prop_assert!(
                    (forward[i] - central[i]).abs() / denom < 1e-4,
                    "component {i}: forward {} central {}",
                    forward[i],
                    central[i]
                );
            }
        }
    }
}

#[test]
fn lr_test_is_antisymmetric_for_equal_specs() {
    let fit = |ll: f64| debtcycle::survival::FrailtyFit {
        label: "M".into(),
        covariate_names: vec!["x".into()],
        beta_aft: vec![0.0, 0.0],
        ln_p: 0.0,
        ln_theta: -1.0,
        covariance: None,
        std_errors: vec![],
        log_likelihood: ll,
        converged: true,
        iterations: 1,
        n: 10,
        n_groups: 5,
        theta_pinned: false,
        warnings: vec![],
    };
    let a = fit(-10.0);
    let b = fit(-12.5);
    let (ab, _) = debtcycle::survival::lr_test(&a, &b).unwrap();
    let (ba, _) = debtcycle::survival::lr_test(&b, &a).unwrap();
    assert_eq!(ab, -ba);
    assert_eq!(ab, 5.0);
}

/// Fitted shape parameter above one on data simulated with a rising hazard.
#[test]
fn rising_hazard_data_recover_p_above_one() {
    use debtcycle::simulate::{simulate_frailty_durations, CovariateLaw, SimConfig, SpellCount};
    let cfg = SimConfig {
        seed: 77,
        groups: 80,
        spells_per_group: SpellCount::Fixed(5),
        beta_aft: vec![1.2],
        p: 1.6,
        theta: 0.3,
        covariates: CovariateLaw::StandardNormal(0),
    };
    let data = simulate_frailty_durations(&cfg).unwrap();
    let fit = debtcycle::survival::fit_frailty_model(
        &data,
        &debtcycle::survival::ModelSpec::new("M1", vec![]),
    )
    .unwrap();
    assert!(fit.converged);
    assert!(fit.ln_p > 0.0, "ln_p = {}", fit.ln_p);
}

/// Medium-term turning points are a subset of the short-term candidates.
#[test]
fn medium_points_are_short_candidates() {
    for seed in 0..50u64 {
        let series = common::random_series(seed, 90);
        let short_candidates =
            find_candidate_extrema(&series, &CensoringRules::short_term()).unwrap();
        let medium_rules = CensoringRules::medium_term();
        let medium_candidates = find_candidate_extrema(&series, &medium_rules).unwrap();
        let medium_points = censor_turning_points(&medium_candidates, &medium_rules);
        for p in &medium_points {
            assert!(
                short_candidates
                    .iter()
                    .any(|c| c.time == p.time && c.kind == p.kind),
                "medium point at {} missing from short candidates",
                p.time
            );
        }
    }
}
