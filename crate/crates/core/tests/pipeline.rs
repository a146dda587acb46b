//! End-to-end checks of the generate -> bucketize -> simulate chain against
//! closed-form expectations computed directly from the generated events.

use stressim_core::{
    eligible_cohort, generate, group_by_participant, oracle_curve, simulate, RatedEvent,
    SamplingPolicy, SimulationConfig, SynthSpec,
};

/// Realized stressor fraction among each participant's top `count` events by
/// likelihood, averaged over participants. With 60 events per participant
/// every bucket holds three, so delivered prompts at integer k land
/// uniformly on the top 2k events and this is the exact conditional
/// efficiency the simulator estimates.
fn realized_top_fraction(events: &[RatedEvent], count: usize) -> f64 {
    let groups = group_by_participant(events);
    let mut total = 0.0;
    for (_, mut group) in groups.clone() {
        group.sort_by(|a, b| a.likelihood.total_cmp(&b.likelihood));
        let top = &group[group.len() - count..];
        total += top.iter().filter(|e| e.category.is_some()).count() as f64 / count as f64;
    }
    total / groups.len() as f64
}

#[test]
fn simulated_efficiency_matches_the_generated_cohort() {
    let spec = SynthSpec::default();
    let events = generate(&spec).unwrap();
    let selection = eligible_cohort(&events);
    assert!(selection.excluded.is_empty());
    assert_eq!(selection.cohort.len(), 68);

    let config = SimulationConfig {
        days_per_participant: 300,
        k_values: vec![6.0],
        ..SimulationConfig::default()
    };
    let out = simulate(&selection.cohort, &config).unwrap();
    let point = &out.points[0];

    // k = 6 delivers the top 12 of each participant's 60 events.
    let expected = realized_top_fraction(&events, 12);
    assert!(
        (point.base_efficiency - expected).abs() < 5e-3,
        "sim {} vs realized {}",
        point.base_efficiency,
        expected
    );
    // The closed-form oracle differs from the realized cohort only by the
    // generator's Bernoulli noise (816 top-bucket draws here).
    let oracle = oracle_curve(&spec, &config).unwrap();
    assert!((point.base_efficiency - oracle.points[0].efficiency).abs() < 0.05);
}

#[test]
fn efficiency_declines_with_frequency_and_tracks_the_events() {
    let spec = SynthSpec::default();
    let events = generate(&spec).unwrap();
    let cohort = eligible_cohort(&events).cohort;

    let config =
        SimulationConfig { days_per_participant: 120, ..SimulationConfig::default() };
    let oracle = oracle_curve(&spec, &config).unwrap();
    // Closed form: widening the admitted percentile band only adds buckets
    // with lower stressor probability, so efficiency never rises with k.
    for pair in oracle.points.windows(2) {
        assert!(pair[1].efficiency <= pair[0].efficiency + 1e-12);
    }
    assert!(oracle.points[0].efficiency > oracle.points.last().unwrap().efficiency + 0.3);

    let out = simulate(&cohort, &config).unwrap();
    for point in &out.points {
        let admitted = 2 * point.k as usize;
        let expected = realized_top_fraction(&events, admitted);
        assert!(
            (point.base_efficiency - expected).abs() < 0.01,
            "k = {}: sim {} vs realized {}",
            point.k,
            point.base_efficiency,
            expected
        );
    }
}

/// Probability mass function of Binomial(n, p) at each of 0..cap-1, used to
/// price quota shortfalls.
fn binomial_pmf_below(n: usize, p: f64, cap: usize) -> Vec<f64> {
    let mut pmf = Vec::with_capacity(cap);
    let q = 1.0 - p;
    let mut term = q.powi(n as i32);
    for j in 0..cap {
        pmf.push(term);
        term *= (n - j) as f64 / (j + 1) as f64 * (p / q);
    }
    pmf
}

fn expected_min(quota: usize, n: usize, p: f64) -> f64 {
    let pmf = binomial_pmf_below(n, p, quota);
    let shortfall: f64 =
        pmf.iter().enumerate().map(|(j, prob)| (quota - j) as f64 * prob).sum();
    quota as f64 - shortfall
}

#[test]
fn baseline_quota_replay_matches_its_stratum_prediction() {
    let spec = SynthSpec::default();
    let events = generate(&spec).unwrap();
    let cohort = eligible_cohort(&events).cohort;

    let config = SimulationConfig {
        policy: SamplingPolicy::MoodsBaseline,
        days_per_participant: 400,
        ..SimulationConfig::default()
    };
    let out = simulate(&cohort, &config).unwrap();
    assert_eq!(out.points.len(), 1);
    let point = &out.points[0];

    // Aligned 60-event cohorts split into percentile strata of 15/30/12/3
    // events. Quotas deliver min(quota, present) per stratum; the top
    // stratum always delivers. Within a stratum delivery is uniform, so the
    // predicted efficiency is the delivery-weighted realized stratum mean.
    let groups = group_by_participant(&events);
    let mut strata_frac = [0.0_f64; 4];
    for (_, mut group) in groups.clone() {
        group.sort_by(|a, b| a.likelihood.total_cmp(&b.likelihood));
        let bounds = [(0, 15), (15, 45), (45, 57), (57, 60)];
        for (s, (lo, hi)) in bounds.iter().enumerate() {
            let with = group[*lo..*hi].iter().filter(|e| e.category.is_some()).count();
            strata_frac[s] += with as f64 / (hi - lo) as f64;
        }
    }
    for frac in &mut strata_frac {
        *frac /= groups.len() as f64;
    }
    let delivered = [
        expected_min(1, 30, 0.25),
        expected_min(2, 30, 0.50),
        expected_min(3, 30, 0.20),
        30.0 * 0.05,
    ];
    let delivered_total: f64 = delivered.iter().sum();
    let predicted_eff = delivered
        .iter()
        .zip(&strata_frac)
        .map(|(d, f)| d * f)
        .sum::<f64>()
        / delivered_total;

    assert!(
        (point.k - delivered_total).abs() < 0.05,
        "implied k {} vs predicted {delivered_total}",
        point.k
    );
    assert!(
        (point.base_efficiency - predicted_eff).abs() < 0.01,
        "baseline eff {} vs predicted {predicted_eff}",
        point.base_efficiency
    );

    // The quota's oversampling of high-likelihood strata inflates observed
    // efficiency relative to uniform sampling over all events...
    let uniform_mean = realized_top_fraction(&events, 60);
    assert!(point.base_efficiency > uniform_mean + 0.1);

    // ...but at a matched response frequency the debiased top-percentile
    // threshold concentrates on still-richer events and sits well above it.
    let debiased = SimulationConfig {
        days_per_participant: 400,
        k_values: vec![7.0, 8.0],
        ..SimulationConfig::default()
    };
    let debiased_out = simulate(&cohort, &debiased).unwrap();
    for matched in &debiased_out.points {
        assert!(matched.base_efficiency > point.base_efficiency + 0.1);
    }
}

#[test]
fn default_run_fits_every_category() {
    // The stock demo (default cohort, default config) must come back with
    // all thirteen scopes converged; per-category series carry an order
    // more sampling noise than the pooled one and once stalled the fit at
    // the rounding floor of the loss with its convergence flag unset.
    let events = generate(&SynthSpec::default()).unwrap();
    let cohort = eligible_cohort(&events).cohort;
    let out = simulate(&cohort, &SimulationConfig::default()).unwrap();
    let rows = stressim_core::points_to_rows(&out.points);
    let report = stressim_core::fit_all_categories(&stressim_core::series_from_rows(&rows));
    assert_eq!(report.rows.len(), 13);
    for row in &report.rows {
        assert!(row.converged, "{}: {}", row.category, row.note);
        assert!(row.saturation.unwrap() > 0.0);
    }
}
