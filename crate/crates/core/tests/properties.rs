use divset::bounds::{RuleKind, ThresholdRule};
use divset::confset::{split, RelativeFit};
use divset::distributions::{Distribution, GridSpec, ParametricFamily};
use divset::divergences::DivergenceTag;
use divset::pilot::PilotSpec;
use divset::relfit::StatisticSpec;
use divset::simharness::presets::{self, Pipeline};
use divset::simharness::{mc_se, run_experiment, write_report_csv, ExperimentConfig, SetMethod};

fn bernoulli_fit(alpha: f64, rule: RuleKind, seed: u64) -> (RelativeFit, Vec<Vec<f64>>) {
    let fam = ParametricFamily::bernoulli(0.0, 1.0).unwrap();
    let data = Distribution::bernoulli(0.35).unwrap().sample(300, seed);
    let sp = split(data.len(), 0.5, seed + 1).unwrap();
    let stat = StatisticSpec::new(DivergenceTag::Tv);
    let rule = ThresholdRule::new(rule, alpha).unwrap();
    let fit = RelativeFit::new(&fam, &data, &sp, &PilotSpec::min_distance(DivergenceTag::Tv), &stat, &rule).unwrap();
    let grid = fam.grid(&GridSpec::uniform(201)).unwrap();
    (fit, grid)
}

#[test]
fn larger_alpha_gives_smaller_set() {
    for rule in [RuleKind::RediNormal, RuleKind::Hoeffding { b: 1.5 }, RuleKind::EmpiricalBernstein { b: 1.5, c: 0.5 }] {
        for seed in 0..5 {
            let (wide, grid) = bernoulli_fit(0.05, rule, seed);
            let (narrow, _) = bernoulli_fit(0.5, rule, seed);
            let a = wide.invert(&grid).unwrap();
            let b = narrow.invert(&grid).unwrap();
            for (x, y) in a.rows.iter().zip(&b.rows) {
                assert!(x.accept || !y.accept, "{} at {:?}", rule.name(), x.theta);
            }
        }
    }
}

#[test]
fn pilot_is_always_member() {
    for seed in 0..10 {
        let (fit, _) = bernoulli_fit(0.001, RuleKind::RediNormal, seed);
        let theta = fit.pilot.theta.clone();
        assert!(fit.test(&theta).unwrap().accept);
    }
}

#[test]
fn hoeffding_exact_set_covers_at_small_n() {
    let cfg = ExperimentConfig {
        name: "tv-hoeffding-n20".into(),
        truth: Distribution::bernoulli(0.3).unwrap(),
        family: ParametricFamily::bernoulli(0.0, 1.0).unwrap(),
        statistic: StatisticSpec::new(DivergenceTag::Tv),
        rule: ThresholdRule::new(RuleKind::Hoeffding { b: 1.5 }, 0.1).unwrap(),
        pilot: PilotSpec::min_distance(DivergenceTag::Tv),
        n: 20,
        replicates: 1000,
        seed: 44,
        grid: GridSpec::uniform(101),
        split_ratio: 0.5,
        nu: None,
        method: SetMethod::Split,
        metrics: false,
    };
    let r = run_experiment(&cfg).unwrap();
    assert!(r.coverage >= 0.9 - 3.0 * mc_se(0.9, r.replicates), "coverage {}", r.coverage);
}

#[test]
fn misspecified_hellinger_set_meets_approximate_target() {
    let cfgs = presets::example1_configs(400, 0.05, 0.1, 300, 45).unwrap();
    let r = run_experiment(&cfgs[2]).unwrap();
    assert!(r.approx_coverage >= 0.95 - 3.0 * mc_se(0.95, r.replicates), "approx coverage {}", r.approx_coverage);
}

#[test]
fn median_set_size_shrinks_with_n() {
    for pipeline in [Pipeline::KlRedi, Pipeline::HellingerRedi, Pipeline::TvRedi] {
        let sizes: Vec<f64> = [100, 200, 400, 800]
            .iter()
            .map(|&n| {
                let mut cfg = presets::overdispersion_config(2.0, n, 100, 46, pipeline).unwrap();
                cfg.metrics = true;
                run_experiment(&cfg).unwrap().median_size.unwrap()
            })
            .collect();
        for w in sizes.windows(2) {
            assert!(w[1] <= w[0], "{}: {sizes:?}", pipeline.name());
        }
    }
}

#[test]
fn same_seed_gives_identical_report() {
    let cfg = presets::overdispersion_config(3.0, 100, 40, 47, Pipeline::KlRedi).unwrap();
    let render = || {
        let mut buf = Vec::new();
        write_report_csv(&[run_experiment(&cfg).unwrap()], &mut buf).unwrap();
        buf
    };
    assert_eq!(render(), render());
}
