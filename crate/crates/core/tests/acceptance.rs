//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use divset::bounds::{bentkus_quantile, RuleKind, ThresholdRule};
use divset::confset::{split, RaySearch, RelativeFit, Representation};
use divset::distributions::{Distribution, GridSpec, ParametricFamily};
use divset::divergences::kernel::KernelSpec;
use divset::divergences::{approx_projection_set, divergence, project, DivergenceTag};
use divset::pilot::PilotSpec;
use divset::relfit::{PairStatistic, StatisticSample, StatisticSpec};
use divset::simharness::presets::{self, Pipeline};
use divset::simharness::{mc_se, run_experiment, CoverageReport, ExperimentConfig, SetMethod};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn run(cfg: ExperimentConfig) -> CoverageReport {
    run_experiment(&cfg).unwrap_or_else(|e| panic!("{}: {e}", cfg.name))
}

fn no_metrics(mut cfg: ExperimentConfig) -> ExperimentConfig {
    cfg.metrics = false;
    cfg
}

fn example1_failure() -> Outcome {
    let cfgs = presets::example1_configs(1000, 0.05, 0.1, 1000, 101).unwrap();
    let r = run(no_metrics(cfgs[0].clone()));
    let pass = r.projection_theta == vec![0.5] && r.coverage <= 0.15;
    outcome(pass, format!("sLRT coverage of Bern(1/2) = {:.4} (se {:.4}), bound 0.15", r.coverage, r.coverage_se))
}

fn example2() -> Outcome {
    let cfgs = presets::example2_configs(2000, 0.05, 0.1, 2000, 202).unwrap();
    let slrt = run(no_metrics(cfgs[0].clone()));
    let redi = run(no_metrics(cfgs[1].clone()));
    let pass = slrt.projection_theta == vec![0.75] && slrt.coverage <= 0.90 && redi.coverage >= 0.93;
    outcome(
        pass,
        format!("sLRT coverage {:.4} (<= 0.90), KL-ReDI coverage {:.4} (>= 0.93)", slrt.coverage, redi.coverage),
    )
}

fn dp_fix() -> Outcome {
    let cfgs = presets::example1_configs(200, 0.05, 0.1, 1000, 303).unwrap();
    let r = run(no_metrics(cfgs[1].clone()));
    let pass = r.projection_theta == vec![0.0] && r.coverage >= 0.93;
    outcome(pass, format!("DP(beta=1) Hoeffding(B=2) coverage of Bern(0) = {:.4} (>= 0.93)", r.coverage))
}

fn hellinger_thresholds() -> Outcome {
    let fam = ParametricFamily::bernoulli_points(&[0.0, 0.5]).unwrap();
    let nu = (3.0 + 2.0 * 2f64.sqrt()).sqrt();
    let grid = GridSpec::default();
    let approx = |eps: f64| {
        approx_projection_set(&DivergenceTag::Hellinger, &Distribution::bernoulli(eps).unwrap(), &fam, nu, &grid)
            .unwrap()
            .points
    };
    let proj = |eps: f64| project(&DivergenceTag::Hellinger, &Distribution::bernoulli(eps).unwrap(), &fam, &grid).unwrap().theta;
    let a04 = approx(0.04);
    let a10 = approx(0.10);
    let (p14, p15) = (proj(0.14), proj(0.15));
    let pass = a04 == vec![vec![0.0]] && a10 == vec![vec![0.0], vec![0.5]] && p14 == vec![0.0] && p15 == vec![0.5];
    outcome(pass, format!("P~_nu(0.04) = {a04:?}, P~_nu(0.10) = {a10:?}, projection(0.14) = {p14:?}, projection(0.15) = {p15:?}"))
}

fn overdispersion() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for kappa in [2.0, 5.0] {
        let slrt = run(no_metrics(presets::overdispersion_config(kappa, 200, 300, 505, Pipeline::Slrt).unwrap()));
        let redi = run(no_metrics(presets::overdispersion_config(kappa, 200, 300, 505, Pipeline::KlRedi).unwrap()));
        let proj_ok = (redi.projection_theta[0] - 10.0).abs() <= 1e-3;
        let redi_ok = redi.coverage >= 0.95 - 3.0 * mc_se(redi.coverage, redi.replicates);
        let slrt_ok = kappa != 5.0 || slrt.coverage <= 0.90;
        pass &= proj_ok && redi_ok && slrt_ok;
        parts.push(format!(
            "kappa={kappa}: theta~={:.6}, sLRT {:.3}, KL-ReDI {:.3}",
            redi.projection_theta[0], slrt.coverage, redi.coverage
        ));
    }
    outcome(pass, parts.join("; "))
}

fn approximate_coverage() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [Pipeline::HellingerRedi, Pipeline::TvRedi] {
        let r = run(no_metrics(presets::overdispersion_config(2.0, 200, 300, 606, p).unwrap()));
        pass &= r.approx_coverage >= 0.97;
        parts.push(format!("{}: approx coverage {:.4} (|P~_nu| = {})", p.name(), r.approx_coverage, r.approx_set.len()));
    }
    outcome(pass, parts.join("; "))
}

fn random_probs(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.02..1.0)).collect();
    let s: f64 = w.iter().sum();
    let mut p: Vec<f64> = w.iter().map(|x| x / s).collect();
    let head: f64 = p[..k - 1].iter().sum();
    p[k - 1] = 1.0 - head;
    p
}

fn random_discrete(rng: &mut ChaCha8Rng, k: usize) -> Distribution {
    if k == 2 {
        Distribution::bernoulli(rng.random_range(0.02..0.98)).unwrap()
    } else {
        Distribution::categorical(random_probs(rng, k)).unwrap()
    }
}

fn statistics() -> Vec<StatisticSpec> {
    vec![
        StatisticSpec::new(DivergenceTag::Kl),
        StatisticSpec::new(DivergenceTag::Dp { beta: 0.5 }),
        StatisticSpec::new(DivergenceTag::Dp { beta: 1.0 }),
        StatisticSpec::new(DivergenceTag::Hellinger),
        StatisticSpec::new(DivergenceTag::Tv),
        StatisticSpec::new(DivergenceTag::Wasserstein1 { b: 49.0 }),
        StatisticSpec::new(DivergenceTag::Mmd { kernel: KernelSpec::rbf(1.0) }),
    ]
}

fn assumption_two() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst = f64::NEG_INFINITY;
    let mut checked = 0;
    let mut failures = Vec::new();
    for spec in statistics() {
        let hellinger = matches!(spec.divergence, DivergenceTag::Hellinger);
        let (nu, rho) = if hellinger {
            (spec.nu * spec.nu, Box::new(|a: &Distribution, b: &Distribution| divergence(&DivergenceTag::Hellinger, a, b).unwrap().powi(2)) as Box<dyn Fn(&Distribution, &Distribution) -> f64>)
        } else {
            let tag = spec.divergence;
            (spec.nu, Box::new(move |a: &Distribution, b: &Distribution| divergence(&tag, a, b).unwrap()) as Box<dyn Fn(&Distribution, &Distribution) -> f64>)
        };
        for i in 0..500 {
            let k = if i % 2 == 0 { 2 } else { 5 };
            let (truth, p0, p1) = (random_discrete(&mut rng, k), random_discrete(&mut rng, k), random_discrete(&mut rng, k));
            let t = PairStatistic::new(&spec.divergence, &p0, &p1).unwrap();
            let lhs = spec.c1 * t.expectation(&truth).unwrap();
            let rhs = nu * rho(&truth, &p0) - rho(&truth, &p1);
            let gap = lhs - rhs;
            worst = worst.max(gap);
            checked += 1;
            if gap > 1e-9 {
                failures.push(format!("{}: gap {gap:.3e}", spec.divergence.name()));
            }
        }
    }
    let pass = failures.is_empty();
    outcome(
        pass,
        format!("{checked} triples, max(c1 E T - (nu rho0 - rho1)) = {worst:.3e}{}", if pass { String::new() } else { format!(", failures: {:?}", &failures[..failures.len().min(5)]) }),
    )
}

fn anti_symmetry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut worst: f64 = 0.0;
    let mut evals = 0;
    for spec in statistics() {
        for i in 0..200 {
            let (p, q, xs): (Distribution, Distribution, Vec<f64>) = if i % 2 == 0 || matches!(spec.divergence, DivergenceTag::Wasserstein1 { .. }) {
                let p = Distribution::categorical(random_probs(&mut rng, 50)).unwrap();
                let q = Distribution::categorical(random_probs(&mut rng, 50)).unwrap();
                (p, q, (0..50).map(|k| k as f64).collect())
            } else {
                let p = Distribution::gaussian(rng.random_range(-2.0..2.0), rng.random_range(0.5..2.0)).unwrap();
                let q = Distribution::gaussian(rng.random_range(-2.0..2.0), rng.random_range(0.5..2.0)).unwrap();
                (p, q, (0..50).map(|_| rng.random_range(-5.0..5.0)).collect())
            };
            let a = PairStatistic::new(&spec.divergence, &p, &q).unwrap();
            let b = PairStatistic::new(&spec.divergence, &q, &p).unwrap();
            for &x in &xs {
                let s = a.eval(x).unwrap() + b.eval(x).unwrap();
                worst = worst.max(s.abs());
                evals += 1;
            }
        }
    }
    outcome(worst <= 1e-9, format!("{evals} evaluations, max |T(x;P,Q) + T(x;Q,P)| = {worst:.3e}"))
}

/// Brute-force Bentkus quantile: dense grid over `t`, direct binomial sums
/// and a grid over `u` at resolution `1e-4` in threshold units.
fn brute_bentkus_threshold(n0: usize, alpha: f64, b: f64, s: f64) -> f64 {
    let s2 = s * s;
    let p = s2 / (s2 + b * b);
    let mut pmf = vec![0.0f64; n0 + 1];
    pmf[0] = (1.0 - p).powi(n0 as i32);
    for k in 1..=n0 {
        pmf[k] = pmf[k - 1] * (n0 - k + 1) as f64 / k as f64 * p / (1.0 - p);
    }
    let atoms: Vec<f64> = (0..=n0).map(|k| b * k as f64 - (s2 / b) * (n0 - k) as f64).collect();
    let tail = |u: f64| -> f64 {
        let width = 10.0 * s * (n0 as f64).sqrt() + 2.0 * b * n0 as f64;
        let mut best: f64 = 1.0;
        for i in 0..3000 {
            let t = u - width + width * i as f64 / 3000.0;
            let e: f64 = atoms.iter().zip(&pmf).map(|(v, w)| w * (v - t).max(0.0).powi(2)).sum();
            best = best.min(e / (u - t).powi(2));
        }
        best
    };
    // Coarse scan in steps of 1e-2, then refine the bracket at 1e-4.
    let mut m = 0.0;
    while tail(m * n0 as f64) > alpha && m < b {
        m += 1e-2;
    }
    let mut lo = (m - 1e-2).max(0.0);
    while lo < m && tail(lo * n0 as f64) > alpha {
        lo += 1e-4;
    }
    lo
}

fn bound_validity() -> Outcome {
    let reps = 10_000;
    let alpha = 0.05;
    let b = 1.0;
    // Mean-zero laws with range B: uniform, symmetric two-point, skewed two-point.
    let laws: [(&str, f64); 3] = [("uniform", b / 12f64.sqrt()), ("two-point", b / 2.0), ("skewed", 0.4 * b)];
    let draw = |name: &str, rng: &mut ChaCha8Rng| -> f64 {
        match name {
            "uniform" => rng.random_range(-0.5 * b..0.5 * b),
            "two-point" => if rng.random::<bool>() { 0.5 * b } else { -0.5 * b },
            _ => if rng.random::<f64>() < 0.2 { 0.8 * b } else { -0.2 * b },
        }
    };
    let limit = alpha + 3.0 * mc_se(alpha, reps);
    let mut pass = true;
    let mut parts = Vec::new();
    for n0 in [20usize, 100] {
        for (name, sd) in laws {
            let rules = [
                RuleKind::Hoeffding { b },
                RuleKind::EmpiricalBernstein { b, c: 0.5 },
                RuleKind::Bentkus { b, s: sd },
                RuleKind::EmpiricalBentkus { b, delta_split: None },
            ];
            let mut rejections = [0usize; 4];
            let mut rng = ChaCha8Rng::seed_from_u64(909 + n0 as u64);
            for _ in 0..reps {
                let values: Vec<f64> = (0..n0).map(|_| draw(name, &mut rng)).collect();
                let sample = StatisticSample::new(values, 0.0, 0).unwrap();
                for (j, kind) in rules.iter().enumerate() {
                    let d = ThresholdRule::new(*kind, alpha).unwrap().decide(&sample).unwrap();
                    if !d.accept {
                        rejections[j] += 1;
                    }
                }
            }
            let rates: Vec<f64> = rejections.iter().map(|r| *r as f64 / reps as f64).collect();
            pass &= rates.iter().all(|r| *r <= limit);
            parts.push(format!("n0={n0} {name}: {:?}", rates.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(999);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n0 = rng.random_range(5..60usize);
        let a = rng.random_range(0.01..0.3);
        let bb = rng.random_range(0.5..2.0);
        let s = rng.random_range(0.1..1.0) * bb;
        let fast = bentkus_quantile(n0, a, bb, s).unwrap() / n0 as f64;
        let slow = brute_bentkus_threshold(n0, a, bb, s);
        worst = worst.max((fast - slow).abs());
    }
    pass &= worst <= 1e-3;
    outcome(pass, format!("limit {limit:.4}; rejection rates [hoeffding, emp-bernstein, bentkus, emp-bentkus] {}; bentkus oracle max gap {worst:.2e}", parts.join(", ")))
}

fn min_diameter() -> Outcome {
    let truth = Distribution::bernoulli(0.53).unwrap();
    let fam = ParametricFamily::bernoulli_points(&[0.25, 0.75]).unwrap();
    let b = 2.0 * 3f64.ln();
    let cfg = ExperimentConfig {
        name: "min-diameter".into(),
        truth: truth.clone(),
        family: fam.clone(),
        statistic: StatisticSpec::new(DivergenceTag::Kl).with_bound(b),
        rule: ThresholdRule::new(RuleKind::Hoeffding { b }, 0.05).unwrap(),
        pilot: PilotSpec::Mle,
        n: 200,
        replicates: 2000,
        seed: 1010,
        grid: GridSpec::default(),
        split_ratio: 0.5,
        nu: None,
        method: SetMethod::Split,
        metrics: false,
    };
    let r = run(cfg);
    // The pilot is a member by construction, so joint membership reduces to covering P~.
    let both = r.rows.iter().filter(|row| row.covered).count() as f64 / r.replicates as f64;
    let separated = r.rows.iter().filter(|row| row.pilot_theta != r.projection_theta).count();
    let limit = 1.0 - 2.0 * 0.05 - 3.0 * mc_se(both, r.replicates);
    let gap = divergence(&DivergenceTag::Kl, &Distribution::bernoulli(0.75).unwrap(), &Distribution::bernoulli(0.25).unwrap()).unwrap();
    outcome(
        both >= limit && separated > 0,
        format!("P~ and pilot both in set: {both:.4} (>= {limit:.4}); pilot != P~ in {separated} reps with rho = {gap:.3}"),
    )
}

fn crossfit_validity() -> Outcome {
    let (statistic, _, pilot) = Pipeline::KlRedi.parts(0.05).unwrap();
    let cfg = ExperimentConfig {
        name: "crossfit".into(),
        truth: Distribution::bernoulli(0.3).unwrap(),
        family: ParametricFamily::bernoulli(0.0, 1.0).unwrap(),
        statistic,
        rule: ThresholdRule::redi_normal(0.05).unwrap(),
        pilot,
        n: 2000,
        replicates: 2000,
        seed: 1111,
        grid: GridSpec::uniform(401),
        split_ratio: 0.5,
        nu: None,
        method: SetMethod::Crossfit,
        metrics: false,
    };
    let r = run(cfg);
    outcome(
        r.coverage >= 0.94 && (r.projection_theta[0] - 0.3).abs() < 1e-6,
        format!("crossfit coverage of Bern(0.3) = {:.4} (>= 0.94)", r.coverage),
    )
}

fn rays_vs_grid() -> Outcome {
    let truth = presets::contamination_truth(1).unwrap();
    let data = truth.sample(400, 1212);
    let fam = ParametricFamily::gaussian_location_scale([-3.0, 0.5], [3.0, 10.0]).unwrap();
    let sp = split(400, 0.5, 1213).unwrap();
    let (stat, rule, pilot) = Pipeline::KlRedi.parts(0.05).unwrap();
    let fit = RelativeFit::new(&fam, &data, &sp, &pilot, &stat, &rule).unwrap();
    let m = 151;
    let grid = fam.grid(&GridSpec::uniform(m)).unwrap();
    let gset = fit.invert(&grid).unwrap();
    let rset = RaySearch::default().run(&fit).unwrap();
    let Representation::StarConvex { center, directions, radii, clamped } = &rset.representation else { unreachable!() };
    let (lo, hi) = fam.bounds();
    let cell: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| (h - l) / (m - 1) as f64).collect();
    let h = cell.iter().map(|c| c * c).sum::<f64>().sqrt();
    // Grid decisions within one cell diagonal of `b`, as (any accepted, any rejected).
    let near = |b: &[f64]| -> (bool, bool) {
        let idx: Vec<usize> = (0..2).map(|d| (((b[d] - lo[d]) / cell[d]).round().max(0.0) as usize).min(m - 1)).collect();
        let (mut acc, mut rej) = (false, false);
        for i in idx[0].saturating_sub(2)..=(idx[0] + 2).min(m - 1) {
            for j in idx[1].saturating_sub(2)..=(idx[1] + 2).min(m - 1) {
                let row = &gset.rows[i * m + j];
                let dist = row.theta.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                if dist <= h {
                    if row.accept { acc = true } else { rej = true }
                }
            }
        }
        (acc, rej)
    };
    let mut agree = 0;
    for k in 0..directions.len() {
        let b: Vec<f64> = center.iter().zip(&directions[k]).map(|(c, d)| c + radii[k] * d).collect();
        let (acc, rej) = near(&b);
        if acc && (rej || clamped[k]) {
            agree += 1;
        }
    }
    outcome(
        agree == directions.len(),
        format!("{agree}/{} ray boundaries lie within one cell diagonal of the {m}x{m} grid boundary ({h:.4}); grid set size {}", directions.len(), gset.size()),
    )
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("1 example-1 sLRT failure", example1_failure, Duration::from_secs(30)),
        ("2 example-2 sLRT vs KL-ReDI", example2, Duration::from_secs(120)),
        ("3 example-1 DP fix", dp_fix, Duration::from_secs(30)),
        ("4 Hellinger thresholds", hellinger_thresholds, Duration::from_secs(1)),
        ("5 overdispersion", overdispersion, Duration::from_secs(300)),
        ("6 approximate coverage", approximate_coverage, Duration::from_secs(600)),
        ("7 assumption-2 inequality", assumption_two, Duration::from_secs(30)),
        ("8 anti-symmetry", anti_symmetry, Duration::from_secs(10)),
        ("9 finite-sample bounds", bound_validity, Duration::from_secs(180)),
        ("10 min-diameter", min_diameter, Duration::from_secs(60)),
        ("11 crossfit validity", crossfit_validity, Duration::from_secs(120)),
        ("12 rays vs grid", rays_vs_grid, Duration::from_secs(60)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f, limit) in criteria {
        if !filter.is_empty() && !filter.iter().any(|s| name.contains(s.as_str())) {
            continue;
        }
        let start = Instant::now();
        let out = f();
        let elapsed = start.elapsed();
        let pass = out.pass && elapsed <= limit;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {name}: {} [{:.1}s of {}s] {}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs(),
            out.detail
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
