//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the binary
//! exits nonzero when any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use cantor_riesz::estimates::{
    anticoncentration_check, band_width, calibrate_threshold, capacity_report, distribution_report,
    flip_injection_check, flip_subfamilies_check, norm_ratio_report, operator_ratio_report, selection_check,
    subsequence_check, threshold_cube_sets, xi_shell_report, divergence_sweep, CapacityOptions,
    DistributionOptions, GaugeOptions, NormOptions, PowerOptions, RANDOM_SUBSETS,
};
use cantor_riesz::geometry::CantorSet;
use cantor_riesz::measure::{discretize, DiscreteMeasure, Mode};
use cantor_riesz::riesz::{
    operator_norm, transform_truncated, tree_transform, xi_decomposition, Exclusion,
    OperatorHandle, TargetSet,
};
use cantor_riesz::sequence::{
    regularize, sigma_from_gauge, GaugeFunction, LadderParams, SigmaSequence,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn ratio4(n: usize) -> SigmaSequence {
    SigmaSequence::geometric(0.25, 4.0, n).unwrap()
}

fn build(sigma: &SigmaSequence, d: usize) -> CantorSet {
    CantorSet::build(&regularize(sigma, LadderParams::default()).unwrap(), d).unwrap()
}

fn max_rel(a: &[f64], b: &[f64], d: usize) -> f64 {
    let mags: Vec<f64> = a.chunks(d).map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let scale = mags.iter().copied().fold(0.0, f64::max);
    a.chunks(d)
        .zip(b.chunks(d))
        .zip(&mags)
        .map(|((u, v), m)| {
            let diff = u.iter().zip(v).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            diff / m.max(1e-3 * scale)
        })
        .fold(0.0, f64::max)
}

fn random_sigma(rng: &mut ChaCha8Rng, n: usize) -> SigmaSequence {
    let mut v = vec![rng.random_range(0.01..10.0)];
    for _ in 1..n {
        let r = if rng.random::<bool>() { 2.0 } else { rng.random_range(2.0..300.0) };
        let last = *v.last().unwrap();
        v.push(last / r);
    }
    SigmaSequence::new(v).unwrap()
}

fn c1_ladder_laws() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut violations = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=14);
        let sigma = random_sigma(&mut rng, n);
        let alpha = rng.random_range(0.01..0.49);
        let frame = rng.random_range(1.0 + 1e-6..1.0 / (2.0 * alpha));
        let params = LadderParams::new(alpha, frame).unwrap();
        let ladder = regularize(&sigma, params).unwrap();
        violations += ladder.violations().len();
    }
    outcome(violations == 0, format!("1000 ladders, {violations} violations"))
}

fn c2_geometry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = 0;
    let mut disagreements = 0;
    let mut located = 0;
    for d in 1..=3 {
        for n in 1..=4 {
            for sigma in [ratio4(n), random_sigma(&mut rng, n)] {
                let set = build(&sigma, d);
                violations += set.violations().len();
            }
        }
        let set = build(&ratio4(4), d);
        let leaves = set.level_cubes(4).unwrap();
        let root = set.root();
        for t in 0..10_000 {
            let x: Vec<f64> = if t % 2 == 0 {
                let c = &leaves[rng.random_range(0..leaves.len())];
                c.center.iter().map(|v| v + rng.random_range(-0.7..0.7) * c.edge).collect()
            } else {
                root.center.iter().map(|v| v + rng.random_range(-0.5..0.5) * root.edge).collect()
            };
            let brute = leaves.iter().position(|c| c.contains(&x)).map(|k| k as u64);
            let fast = set.locate(&x).map(|l| l.leaf());
            if brute.is_some() {
                located += 1;
            }
            if brute != fast {
                disagreements += 1;
            }
        }
    }
    outcome(
        violations == 0 && disagreements == 0,
        format!("{violations} geometry violations; locate disagrees on {disagreements} of 30000 points ({located} inside)"),
    )
}

fn random_measure(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DiscreteMeasure {
    let pts = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    DiscreteMeasure::point_masses(d, pts, w).unwrap()
}

fn c3_kernel() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut trans, mut scale, mut pair) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let d = rng.random_range(1..=3);
        let s = rng.random_range(0.1..(d as f64 - 0.05).max(0.2));
        let nu = random_measure(&mut rng, 40, d);
        let t: Vec<f64> = (0..10 * d).map(|_| rng.random_range(-1.2..1.2)).collect();
        let targets = TargetSet::points(d, t).unwrap();
        let base = transform_truncated(&nu, &targets, 0.0, s, Exclusion::OwnNode).unwrap();

        let shift: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let moved = transform_truncated(
            &nu.translated(&shift).unwrap(),
            &targets.shifted(&shift).unwrap(),
            0.0,
            s,
            Exclusion::OwnNode,
        )
        .unwrap();
        trans = trans.max(max_rel(&base.values, &moved.values, d));

        let lambda = rng.random_range(0.1..10.0);
        let dil_t = TargetSet::points(d, targets.coords().iter().map(|x| x * lambda).collect()).unwrap();
        let dil = transform_truncated(&nu.dilated(lambda).unwrap(), &dil_t, 0.0, s, Exclusion::OwnNode).unwrap();
        let expect: Vec<f64> = base.values.iter().map(|v| v * lambda.powf(-s)).collect();
        scale = scale.max(max_rel(&expect, &dil.values, d));

        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let pts: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + b).chain(x.iter().zip(&v).map(|(a, b)| a - b)).collect();
        let sym = DiscreteMeasure::point_masses(d, pts, vec![0.5, 0.5]).unwrap();
        let r = transform_truncated(&sym, &TargetSet::points(d, x).unwrap(), 0.0, s, Exclusion::None).unwrap();
        let norm_v = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let single = 0.5 * norm_v.powf(-s);
        pair = pair.max(r.magnitudes()[0] / single);
    }
    outcome(
        trans <= 1e-12 && scale <= 1e-10 && pair <= 1e-12,
        format!("translation {trans:.2e}, scaling {scale:.2e}, symmetric pair {pair:.2e}"),
    )
}

fn dense_norm(nu: &DiscreteMeasure, eps: f64, s: f64) -> f64 {
    let (n, d) = (nu.len(), nu.dim());
    let w = nu.weights();
    DMatrix::from_fn(n * d, n, |row, y| {
        let (x, c) = (row / d, row % d);
        let diff: Vec<f64> = nu.point(y).iter().zip(nu.point(x)).map(|(a, b)| a - b).collect();
        let r = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r > eps && r > 0.0 {
            (w[x] * w[y]).sqrt() * diff[c] / r.powf(s + 1.0)
        } else {
            0.0
        }
    })
    .singular_values()
    .max()
}

fn c4_oracles() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for n in [5, 6] {
        let set = build(&ratio4(n), 2);
        let nu = discretize(&set, Mode::Centers).unwrap();
        let t = TargetSet::nodes(&nu);
        let a = transform_truncated(&nu, &t, 0.0, 1.0, Exclusion::OwnNode).unwrap();
        let b = tree_transform(&nu, &t, 0.0, 1.0, Exclusion::OwnNode, 0.3).unwrap();
        let dev = max_rel(&a.values, &b.values, 2);
        pass &= dev <= 1e-2;
        parts.push(format!("tree n={n} ({} pts) {dev:.2e}", nu.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut cases: Vec<(DiscreteMeasure, f64, f64)> = Vec::new();
    for _ in 0..6 {
        let d = rng.random_range(1..=3);
        let n = rng.random_range(8..=64 / d.max(1)).min(64);
        cases.push((random_measure(&mut rng, n, d), rng.random_range(0.0..0.3), rng.random_range(0.3..1.5)));
    }
    for n in [2, 3] {
        let set = build(&ratio4(n), 2);
        cases.push((discretize(&set, Mode::Centers).unwrap(), 0.0, 1.0));
    }
    for (nu, eps, s) in &cases {
        let est = operator_norm(&OperatorHandle::new(nu.clone(), *eps, *s).unwrap(), 1e-12, 5000).unwrap();
        let oracle = dense_norm(nu, *eps, *s);
        worst = worst.max((est.norm - oracle).abs() / oracle);
    }
    pass &= worst <= 1e-6;
    parts.push(format!("dense oracle worst {worst:.2e} over {} measures", cases.len()));
    outcome(pass, parts.join("; "))
}

fn c5_norm_band() -> Outcome {
    let mut ratios = Vec::new();
    let mut cauchy = None;
    for n in 1..=5 {
        let set = build(&ratio4(n), 2);
        let opts = NormOptions {
            cauchy_orders: if n == 3 { vec![3, 5, 7] } else { vec![] },
            ..NormOptions::default()
        };
        let rep = norm_ratio_report(&set, 1.0, 3, &opts).unwrap();
        ratios.push(rep.ratios["norm_sq/theta_sq_sum"].value);
        if n == 3 {
            cauchy = Some((rep.measured["cauchy_spread"], rep.series["cauchy_ratio"].clone()));
        }
    }
    let band = band_width(&ratios);
    let (spread, qs) = cauchy.unwrap();
    outcome(
        band <= 3.0 && spread <= 0.05,
        format!(
            "band {band:.3} (ratios {}); q-spread at n=3 {:.2}% (ratios {})",
            fmt(&ratios),
            100.0 * spread,
            fmt(&qs)
        ),
    )
}

fn fmt(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ")
}

fn c6_operator_band() -> Outcome {
    let mut ratios = Vec::new();
    let mut dominated = true;
    for n in 1..=5 {
        let set = build(&ratio4(n), 2);
        let rep = operator_ratio_report(&set, 1.0, 3, &PowerOptions::default()).unwrap();
        ratios.push(rep.ratios["operator_norm_sq/theta_sq_sum"].value);
        dominated &= rep.checks["operator_norm_dominates_constant_test"];
    }
    let band = band_width(&ratios);
    outcome(
        band <= 3.0 && dominated,
        format!("band {band:.3} (ratios {}); constant-function bound held: {dominated}", fmt(&ratios)),
    )
}

fn c7_distribution() -> Outcome {
    let mut fractions = Vec::new();
    let b: Vec<f64> = (0..=40).map(|i| i as f64 * 0.05).collect();
    let mut checks = true;
    for n in 1..=5 {
        let set = build(&ratio4(n), 2);
        let mu = discretize(&set, Mode::Grid(3)).unwrap();
        let rep = distribution_report(&mu, &set, 1.0, &b, DistributionOptions::default()).unwrap();
        fractions.push(rep.measured["survival_at_0.1"]);
        checks &= rep.all_checks_pass();
    }
    let floor = fractions.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        floor >= 0.5 * fractions[1] && checks,
        format!("survival at b=0.1: {}; floor {floor:.4} vs half of n=2 value {:.4}", fmt(&fractions), 0.5 * fractions[1]),
    )
}

fn c8_threshold() -> Outcome {
    let set2 = build(&ratio4(2), 2);
    let nu2 = discretize(&set2, Mode::Centers).unwrap();
    let c0 = calibrate_threshold(&set2, &nu2, 1.0, 0.1).unwrap();
    let mut fractions = Vec::new();
    for n in 3..=5 {
        let set = build(&ratio4(n), 2);
        let nu = discretize(&set, Mode::Centers).unwrap();
        let t = threshold_cube_sets(&set, &nu, c0, 1.0, None).unwrap();
        fractions.push(t.count_reduced() as f64 / t.total as f64);
    }
    let min = fractions.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(min >= 0.05, format!("c0 = {c0:.5}; reduced fractions n=3..5: {}", fmt(&fractions)))
}

fn c9_xi() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    let mut spreads = Vec::new();
    let mut refined = Vec::new();
    let configs = [
        (ratio4(5), "ratio 4, n=5"),
        (SigmaSequence::geometric(1.0 / 64.0, 64.0, 4).unwrap(), "ratio 64, n=4"),
    ];
    for (sigma, _) in &configs {
        let set = build(sigma, 2);
        let mu = discretize(&set, Mode::Centers).unwrap();
        let leaves = set.level_cubes(set.depth()).unwrap();
        let mut pts = Vec::new();
        for _ in 0..100 {
            let c = &leaves[rng.random_range(0..leaves.len())];
            pts.extend(c.center.iter().map(|v| v + rng.random_range(-0.5..0.5) * c.edge));
        }
        let targets = TargetSet::points(2, pts).unwrap();
        let field = transform_truncated(&mu, &targets, 0.0, 1.0, Exclusion::OwnNode).unwrap();
        for i in 0..targets.len() {
            let parts = xi_decomposition(&mu, &set, targets.point(i), 1.0).unwrap();
            let m = field.magnitudes()[i];
            for c in 0..2 {
                let total: f64 = parts.iter().map(|p| p[c]).sum();
                worst = worst.max((total - field.value(i)[c]).abs() / m.max(1.0));
            }
        }
        let rep = xi_shell_report(&set, &mu, 1.0).unwrap();
        spreads.push(rep.measured["shell_spread"]);
        let fine = discretize(&set, Mode::Grid(3)).unwrap();
        refined.push(xi_shell_report(&set, &fine, 1.0).unwrap().measured["shell_spread"]);
    }
    let max_spread = spreads.iter().copied().fold(0.0, f64::max);
    outcome(
        worst <= 1e-12 && max_spread <= 3.0,
        format!(
            "telescoping error {worst:.2e}; shell spread {} ({}); with 3x3 grids {}",
            fmt(&spreads),
            configs.iter().map(|c| c.1).collect::<Vec<_>>().join("; "),
            fmt(&refined)
        ),
    )
}

fn c10_lemmas() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut selection_ok = 0;
    while selection_ok < 1000 {
        let m = rng.random_range(1..=30);
        let f: Vec<f64> = (0..m).map(|_| if rng.random::<f64>() < 0.3 { 0.0 } else { rng.random_range(0.0..5.0) }).collect();
        let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let mean: f64 = f.iter().zip(&w).map(|(a, b)| a * b).sum();
        let second: f64 = f.iter().zip(&w).map(|(a, b)| a * a * b).sum();
        if mean <= 0.0 {
            continue;
        }
        let l = mean * rng.random_range(0.5..1.0);
        let a = second / (l * l) * rng.random_range(1.0..2.0);
        let delta = rng.random_range(0.01..0.99);
        match selection_check(&f, &w, l, a, delta) {
            Ok(v) if v.holds => selection_ok += 1,
            Ok(v) => return outcome(false, format!("selection bound violated: {v:?}")),
            Err(_) => continue,
        }
    }
    let mut subseq_ok = true;
    for _ in 0..1000 {
        let m = rng.random_range(1..=20);
        let a: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..10.0)).collect();
        subseq_ok &= subsequence_check(&a, 0.5, 2.0).unwrap().holds;
    }
    let mut flips_ok = true;
    let mut subfamilies = 0;
    for k in 1..=5 {
        let mut cases = vec![vec![1.0; k]];
        cases.extend((0..4).map(|_| (0..k).map(|_| rng.random_range(0.1..2.0)).collect::<Vec<f64>>()));
        for l in cases {
            let (checked, bad) = flip_subfamilies_check(&l, RANDOM_SUBSETS, 0).unwrap();
            subfamilies += checked;
            flips_ok &= bad.is_none() && flip_injection_check(&l).unwrap().holds();
        }
    }
    for _ in 0..1000 {
        let k = rng.random_range(1..=12);
        let l: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..2.0)).collect();
        flips_ok &= flip_injection_check(&l).unwrap().holds();
    }
    let mc = anticoncentration_check(&vec![1.0; 100], 100_000, 2024).unwrap();
    let normal = 0.317_310_507_862_914_1;
    let mc_ok = (mc.prob_at_sigma - normal).abs() <= 0.02;
    let pass = subseq_ok && flips_ok && mc_ok;
    outcome(
        pass,
        format!(
            "selection 1000/1000; subsequence {subseq_ok}; flip injection {flips_ok} ({subfamilies} exhaustive subfamilies); \
             equal-weight K=100 P(|S| >= sigma) = {:.4} [{:.4}, {:.4}] vs normal limit {normal:.4} (beta_hat {:.3})",
            mc.prob_at_sigma, mc.sigma_interval.low, mc.sigma_interval.high, mc.beta_hat
        ),
    )
}

fn c11_capacity() -> Outcome {
    let h = GaugeFunction::power(1.5);
    let mut parts = Vec::new();
    let mut pass = true;
    for (label, make) in [
        ("ratio 4", Box::new(ratio4) as Box<dyn Fn(usize) -> SigmaSequence>),
        ("h = t^1.5", Box::new(move |n| sigma_from_gauge(&h, 1.0, n, 2).unwrap())),
    ] {
        let ratios: Vec<f64> = (1..=5)
            .map(|n| {
                let rep = capacity_report(&make(n), 2, 1.0, &CapacityOptions::default()).unwrap();
                rep.ratios["capacity_proxy/band"].value
            })
            .collect();
        let band = band_width(&ratios);
        pass &= band <= 4.0;
        parts.push(format!("{label}: band {band:.3} (ratios {})", fmt(&ratios)));
    }
    outcome(pass, parts.join("; "))
}

fn c12_divergence() -> Outcome {
    let h = GaugeFunction::power(1.0);
    let rep = divergence_sweep(&h, 1.0, 2, 1.0, &[2, 3, 4, 5, 6], &GaugeOptions::default()).unwrap();
    let slope = rep.measured["band_exponent"];
    let lower = &rep.series["content_lower"];
    let floor_ok = lower.iter().all(|v| *v >= 0.5 * lower[0]);
    outcome(
        (slope + 0.5).abs() <= 0.1 && floor_ok,
        format!("band exponent {slope:.4}; content lower bounds {}", fmt(lower)),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("1 ladder laws", c1_ladder_laws),
        ("2 geometry", c2_geometry),
        ("3 kernel numerics", c3_kernel),
        ("4 oracle equivalence", c4_oracles),
        ("5 norm band", c5_norm_band),
        ("6 operator band", c6_operator_band),
        ("7 distribution", c7_distribution),
        ("8 threshold cubes", c8_threshold),
        ("9 shell decomposition", c9_xi),
        ("10 lemma checkers", c10_lemmas),
        ("11 capacity", c11_capacity),
        ("12 divergence", c12_divergence),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {name}: {verdict} ({:.1}s) {}", start.elapsed().as_secs_f64(), o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {failed} criteria failed");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
