use std::time::Instant;

use cantor_riesz::estimates::{
    anticoncentration_check, calibrate_threshold, capacity_report, distribution_report,
    divergence_sweep, flip_injection_check, gauge_experiment, norm_ratio_report,
    operator_ratio_report, selection_check, subsequence_check, sweep_summary, threshold_report,
    CapacityOptions, Context, DistributionOptions, EstimateReport, GaugeOptions, NormOptions,
    PowerOptions, MAX_FLIP_K,
};
use cantor_riesz::measure::discretize;
use cantor_riesz::riesz::{transform, Backend, Exclusion, RieszField, TargetSet};
use cantor_riesz::sequence::regularize;
use cantor_riesz::{CantorSet, DiscreteMeasure, Mode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{parse_gauge, RunConfig};
use crate::output::{progress, Meta, OutDir};

/// What a subcommand leaves behind besides its files.
#[derive(Debug, Default)]
pub struct Outcome {
    pub failed_checks: Vec<String>,
}

pub struct Run<'a> {
    pub name: &'a str,
    pub cfg: &'a RunConfig,
    pub out: &'a OutDir,
    pub meta: &'a mut Meta,
}

impl Run<'_> {
    fn write(&mut self, name: &str, contents: &str) -> anyhow::Result<()> {
        self.out.write(name, contents)?;
        self.meta.files.push(name.to_string());
        Ok(())
    }

    fn write_report(&mut self, name: &str, rep: &EstimateReport) -> anyhow::Result<()> {
        let mut text = rep.to_json();
        text.push('\n');
        self.write(name, &text)
    }

    fn progress(&self, msg: impl std::fmt::Display) {
        progress(self.name, msg);
    }

    fn set(&self, n: usize) -> anyhow::Result<CantorSet> {
        let ladder = regularize(&self.cfg.sigma(n)?, self.cfg.params()?)?;
        Ok(CantorSet::build(&ladder, self.cfg.d)?)
    }

    fn measure(&self, set: &CantorSet) -> anyhow::Result<DiscreteMeasure> {
        let mode = if self.cfg.q == 1 { Mode::Centers } else { Mode::Grid(self.cfg.q) };
        Ok(discretize(set, mode)?)
    }

    fn power(&self) -> PowerOptions {
        PowerOptions {
            tol: self.cfg.tol,
            max_iter: self.cfg.max_iter,
        }
    }

    /// Summary context carrying the resolved configuration without the
    /// fields that do not affect results.
    fn context(&self) -> anyhow::Result<Context> {
        let mut doc = serde_json::to_value(self.cfg)?;
        if let Some(map) = doc.as_object_mut() {
            map.remove("out");
            map.remove("workers");
        }
        Ok(Context::new(self.cfg.d, self.cfg.s)
            .with_seed(self.cfg.seed)
            .with_extra("command", self.name)
            .with_extra("config", doc))
    }

    /// Writes one report per depth, the summary `report.json` and `sweep.csv`.
    fn finish_sweep(&mut self, reports: &[EstimateReport], columns: &[&str], band_key: &str) -> anyhow::Result<Outcome> {
        let mut outcome = Outcome::default();
        for rep in reports {
            let n = rep.context.n.unwrap_or(0);
            self.write_report(&format!("report_n{n}.json"), rep)?;
            for (name, ok) in &rep.checks {
                if !ok {
                    outcome.failed_checks.push(format!("n={n}: {name}"));
                }
            }
        }
        let summary = sweep_summary(&format!("{}_sweep", reports[0].kind), self.context()?, reports, columns, band_key)?;
        let mut order = vec!["n"];
        order.extend_from_slice(columns);
        self.write("sweep.csv", &summary.series_csv(&order)?)?;
        self.write_report("report.json", &summary)?;
        Ok(outcome)
    }
}

pub fn regularize_cmd(run: &mut Run) -> anyhow::Result<Outcome> {
    let n = run.cfg.n.last;
    let ladder = regularize(&run.cfg.sigma(n)?, run.cfg.params()?)?;
    let text = ladder.to_text(run.cfg.d, run.cfg.s);
    run.write("ladder.txt", &text)?;
    print!("{text}");
    Ok(Outcome {
        failed_checks: ladder.violations(),
    })
}

pub fn build_cmd(run: &mut Run) -> anyhow::Result<Outcome> {
    let set = run.set(run.cfg.n.last)?;
    run.progress(format!("{} leaf cubes", set.leaf_count()));
    run.write("ladder.txt", &set.ladder().to_text(run.cfg.d, run.cfg.s))?;
    run.write("set.txt", &set.to_text(run.cfg.s))?;
    Ok(Outcome {
        failed_checks: set.violations(),
    })
}

pub fn transform_cmd(run: &mut Run) -> anyhow::Result<Outcome> {
    let cfg = run.cfg;
    let set = run.set(cfg.n.last)?;
    let mu = run.measure(&set)?;
    let targets = TargetSet::nodes(&mu);
    run.progress(format!("{} nodes, backend {}", mu.len(), cfg.backend()));
    let field = transform(cfg.backend(), &mu, &targets, cfg.eps, cfg.s, Exclusion::OwnNode)?;
    run.write("field.txt", &field.to_text())?;

    let mags = field.magnitudes();
    let norm_sq: f64 = mags.iter().zip(mu.weights()).map(|(m, w)| m * m * w).sum();
    let mut rep = EstimateReport::new("transform", run.context()?.with_extra("eps", cfg.eps));
    rep.measure("nodes", mu.len() as f64)
        .measure("norm_sq", norm_sq)
        .measure("max_magnitude", mags.iter().copied().fold(0.0, f64::max));
    run.write_report("report.json", &rep)?;
    Ok(Outcome::default())
}

pub fn verify_norm_cmd(run: &mut Run) -> anyhow::Result<Outcome> {
    let opts = NormOptions {
        backend: run.cfg.backend(),
        ..NormOptions::default()
    };
    let mut reports = Vec::new();
    for n in run.cfg.depths() {
        run.progress(format!("n={n}"));
        reports.push(norm_ratio_report(&run.set(n)?, run.cfg.s, run.cfg.q, &opts)?);
    }
    run.finish_sweep(&reports, &["norm_sq", "theta_sq_sum", "norm_sq/theta_sq_sum"], "norm_sq/theta_sq_sum")
}

pub fn verify_operator_cmd(run: &mut Run) -> anyhow::Result<Outcome> {
    let mut reports = Vec::new();
    for n in run.cfg.depths() {
        run.progress(format!("n={n}"));
        reports.push(operator_ratio_report(&run.set(n)?, run.cfg.s, run.cfg.q, &run.power())?);
    }
    let key = "operator_norm_sq/theta_sq_sum";
    run.finish_sweep(&reports, &["operator_norm_sq", "theta_sq_sum", key], key)
}

pub fn capacity_cmd(run: &mut Run) -> anyhow::Result<Outcome> {
    let cfg = run.cfg;
    let opts = CapacityOptions {
        params: cfg.params()?,
        mode: if cfg.q == 1 { Mode::Centers } else { Mode::Grid(cfg.q) },
        power: run.power(),
        infinite: cfg.infinite,
    };
    let mut reports = Vec::new();
    for n in cfg.depths() {
        run.progress(format!("n={n}"));
        reports.push(capacity_report(&cfg.sigma(n)?, cfg.d, cfg.s, &opts)?);
    }
    run.finish_sweep(&reports, &["capacity_proxy", "band", "capacity_proxy/band"], "capacity_proxy/band")
}

pub fn distribution_cmd(run: &mut Run) -> anyhow::Result<Outcome> {
    let opts = DistributionOptions {
        maximal: run.cfg.maximal,
    };
    let mut reports = Vec::new();
    for n in run.cfg.depths() {
        run.progress(format!("n={n}"));
        let set = run.set(n)?;
        let mu = run.measure(&set)?;
        reports.push(distribution_report(&mu, &set, run.cfg.s, &run.cfg.b_grid, opts)?);
    }
    run.finish_sweep(&reports, &["mean_sq", "survival_at_0.1"], "survival_at_0.1")
}

pub fn cubes_cmd(run: &mut Run) -> anyhow::Result<Outcome> {
    let cfg = run.cfg;
    let depths = cfg.depths();
    let c0 = match cfg.c0 {
        Some(c0) => c0,
        None => {
            let set = run.set(depths[0])?;
            let c0 = calibrate_threshold(&set, &run.measure(&set)?, cfg.s, cfg.fraction)?;
            run.progress(format!("calibrated c0 = {c0} at n={}", depths[0]));
            c0
        }
    };
    let mut reports = Vec::new();
    for n in depths {
        run.progress(format!("n={n}"));
        let set = run.set(n)?;
        reports.push(threshold_report(&set, &run.measure(&set)?, c0, cfg.s, None)?);
    }
    run.finish_sweep(&reports, &["count_full/total", "count_reduced/total"], "count_reduced/total")
}

pub fn lemmas_cmd(run: &mut Run) -> anyhow::Result<Outcome> {
    let cfg = run.cfg;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut selection = (0usize, 0usize);
    while selection.0 < cfg.cases {
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
        if let Ok(v) = selection_check(&f, &w, l, a, rng.random_range(0.01..0.99)) {
            selection.0 += 1;
            selection.1 += v.holds as usize;
        }
    }
    run.progress("selection done");

    let mut subsequence = 0;
    for _ in 0..cfg.cases {
        let m = rng.random_range(1..=20);
        let a: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..10.0)).collect();
        subsequence += subsequence_check(&a, 0.5, 2.0)?.holds as usize;
    }

    let mut flips = 0;
    for _ in 0..cfg.cases {
        let k = rng.random_range(1..=MAX_FLIP_K);
        let l: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..2.0)).collect();
        flips += flip_injection_check(&l)?.holds() as usize;
    }
    run.progress("flip injection done");

    let mc = anticoncentration_check(&[1.0; 100], cfg.trials, cfg.seed)?;
    let mut rep = EstimateReport::new("lemmas", run.context()?.with_extra("cases", cfg.cases));
    rep.measure("selection_holds", selection.1 as f64)
        .measure("subsequence_holds", subsequence as f64)
        .measure("flip_holds", flips as f64)
        .theory("cases", cfg.cases as f64)
        .measure("equal_weight_beta_hat", mc.beta_hat)
        .measure("equal_weight_prob_at_sigma", mc.prob_at_sigma)
        .measure("equal_weight_prob_low", mc.sigma_interval.low)
        .measure("equal_weight_prob_high", mc.sigma_interval.high);
    rep.check("selection", selection.1 == selection.0)
        .check("subsequence", subsequence == cfg.cases)
        .check("flip_injection", flips == cfg.cases);
    run.write_report("report.json", &rep)?;
    Ok(Outcome {
        failed_checks: rep.checks.iter().filter(|c| !c.1).map(|c| c.0.clone()).collect(),
    })
}

pub fn gauge_cmd(run: &mut Run) -> anyhow::Result<Outcome> {
    let cfg = run.cfg;
    let h = parse_gauge(cfg.gauge.as_deref().unwrap_or("power:1.5"))?;
    let opts = GaugeOptions {
        params: cfg.params()?,
        power: run.power(),
        ..GaugeOptions::default()
    };
    let depths = cfg.depths();
    let mut reports = Vec::new();
    for &n in &depths {
        run.progress(format!("n={n}"));
        reports.push(gauge_experiment(&h, n, cfg.level, cfg.d, cfg.s, cfg.c4, &opts)?);
    }
    if depths.len() >= 2 {
        let sweep = divergence_sweep(&h, cfg.sigma0, cfg.d, cfg.s, &depths, &opts)?;
        run.write_report("divergence.json", &sweep)?;
    }
    run.finish_sweep(
        &reports,
        &["superlevel_fraction", "content_lower", "capacity_proxy", "band", "capacity_proxy/band"],
        "capacity_proxy/band",
    )
}

fn max_relative(a: &RieszField, b: &RieszField) -> f64 {
    let scale = a.magnitudes().into_iter().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    (0..a.len())
        .map(|i| {
            let diff: f64 = a.value(i).iter().zip(b.value(i)).map(|(x, y)| (x - y) * (x - y)).sum();
            let mag: f64 = a.value(i).iter().map(|x| x * x).sum();
            diff.sqrt() / mag.sqrt().max(1e-3 * scale)
        })
        .fold(0.0, f64::max)
}

pub fn bench_cmd(run: &mut Run) -> anyhow::Result<Outcome> {
    let cfg = run.cfg;
    let tree = Backend::Tree { mac: cfg.mac };
    let (mut ns, mut nodes, mut devs) = (Vec::new(), Vec::new(), Vec::new());
    for n in cfg.depths() {
        let set = run.set(n)?;
        let mu = run.measure(&set)?;
        let targets = TargetSet::nodes(&mu);
        let t0 = Instant::now();
        let naive = transform(Backend::Naive, &mu, &targets, cfg.eps, cfg.s, Exclusion::OwnNode)?;
        let t1 = Instant::now();
        let fast = transform(tree, &mu, &targets, cfg.eps, cfg.s, Exclusion::OwnNode)?;
        let t2 = Instant::now();
        let dev = max_relative(&naive, &fast);
        run.progress(format!("n={n}: {} nodes, deviation {dev:.3e}", mu.len()));
        run.meta.timings.insert(format!("naive_n{n}"), (t1 - t0).as_secs_f64().into());
        run.meta.timings.insert(format!("tree_n{n}"), (t2 - t1).as_secs_f64().into());
        ns.push(n as f64);
        nodes.push(mu.len() as f64);
        devs.push(dev);
    }
    let mut rep = EstimateReport::new("bench", run.context()?);
    rep.measure("max_relative_deviation", devs.iter().copied().fold(0.0, f64::max))
        .column("n", ns)
        .column("nodes", nodes)
        .column("max_relative_deviation", devs);
    rep.note("wall times are recorded in meta.json");
    run.write("sweep.csv", &rep.series_csv(&["n", "nodes", "max_relative_deviation"])?)?;
    run.write_report("report.json", &rep)?;
    Ok(Outcome::default())
}
