use cantor_riesz::estimates::{
    capacity_report, norm_ratio_report, operator_ratio_report, sweep_summary, CapacityOptions,
    Context, EstimateReport, NormOptions, PowerOptions,
};
use cantor_riesz::measure::discretize;
use cantor_riesz::riesz::{transform, xi_decomposition, Backend, Exclusion, TargetSet};
use cantor_riesz::sequence::{ladder_stats, regularize, LadderParams, SigmaSequence};
use cantor_riesz::{CantorSet, Ladder, Mode};

fn ratio4_set(n: usize) -> CantorSet {
    let sigma = SigmaSequence::geometric(0.25, 4.0, n).unwrap();
    CantorSet::build(&regularize(&sigma, LadderParams::default()).unwrap(), 2).unwrap()
}

#[test]
fn sequence_to_report_round_trip() {
    let set = ratio4_set(3);
    let rep = norm_ratio_report(&set, 1.0, 3, &NormOptions::default()).unwrap();
    let back = EstimateReport::from_json(&rep.to_json()).unwrap();
    assert_eq!(back, rep);
    assert!(rep.all_checks_pass());
    let stats = ladder_stats(set.ladder(), 2, 1.0).unwrap();
    assert_eq!(rep.theoretical["theta_sq_sum"], stats.total);
}

#[test]
fn ladder_text_survives_the_set() {
    let set = ratio4_set(4);
    let text = set.ladder().to_text(2, 1.0);
    let (d, s, ladder) = Ladder::from_text(&text).unwrap();
    let rebuilt = CantorSet::build(&ladder, d).unwrap();
    assert_eq!(s, 1.0);
    assert_eq!(rebuilt.to_text(1.0), set.to_text(1.0));
}

#[test]
fn reports_are_deterministic() {
    let set = ratio4_set(2);
    let power = PowerOptions::default();
    let a = operator_ratio_report(&set, 1.0, 3, &power).unwrap().to_json();
    let b = operator_ratio_report(&set, 1.0, 3, &power).unwrap().to_json();
    assert_eq!(a, b);
}

#[test]
fn operator_norm_dominates_transform_norm() {
    for n in 1..=3 {
        let rep = operator_ratio_report(&ratio4_set(n), 1.0, 3, &PowerOptions::default()).unwrap();
        assert!(rep.checks["operator_norm_dominates_constant_test"], "n = {n}");
    }
}

#[test]
fn backends_agree_on_the_set() {
    let set = ratio4_set(4);
    let mu = discretize(&set, Mode::Centers).unwrap();
    let targets = TargetSet::nodes(&mu);
    let naive = transform(Backend::Naive, &mu, &targets, 0.0, 1.0, Exclusion::OwnNode).unwrap();
    let tree = transform(Backend::Tree { mac: 0.3 }, &mu, &targets, 0.0, 1.0, Exclusion::OwnNode).unwrap();
    let scale = naive.magnitudes().into_iter().fold(0.0, f64::max);
    for i in 0..naive.len() {
        for c in 0..2 {
            assert!((naive.value(i)[c] - tree.value(i)[c]).abs() <= 1e-2 * scale);
        }
    }
}

#[test]
fn shells_telescope_at_every_node() {
    let set = ratio4_set(3);
    let mu = discretize(&set, Mode::Grid(3)).unwrap();
    let targets = TargetSet::nodes(&mu);
    let field = transform(Backend::Naive, &mu, &targets, 0.0, 1.0, Exclusion::OwnNode).unwrap();
    for i in (0..targets.len()).step_by(7) {
        let parts = xi_decomposition(&mu, &set, targets.point(i), 1.0).unwrap();
        for c in 0..2 {
            let total: f64 = parts.iter().map(|p| p[c]).sum();
            assert!((total - field.value(i)[c]).abs() <= 1e-12 * (1.0 + field.value(i)[c].abs()));
        }
    }
}

#[test]
fn sweep_summary_collects_columns() {
    let reports: Vec<EstimateReport> = (1..=3)
        .map(|n| {
            let sigma = SigmaSequence::geometric(0.25, 4.0, n).unwrap();
            capacity_report(&sigma, 2, 1.0, &CapacityOptions::default()).unwrap()
        })
        .collect();
    let summary = sweep_summary("capacity_sweep", Context::new(2, 1.0), &reports, &["capacity_proxy/band"], "capacity_proxy/band").unwrap();
    let csv = summary.series_csv(&["n", "capacity_proxy/band"]).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("n,capacity_proxy/band\n1,"));
    assert!(summary.measured["band_width"] >= 1.0);
}
