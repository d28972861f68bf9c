use serde::Serialize;

use super::report::{Context, EstimateReport};
use crate::error::{Error, Result};
use crate::geometry::CantorSet;
use crate::measure::DiscreteMeasure;
use crate::riesz::{transform_truncated, Exclusion, TargetSet};
use crate::sequence::ladder_stats;

/// Level-`n` cubes whose center transform exceeds `(c0/T^s)·(Σθ_j²)^{1/2}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdCubeSets {
    pub c0: f64,
    pub threshold: f64,
    pub total: usize,
    /// Cube indices above the threshold for the full transform.
    pub full: Vec<u64>,
    /// Cube indices above the threshold with the own cube removed.
    pub reduced: Vec<u64>,
    /// `|R_ν(x_k)|` per cube.
    pub values_full: Vec<f64>,
    /// `|R̃_ν(x_k)|` per cube.
    pub values_reduced: Vec<f64>,
    /// Minimum cube mass of the measure.
    pub min_cube_mass: f64,
}

impl ThresholdCubeSets {
    pub fn count_full(&self) -> usize {
        self.full.len()
    }

    pub fn count_reduced(&self) -> usize {
        self.reduced.len()
    }
}

/// `(Σθ_j²)^{1/2} / T^s`, the threshold per unit of `c0`.
pub fn threshold_unit(set: &CantorSet, s: f64) -> Result<f64> {
    let stats = ladder_stats(set.ladder(), set.dim(), s)?;
    Ok(stats.total.sqrt() / set.frame().powf(s))
}

fn center_values(set: &CantorSet, nu: &DiscreteMeasure, s: f64, offset: Option<&[f64]>) -> Result<(Vec<f64>, Vec<f64>)> {
    if nu.dim() != set.dim() || nu.depth() != set.depth() {
        return Err(Error::Parameter("measure is not tagged by this set's leaf cubes".into()));
    }
    if !nu.equally_distributed() {
        return Err(Error::Hypothesis("per-cube masses are unequal".into()));
    }
    let mut targets = TargetSet::leaf_centers(set);
    if let Some(off) = offset {
        targets = targets.shifted(off)?;
    }
    let full = transform_truncated(nu, &targets, 0.0, s, Exclusion::OwnNode)?.magnitudes();
    let reduced = transform_truncated(nu, &targets, 0.0, s, Exclusion::OwnCube)?.magnitudes();
    Ok((full, reduced))
}

fn above(values: &[f64], threshold: f64) -> Vec<u64> {
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > threshold)
        .map(|(k, _)| k as u64)
        .collect()
}

/// Count the cubes exceeding the threshold at the centers, or at the
/// centers moved by `offset`.
pub fn threshold_cube_sets(
    set: &CantorSet,
    nu: &DiscreteMeasure,
    c0: f64,
    s: f64,
    offset: Option<&[f64]>,
) -> Result<ThresholdCubeSets> {
    if !(c0 >= 0.0 && c0.is_finite()) {
        return Err(Error::Parameter(format!("c0 = {c0} must be finite and non-negative")));
    }
    let threshold = c0 * threshold_unit(set, s)?;
    let (values_full, values_reduced) = center_values(set, nu, s, offset)?;
    let min_cube_mass = nu
        .cube_masses()
        .iter()
        .map(|m| m.1)
        .fold(f64::INFINITY, f64::min);
    Ok(ThresholdCubeSets {
        c0,
        threshold,
        total: set.leaf_count(),
        full: above(&values_full, threshold),
        reduced: above(&values_reduced, threshold),
        values_full,
        values_reduced,
        min_cube_mass,
    })
}

/// The largest `c0` for which at least `fraction` of the cubes exceed the
/// threshold for the reduced transform.
pub fn calibrate_threshold(set: &CantorSet, nu: &DiscreteMeasure, s: f64, fraction: f64) -> Result<f64> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Parameter(format!("fraction = {fraction} not in (0, 1]")));
    }
    let (_, mut reduced) = center_values(set, nu, s, None)?;
    reduced.sort_by(|a, b| b.total_cmp(a));
    let rank = (fraction * reduced.len() as f64).ceil() as usize;
    let v = reduced[rank.clamp(1, reduced.len()) - 1];
    if v <= 0.0 {
        return Err(Error::Calibration(format!(
            "fewer than {rank} cubes carry a nonzero reduced transform"
        )));
    }
    // strictly below v so that the cube attaining it is counted
    Ok(v / threshold_unit(set, s)? * (1.0 - 1e-9))
}

/// Report form of [`threshold_cube_sets`] with the Chebyshev consistency
/// check against the discrete norm of the full transform.
pub fn threshold_report(
    set: &CantorSet,
    nu: &DiscreteMeasure,
    c0: f64,
    s: f64,
    offset: Option<&[f64]>,
) -> Result<EstimateReport> {
    let sets = threshold_cube_sets(set, nu, c0, s, offset)?;
    let mut ctx = Context::for_set(set, s).with_extra("c0", c0);
    if let Some(off) = offset {
        ctx = ctx.with_extra("offset", off);
    }
    let mut rep = EstimateReport::new("threshold_cubes", ctx);
    rep.measure("count_full", sets.count_full() as f64)
        .measure("count_reduced", sets.count_reduced() as f64)
        .theory("total", sets.total as f64)
        .theory("threshold", sets.threshold);
    rep.ratio("count_full/total", "count_full", "total")?;
    rep.ratio("count_reduced/total", "count_reduced", "total")?;
    // cube masses are equal, so Σ_k |R(x_k)|² ν(E_k) ≥ #ℰ·t²·min mass
    let sum_sq: f64 = crate::sum::sum(sets.values_full.iter().map(|v| v * v));
    let norm_sq = sum_sq * sets.min_cube_mass;
    rep.measure("center_norm_sq", norm_sq);
    let lhs = sets.count_full() as f64 * sets.threshold.powi(2);
    rep.check("chebyshev", lhs <= norm_sq / sets.min_cube_mass * (1.0 + 1e-12));
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{discretize, Mode};
    use crate::sequence::{regularize, LadderParams, SigmaSequence};

    fn setup(n: usize) -> (CantorSet, DiscreteMeasure) {
        let sig = SigmaSequence::geometric(0.25, 4.0, n).unwrap();
        let set = CantorSet::build(&regularize(&sig, LadderParams::default()).unwrap(), 2).unwrap();
        let nu = discretize(&set, Mode::Centers).unwrap();
        (set, nu)
    }

    #[test]
    fn zero_threshold_counts_nonzero_values() {
        let (set, nu) = setup(2);
        let t = threshold_cube_sets(&set, &nu, 0.0, 1.0, None).unwrap();
        let nonzero = t.values_full.iter().filter(|v| **v > 0.0).count();
        assert_eq!(t.count_full(), nonzero);
        assert!(t.count_full() <= t.total);
    }

    #[test]
    fn counts_fall_with_c0() {
        let (set, nu) = setup(3);
        let mut last = usize::MAX;
        for i in 0..30 {
            let t = threshold_cube_sets(&set, &nu, i as f64 * 0.2, 1.0, None).unwrap();
            assert!(t.count_reduced() <= last);
            last = t.count_reduced();
        }
    }

    #[test]
    fn calibration_keeps_fraction() {
        let (set, nu) = setup(2);
        let c0 = calibrate_threshold(&set, &nu, 1.0, 0.1).unwrap();
        let t = threshold_cube_sets(&set, &nu, c0, 1.0, None).unwrap();
        assert!(t.count_reduced() as f64 >= 0.1 * t.total as f64);
        let rep = threshold_report(&set, &nu, c0, 1.0, None).unwrap();
        assert!(rep.all_checks_pass());
    }

    #[test]
    fn unequal_masses_rejected() {
        let (set, nu) = setup(1);
        let mut w = nu.weights().to_vec();
        w[0] *= 2.0;
        let bad = DiscreteMeasure::from_parts(2, nu.points().to_vec(), w, nu.tags().to_vec(), 1, None).unwrap();
        assert!(matches!(
            threshold_cube_sets(&set, &bad, 1.0, 1.0, None),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn shifted_points_move_values() {
        let (set, nu) = setup(2);
        let off = [0.1 * set.ladder().ell_at(2), 0.0];
        let a = threshold_cube_sets(&set, &nu, 0.0, 1.0, None).unwrap();
        let b = threshold_cube_sets(&set, &nu, 0.0, 1.0, Some(&off)).unwrap();
        assert_ne!(a.values_reduced, b.values_reduced);
    }
}
