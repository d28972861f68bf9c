use super::report::{Context, EstimateReport};
use crate::error::{Error, Result};
use crate::geometry::CantorSet;
use crate::measure::DiscreteMeasure;
use crate::riesz::{default_eps_grid, transform_maximal, transform_truncated, Exclusion, TargetSet};
use crate::sum::{self, Neumaier};

/// The threshold fraction reported as the headline statistic.
pub const PORTION_B: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DistributionOptions {
    /// Also evaluate the maximal transform over the default truncation grid.
    pub maximal: bool,
}

/// `b ↦ ν{v > b·a} / ‖ν‖` for squared values `v` with `ν`-mean `a`.
pub fn survival_curve(values_sq: &[f64], weights: &[f64], b_grid: &[f64]) -> (f64, Vec<f64>) {
    let total = sum::sum(weights.iter().copied());
    let mean = sum::sum(values_sq.iter().zip(weights).map(|(v, w)| v * w)) / total;
    let curve = b_grid
        .iter()
        .map(|&b| {
            let mut acc = Neumaier::new();
            for (v, w) in values_sq.iter().zip(weights) {
                if *v > b * mean {
                    acc.add(*w);
                }
            }
            acc.value() / total
        })
        .collect();
    (mean, curve)
}

fn with_portion(b_grid: &[f64]) -> Vec<f64> {
    let mut grid = b_grid.to_vec();
    if !grid.contains(&PORTION_B) {
        grid.push(PORTION_B);
    }
    grid
}

/// Distribution of `|R_μ|²` over the nodes of `mu`: its mean, the survival
/// curve over `b_grid` and the fraction at `b = 0.1`.
pub fn distribution_report(
    mu: &DiscreteMeasure,
    set: &CantorSet,
    s: f64,
    b_grid: &[f64],
    opts: DistributionOptions,
) -> Result<EstimateReport> {
    if b_grid.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
        return Err(Error::Parameter("b grid entries must be finite and non-negative".into()));
    }
    if mu.dim() != set.dim() {
        return Err(Error::Dimension {
            expected: set.dim(),
            got: mu.dim(),
        });
    }
    let targets = TargetSet::nodes(mu);
    let field = transform_truncated(mu, &targets, 0.0, s, Exclusion::OwnNode)?;
    let mags = field.magnitudes();
    let sq: Vec<f64> = mags.iter().map(|m| m * m).collect();
    let grid = with_portion(b_grid);
    let (mean, curve) = survival_curve(&sq, mu.weights(), &grid);
    let portion = curve[grid.iter().position(|&b| b == PORTION_B).expect("inserted")];

    let mut ctx = Context::for_set(set, s);
    if let Some(m) = mu.mode() {
        ctx = ctx.with_extra("mode", m.to_string());
    }
    let mut rep = EstimateReport::new("distribution", ctx);
    rep.measure("mean_sq", mean)
        .measure("survival_at_0.1", portion)
        .measure("nonzero_fraction", survival_curve(&sq, mu.weights(), &[0.0]).1[0]);
    rep.column("b", b_grid.to_vec())
        .column("survival", curve[..b_grid.len()].to_vec());
    let markov = grid
        .iter()
        .zip(&curve)
        .all(|(b, f)| f * b * mean <= mean * (1.0 + 1e-12));
    rep.check("markov", markov);
    if b_grid.windows(2).all(|w| w[0] <= w[1]) {
        let monotone = curve[..b_grid.len()].windows(2).all(|w| w[1] <= w[0]);
        rep.check("survival_nonincreasing", monotone);
    }

    if opts.maximal {
        let eps_grid = default_eps_grid(set.ladder());
        let max = transform_maximal(mu, &targets, &eps_grid, s)?;
        // the untruncated value is the ε → 0 end of the supremum
        let msq: Vec<f64> = max
            .values
            .iter()
            .zip(&mags)
            .map(|(a, b)| a.max(*b).powi(2))
            .collect();
        let (mmean, mcurve) = survival_curve(&msq, mu.weights(), &grid);
        let mportion = mcurve[grid.iter().position(|&b| b == PORTION_B).expect("inserted")];
        rep.measure("maximal_mean_sq", mmean)
            .measure("maximal_survival_at_0.1", mportion)
            .column("maximal_survival", mcurve[..b_grid.len()].to_vec());
        rep.ratio("maximal_mean_sq/mean_sq", "maximal_mean_sq", "mean_sq")?;
        let dominates = msq.iter().zip(&sq).all(|(a, b)| a >= b);
        rep.check("maximal_dominates", dominates);
    }
    Ok(rep)
}
