use super::report::{Context, EstimateReport};
use super::PowerOptions;
use crate::error::Result;
use crate::geometry::CantorSet;
use crate::measure::{discretize, DiscreteMeasure, Mode};
use crate::riesz::{default_eps_grid, sup_operator_norm, SupNorm};
use crate::sequence::{density, ladder_stats_strict, regularize, Ladder, LadderParams, SigmaSequence};
use crate::sum;

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityOptions {
    pub params: LadderParams,
    pub mode: Mode,
    pub power: PowerOptions,
    /// Treat the sequence as the head of an infinite one and report the
    /// tail bound past the last block.
    pub infinite: bool,
}

impl Default for CapacityOptions {
    fn default() -> Self {
        Self {
            params: LadderParams::default(),
            mode: Mode::Centers,
            power: PowerOptions::default(),
            infinite: false,
        }
    }
}

/// `min(1, 1/N)` with `N` the supremum over `eps_grid` of the operator norm
/// of `nu`.
pub fn capacity_proxy(nu: &DiscreteMeasure, eps_grid: &[f64], s: f64, power: &PowerOptions) -> Result<(f64, SupNorm)> {
    let sup = sup_operator_norm(nu, eps_grid, s, power.tol, power.max_iter)?;
    Ok(((1.0 / sup.norm).min(1.0), sup))
}

/// Zero and the default truncation radii of `set`.
pub fn operator_eps_grid(set: &CantorSet) -> Vec<f64> {
    let mut grid = vec![0.0];
    grid.extend(default_eps_grid(set.ladder()));
    grid
}

/// `[Σ_j (2^{-dj}/σ_j^s)²]^{-1/2}`.
pub fn capacity_band(sigma: &SigmaSequence, d: usize, s: f64) -> f64 {
    sum::sum((1..=sigma.len()).map(|j| density(d, s, j, sigma.get(j)).powi(2))).powf(-0.5)
}

/// The last block start chosen by the drop rule rather than by truncation.
pub fn last_rule_block(ladder: &Ladder) -> usize {
    let sigma = ladder.sigma();
    let sel = ladder.selected();
    sel.windows(2)
        .rev()
        .find(|w| {
            let drop = ladder.alpha() * sigma.get(w[0]) * (-((w[1] - w[0]) as f64)).exp2();
            sigma.get(w[1]) <= drop
        })
        .map_or(1, |w| w[1])
}

/// Bound on `Σ_{j>j_m} (2^{-dj}/σ_j^s)²` for a sequence whose blocks stop
/// at `j_m`.
pub fn tail_bound(sigma: &SigmaSequence, alpha: f64, jm: usize, d: usize, s: f64) -> f64 {
    let lead = density(d, s, jm, sigma.get(jm)).powi(2);
    let r = (-2.0 * (d as f64 - s)).exp2();
    alpha.powf(-2.0 * s) * lead * r / (1.0 - r)
}

/// Capacity proxy of the uniform measure against the two-sided band.
pub fn capacity_report(sigma: &SigmaSequence, d: usize, s: f64, opts: &CapacityOptions) -> Result<EstimateReport> {
    let ladder = regularize(sigma, opts.params)?;
    let stats = ladder_stats_strict(&ladder, d, s)?;
    let set = CantorSet::build(&ladder, d)?;
    let nu = discretize(&set, opts.mode)?;
    let (proxy, sup) = capacity_proxy(&nu, &operator_eps_grid(&set), s, &opts.power)?;
    let band = capacity_band(sigma, d, s);

    let mut ctx = Context::for_set(&set, s)
        .with_extra("mode", opts.mode.to_string())
        .with_extra("tol", opts.power.tol)
        .with_extra("infinite", opts.infinite);
    if let Mode::Grid(q) = opts.mode {
        ctx = ctx.with_q(q);
    }
    let mut rep = EstimateReport::new("capacity", ctx);
    rep.measure("operator_norm", sup.norm)
        .measure("capacity_proxy", proxy)
        .measure("argmax_eps", sup.argmax_eps)
        .theory("band", band)
        .theory("theta_sq_sum", stats.total);
    rep.ratio("capacity_proxy/band", "capacity_proxy", "band")?;
    rep.column("eps", sup.per_eps.iter().map(|p| p.0).collect())
        .column("norm", sup.per_eps.iter().map(|p| p.1).collect());
    if opts.infinite {
        let jm = last_rule_block(&ladder);
        let head = sigma.truncate(jm)?;
        let tail = tail_bound(sigma, ladder.alpha(), jm, d, s);
        let head_sum = capacity_band(&head, d, s).powi(-2);
        rep.measure("last_block", jm as f64)
            .theory("tail_bound", tail)
            .theory("band_head", head_sum.powf(-0.5))
            .theory("band_infinite_lower", (head_sum + tail).powf(-0.5));
        rep.ratio("capacity_proxy/band_infinite_lower", "capacity_proxy", "band_infinite_lower")?;
        if jm < sigma.len() {
            rep.note(format!(
                "tail bound assumes no block starts after level {jm}"
            ));
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_term_band() {
        let sig = SigmaSequence::new(vec![0.25]).unwrap();
        assert_eq!(capacity_band(&sig, 2, 1.0), 1.0);
        let rep = capacity_report(&sig, 2, 1.0, &CapacityOptions::default()).unwrap();
        let r = &rep.ratios["capacity_proxy/band"];
        assert_eq!(r.denominator_value, 1.0);
        assert!(r.numerator_value > 0.0 && r.numerator_value <= 1.0);
    }

    #[test]
    fn proxy_is_reciprocal_in_mass() {
        let ladder = regularize(&SigmaSequence::geometric(0.25, 4.0, 2).unwrap(), LadderParams::default()).unwrap();
        let set = CantorSet::build(&ladder, 2).unwrap();
        let nu = discretize(&set, Mode::Centers).unwrap();
        let grid = operator_eps_grid(&set);
        let p = PowerOptions::default();
        let (a, sa) = capacity_proxy(&nu, &grid, 1.0, &p).unwrap();
        let (b, sb) = capacity_proxy(&nu.scaled(8.0).unwrap(), &grid, 1.0, &p).unwrap();
        assert!((sb.norm / sa.norm - 8.0).abs() < 1e-6);
        assert!((b - (1.0 / (8.0 * sa.norm)).min(1.0)).abs() < 1e-9);
        assert!(a >= b);
    }

    #[test]
    fn tail_bound_geometric_sum() {
        // one block at j = 1 with sigma_1 = 1: lead term 2^{-2d}
        let sig = SigmaSequence::new(vec![1.0]).unwrap();
        let t = tail_bound(&sig, 0.5, 1, 1, 0.5);
        // alpha^{-1} * 2^{-2} * (1/2)/(1 - 1/2)
        assert!((t - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rule_block_ignores_truncation() {
        let sig = SigmaSequence::geometric(0.25, 4.0, 4).unwrap();
        let ladder = regularize(&sig, LadderParams::default()).unwrap();
        assert_eq!(ladder.selected(), &[1, 4]);
        assert_eq!(last_rule_block(&ladder), 1);
        let sig = SigmaSequence::geometric(0.25, 4.0, 5).unwrap();
        let ladder = regularize(&sig, LadderParams::default()).unwrap();
        assert_eq!(last_rule_block(&ladder), 5);
    }
}
