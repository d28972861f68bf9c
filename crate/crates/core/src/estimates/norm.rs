use super::report::{band_width, Context, EstimateReport};
use super::PowerOptions;
use crate::error::{Error, Result};
use crate::geometry::CantorSet;
use crate::measure::{discretize, DiscreteMeasure, Mode};
use crate::riesz::{
    default_eps_grid, l2_norm, sup_operator_norm, transform, xi_shell_maxima, Backend, Exclusion,
    TargetSet,
};
use crate::sequence::ladder_stats_strict;

#[derive(Debug, Clone, PartialEq)]
pub struct NormOptions {
    pub backend: Backend,
    /// Quadrature orders compared by the convergence check; empty disables it.
    pub cauchy_orders: Vec<usize>,
    /// The check is skipped when the finest grid would exceed this many nodes.
    pub cauchy_node_limit: usize,
    pub cauchy_tolerance: f64,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self {
            backend: Backend::Naive,
            cauchy_orders: vec![3, 5, 7],
            cauchy_node_limit: 16_384,
            cauchy_tolerance: 0.05,
        }
    }
}

/// `‖R_μ 1‖²_{L²(μ)}` with own-node exclusion and no truncation.
pub fn transform_norm_sq(mu: &DiscreteMeasure, s: f64, backend: Backend) -> Result<f64> {
    let targets = TargetSet::nodes(mu);
    let field = transform(backend, mu, &targets, 0.0, s, Exclusion::OwnNode)?;
    Ok(l2_norm(&field, mu)?.powi(2))
}

/// The squared transform norm on the order-`q` grid against `Σθ_j²`.
pub fn norm_ratio_report(set: &CantorSet, s: f64, q: usize, opts: &NormOptions) -> Result<EstimateReport> {
    let d = set.dim();
    let stats = ladder_stats_strict(set.ladder(), d, s)?;
    let mu = discretize(set, Mode::Grid(q))?;
    let norm_sq = transform_norm_sq(&mu, s, opts.backend)?;

    let ctx = Context::for_set(set, s).with_q(q).with_backend(opts.backend);
    let mut rep = EstimateReport::new("norm_ratio", ctx);
    rep.measure("norm_sq", norm_sq)
        .measure("nodes", mu.len() as f64)
        .theory("theta_sq_sum", stats.total);
    rep.ratio("norm_sq/theta_sq_sum", "norm_sq", "theta_sq_sum")?;

    if !opts.cauchy_orders.is_empty() {
        let finest = opts.cauchy_orders.iter().copied().max().unwrap_or(q);
        let nodes = set.leaf_count().saturating_mul(finest.pow(d as u32));
        if nodes > opts.cauchy_node_limit {
            rep.note(format!(
                "quadrature check skipped: order {finest} needs {nodes} nodes (limit {})",
                opts.cauchy_node_limit
            ));
        } else {
            let ratios = opts
                .cauchy_orders
                .iter()
                .map(|&k| {
                    let v = if k == q {
                        norm_sq
                    } else {
                        transform_norm_sq(&discretize(set, Mode::Grid(k))?, s, opts.backend)?
                    };
                    Ok(v / stats.total)
                })
                .collect::<Result<Vec<_>>>()?;
            let spread = band_width(&ratios) - 1.0;
            rep.column("cauchy_q", opts.cauchy_orders.iter().map(|&k| k as f64).collect())
                .column("cauchy_ratio", ratios)
                .measure("cauchy_spread", spread)
                .theory("cauchy_tolerance", opts.cauchy_tolerance);
            if spread > opts.cauchy_tolerance {
                rep.note(format!(
                    "quadrature divergence: ratio varies by {:.2}% over q in {:?}",
                    100.0 * spread,
                    opts.cauchy_orders
                ));
            }
        }
    }
    Ok(rep)
}

/// Supremum over truncations of the operator norm on the order-`q` grid,
/// against `Σθ_j²` and the constant-function lower bound.
pub fn operator_ratio_report(
    set: &CantorSet,
    s: f64,
    q: usize,
    power: &PowerOptions,
) -> Result<EstimateReport> {
    let d = set.dim();
    let stats = ladder_stats_strict(set.ladder(), d, s)?;
    let mu = discretize(set, Mode::Grid(q))?;
    let mut grid = vec![0.0];
    grid.extend(default_eps_grid(set.ladder()));
    let sup = sup_operator_norm(&mu, &grid, s, power.tol, power.max_iter)?;
    let l2 = transform_norm_sq(&mu, s, Backend::Naive)?.sqrt();
    let lower = l2 / mu.total().sqrt();

    let ctx = Context::for_set(set, s)
        .with_q(q)
        .with_extra("tol", power.tol)
        .with_extra("max_iter", power.max_iter);
    let mut rep = EstimateReport::new("operator_ratio", ctx);
    rep.measure("operator_norm", sup.norm)
        .measure("operator_norm_sq", sup.norm * sup.norm)
        .measure("argmax_eps", sup.argmax_eps)
        .measure("constant_test_bound", lower)
        .theory("theta_sq_sum", stats.total);
    rep.ratio("operator_norm_sq/theta_sq_sum", "operator_norm_sq", "theta_sq_sum")?;
    rep.ratio("operator_norm/constant_test_bound", "operator_norm", "constant_test_bound")?;
    rep.column("eps", sup.per_eps.iter().map(|p| p.0).collect())
        .column("norm", sup.per_eps.iter().map(|p| p.1).collect())
        .column("iterations", sup.per_eps.iter().map(|p| p.2 as f64).collect());
    rep.check(
        "operator_norm_dominates_constant_test",
        sup.norm >= lower * (1.0 - power.tol),
    );
    Ok(rep)
}

/// Largest shell contribution per block against the block density `Θ_p`.
pub fn xi_shell_report(set: &CantorSet, mu: &DiscreteMeasure, s: f64) -> Result<EstimateReport> {
    let stats = ladder_stats_strict(set.ladder(), set.dim(), s)?;
    let maxima = xi_shell_maxima(mu, set, s)?;
    let m = maxima.len();
    if stats.block_theta.len() < m {
        return Err(Error::Invariant("fewer block densities than shells".into()));
    }
    let ratios: Vec<f64> = maxima
        .iter()
        .zip(&stats.block_theta)
        .map(|(x, t)| x / t)
        .collect();
    let ctx = Context::for_set(set, s).with_extra("mode", mu.mode().map(|m| m.to_string()));
    let mut rep = EstimateReport::new("xi_shells", ctx);
    rep.column("shell", (1..=m).map(|p| p as f64).collect())
        .column("xi_max", maxima)
        .column("block_theta", stats.block_theta[..m].to_vec())
        .column("xi_max/block_theta", ratios.clone());
    let positive: Vec<f64> = ratios.iter().copied().filter(|r| *r > 0.0).collect();
    if positive.len() < ratios.len() {
        rep.note(format!("{} shells carry no mass", ratios.len() - positive.len()));
    }
    if !positive.is_empty() {
        rep.measure("shell_spread", band_width(&positive));
    }
    Ok(rep)
}
