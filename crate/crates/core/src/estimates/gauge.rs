use super::capacity::{capacity_band, capacity_proxy, operator_eps_grid};
use super::report::{Context, EstimateReport};
use super::PowerOptions;
use crate::error::{Error, Result};
use crate::geometry::CantorSet;
use crate::measure::{content_bounds, discretize, psi_witness, Mode};
use crate::riesz::{transform_truncated, Exclusion, TargetSet};
use crate::sequence::{
    calibrate_sigma0, gauge_energy, regularize, sigma_from_gauge, GaugeFunction, LadderParams,
};

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeOptions {
    pub params: LadderParams,
    pub power: PowerOptions,
    /// Lower-limit factor `C` in `h^{-1}(C·M/N)`.
    pub lower_factor: f64,
    /// Smallest accepted number of point masses.
    pub min_points: usize,
    /// Also compute the capacity proxy at every depth of a sweep.
    pub sweep_proxy: bool,
}

impl Default for GaugeOptions {
    fn default() -> Self {
        Self {
            params: LadderParams::default(),
            power: PowerOptions::default(),
            lower_factor: 1.0,
            min_points: 4,
            sweep_proxy: false,
        }
    }
}

fn gauge_set(h: &GaugeFunction, sigma0: f64, n: usize, d: usize, params: LadderParams) -> Result<CantorSet> {
    let sigma = sigma_from_gauge(h, sigma0, n, d)?;
    h.validate(d, 0.5 * sigma.get(n), sigma0, 64)?;
    CantorSet::build(&regularize(&sigma, params)?, d)
}

/// Calibrated set at depth `n`, its center measure, the cubes where the
/// transform exceeds `level`, and both sides of the mass and capacity
/// comparisons.
pub fn gauge_experiment(
    h: &GaugeFunction,
    n: usize,
    level: f64,
    d: usize,
    s: f64,
    c4: f64,
    opts: &GaugeOptions,
) -> Result<EstimateReport> {
    if d == 0 || n == 0 || d * n >= 63 {
        return Err(Error::Parameter(format!("d = {d}, n = {n}")));
    }
    let points = 1usize << (d * n);
    if points < opts.min_points {
        return Err(Error::OutOfRange {
            what: "N",
            value: points as u64,
            limit: opts.min_points as u64,
        });
    }
    if !(opts.lower_factor >= 1.0 && opts.lower_factor < points as f64) {
        return Err(Error::Parameter(format!("lower factor {} not in [1, N)", opts.lower_factor)));
    }
    let sigma0 = calibrate_sigma0(h, points as f64, level, d, s, c4)?;
    let set = gauge_set(h, sigma0, n, d, opts.params)?;
    let sigma = set.ladder().sigma().clone();
    let nu = discretize(&set, Mode::Centers)?;

    let field = transform_truncated(&nu, &TargetSet::leaf_centers(&set), 0.0, s, Exclusion::OwnNode)?;
    let count = field.magnitudes().iter().filter(|m| **m > level).count();

    let psi = psi_witness(&set, h)?;
    let per_cube = psi.measure.total() / points as f64;
    let big_m = count as f64 * per_cube / psi.frostman_constant;
    let content = content_bounds(&set, h)?;

    let ctx = Context::for_set(&set, s)
        .with_extra("gauge", h.label())
        .with_extra("P", level)
        .with_extra("C4", c4)
        .with_extra("lower_factor", opts.lower_factor)
        .with_extra("tol", opts.power.tol);
    let mut rep = EstimateReport::new("gauge", ctx);
    rep.measure("sigma0", sigma0)
        .measure("N", points as f64)
        .measure("superlevel_count", count as f64)
        .measure("superlevel_fraction", count as f64 / points as f64)
        .measure("M", big_m)
        .measure("content_lower", content.lower)
        .theory("content_upper", content.upper)
        .theory("h_sigma0", h.eval(sigma0));
    rep.ratio("content_lower/h_sigma0", "content_lower", "h_sigma0")?;
    rep.ratio("content_upper/h_sigma0", "content_upper", "h_sigma0")?;
    rep.note("M is the certified lower bound for the content of the superlevel cubes");

    if count > 0 {
        let rhs = mass_rhs(h, s, nu.total(), level, big_m, points as f64, opts.lower_factor)?;
        rep.theory("mass_rhs", rhs);
        if rhs > 0.0 {
            rep.ratio("M/mass_rhs", "M", "mass_rhs")?;
        }
    } else {
        rep.note(format!("no cube exceeds P = {level}"));
    }

    let (proxy, sup) = capacity_proxy(&nu, &operator_eps_grid(&set), s, &opts.power)?;
    let m = content.lower;
    let t2 = h.inverse(m)?;
    let lo = sigma.get(n);
    let energy = if t2 > lo { gauge_energy(h, s, lo, t2)? } else { 0.0 };
    rep.measure("operator_norm", sup.norm)
        .measure("capacity_proxy", proxy)
        .theory("band", capacity_band(&sigma, d, s));
    rep.ratio("capacity_proxy/band", "capacity_proxy", "band")?;
    if energy > 0.0 {
        rep.theory("capacity_rhs", m / energy.sqrt());
        rep.ratio("capacity_proxy/capacity_rhs", "capacity_proxy", "capacity_rhs")?;
    } else {
        rep.note("content radius below the finest scale; capacity side skipped");
    }
    if let Some(beta) = h.exponent().filter(|b| *b > s) {
        rep.theory("power_form", (beta - s).sqrt() * m.powf(s / beta));
        rep.ratio("capacity_proxy/power_form", "capacity_proxy", "power_form")?;
    }
    Ok(rep)
}

/// `(‖ν‖/P)·[∫_{h^{-1}(C·M/N)}^{h^{-1}(M)} (h(t)/t^s)² dt/t]^{1/2}`.
pub fn mass_rhs(
    h: &GaugeFunction,
    s: f64,
    mass: f64,
    level: f64,
    big_m: f64,
    points: f64,
    lower_factor: f64,
) -> Result<f64> {
    if !(level > 0.0 && big_m > 0.0 && points > lower_factor) {
        return Err(Error::Parameter(format!("P = {level}, M = {big_m}, N = {points}")));
    }
    let a = h.inverse(lower_factor * big_m / points)?;
    let b = h.inverse(big_m)?;
    let energy = if b > a { gauge_energy(h, s, a, b)? } else { 0.0 };
    Ok(mass / level * energy.sqrt())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Parameter("slope fit needs two or more paired points".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::Parameter("slope fit needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    Ok(sxy / sxx)
}

/// The capacity band and the content lower bound over depths `ns` at a
/// fixed top scale `sigma0`.
pub fn divergence_sweep(
    h: &GaugeFunction,
    sigma0: f64,
    d: usize,
    s: f64,
    ns: &[usize],
    opts: &GaugeOptions,
) -> Result<EstimateReport> {
    if ns.len() < 2 {
        return Err(Error::Parameter("sweep needs at least two depths".into()));
    }
    let mut bands = Vec::with_capacity(ns.len());
    let mut lower = Vec::with_capacity(ns.len());
    let mut upper = Vec::with_capacity(ns.len());
    let mut proxies = Vec::new();
    for &n in ns {
        let set = gauge_set(h, sigma0, n, d, opts.params)?;
        bands.push(capacity_band(set.ladder().sigma(), d, s));
        let cb = content_bounds(&set, h)?;
        lower.push(cb.lower);
        upper.push(cb.upper);
        if opts.sweep_proxy {
            let nu = discretize(&set, Mode::Centers)?;
            proxies.push(capacity_proxy(&nu, &operator_eps_grid(&set), s, &opts.power)?.0);
        }
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let slope = log_slope(&xs, &bands)?;
    let floor = lower.iter().copied().fold(f64::INFINITY, f64::min);

    let ctx = Context::new(d, s)
        .with_extra("gauge", h.label())
        .with_extra("sigma0", sigma0)
        .with_extra("ns", ns)
        .with_extra("alpha", opts.params.alpha)
        .with_extra("T", opts.params.frame);
    let mut rep = EstimateReport::new("divergence_sweep", ctx);
    rep.measure("band_exponent", slope)
        .measure("content_floor", floor)
        .measure("content_first", lower[0])
        .theory("h_sigma0", h.eval(sigma0));
    rep.ratio("content_floor/content_first", "content_floor", "content_first")?;
    rep.ratio("content_floor/h_sigma0", "content_floor", "h_sigma0")?;
    rep.column("n", xs)
        .column("band", bands)
        .column("content_lower", lower)
        .column("content_upper", upper);
    if opts.sweep_proxy {
        rep.column("capacity_proxy", proxies);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        assert!((log_slope(&x, &y).unwrap() + 0.5).abs() < 1e-14);
    }

    #[test]
    fn linear_gauge_band_decays_like_inverse_root() {
        let h = GaugeFunction::power(1.0);
        let rep = divergence_sweep(&h, 1.0, 2, 1.0, &[2, 3, 4], &GaugeOptions::default()).unwrap();
        // every term of the band sum equals 1 when h(t) = t^s
        assert!((rep.measured["band_exponent"] + 0.5).abs() < 1e-12);
        assert!(rep.measured["content_floor"] > 0.0);
    }

    #[test]
    fn experiment_reports_both_sides() {
        let h = GaugeFunction::power(1.5);
        let rep = gauge_experiment(&h, 2, 1.0, 2, 1.0, 2.0, &GaugeOptions::default()).unwrap();
        assert!(rep.ratios.contains_key("capacity_proxy/band"));
        assert!(rep.ratios.contains_key("capacity_proxy/power_form"));
        let lo = rep.measured["content_lower"];
        assert!(lo <= rep.theoretical["content_upper"]);
    }

    #[test]
    fn mass_side_is_inverse_in_level() {
        let h = GaugeFunction::power(1.5);
        let a = mass_rhs(&h, 1.0, 1.0, 1.0, 0.3, 64.0, 1.0).unwrap();
        let b = mass_rhs(&h, 1.0, 1.0, 2.0, 0.3, 64.0, 1.0).unwrap();
        assert_eq!(b, a / 2.0);
        assert!(a > 0.0);
    }
}
