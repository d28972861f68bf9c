use rayon::prelude::*;
use serde::Serialize;

use super::kernel::Power;
use super::{check_common, Exclusion, RieszField, TargetSet};
use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::sequence::Ladder;
use crate::sum::VecSum;

/// Add the contributions of sources `range` to `acc`, applying the
/// truncation and exclusion rules.
#[inline]
#[allow(clippy::too_many_arguments)]
pub(crate) fn accumulate(
    nu: &DiscreteMeasure,
    range: std::ops::Range<usize>,
    x: &[f64],
    tag: Option<u64>,
    eps: f64,
    power: Power,
    exclude: Exclusion,
    acc: &mut VecSum,
) -> Result<()> {
    let d = nu.dim();
    let pts = nu.points();
    let w = nu.weights();
    let tags = nu.tags();
    let mut diff = [0.0f64; 8];
    let mut diff_dyn = Vec::new();
    let diff: &mut [f64] = if d <= 8 {
        &mut diff[..d]
    } else {
        diff_dyn.resize(d, 0.0);
        &mut diff_dyn
    };
    for i in range {
        if exclude == Exclusion::OwnCube && Some(tags[i]) == tag {
            continue;
        }
        let y = &pts[i * d..(i + 1) * d];
        let mut r2 = 0.0;
        for c in 0..d {
            diff[c] = y[c] - x[c];
            r2 += diff[c] * diff[c];
        }
        if r2 == 0.0 {
            if exclude == Exclusion::None && eps == 0.0 {
                return Err(Error::Singular(format!(
                    "target coincides with source node {i} at eps = 0"
                )));
            }
            continue;
        }
        if !(r2.sqrt() > eps) {
            continue;
        }
        acc.add_scaled(diff, power.factor(r2) * w[i]);
    }
    Ok(())
}

/// `Σ_{|y-x| > eps} K^s(y-x) w_y` at every target, summed in node order.
pub fn transform_truncated(
    nu: &DiscreteMeasure,
    targets: &TargetSet,
    eps: f64,
    s: f64,
    exclude: Exclusion,
) -> Result<RieszField> {
    let formal = check_common(nu, targets, eps, s, exclude)?;
    let d = nu.dim();
    let power = Power::new(s);
    let values = (0..targets.len())
        .into_par_iter()
        .map(|t| {
            let mut acc = VecSum::new(d);
            let tag = targets.tags().map(|g| g[t]);
            accumulate(nu, 0..nu.len(), targets.point(t), tag, eps, power, exclude, &mut acc)?;
            Ok(acc.values())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RieszField {
        d,
        targets: targets.coords().to_vec(),
        values: values.concat(),
        eps,
        s,
        exclude,
        formal,
    })
}

/// The ladder scales, the root frame edge and the midpoints in between,
/// ascending.
pub fn default_eps_grid(ladder: &Ladder) -> Vec<f64> {
    let mut base: Vec<f64> = ladder.ell().to_vec();
    base.push(2.0 * ladder.frame() * ladder.ell_at(1));
    base.sort_by(|a, b| a.total_cmp(b));
    base.dedup();
    let mids: Vec<f64> = base.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    base.extend(mids);
    base.sort_by(|a, b| a.total_cmp(b));
    base.dedup();
    base
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaximalField {
    /// `max_ε |R_ε(x)|` per target.
    pub values: Vec<f64>,
    /// The grid radius attaining each maximum.
    pub argmax_eps: Vec<f64>,
    pub eps_grid: Vec<f64>,
}

/// `max` over `eps_grid` of `|R_ε(x)|`, from one sweep over the sources
/// sorted by distance.
pub fn transform_maximal(
    nu: &DiscreteMeasure,
    targets: &TargetSet,
    eps_grid: &[f64],
    s: f64,
) -> Result<MaximalField> {
    if eps_grid.is_empty() {
        return Err(Error::Empty("eps grid"));
    }
    if eps_grid.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::Parameter("eps grid entries must be positive".into()));
    }
    if eps_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parameter("eps grid must be strictly increasing".into()));
    }
    check_common(nu, targets, eps_grid[0], s, Exclusion::None)?;
    let d = nu.dim();
    let power = Power::new(s);
    let pts = nu.points();
    let w = nu.weights();
    let pairs = (0..targets.len())
        .into_par_iter()
        .map(|t| {
            let x = targets.point(t);
            let mut near: Vec<(f64, usize)> = (0..nu.len())
                .filter_map(|i| {
                    let r2: f64 = (0..d).map(|c| (pts[i * d + c] - x[c]).powi(2)).sum();
                    let r = r2.sqrt();
                    (r > eps_grid[0]).then_some((r, i))
                })
                .collect();
            near.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let mut acc = VecSum::new(d);
            let mut diff = vec![0.0; d];
            let mut next = 0;
            let mut best = (f64::NEG_INFINITY, eps_grid[0]);
            for &eps in eps_grid.iter().rev() {
                while next < near.len() && near[next].0 > eps {
                    let i = near[next].1;
                    let mut r2 = 0.0;
                    for c in 0..d {
                        diff[c] = pts[i * d + c] - x[c];
                        r2 += diff[c] * diff[c];
                    }
                    acc.add_scaled(&diff, power.factor(r2) * w[i]);
                    next += 1;
                }
                let norm = acc.values().iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm >= best.0 {
                    best = (norm, eps);
                }
            }
            best
        })
        .collect::<Vec<_>>();
    Ok(MaximalField {
        values: pairs.iter().map(|p| p.0).collect(),
        argmax_eps: pairs.iter().map(|p| p.1).collect(),
        eps_grid: eps_grid.to_vec(),
    })
}
