//! Monopole treecode over the cube hierarchy.
//!
//! Cells are the cubes themselves: the sources of level-`j` cell `c` are the
//! nodes whose tag has prefix `c`. A cell is lumped at its center of mass
//! when `2·radius < mac·distance`, it lies entirely beyond `eps`, and it does
//! not hold the target's own cube under own-cube exclusion.

use rayon::prelude::*;

use super::kernel::Power;
use super::transform::accumulate;
use super::{check_common, Exclusion, RieszField, TargetSet};
use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::sum::VecSum;

#[derive(Debug, Clone)]
struct Cell {
    prefix: u64,
    start: usize,
    end: usize,
    mass: f64,
    radius: f64,
    /// Range into the next level's cells.
    children: (usize, usize),
}

/// Cell hierarchy of a tagged measure.
#[derive(Debug, Clone)]
pub struct TreeIndex {
    d: usize,
    depth: usize,
    levels: Vec<Vec<Cell>>,
    /// Center of mass per level, flat.
    com: Vec<Vec<f64>>,
}

impl TreeIndex {
    pub fn build(nu: &DiscreteMeasure) -> Self {
        let d = nu.dim();
        let n = nu.depth();
        let tags = nu.tags();
        let mut levels: Vec<Vec<Cell>> = Vec::with_capacity(n + 1);
        let mut com: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        for j in 0..=n {
            let shift = (d * (n - j)) as u32;
            let mut cells = Vec::new();
            let mut centers = Vec::new();
            let mut start = 0;
            while start < tags.len() {
                let prefix = tags[start].checked_shr(shift).unwrap_or(0);
                let mut end = start + 1;
                while end < tags.len() && tags[end].checked_shr(shift).unwrap_or(0) == prefix {
                    end += 1;
                }
                let mut mass = crate::sum::Neumaier::new();
                let mut moment = VecSum::new(d);
                for i in start..end {
                    mass.add(nu.weights()[i]);
                    moment.add_scaled(nu.point(i), nu.weights()[i]);
                }
                let m = mass.value();
                let c: Vec<f64> = moment.values().iter().map(|v| v / m).collect();
                let radius = (start..end)
                    .map(|i| {
                        nu.point(i)
                            .iter()
                            .zip(&c)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .fold(0.0, f64::max);
                cells.push(Cell {
                    prefix,
                    start,
                    end,
                    mass: m,
                    radius,
                    children: (0, 0),
                });
                centers.extend(c);
                start = end;
            }
            levels.push(cells);
            com.push(centers);
        }
        for j in 0..n {
            let (upper, lower) = levels.split_at_mut(j + 1);
            let (parents, children) = (&mut upper[j], &lower[0]);
            let mut next = 0;
            for p in parents.iter_mut() {
                let first = next;
                while next < children.len() && children[next].prefix >> d == p.prefix {
                    next += 1;
                }
                p.children = (first, next);
            }
        }
        Self {
            d,
            depth: n,
            levels,
            com,
        }
    }

    pub fn cell_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    #[allow(clippy::too_many_arguments)]
    fn evaluate(
        &self,
        nu: &DiscreteMeasure,
        x: &[f64],
        tag: Option<u64>,
        eps: f64,
        power: Power,
        exclude: Exclusion,
        mac: f64,
    ) -> Result<Vec<f64>> {
        let d = self.d;
        let n = self.depth;
        let mut acc = VecSum::new(d);
        let mut stack: Vec<(usize, usize)> = (0..self.levels[0].len()).rev().map(|c| (0, c)).collect();
        let mut diff = vec![0.0; d];
        while let Some((j, ci)) = stack.pop() {
            let cell = &self.levels[j][ci];
            let c = &self.com[j][ci * d..(ci + 1) * d];
            let mut r2 = 0.0;
            for k in 0..d {
                diff[k] = c[k] - x[k];
                r2 += diff[k] * diff[k];
            }
            let dist = r2.sqrt();
            if dist + cell.radius < eps * (1.0 - 1e-12) {
                continue;
            }
            let holds_target = exclude == Exclusion::OwnCube
                && tag.is_some_and(|t| t >> (d * (n - j)) == cell.prefix);
            if !holds_target && 2.0 * cell.radius < mac * dist && dist - cell.radius > eps {
                acc.add_scaled(&diff, power.factor(r2) * cell.mass);
                continue;
            }
            if j == n {
                accumulate(nu, cell.start..cell.end, x, tag, eps, power, exclude, &mut acc)?;
            } else {
                for child in (cell.children.0..cell.children.1).rev() {
                    stack.push((j + 1, child));
                }
            }
        }
        Ok(acc.values())
    }
}

/// Tree-accelerated truncated transform; `mac → 0` reproduces
/// [`transform_truncated`](super::transform_truncated) exactly.
pub fn tree_transform(
    nu: &DiscreteMeasure,
    targets: &TargetSet,
    eps: f64,
    s: f64,
    exclude: Exclusion,
    mac: f64,
) -> Result<RieszField> {
    if !(0.0..1.0).contains(&mac) {
        return Err(Error::Parameter(format!("mac = {mac} not in [0, 1)")));
    }
    let formal = check_common(nu, targets, eps, s, exclude)?;
    let tree = TreeIndex::build(nu);
    let power = Power::new(s);
    let values = (0..targets.len())
        .into_par_iter()
        .map(|t| {
            let tag = targets.tags().map(|g| g[t]);
            tree.evaluate(nu, targets.point(t), tag, eps, power, exclude, mac)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RieszField {
        d: nu.dim(),
        targets: targets.coords().to_vec(),
        values: values.concat(),
        eps,
        s,
        exclude,
        formal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CantorSet;
    use crate::measure::{discretize, Mode};
    use crate::riesz::transform_truncated;
    use crate::sequence::{regularize, LadderParams, SigmaSequence};

    fn measure(n: usize, mode: Mode) -> DiscreteMeasure {
        let sig = SigmaSequence::geometric(0.25, 4.0, n).unwrap();
        let set = CantorSet::build(&regularize(&sig, LadderParams::default()).unwrap(), 2).unwrap();
        discretize(&set, mode).unwrap()
    }

    #[test]
    fn zero_mac_is_exact() {
        let nu = measure(3, Mode::Grid(3));
        let t = TargetSet::nodes(&nu);
        for (eps, ex) in [(0.0, Exclusion::OwnNode), (0.01, Exclusion::None), (0.0, Exclusion::OwnCube)] {
            let a = transform_truncated(&nu, &t, eps, 1.0, ex).unwrap();
            let b = tree_transform(&nu, &t, eps, 1.0, ex, 0.0).unwrap();
            assert_eq!(a.values, b.values);
        }
    }

    #[test]
    fn lumped_cells_stay_close() {
        let nu = measure(4, Mode::Centers);
        let t = TargetSet::nodes(&nu);
        let a = transform_truncated(&nu, &t, 0.0, 1.0, Exclusion::OwnNode).unwrap();
        let b = tree_transform(&nu, &t, 0.0, 1.0, Exclusion::OwnNode, 0.3).unwrap();
        let scale = a.magnitudes().into_iter().fold(0.0, f64::max);
        let dev = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(dev <= 1e-2 * scale);
        assert!(TreeIndex::build(&nu).cell_count() > nu.len());
        assert!(tree_transform(&nu, &t, 0.0, 1.0, Exclusion::OwnNode, 1.0).is_err());
    }
}
