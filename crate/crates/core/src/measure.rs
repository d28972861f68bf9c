//! Weighted point clouds on the set, growth constants and content bounds.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CantorSet;
use crate::sequence::{fmt_f64, GaugeFunction};
use crate::sum::Neumaier;

/// How a level-`n` cube is represented by nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// One node at the cube center.
    Centers,
    /// A symmetric `q^d` midpoint grid, `q` odd.
    Grid(usize),
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Centers => write!(f, "centers"),
            Mode::Grid(q) => write!(f, "grid({q})"),
        }
    }
}

/// Ball radii and the enclosing ball used by [`growth_constant`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeFamily {
    pub radii: Vec<f64>,
    pub root_center: Vec<f64>,
    pub root_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    d: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
    tags: Vec<u64>,
    /// Tags are level-`depth` cube indices.
    depth: usize,
    total: f64,
    probe: ProbeFamily,
    mode: Option<Mode>,
}

impl DiscreteMeasure {
    /// General constructor. Nodes are stably reordered by tag.
    pub fn from_parts(
        d: usize,
        points: Vec<f64>,
        weights: Vec<f64>,
        tags: Vec<u64>,
        depth: usize,
        probe: Option<ProbeFamily>,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::Parameter("dimension must be at least 1".into()));
        }
        if weights.is_empty() {
            return Err(Error::Empty("measure"));
        }
        if points.len() != weights.len() * d {
            return Err(Error::Dimension {
                expected: weights.len() * d,
                got: points.len(),
            });
        }
        if tags.len() != weights.len() {
            return Err(Error::Dimension {
                expected: weights.len(),
                got: tags.len(),
            });
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::Parameter(format!("weight {w} is not positive")));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parameter("non-finite coordinate".into()));
        }
        let (points, weights, tags) = if tags.windows(2).all(|w| w[0] <= w[1]) {
            (points, weights, tags)
        } else {
            let mut order: Vec<usize> = (0..tags.len()).collect();
            order.sort_by_key(|&i| tags[i]);
            (
                order.iter().flat_map(|&i| points[i * d..(i + 1) * d].to_vec()).collect(),
                order.iter().map(|&i| weights[i]).collect(),
                order.iter().map(|&i| tags[i]).collect(),
            )
        };
        let probe = probe.unwrap_or_else(|| bounding_probe(d, &points));
        let total = crate::sum::sum(weights.iter().copied());
        Ok(Self {
            d,
            points,
            weights,
            tags,
            depth,
            total,
            probe,
            mode: None,
        })
    }

    /// The discretization this measure came from, if any.
    pub fn mode(&self) -> Option<Mode> {
        self.mode
    }

    fn with_mode(mut self, mode: Option<Mode>) -> Self {
        self.mode = mode;
        self
    }

    /// Untagged point masses.
    pub fn point_masses(d: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let tags = vec![0; weights.len()];
        Self::from_parts(d, points, weights, tags, 0, None)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tags(&self) -> &[u64] {
        &self.tags
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn probe(&self) -> &ProbeFamily {
        &self.probe
    }

    /// Mass per tag in tag order.
    pub fn cube_masses(&self) -> Vec<(u64, f64)> {
        let mut out: Vec<(u64, Neumaier)> = Vec::new();
        for (t, w) in self.tags.iter().zip(&self.weights) {
            match out.last_mut() {
                Some((tag, acc)) if tag == t => acc.add(*w),
                _ => {
                    let mut acc = Neumaier::new();
                    acc.add(*w);
                    out.push((*t, acc));
                }
            }
        }
        out.into_iter().map(|(t, a)| (t, a.value())).collect()
    }

    /// True when every level-`depth` cube carries the same mass.
    pub fn equally_distributed(&self) -> bool {
        let masses = self.cube_masses();
        masses.len() == 1usize << (self.d * self.depth)
            && masses.iter().all(|m| (m.1 - masses[0].1).abs() <= 1e-12 * masses[0].1)
    }

    /// Multiply every weight by `tau`.
    pub fn scaled(&self, tau: f64) -> Result<Self> {
        Self::from_parts(
            self.d,
            self.points.clone(),
            self.weights.iter().map(|w| w * tau).collect(),
            self.tags.clone(),
            self.depth,
            Some(self.probe.clone()),
        )
        .map(|m| m.with_mode(self.mode))
    }

    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.d {
            return Err(Error::Dimension {
                expected: self.d,
                got: shift.len(),
            });
        }
        let d = self.d;
        let points = self.points.iter().enumerate().map(|(i, x)| x + shift[i % d]).collect();
        let mut probe = self.probe.clone();
        for (c, s) in probe.root_center.iter_mut().zip(shift) {
            *c += s;
        }
        Self::from_parts(d, points, self.weights.clone(), self.tags.clone(), self.depth, Some(probe))
            .map(|m| m.with_mode(self.mode))
    }

    /// Dilate coordinates by `lambda` about the origin.
    pub fn dilated(&self, lambda: f64) -> Result<Self> {
        let probe = ProbeFamily {
            radii: self.probe.radii.iter().map(|r| r * lambda).collect(),
            root_center: self.probe.root_center.iter().map(|c| c * lambda).collect(),
            root_radius: self.probe.root_radius * lambda,
        };
        Self::from_parts(
            self.d,
            self.points.iter().map(|x| x * lambda).collect(),
            self.weights.clone(),
            self.tags.clone(),
            self.depth,
            Some(probe),
        )
        .map(|m| m.with_mode(self.mode))
    }

    /// Keep the nodes whose tag satisfies `keep`.
    pub fn restricted(&self, keep: impl Fn(u64) -> bool) -> Result<Self> {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(self.tags[i])).collect();
        Self::from_parts(
            self.d,
            idx.iter().flat_map(|&i| self.point(i).to_vec()).collect(),
            idx.iter().map(|&i| self.weights[i]).collect(),
            idx.iter().map(|&i| self.tags[i]).collect(),
            self.depth,
            Some(self.probe.clone()),
        )
    }

    /// Text export: `x_1 … x_d weight cube_index` per node.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for i in 0..self.len() {
            for x in self.point(i) {
                let _ = write!(out, "{} ", fmt_f64(*x));
            }
            let _ = writeln!(out, "{} {}", fmt_f64(self.weights[i]), self.tags[i]);
        }
        out
    }
}

fn bounding_probe(d: usize, points: &[f64]) -> ProbeFamily {
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for (i, x) in points.iter().enumerate() {
        lo[i % d] = lo[i % d].min(*x);
        hi[i % d] = hi[i % d].max(*x);
    }
    let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let radius = 0.5 * lo.iter().zip(&hi).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt();
    let base = if radius > 0.0 { radius } else { 1.0 };
    ProbeFamily {
        radii: (0..24).map(|k| base * (-(k as f64)).exp2()).collect(),
        root_center: center,
        root_radius: base,
    }
}

/// Level-`n` nodes of the set with total mass 1.
pub fn discretize(set: &CantorSet, mode: Mode) -> Result<DiscreteMeasure> {
    let d = set.dim();
    let n = set.depth();
    let leaves = set.leaf_count();
    let edge = set.edge(n);
    let offsets: Vec<f64> = match mode {
        Mode::Centers => vec![0.0],
        Mode::Grid(q) => {
            if q == 0 || q % 2 == 0 {
                return Err(Error::Parameter(format!("grid order q = {q} must be odd")));
            }
            (0..q)
                .map(|i| ((i as f64 + 0.5) / q as f64 - 0.5) * edge)
                .collect()
        }
    };
    let per_axis = offsets.len();
    let per_cube = per_axis.pow(d as u32);
    let weight = (-((d * n) as f64)).exp2() / per_cube as f64;
    let mut points = Vec::with_capacity(leaves * per_cube * d);
    let mut tags = Vec::with_capacity(leaves * per_cube);
    for k in 0..leaves as u64 {
        let c = set.center(n, k);
        for m in 0..per_cube {
            let mut rest = m;
            let mut node = vec![0.0; d];
            for i in (0..d).rev() {
                node[i] = c[i] + offsets[rest % per_axis];
                rest /= per_axis;
            }
            points.extend_from_slice(&node);
            tags.push(k);
        }
    }
    let weights = vec![weight; tags.len()];
    let sqrt_d = (d as f64).sqrt();
    let probe = ProbeFamily {
        radii: set.ladder().ell().iter().map(|l| sqrt_d * l).collect(),
        root_center: vec![0.0; d],
        root_radius: 0.5 * sqrt_d * set.edge(0),
    };
    DiscreteMeasure::from_parts(d, points, weights, tags, n, Some(probe)).map(|m| m.with_mode(Some(mode)))
}

/// A ball of the probe family with its mass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeBall {
    pub center: Vec<f64>,
    pub radius: f64,
    pub closed: bool,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    /// `max ν(B)/r^s` over the probe family.
    pub constant: f64,
    pub argmax: ProbeBall,
    pub radii: Vec<f64>,
    /// Factor by which the true supremum over all balls may exceed
    /// `constant` (dyadic covering bound).
    pub covering_factor: f64,
}

fn ball_masses(nu: &DiscreteMeasure, x: &[f64], radii: &[f64]) -> Vec<f64> {
    // radii sorted ascending; open balls
    let r2: Vec<f64> = radii.iter().map(|r| r * r).collect();
    let mut buckets = vec![Neumaier::new(); radii.len()];
    let d = nu.d;
    for (i, w) in nu.weights.iter().enumerate() {
        let y = &nu.points[i * d..(i + 1) * d];
        let dist2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        if let Some(b) = r2.iter().position(|&r| dist2 < r) {
            buckets[b].add(*w);
        }
    }
    let mut acc = Neumaier::new();
    buckets
        .iter()
        .map(|b| {
            acc.add(b.value());
            acc.value()
        })
        .collect()
}

fn closed_ball_mass(nu: &DiscreteMeasure, x: &[f64], r: f64) -> f64 {
    let d = nu.d;
    let r2 = r * r;
    let mut acc = Neumaier::new();
    for (i, w) in nu.weights.iter().enumerate() {
        let y = &nu.points[i * d..(i + 1) * d];
        let dist2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        if dist2 <= r2 {
            acc.add(*w);
        }
    }
    acc.value()
}

fn best(a: (f64, ProbeBall), b: (f64, ProbeBall)) -> (f64, ProbeBall) {
    if b.0 > a.0 {
        b
    } else {
        a
    }
}

/// Supremum of `ν(B)/r^s` over balls centered at nodes with the ladder
/// radii (plus half the finest edge), and over the enclosing root ball.
pub fn growth_constant(nu: &DiscreteMeasure, s: f64) -> GrowthReport {
    let mut radii = nu.probe.radii.clone();
    if let Some(&finest) = radii.iter().min_by(|a, b| a.total_cmp(b)) {
        radii.push(0.5 * finest / (nu.d as f64).sqrt());
    }
    radii.sort_by(|a, b| a.total_cmp(b));
    radii.dedup();
    let root = {
        let mass = closed_ball_mass(nu, &nu.probe.root_center, nu.probe.root_radius);
        (
            mass / nu.probe.root_radius.powf(s),
            ProbeBall {
                center: nu.probe.root_center.clone(),
                radius: nu.probe.root_radius,
                closed: true,
                mass,
            },
        )
    };
    let found = (0..nu.len())
        .into_par_iter()
        .map(|i| {
            let x = nu.point(i);
            let masses = ball_masses(nu, x, &radii);
            let mut local: Option<(f64, ProbeBall)> = None;
            for (r, m) in radii.iter().zip(masses) {
                let ratio = m / r.powf(s);
                if local.as_ref().map_or(true, |l| ratio > l.0) {
                    local = Some((
                        ratio,
                        ProbeBall {
                            center: x.to_vec(),
                            radius: *r,
                            closed: false,
                            mass: m,
                        },
                    ));
                }
            }
            local.expect("nonempty radii")
        })
        .collect::<Vec<_>>();
    let (constant, argmax) = found.into_iter().fold(root, best);
    let sqrt_d = (nu.d as f64).sqrt();
    GrowthReport {
        constant,
        argmax,
        radii,
        covering_factor: 2f64.powf(s) * sqrt_d.powf(s),
    }
}

#[derive(Debug, Clone)]
pub struct PsiWitness {
    pub measure: DiscreteMeasure,
    /// `max ψ(B)/h(r)` over the probe family.
    pub frostman_constant: f64,
    pub argmax: ProbeBall,
}

/// Point masses at the leaf centers with total `2^d·h(ℓ_1)`, and the
/// largest ratio `ψ(B)/h(r)` over node balls of radius `√d·ℓ_j` and the
/// closed circumballs of every cube.
pub fn psi_witness(set: &CantorSet, h: &GaugeFunction) -> Result<PsiWitness> {
    let d = set.dim();
    let n = set.depth();
    let mass = (d as f64).exp2() * h.eval(set.edge(1));
    let base = discretize(set, Mode::Centers)?;
    let measure = base.scaled(mass)?;
    let sqrt_d = (d as f64).sqrt();
    let radii: Vec<f64> = set.ladder().ell().iter().rev().map(|l| sqrt_d * l).collect();

    let open = (0..measure.len())
        .into_par_iter()
        .map(|i| {
            let x = measure.point(i);
            let masses = ball_masses(&measure, x, &radii);
            radii
                .iter()
                .zip(masses)
                .map(|(r, m)| {
                    (
                        m / h.eval(*r),
                        ProbeBall {
                            center: x.to_vec(),
                            radius: *r,
                            closed: false,
                            mass: m,
                        },
                    )
                })
                .reduce(best)
                .expect("nonempty radii")
        })
        .collect::<Vec<_>>();
    let covers = (0..=n)
        .flat_map(|j| (0..set.level_count(j) as u64).map(move |k| (j, k)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(j, k)| {
            let r = 0.5 * sqrt_d * set.edge(j);
            let c = set.center(j, k);
            let m = closed_ball_mass(&measure, c, r);
            (
                m / h.eval(r),
                ProbeBall {
                    center: c.to_vec(),
                    radius: r,
                    closed: true,
                    mass: m,
                },
            )
        })
        .collect::<Vec<_>>();
    let (frostman_constant, argmax) = open
        .into_iter()
        .chain(covers)
        .reduce(best)
        .expect("nonempty family");
    Ok(PsiWitness {
        measure,
        frostman_constant,
        argmax,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ContentBounds {
    /// Mass-distribution bound `‖ψ‖ / C`.
    pub lower: f64,
    /// Best covering of the set by the circumballs of one level.
    pub upper: f64,
    pub upper_level: usize,
    pub witness_mass: f64,
    pub frostman_constant: f64,
}

pub fn content_bounds(set: &CantorSet, h: &GaugeFunction) -> Result<ContentBounds> {
    let d = set.dim();
    let sqrt_d = (d as f64).sqrt();
    let (upper_level, upper) = (0..=set.depth())
        .map(|j| (j, (set.level_count(j) as f64) * h.eval(0.5 * sqrt_d * set.edge(j))))
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    let psi = psi_witness(set, h)?;
    let witness_mass = psi.measure.total();
    let lower = witness_mass / psi.frostman_constant;
    if !(lower <= upper * (1.0 + 1e-12)) {
        return Err(Error::Invariant(format!(
            "content bounds out of order: lower {lower:e} > upper {upper:e}"
        )));
    }
    Ok(ContentBounds {
        lower,
        upper,
        upper_level,
        witness_mass,
        frostman_constant: psi.frostman_constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::{regularize, LadderParams, SigmaSequence};

    fn set(n: usize, d: usize) -> CantorSet {
        let sig = SigmaSequence::geometric(0.25, 4.0, n).unwrap();
        CantorSet::build(&regularize(&sig, LadderParams::default()).unwrap(), d).unwrap()
    }

    #[test]
    fn centers_and_grids_carry_unit_mass() {
        let e = set(2, 2);
        let c = discretize(&e, Mode::Centers).unwrap();
        assert_eq!(c.len(), 16);
        assert!(c.weights().iter().all(|&w| w == 1.0 / 16.0));
        let g = discretize(&e, Mode::Grid(3)).unwrap();
        assert_eq!(g.len(), 144);
        assert!(g.weights().iter().all(|&w| w == 1.0 / 144.0));
        assert!((g.total() - 1.0).abs() < 1e-12);
        let masses = g.cube_masses();
        assert!(masses.iter().all(|m| m.1 == masses[0].1));
        assert!(g.equally_distributed());
        assert!(discretize(&e, Mode::Grid(2)).is_err());
    }

    #[test]
    fn grid_nodes_are_symmetric_in_each_cube() {
        let e = set(2, 2);
        let g = discretize(&e, Mode::Grid(5)).unwrap();
        for k in 0..16u64 {
            let c = e.center(2, k);
            let nodes: Vec<&[f64]> = (0..g.len()).filter(|&i| g.tags()[i] == k).map(|i| g.point(i)).collect();
            assert_eq!(nodes.len(), 25);
            for x in &nodes {
                let mirror: Vec<f64> = x.iter().zip(c).map(|(x, c)| 2.0 * c - x).collect();
                assert!(nodes.iter().any(|y| y.iter().zip(&mirror).all(|(a, b)| (a - b).abs() < 1e-15)));
            }
        }
    }

    #[test]
    fn single_mass_growth_uses_smallest_radius() {
        let nu = DiscreteMeasure::point_masses(1, vec![0.0], vec![1.0]).unwrap();
        let g = growth_constant(&nu, 1.0);
        let rmin = g.radii[0];
        assert_eq!(g.constant, 1.0 / rmin);
    }

    #[test]
    fn growth_is_linear_in_mass() {
        let nu = discretize(&set(3, 2), Mode::Centers).unwrap();
        let a = growth_constant(&nu, 1.0).constant;
        let b = growth_constant(&nu.scaled(2.0).unwrap(), 1.0).constant;
        assert_eq!(b, 2.0 * a);
    }

    #[test]
    fn one_dimensional_cover_bound() {
        let sig = SigmaSequence::new(vec![1.0]).unwrap();
        let e = CantorSet::build(&regularize(&sig, LadderParams::default()).unwrap(), 1).unwrap();
        let cb = content_bounds(&e, &GaugeFunction::power(1.0)).unwrap();
        assert!(cb.upper <= 1.0);
        assert!(cb.lower <= cb.upper);
    }
}
