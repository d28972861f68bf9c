//! s-Riesz transforms of discrete measures.

mod kernel;
mod operator;
mod transform;
mod tree;
mod xi;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CantorSet;
use crate::measure::DiscreteMeasure;
use crate::sum::Neumaier;

pub use kernel::riesz_kernel;
pub use operator::{
    operator_norm, operator_norm_from, sup_operator_norm, Direction, NormEstimate, OperatorHandle,
    SupNorm, DEFAULT_SEED, RESTART_SEED,
};
pub use transform::{default_eps_grid, transform_maximal, transform_truncated, MaximalField};
pub use tree::{tree_transform, TreeIndex};
pub use xi::{shell_of_level, xi_decomposition, xi_shell_maxima};

/// Sources dropped from a truncated sum besides those within `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exclusion {
    None,
    /// Nodes located exactly at the target.
    OwnNode,
    /// Nodes sharing the target's level-`n` cube.
    OwnCube,
}

/// Summation backend for transforms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Backend {
    Naive,
    Tree { mac: f64 },
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Backend::Naive => write!(f, "naive"),
            Backend::Tree { mac } => write!(f, "tree({mac})"),
        }
    }
}

/// Evaluation points, optionally tagged with their level-`n` cube.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSet {
    d: usize,
    coords: Vec<f64>,
    tags: Option<Vec<u64>>,
}

impl TargetSet {
    pub fn points(d: usize, coords: Vec<f64>) -> Result<Self> {
        if d == 0 || coords.len() % d != 0 {
            return Err(Error::Dimension {
                expected: d,
                got: coords.len(),
            });
        }
        Ok(Self {
            d,
            coords,
            tags: None,
        })
    }

    pub fn tagged(d: usize, coords: Vec<f64>, tags: Vec<u64>) -> Result<Self> {
        let mut t = Self::points(d, coords)?;
        if tags.len() != t.len() {
            return Err(Error::Dimension {
                expected: t.len(),
                got: tags.len(),
            });
        }
        t.tags = Some(tags);
        Ok(t)
    }

    /// The nodes of a measure, with their tags.
    pub fn nodes(nu: &DiscreteMeasure) -> Self {
        Self {
            d: nu.dim(),
            coords: nu.points().to_vec(),
            tags: Some(nu.tags().to_vec()),
        }
    }

    /// The level-`n` cube centers.
    pub fn leaf_centers(set: &CantorSet) -> Self {
        Self {
            d: set.dim(),
            coords: set.leaf_centers().to_vec(),
            tags: Some((0..set.leaf_count() as u64).collect()),
        }
    }

    /// Points tagged by [`CantorSet::locate`]; fails for points off the set.
    pub fn located(set: &CantorSet, coords: Vec<f64>) -> Result<Self> {
        let d = set.dim();
        let mut t = Self::points(d, coords)?;
        let tags = (0..t.len())
            .map(|i| {
                set.locate(t.point(i)).map(|l| l.leaf()).ok_or_else(|| {
                    Error::Parameter(format!("target {i} lies outside the set"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        t.tags = Some(tags);
        Ok(t)
    }

    /// Same tags, every point moved by `offset`.
    pub fn shifted(&self, offset: &[f64]) -> Result<Self> {
        if offset.len() != self.d {
            return Err(Error::Dimension {
                expected: self.d,
                got: offset.len(),
            });
        }
        let d = self.d;
        Ok(Self {
            d,
            coords: self
                .coords
                .iter()
                .enumerate()
                .map(|(i, x)| x + offset[i % d])
                .collect(),
            tags: self.tags.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn tags(&self) -> Option<&[u64]> {
        self.tags.as_deref()
    }
}

/// Vector values of a transform at a set of targets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RieszField {
    pub d: usize,
    pub targets: Vec<f64>,
    pub values: Vec<f64>,
    pub eps: f64,
    pub s: f64,
    pub exclude: Exclusion,
    /// Set when `s ≥ d`: values are sums without a principal-value limit.
    pub formal: bool,
}

impl RieszField {
    pub fn len(&self) -> usize {
        self.values.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.value(i).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }

    /// Text export: `x_1 … x_d v_1 … v_d` per target.
    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        for i in 0..self.len() {
            let cols = self.targets[i * self.d..(i + 1) * self.d]
                .iter()
                .chain(self.value(i))
                .map(|x| crate::sequence::fmt_f64(*x))
                .collect::<Vec<_>>();
            let _ = writeln!(out, "{}", cols.join(" "));
        }
        out
    }
}

/// `(Σ_x |value(x)|² w_x)^{1/2}` for a field evaluated at the nodes of `nu`.
pub fn l2_norm(field: &RieszField, nu: &DiscreteMeasure) -> Result<f64> {
    if field.d != nu.dim() || field.targets.len() != nu.points().len() {
        return Err(Error::Dimension {
            expected: nu.points().len(),
            got: field.targets.len(),
        });
    }
    if field.targets != nu.points() {
        return Err(Error::Parameter("field targets are not the measure nodes".into()));
    }
    let mut acc = Neumaier::new();
    for (i, w) in nu.weights().iter().enumerate() {
        for v in field.value(i) {
            acc.add(v * v * w);
        }
    }
    Ok(acc.value().sqrt())
}

/// Dispatch a truncated transform to a backend.
pub fn transform(
    backend: Backend,
    nu: &DiscreteMeasure,
    targets: &TargetSet,
    eps: f64,
    s: f64,
    exclude: Exclusion,
) -> Result<RieszField> {
    match backend {
        Backend::Naive => transform_truncated(nu, targets, eps, s, exclude),
        Backend::Tree { mac } => tree_transform(nu, targets, eps, s, exclude, mac),
    }
}

pub(crate) fn check_common(nu: &DiscreteMeasure, targets: &TargetSet, eps: f64, s: f64, exclude: Exclusion) -> Result<bool> {
    if targets.dim() != nu.dim() {
        return Err(Error::Dimension {
            expected: nu.dim(),
            got: targets.dim(),
        });
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::Parameter(format!("eps = {eps} must be finite and non-negative")));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Parameter(format!("s = {s} must be positive")));
    }
    if exclude == Exclusion::OwnCube && targets.tags().is_none() {
        return Err(Error::Parameter("own-cube exclusion needs tagged targets".into()));
    }
    let formal = s >= nu.dim() as f64;
    if formal && matches!(nu.mode(), Some(crate::measure::Mode::Grid(_))) {
        return Err(Error::Parameter(format!(
            "s = {s} ≥ d is only supported on center measures"
        )));
    }
    Ok(formal)
}
