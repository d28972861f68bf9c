//! Decomposition of the transform at a point into frame shells.
//!
//! Shell `p` of a target holds the sources inside its block-`p` frame but
//! outside its block-`p+1` frame. A source lies in the block-`p` frame of the
//! target exactly when both share their level `j_p - 1` ancestor.

use rayon::prelude::*;

use super::kernel::Power;
use crate::error::{Error, Result};
use crate::geometry::CantorSet;
use crate::measure::DiscreteMeasure;
use crate::sum::VecSum;

/// `table[L]` is the shell (zero-based) of a source whose deepest common
/// ancestor with the target sits at level `L`.
pub fn shell_of_level(set: &CantorSet) -> Vec<usize> {
    let sel = set.ladder().selected();
    (0..=set.depth())
        .map(|level| sel.iter().rposition(|&jp| jp - 1 <= level).expect("j_1 = 1"))
        .collect()
}

fn common_level(d: usize, n: usize, a: u64, b: u64) -> usize {
    let x = a ^ b;
    if x == 0 {
        return n;
    }
    let bits = 64 - x.leading_zeros() as usize;
    n - bits.div_ceil(d)
}

fn shells_at(
    mu: &DiscreteMeasure,
    set: &CantorSet,
    table: &[usize],
    x: &[f64],
    kx: u64,
    power: Power,
) -> Vec<VecSum> {
    let d = set.dim();
    let n = set.depth();
    let mut out = vec![VecSum::new(d); set.ladder().blocks()];
    let mut diff = vec![0.0; d];
    for i in 0..mu.len() {
        let y = mu.point(i);
        let mut r2 = 0.0;
        for c in 0..d {
            diff[c] = y[c] - x[c];
            r2 += diff[c] * diff[c];
        }
        if r2 == 0.0 {
            continue;
        }
        let p = table[common_level(d, n, kx, mu.tags()[i])];
        out[p].add_scaled(&diff, power.factor(r2) * mu.weights()[i]);
    }
    out
}

fn check(mu: &DiscreteMeasure, set: &CantorSet) -> Result<()> {
    if mu.dim() != set.dim() || mu.depth() != set.depth() {
        return Err(Error::Parameter(
            "measure tags do not refer to this set's leaf cubes".into(),
        ));
    }
    Ok(())
}

/// Shell contributions `ξ_1 … ξ_m` at `x`, own node excluded; their sum is
/// the principal value at `x`.
pub fn xi_decomposition(
    mu: &DiscreteMeasure,
    set: &CantorSet,
    x: &[f64],
    s: f64,
) -> Result<Vec<Vec<f64>>> {
    check(mu, set)?;
    let loc = set
        .locate(x)
        .ok_or_else(|| Error::Parameter("point lies outside the set".into()))?;
    let table = shell_of_level(set);
    Ok(shells_at(mu, set, &table, x, loc.leaf(), Power::new(s))
        .iter()
        .map(VecSum::values)
        .collect())
}

/// `max_x |ξ_p(x)|` over all nodes of `mu`, per shell.
pub fn xi_shell_maxima(mu: &DiscreteMeasure, set: &CantorSet, s: f64) -> Result<Vec<f64>> {
    check(mu, set)?;
    let table = shell_of_level(set);
    let power = Power::new(s);
    let m = set.ladder().blocks();
    let per_node = (0..mu.len())
        .into_par_iter()
        .map(|i| {
            shells_at(mu, set, &table, mu.point(i), mu.tags()[i], power)
                .iter()
                .map(|v| v.values().iter().map(|c| c * c).sum::<f64>().sqrt())
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>();
    Ok((0..m)
        .map(|p| per_node.iter().map(|v| v[p]).fold(0.0, f64::max))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn common_level_counts_shared_digits() {
        // d = 2, n = 3: digits are 2 bits each
        assert_eq!(common_level(2, 3, 0b10_01_11, 0b10_01_11), 3);
        assert_eq!(common_level(2, 3, 0b10_01_11, 0b10_01_10), 2);
        assert_eq!(common_level(2, 3, 0b10_01_11, 0b10_11_11), 1);
        assert_eq!(common_level(2, 3, 0b10_01_11, 0b00_01_11), 0);
    }
}

#[cfg(test)]
mod decomposition_tests {
    use super::*;
    use crate::measure::{discretize, Mode};
    use crate::riesz::{transform_truncated, Exclusion, TargetSet};
    use crate::sequence::{regularize, LadderParams, SigmaSequence};

    #[test]
    fn shells_sum_to_transform() {
        let sig = SigmaSequence::new((1..=4).map(|j| 64f64.powi(-j)).collect()).unwrap();
        let set = CantorSet::build(&regularize(&sig, LadderParams::default()).unwrap(), 2).unwrap();
        assert!(set.ladder().blocks() > 1);
        let mu = discretize(&set, Mode::Grid(3)).unwrap();
        let field = transform_truncated(&mu, &TargetSet::nodes(&mu), 0.0, 1.0, Exclusion::OwnNode).unwrap();
        for i in (0..mu.len()).step_by(97) {
            let parts = xi_decomposition(&mu, &set, mu.point(i), 1.0).unwrap();
            for c in 0..2 {
                let total: f64 = parts.iter().map(|p| p[c]).sum();
                let v = field.value(i)[c];
                assert!((total - v).abs() <= 1e-12 * field.magnitudes()[i].max(1.0));
            }
        }
        let table = shell_of_level(&set);
        assert_eq!(table[0], 0);
        assert_eq!(*table.last().unwrap(), set.ladder().blocks() - 1);
    }
}
