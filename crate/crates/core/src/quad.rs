//! One-dimensional numerics: adaptive Gauss–Kronrod quadrature and
//! bracketed root finding on a logarithmic scale.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let pair = f(c - dx) + f(c + dx);
        kron += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod (7, 15) integration of `f` over `[a, b]`.
///
/// Subdivides the interval with the worst error estimate until the summed
/// estimate drops below `rel_tol * |integral|` or `max_intervals` is hit.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    const MAX_INTERVALS: usize = 2000;
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Parameter(format!("integration bounds [{a}, {b}]")));
    }
    let mut pieces = vec![{
        let (v, e) = gk15(&f, a, b);
        (a, b, v, e)
    }];
    loop {
        let total: f64 = crate::sum::sum(pieces.iter().map(|p| p.2));
        let err: f64 = pieces.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(Error::Parameter("non-finite integrand".into()));
        }
        if err <= rel_tol * total.abs() || err < f64::MIN_POSITIVE {
            return Ok(total);
        }
        if pieces.len() >= MAX_INTERVALS {
            return Err(Error::NoConvergence {
                iterations: pieces.len(),
                previous: total,
                last: err,
            });
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (lo, hi, _, _) = pieces.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
}

/// Solve `f(t) = target` for an increasing positive function by bisection
/// in `ln t`, starting near `guess` and expanding the bracket geometrically.
pub fn solve_increasing_log<F: Fn(f64) -> f64>(f: F, target: f64, guess: f64) -> Result<f64> {
    const MAX_ITER: usize = 200;
    if !(target.is_finite() && target > 0.0) {
        return Err(Error::Bracket(format!("target {target} is not positive")));
    }
    let mut lo = guess.max(f64::MIN_POSITIVE).ln();
    let mut hi = lo;
    let mut expand = 1.0;
    while f(lo.exp()) > target {
        lo -= expand;
        expand *= 2.0;
        if lo < -700.0 {
            return Err(Error::Bracket(format!("no lower bracket for target {target:e}")));
        }
    }
    expand = 1.0;
    while f(hi.exp()) < target {
        hi += expand;
        expand *= 2.0;
        if hi > 700.0 {
            return Err(Error::Bracket(format!("no upper bracket for target {target:e}")));
        }
    }
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid.exp()) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}
