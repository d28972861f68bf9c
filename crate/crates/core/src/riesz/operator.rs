//! The discrete Riesz operator `f ↦ Σ_{|y-x|>ε} K^s(y-x) f(y) w_y`, its
//! adjoint, and its norm by Krylov-accelerated power iteration.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::kernel::Power;
use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::sum::{Neumaier, VecSum};

pub const DEFAULT_SEED: u64 = 0x5eed_2024_c0ff_ee01;
pub const RESTART_SEED: u64 = 0x5eed_2024_c0ff_ee02;

const BLOCK: usize = 64;
/// Krylov basis size between restarts.
const KRYLOV: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Adjoint,
}

#[derive(Debug, Clone)]
pub struct OperatorHandle {
    measure: DiscreteMeasure,
    eps: f64,
    s: f64,
}

impl OperatorHandle {
    /// `eps = 0` drops only coincident nodes.
    pub fn new(measure: DiscreteMeasure, eps: f64, s: f64) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::Parameter(format!("eps = {eps}")));
        }
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Parameter(format!("s = {s}")));
        }
        Ok(Self { measure, eps, s })
    }

    pub fn measure(&self) -> &DiscreteMeasure {
        &self.measure
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(self.measure.clone(), eps, self.s)
    }

    /// Forward takes a scalar field and returns `N·d` values; the adjoint
    /// takes `N·d` values and returns a scalar field.
    pub fn apply(&self, f: &[f64], direction: Direction) -> Result<Vec<f64>> {
        let n = self.measure.len();
        let d = self.measure.dim();
        match direction {
            Direction::Forward => {
                if f.len() != n {
                    return Err(Error::Dimension { expected: n, got: f.len() });
                }
                Ok(self.forward(f))
            }
            Direction::Adjoint => {
                if f.len() != n * d {
                    return Err(Error::Dimension {
                        expected: n * d,
                        got: f.len(),
                    });
                }
                Ok(self.adjoint(f))
            }
        }
    }

    fn forward(&self, f: &[f64]) -> Vec<f64> {
        let coef: Vec<f64> = f.iter().zip(self.measure.weights()).map(|(a, w)| a * w).collect();
        let pts = self.measure.points();
        let eps = self.eps;
        macro_rules! run {
            ($d:literal, $fac:expr) => {{
                let fac = $fac;
                pts.par_chunks_exact($d)
                    .flat_map_iter(|x| forward_row::<$d, _>(pts, x, &coef, eps, fac))
                    .collect()
            }};
        }
        dispatch!(self, run, |x: &[f64]| forward_dyn(pts, x, &coef, eps, self.power(), self.measure.dim()))
    }

    fn adjoint(&self, g: &[f64]) -> Vec<f64> {
        let d = self.measure.dim();
        let w = self.measure.weights();
        let coef: Vec<f64> = g
            .iter()
            .enumerate()
            .map(|(i, v)| v * w[i / d])
            .collect();
        let pts = self.measure.points();
        let eps = self.eps;
        macro_rules! run {
            ($d:literal, $fac:expr) => {{
                let fac = $fac;
                pts.par_chunks_exact($d)
                    .map(|y| adjoint_row::<$d, _>(pts, y, &coef, eps, fac))
                    .collect()
            }};
        }
        dispatch!(self, run, |y: &[f64]| vec![adjoint_dyn(pts, y, &coef, eps, self.power(), d)])
    }

    fn power(&self) -> Power {
        Power::new(self.s)
    }

    /// `⟨a, b⟩` in `L²(ν)` for scalar (`d = 1` layout) or vector fields.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let per = a.len() / self.measure.len();
        let w = self.measure.weights();
        let mut acc = Neumaier::new();
        for (i, (x, y)) in a.iter().zip(b).enumerate() {
            acc.add(x * y * w[i / per]);
        }
        acc.value()
    }
}

macro_rules! dispatch {
    ($self:ident, $run:ident, $dyn:expr) => {{
        let d = $self.measure.dim();
        match ($self.power(), d) {
            (Power::One, 1) => $run!(1, |r2: f64| 1.0 / r2),
            (Power::One, 2) => $run!(2, |r2: f64| 1.0 / r2),
            (Power::One, 3) => $run!(3, |r2: f64| 1.0 / r2),
            (p, 1) => $run!(1, move |r2: f64| p.factor(r2)),
            (p, 2) => $run!(2, move |r2: f64| p.factor(r2)),
            (p, 3) => $run!(3, move |r2: f64| p.factor(r2)),
            _ => {
                let dyn_row = $dyn;
                $self
                    .measure
                    .points()
                    .par_chunks_exact(d)
                    .flat_map_iter(|x| dyn_row(x))
                    .collect()
            }
        }
    }};
}
use dispatch;

#[inline(always)]
fn forward_row<const D: usize, F: Fn(f64) -> f64>(
    pts: &[f64],
    x: &[f64],
    coef: &[f64],
    eps: f64,
    factor: F,
) -> [f64; D] {
    let mut acc = [Neumaier::new(); D];
    for (block, cb) in pts.chunks(BLOCK * D).zip(coef.chunks(BLOCK)) {
        let mut part = [0.0; D];
        for (y, &c) in block.chunks_exact(D).zip(cb) {
            let mut diff = [0.0; D];
            let mut r2 = 0.0;
            for k in 0..D {
                diff[k] = y[k] - x[k];
                r2 += diff[k] * diff[k];
            }
            let k = if r2.sqrt() > eps { factor(r2) * c } else { 0.0 };
            for j in 0..D {
                part[j] += diff[j] * k;
            }
        }
        for j in 0..D {
            acc[j].add(part[j]);
        }
    }
    acc.map(|a| a.value())
}

#[inline(always)]
fn adjoint_row<const D: usize, F: Fn(f64) -> f64>(
    pts: &[f64],
    y: &[f64],
    coef: &[f64],
    eps: f64,
    factor: F,
) -> f64 {
    let mut acc = Neumaier::new();
    for (block, cb) in pts.chunks(BLOCK * D).zip(coef.chunks(BLOCK * D)) {
        let mut part = 0.0;
        for (x, g) in block.chunks_exact(D).zip(cb.chunks_exact(D)) {
            let mut dot = 0.0;
            let mut r2 = 0.0;
            for k in 0..D {
                let diff = y[k] - x[k];
                r2 += diff * diff;
                dot += diff * g[k];
            }
            part += if r2.sqrt() > eps { factor(r2) * dot } else { 0.0 };
        }
        acc.add(part);
    }
    acc.value()
}

fn forward_dyn(pts: &[f64], x: &[f64], coef: &[f64], eps: f64, power: Power, d: usize) -> Vec<f64> {
    let mut acc = VecSum::new(d);
    let mut diff = vec![0.0; d];
    for (y, &c) in pts.chunks_exact(d).zip(coef) {
        let mut r2 = 0.0;
        for k in 0..d {
            diff[k] = y[k] - x[k];
            r2 += diff[k] * diff[k];
        }
        if r2.sqrt() > eps {
            acc.add_scaled(&diff, power.factor(r2) * c);
        }
    }
    acc.values()
}

fn adjoint_dyn(pts: &[f64], y: &[f64], coef: &[f64], eps: f64, power: Power, d: usize) -> f64 {
    let mut acc = Neumaier::new();
    for (x, g) in pts.chunks_exact(d).zip(coef.chunks_exact(d)) {
        let mut r2 = 0.0;
        let mut dot = 0.0;
        for k in 0..d {
            let diff = y[k] - x[k];
            r2 += diff * diff;
            dot += diff * g[k];
        }
        if r2.sqrt() > eps {
            acc.add(power.factor(r2) * dot);
        }
    }
    acc.value()
}

#[derive(Debug, Clone, Serialize)]
pub struct NormEstimate {
    pub norm: f64,
    /// Final Rayleigh quotient of `R*R`.
    pub lambda: f64,
    pub iterations: usize,
    pub seed: u64,
    pub restarted: bool,
    /// `(iteration, Rayleigh quotient)`.
    pub trace: Vec<(usize, f64)>,
    #[serde(skip)]
    pub vector: Vec<f64>,
}

fn seeded_start(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn normalize(h: &OperatorHandle, v: &mut [f64]) -> f64 {
    let norm = h.inner(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

struct Run {
    lambda: f64,
    previous: f64,
    iterations: usize,
    converged: bool,
    residual: f64,
    vector: Vec<f64>,
    trace: Vec<(usize, f64)>,
}

/// Largest eigenvalue and its unit eigenvector of the Lanczos matrix.
fn top_ritz(alphas: &[f64], betas: &[f64]) -> (f64, Vec<f64>) {
    let k = alphas.len();
    let t = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alphas[i]
        } else if i + 1 == j {
            betas[i]
        } else if j + 1 == i {
            betas[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let top = (1..k).fold(0, |b, i| if eig.eigenvalues[i] > eig.eigenvalues[b] { i } else { b });
    (eig.eigenvalues[top], eig.eigenvectors.column(top).iter().copied().collect())
}

/// Power iteration on `R*R` with the Rayleigh quotient taken over the
/// Krylov space of the iterates (Lanczos), restarted from the Ritz vector
/// every `KRYLOV` applications.
fn iterate(h: &OperatorHandle, v0: Vec<f64>, tol: f64, max_iter: usize, offset: usize) -> Run {
    let mut trace = Vec::new();
    let mut lambda = 0.0;
    let mut previous = f64::NAN;
    let mut x = v0;
    normalize(h, &mut x);
    let mut it = 0;
    while it < max_iter {
        let mut basis = vec![x.clone()];
        let mut alphas = Vec::new();
        let mut betas = Vec::new();
        let mut ritz = vec![1.0];
        for k in 0..KRYLOV {
            if it == max_iter {
                break;
            }
            it += 1;
            let mut w = h.adjoint(&h.forward(&basis[k]));
            alphas.push(h.inner(&w, &basis[k]));
            for _ in 0..2 {
                for b in &basis {
                    let c = h.inner(&w, b);
                    w.iter_mut().zip(b).for_each(|(a, v)| *a -= c * v);
                }
            }
            let beta = h.inner(&w, &w).sqrt();
            let (theta, y) = top_ritz(&alphas, &betas);
            ritz = y;
            trace.push((offset + it, theta));
            previous = lambda;
            lambda = theta;
            let residual = if lambda > 0.0 {
                beta * ritz[k].abs() / lambda
            } else {
                0.0
            };
            let stagnant = it > 1 && (lambda - previous).abs() <= tol * lambda;
            let exhausted = beta <= 1e-14 * lambda.abs() || lambda <= 0.0;
            if (stagnant && residual <= tol.sqrt()) || exhausted {
                return Run {
                    lambda: lambda.max(0.0),
                    previous,
                    iterations: it,
                    converged: true,
                    residual,
                    vector: combine(h, &basis, &ritz),
                    trace,
                };
            }
            if k + 1 < KRYLOV {
                betas.push(beta);
                w.iter_mut().for_each(|a| *a /= beta);
                basis.push(w);
            }
        }
        x = combine(h, &basis[..ritz.len()], &ritz);
    }
    Run {
        lambda,
        previous,
        iterations: it,
        converged: false,
        residual: f64::INFINITY,
        vector: x,
        trace,
    }
}

fn combine(h: &OperatorHandle, basis: &[Vec<f64>], coef: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; basis[0].len()];
    for (b, c) in basis.iter().zip(coef) {
        x.iter_mut().zip(b).for_each(|(a, v)| *a += c * v);
    }
    normalize(h, &mut x);
    x
}

/// Largest singular value of the operator on `L²(ν)`, from the fixed seed.
pub fn operator_norm(h: &OperatorHandle, tol: f64, max_iter: usize) -> Result<NormEstimate> {
    operator_norm_from(h, tol, max_iter, None)
}

/// Power iteration on `R*R` with stagnation below `tol` (relative) as the
/// stopping rule. A stalled run whose residual stays large is repeated
/// from a second seed and the larger quotient kept.
pub fn operator_norm_from(
    h: &OperatorHandle,
    tol: f64,
    max_iter: usize,
    start: Option<&[f64]>,
) -> Result<NormEstimate> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::Parameter(format!("tol = {tol}, max_iter = {max_iter}")));
    }
    let n = h.measure.len();
    let v0 = match start {
        Some(s) if s.len() == n => {
            let noise = seeded_start(n, DEFAULT_SEED);
            s.iter().zip(noise).map(|(a, b)| a + 0.25 * b).collect()
        }
        Some(s) => return Err(Error::Dimension { expected: n, got: s.len() }),
        None => seeded_start(n, DEFAULT_SEED),
    };
    let first = iterate(h, v0, tol, max_iter, 0);
    if !first.converged {
        return Err(Error::NoConvergence {
            iterations: first.iterations,
            previous: first.previous,
            last: first.lambda,
        });
    }
    let near_degenerate = first.residual > tol.sqrt().max(1e-6) * 1e3;
    let (best, restarted, seed) = if near_degenerate {
        let second = iterate(h, seeded_start(n, RESTART_SEED), tol, max_iter, first.iterations);
        let mut trace = first.trace;
        trace.extend(second.trace.iter().copied());
        let pick = if second.converged && second.lambda > first.lambda {
            Run { trace, ..second }
        } else {
            Run { trace, ..first }
        };
        let seed = if pick.lambda == first.lambda { DEFAULT_SEED } else { RESTART_SEED };
        (pick, true, seed)
    } else {
        (first, false, DEFAULT_SEED)
    };
    Ok(NormEstimate {
        norm: best.lambda.sqrt(),
        lambda: best.lambda,
        iterations: best.trace.len(),
        seed,
        restarted,
        trace: best.trace,
        vector: best.vector,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SupNorm {
    pub norm: f64,
    pub argmax_eps: f64,
    /// `(eps, norm, iterations)` per grid entry.
    pub per_eps: Vec<(f64, f64, usize)>,
}

/// Supremum over `eps_grid` (entries ≥ 0, zero meaning own-node exclusion)
/// of the operator norm, warm-starting each radius from the previous one.
pub fn sup_operator_norm(
    nu: &DiscreteMeasure,
    eps_grid: &[f64],
    s: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SupNorm> {
    if eps_grid.is_empty() {
        return Err(Error::Empty("eps grid"));
    }
    let mut handle = OperatorHandle::new(nu.clone(), eps_grid[0], s)?;
    let mut warm: Option<Vec<f64>> = None;
    let mut per_eps = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        handle = handle.with_eps(eps)?;
        let est = operator_norm_from(&handle, tol, max_iter, warm.as_deref())?;
        per_eps.push((eps, est.norm, est.iterations));
        warm = Some(est.vector);
    }
    let (argmax_eps, norm, _) = per_eps
        .iter()
        .copied()
        .fold((eps_grid[0], f64::NEG_INFINITY, 0), |a, b| if b.1 > a.1 { b } else { a });
    Ok(SupNorm {
        norm,
        argmax_eps,
        per_eps,
    })
}
