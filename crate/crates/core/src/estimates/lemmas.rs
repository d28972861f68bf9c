use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sequence::{select_subsequence, subsequence_constant};
use crate::sum;

/// Largest `K` accepted by [`flip_injection_check`].
pub const MAX_FLIP_K: usize = 12;
/// Candidate sets up to this size are checked over every subfamily.
pub const EXHAUSTIVE_CANDIDATES: usize = 20;
/// Default number of sampled subfamilies above that size.
pub const RANDOM_SUBSETS: usize = 1000;
pub const MIN_TRIALS: usize = 10_000;
pub const BETA_STEP: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectionVerdict {
    /// `ν{f ≥ δL}`.
    pub fraction: f64,
    /// `(1-δ)²/(4A)`.
    pub bound: f64,
    pub holds: bool,
}

/// Lower bound on the mass where `f ≥ δL` given `∫f ≥ L` and `∫f² ≤ A L²`.
pub fn selection_check(f: &[f64], weights: &[f64], l: f64, a: f64, delta: f64) -> Result<SelectionVerdict> {
    if f.len() != weights.len() || f.is_empty() {
        return Err(Error::Dimension {
            expected: f.len(),
            got: weights.len(),
        });
    }
    if !(l > 0.0 && a > 0.0 && delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("L = {l}, A = {a}, delta = {delta}")));
    }
    if f.iter().any(|x| !(*x >= 0.0 && x.is_finite())) || weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::Hypothesis("values and weights must be non-negative".into()));
    }
    let total = sum::sum(weights.iter().copied());
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Hypothesis(format!("weights sum to {total}, not 1")));
    }
    let first = sum::sum(f.iter().zip(weights).map(|(x, w)| x * w));
    let second = sum::sum(f.iter().zip(weights).map(|(x, w)| x * x * w));
    let slack = 1e-12;
    if first < l * (1.0 - slack) {
        return Err(Error::Hypothesis(format!("∫f = {first} < L = {l}")));
    }
    if second > a * l * l * (1.0 + slack) {
        return Err(Error::Hypothesis(format!("∫f² = {second} > A L² = {}", a * l * l)));
    }
    let fraction = sum::sum(
        f.iter()
            .zip(weights)
            .filter(|(x, _)| **x >= delta * l)
            .map(|(_, w)| *w),
    );
    let bound = (1.0 - delta).powi(2) / (4.0 * a);
    Ok(SelectionVerdict {
        fraction,
        bound,
        holds: fraction >= bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsequenceVerdict {
    /// One-based picks.
    pub picks: Vec<usize>,
    /// `2^{-δ(p_l - p)} a_p ≤ a_{p_l}` for all `p ≤ p_l`.
    pub dominance: bool,
    pub picked_sum: f64,
    /// `(1 - 2^{-κδ}) Σ a_p^κ`.
    pub bound: f64,
    pub holds: bool,
}

pub fn subsequence_check(a: &[f64], delta: f64, kappa: f64) -> Result<SubsequenceVerdict> {
    let picks = select_subsequence(a, delta, kappa)?;
    let dominance = picks.iter().all(|&pl| {
        (1..=pl).all(|p| a[p - 1] * (-delta * (pl - p) as f64).exp2() <= a[pl - 1])
    });
    let picked_sum = sum::sum(picks.iter().map(|&p| a[p - 1].powf(kappa)));
    let bound = subsequence_constant(delta, kappa) * sum::sum(a.iter().map(|x| x.powf(kappa)));
    Ok(SubsequenceVerdict {
        holds: dominance && picked_sum >= bound,
        picks,
        dominance,
        picked_sum,
        bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlipVerdict {
    pub k: usize,
    /// Size of `{f : S(f) ≤ 0}`.
    pub candidates: usize,
    /// Size of a maximum injection of the candidates.
    pub matched: usize,
    /// A family with fewer admissible images than members, as sign vectors.
    pub counterexample: Option<Vec<Vec<i8>>>,
}

impl FlipVerdict {
    pub fn holds(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// Maximum matching size of a bipartite graph given by left adjacency lists.
pub fn max_matching(adj: &[Vec<usize>], right: usize) -> usize {
    matching(adj, right).0
}

const FREE: usize = usize::MAX;

fn matching(adj: &[Vec<usize>], right: usize) -> (usize, Vec<usize>, Vec<usize>) {
    let left = adj.len();
    let mut match_l = vec![FREE; left];
    let mut match_r = vec![FREE; right];
    let mut dist = vec![0usize; left];
    let mut size = 0;
    loop {
        // layered search from free left vertices
        let mut queue = VecDeque::new();
        let mut reachable_free = false;
        for u in 0..left {
            if match_l[u] == FREE {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                let w = match_r[v];
                if w == FREE {
                    reachable_free = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !reachable_free {
            return (size, match_l, match_r);
        }
        for u in 0..left {
            if match_l[u] == FREE && augment(u, adj, &mut match_l, &mut match_r, &mut dist) {
                size += 1;
            }
        }
    }
}

fn augment(u: usize, adj: &[Vec<usize>], ml: &mut [usize], mr: &mut [usize], dist: &mut [usize]) -> bool {
    for &v in &adj[u] {
        let w = mr[v];
        let ok = w == FREE || (dist[w] == dist[u] + 1 && augment(w, adj, ml, mr, dist));
        if ok {
            ml[u] = v;
            mr[v] = u;
            return true;
        }
    }
    dist[u] = usize::MAX;
    false
}

/// Left vertices reachable from unmatched ones along alternating paths.
/// When the matching is maximum they have fewer neighbours than members.
fn hall_violator(adj: &[Vec<usize>], match_l: &[usize], match_r: &[usize]) -> Vec<usize> {
    let mut seen = vec![false; adj.len()];
    let mut queue: VecDeque<usize> = (0..adj.len()).filter(|&u| match_l[u] == FREE).collect();
    for &u in &queue {
        seen[u] = true;
    }
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            let w = match_r[v];
            if w != FREE && !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    (0..adj.len()).filter(|&u| seen[u]).collect()
}

fn signs(mask: usize, k: usize) -> Vec<i8> {
    (0..k).map(|i| if mask >> i & 1 == 1 { 1 } else { -1 }).collect()
}

/// Lower masks, upper masks, and adjacency from lower to upper slots.
type FlipGraph = (Vec<usize>, Vec<usize>, Vec<Vec<usize>>);

/// Candidate masks with `S ≤ 0`, and for each the targets with `S ≥ 0`
/// reachable by turning negative signs positive. Bit `i` set means
/// component `i` is `+1`.
fn flip_graph(lambdas: &[f64]) -> Result<FlipGraph> {
    let k = lambdas.len();
    if k == 0 || k > MAX_FLIP_K {
        return Err(Error::OutOfRange {
            what: "K",
            value: k as u64,
            limit: MAX_FLIP_K as u64,
        });
    }
    if lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(Error::Parameter("weights must be positive".into()));
    }
    let all = 1usize << k;
    let s: Vec<f64> = (0..all)
        .map(|mask| {
            let mut acc = 0.0;
            for (i, l) in lambdas.iter().enumerate() {
                acc += if mask >> i & 1 == 1 { *l } else { -*l };
            }
            acc
        })
        .collect();
    let lower: Vec<usize> = (0..all).filter(|&m| s[m] <= 0.0).collect();
    let upper: Vec<usize> = (0..all).filter(|&m| s[m] >= 0.0).collect();
    let mut slot = vec![usize::MAX; all];
    for (i, &m) in upper.iter().enumerate() {
        slot[m] = i;
    }
    let edges = lower
        .iter()
        .map(|&f| upper.iter().filter(|&&g| g & f == f).map(|&g| slot[g]).collect())
        .collect();
    Ok((lower, upper, edges))
}

/// Decides whether every family of sign vectors with `S ≤ 0` injects into
/// the vectors with `S ≥ 0` by turning some negative signs positive. A
/// matching of the whole candidate set restricts to every subfamily; when
/// none exists the returned counterexample violates Hall's condition.
pub fn flip_injection_check(lambdas: &[f64]) -> Result<FlipVerdict> {
    let k = lambdas.len();
    let (lower, upper, edges) = flip_graph(lambdas)?;
    let (matched, match_l, match_r) = matching(&edges, upper.len());
    let counterexample = (matched < lower.len()).then(|| {
        hall_violator(&edges, &match_l, &match_r)
            .into_iter()
            .map(|i| signs(lower[i], k))
            .collect()
    });
    Ok(FlipVerdict {
        k,
        candidates: lower.len(),
        matched,
        counterexample,
    })
}

/// Subfamily-by-subfamily form of [`flip_injection_check`]: every nonempty
/// subfamily when there are at most [`EXHAUSTIVE_CANDIDATES`] candidates,
/// otherwise `samples` random ones. Returns the number of subfamilies
/// checked and the first one without an injection.
pub fn flip_subfamilies_check(lambdas: &[f64], samples: usize, seed: u64) -> Result<(usize, Option<Vec<Vec<i8>>>)> {
    let k = lambdas.len();
    let (lower, upper, edges) = flip_graph(lambdas)?;
    let c = lower.len();
    let fails = |members: &[usize]| {
        let adj: Vec<Vec<usize>> = members.iter().map(|&i| edges[i].clone()).collect();
        max_matching(&adj, upper.len()) < members.len()
    };
    let witness = |members: &[usize]| Some(members.iter().map(|&i| signs(lower[i], k)).collect());
    if c <= EXHAUSTIVE_CANDIDATES {
        for subset in 1usize..(1 << c) {
            let members: Vec<usize> = (0..c).filter(|i| subset >> i & 1 == 1).collect();
            if fails(&members) {
                return Ok((subset, witness(&members)));
            }
        }
        return Ok(((1 << c) - 1, None));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 1..=samples {
        let p: f64 = rng.random();
        let mut members: Vec<usize> = (0..c).filter(|_| rng.random::<f64>() < p).collect();
        if members.is_empty() {
            members.push(rng.random_range(0..c));
        }
        if fails(&members) {
            return Ok((t, witness(&members)));
        }
    }
    Ok((samples, None))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WilsonInterval {
    pub low: f64,
    pub high: f64,
}

/// 95% Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize) -> WilsonInterval {
    let z = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    WilsonInterval {
        low: (center - half).max(0.0),
        high: (center + half).min(1.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Anticoncentration {
    pub trials: usize,
    /// Largest grid `β` with `P{|Σζ| ≥ β σ} ≥ β` empirically.
    pub beta_hat: f64,
    /// Empirical probability at `beta_hat`.
    pub prob_hat: f64,
    pub prob_interval: WilsonInterval,
    /// Empirical `P{|Σζ| ≥ σ}`.
    pub prob_at_sigma: f64,
    pub sigma_interval: WilsonInterval,
}

/// Monte Carlo over independent symmetric signs `±λ_i`. Trial `t` draws
/// from its own stream of the seeded generator.
pub fn anticoncentration_check(lambdas: &[f64], trials: usize, seed: u64) -> Result<Anticoncentration> {
    if trials < MIN_TRIALS {
        return Err(Error::OutOfRange {
            what: "trials",
            value: trials as u64,
            limit: MIN_TRIALS as u64,
        });
    }
    if lambdas.is_empty() || lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(Error::Parameter("weights must be positive".into()));
    }
    let sigma = sum::sum(lambdas.iter().map(|l| l * l)).sqrt();
    let mut sums: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t);
            let mut acc = 0.0;
            for l in lambdas {
                acc += if rng.random::<bool>() { *l } else { -*l };
            }
            acc.abs()
        })
        .collect();
    sums.sort_by(|a, b| a.total_cmp(b));
    let at_least = |x: f64| trials - sums.partition_point(|v| *v < x);
    let steps = (1.0 / BETA_STEP).round() as usize;
    let mut found = None;
    for i in (1..=steps).rev() {
        let beta = i as f64 / steps as f64;
        let hits = at_least(beta * sigma);
        if hits as f64 >= beta * trials as f64 {
            found = Some((beta, hits));
            break;
        }
    }
    let (beta_hat, hits) = found.unwrap_or((0.0, trials));
    let sigma_hits = at_least(sigma);
    Ok(Anticoncentration {
        trials,
        beta_hat,
        prob_hat: hits as f64 / trials as f64,
        prob_interval: wilson_interval(hits, trials),
        prob_at_sigma: sigma_hits as f64 / trials as f64,
        sigma_interval: wilson_interval(sigma_hits, trials),
    })
}
