//! Generating scales, their regularization into a ladder, and ladder
//! statistics.

use std::fmt;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// Raw generating scales `σ_1 … σ_n` with `2σ_{j+1} ≤ σ_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaSequence {
    values: Vec<f64>,
}

impl SigmaSequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSequence("sequence needs at least one scale".into()));
        }
        for (j, &v) in values.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidSequence(format!(
                    "scale {} = {v} is not a positive finite number",
                    j + 1
                )));
            }
        }
        for j in 1..values.len() {
            if 2.0 * values[j] > values[j - 1] {
                return Err(Error::InvalidSequence(format!(
                    "halving fails at {}: 2*{:e} > {:e}",
                    j + 1,
                    values[j],
                    values[j - 1]
                )));
            }
        }
        Ok(Self { values })
    }

    /// `σ_j = first · ratio^{-(j-1)}`, `j = 1..=n`.
    pub fn geometric(first: f64, ratio: f64, n: usize) -> Result<Self> {
        if !(ratio >= 2.0) {
            return Err(Error::InvalidSequence(format!("ratio {ratio} below 2")));
        }
        let mut values = Vec::with_capacity(n);
        let mut v = first;
        for _ in 0..n {
            values.push(v);
            v /= ratio;
        }
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// One-based access.
    pub fn get(&self, j: usize) -> f64 {
        self.values[j - 1]
    }

    /// The first `n` scales.
    pub fn truncate(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(Error::OutOfRange {
                what: "truncation depth",
                value: n as u64,
                limit: self.len() as u64,
            });
        }
        Ok(Self {
            values: self.values[..n].to_vec(),
        })
    }
}

/// Construction parameters `(α, T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderParams {
    pub alpha: f64,
    #[serde(rename = "T")]
    pub frame: f64,
}

impl LadderParams {
    pub const DEFAULT_FRAME: f64 = 4.0;

    pub fn new(alpha: f64, frame: f64) -> Result<Self> {
        let p = Self { alpha, frame };
        p.validate()?;
        Ok(p)
    }

    /// `α = min(0.1, 1/(4T))` for the given frame factor.
    pub fn with_frame(frame: f64) -> Result<Self> {
        Self::new(0.1f64.min(1.0 / (4.0 * frame)), frame)
    }

    pub fn validate(&self) -> Result<()> {
        let Self { alpha, frame } = *self;
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(Error::Parameter(format!("alpha = {alpha} not in (0, 1/2)")));
        }
        if !(frame > 1.0 && frame < 1.0 / (2.0 * alpha)) {
            return Err(Error::Parameter(format!(
                "T = {frame} not in (1, {})",
                1.0 / (2.0 * alpha)
            )));
        }
        Ok(())
    }
}

impl Default for LadderParams {
    fn default() -> Self {
        Self {
            alpha: 0.1f64.min(1.0 / (4.0 * Self::DEFAULT_FRAME)),
            frame: Self::DEFAULT_FRAME,
        }
    }
}

/// Regularized scales `ℓ_1 … ℓ_n` and the selected block starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ladder {
    sigma: SigmaSequence,
    ell: Vec<f64>,
    /// One-based, strictly increasing, first element 1, last element n.
    selected: Vec<usize>,
    params: LadderParams,
}

/// Run the block-selection recurrence on `sigma`.
pub fn regularize(sigma: &SigmaSequence, params: LadderParams) -> Result<Ladder> {
    params.validate()?;
    let n = sigma.len();
    let alpha = params.alpha;
    let s = |j: usize| sigma.get(j);
    // α·2^{-(j-j_p)}·σ_{j_p}; the dyadic factor is exact.
    let drop = |j: usize, jp: usize| alpha * (s(jp) * (-((j - jp) as f64)).exp2());

    let mut selected = vec![1usize];
    while let Some(&jp) = selected.last() {
        if jp >= n {
            break;
        }
        let next = if s(n) <= drop(n, jp) {
            (jp + 1..=n)
                .find(|&j| s(j) <= drop(j, jp))
                .expect("bracketed by j = n")
        } else {
            n
        };
        selected.push(next);
    }

    let mut ell = vec![0.0; n];
    for w in selected.windows(2) {
        for j in w[0]..w[1] {
            ell[j - 1] = s(w[0]) * (-((j - w[0]) as f64)).exp2();
        }
    }
    ell[n - 1] = if n == 1 {
        s(1)
    } else {
        let prev = selected[selected.len() - 2];
        s(n).min(drop(n, prev))
    };
    Ok(Ladder {
        sigma: sigma.clone(),
        ell,
        selected,
        params,
    })
}

impl Ladder {
    pub fn sigma(&self) -> &SigmaSequence {
        &self.sigma
    }

    pub fn ell(&self) -> &[f64] {
        &self.ell
    }

    /// One-based access to `ℓ_j`.
    pub fn ell_at(&self, j: usize) -> f64 {
        self.ell[j - 1]
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn is_selected(&self, j: usize) -> bool {
        self.selected.binary_search(&j).is_ok()
    }

    pub fn params(&self) -> LadderParams {
        self.params
    }

    pub fn alpha(&self) -> f64 {
        self.params.alpha
    }

    pub fn frame(&self) -> f64 {
        self.params.frame
    }

    pub fn depth(&self) -> usize {
        self.ell.len()
    }

    pub fn blocks(&self) -> usize {
        self.selected.len()
    }

    /// Block index `p` (one-based) containing level `j`.
    pub fn block_of(&self, j: usize) -> usize {
        match self.selected.binary_search(&j) {
            Ok(i) => i + 1,
            Err(i) => i,
        }
    }

    /// Check every ladder law; returns the list of violations.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let n = self.depth();
        let a = self.alpha();
        let sig = self.sigma.values();
        if self.selected.first() != Some(&1) || self.selected.last() != Some(&n) {
            out.push(format!("selection {:?} does not span 1..{n}", self.selected));
        }
        if self.selected.windows(2).any(|w| w[0] >= w[1]) {
            out.push("selection not strictly increasing".into());
        }
        for j in 1..n {
            let (l, sg) = (self.ell[j - 1], sig[j - 1]);
            if !(sg <= l && a * l < sg) {
                out.push(format!("level {j}: sigma {sg:e} vs ell {l:e}"));
            }
        }
        let (ln, sn) = (self.ell[n - 1], sig[n - 1]);
        if !(a * sn <= ln && ln <= sn) {
            out.push(format!("last level: sigma {sn:e} vs ell {ln:e}"));
        }
        for w in self.selected.windows(2) {
            let (jp, jq) = (w[0], w[1]);
            let bound = a * (self.ell_at(jp) * (-((jq - jp) as f64)).exp2());
            if self.ell_at(jq) > bound {
                out.push(format!("block drop fails between {jp} and {jq}"));
            }
            for j in jp..jq {
                if self.ell_at(j) != self.ell_at(jp) * (-((j - jp) as f64)).exp2() {
                    out.push(format!("level {j} not dyadic within block starting {jp}"));
                }
            }
        }
        out
    }

    /// Line-oriented text form: a parameter header then `j sigma ell selected`.
    pub fn to_text(&self, d: usize, s: f64) -> String {
        let mut out = format!(
            "d={d} s={} alpha={} T={}\n",
            fmt_f64(s),
            fmt_f64(self.alpha()),
            fmt_f64(self.frame())
        );
        for j in 1..=self.depth() {
            let _ = writeln!(
                out,
                "{j} {} {} {}",
                fmt_f64(self.sigma.get(j)),
                fmt_f64(self.ell_at(j)),
                u8::from(self.is_selected(j))
            );
        }
        out
    }

    /// Parse the text form; the ladder is recomputed from the sigma column
    /// and must reproduce the stored `ell` and selection bit-for-bit.
    pub fn from_text(text: &str) -> Result<(usize, f64, Ladder)> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Empty("ladder text"))?;
        let mut d = None;
        let mut s = None;
        let mut alpha = None;
        let mut frame = None;
        for field in header.split_whitespace() {
            let (key, val) = field.split_once('=').ok_or_else(|| Error::Parse {
                line: 1,
                msg: format!("malformed header field {field:?}"),
            })?;
            let num = |v: &str| {
                v.parse::<f64>().map_err(|e| Error::Parse {
                    line: 1,
                    msg: format!("{key}: {e}"),
                })
            };
            match key {
                "d" => {
                    d = Some(val.parse::<usize>().map_err(|e| Error::Parse {
                        line: 1,
                        msg: format!("d: {e}"),
                    })?)
                }
                "s" => s = Some(num(val)?),
                "alpha" => alpha = Some(num(val)?),
                "T" => frame = Some(num(val)?),
                _ => {
                    return Err(Error::Parse {
                        line: 1,
                        msg: format!("unknown header key {key:?}"),
                    })
                }
            }
        }
        let missing = |k: &str| Error::Parse {
            line: 1,
            msg: format!("header lacks {k}"),
        };
        let d = d.ok_or_else(|| missing("d"))?;
        let s = s.ok_or_else(|| missing("s"))?;
        let params = LadderParams::new(
            alpha.ok_or_else(|| missing("alpha"))?,
            frame.ok_or_else(|| missing("T"))?,
        )?;

        let mut rows = Vec::new();
        for (i, line) in lines {
            let cols: Vec<&str> = line.split_whitespace().collect();
            let bad = |msg: String| Error::Parse { line: i + 1, msg };
            if cols.len() != 4 {
                return Err(bad(format!("expected 4 columns, got {}", cols.len())));
            }
            let j: usize = cols[0].parse().map_err(|e| bad(format!("j: {e}")))?;
            if j != rows.len() + 1 {
                return Err(bad(format!("level {j} out of order")));
            }
            let sg: f64 = cols[1].parse().map_err(|e| bad(format!("sigma: {e}")))?;
            let l: f64 = cols[2].parse().map_err(|e| bad(format!("ell: {e}")))?;
            let sel = match cols[3] {
                "0" => false,
                "1" => true,
                other => return Err(bad(format!("selected flag {other:?}"))),
            };
            rows.push((sg, l, sel));
        }
        let sigma = SigmaSequence::new(rows.iter().map(|r| r.0).collect())?;
        let ladder = regularize(&sigma, params)?;
        for (j, &(_, l, sel)) in rows.iter().enumerate() {
            if ladder.ell[j] != l || ladder.is_selected(j + 1) != sel {
                return Err(Error::Parse {
                    line: j + 2,
                    msg: "row inconsistent with the regularized sigma column".into(),
                });
            }
        }
        Ok((d, s, ladder))
    }
}

/// 17 significant digits, round-trip exact.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Per-level and per-block density statistics of a ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderStats {
    pub d: usize,
    pub s: f64,
    /// `θ_j = 2^{-dj} / ℓ_j^s`, `j = 1..=n`.
    pub theta: Vec<f64>,
    /// `θ` restricted to selected levels.
    pub block_theta: Vec<f64>,
    /// Prefix sums of squared block densities.
    pub partial: Vec<f64>,
    /// `Σ_j θ_j²`.
    pub total: f64,
}

impl LadderStats {
    /// Geometric bound `Σ_{i≥0} 4^{-(d-s)i}` on each block sum of `θ²`
    /// relative to its leading term.
    pub fn block_constant(&self) -> f64 {
        block_constant(self.d, self.s)
    }

    /// Decay exponent `min((d-s)/2, 1/2)` of the shell cross terms.
    pub fn decay_exponent(&self) -> f64 {
        decay_exponent(self.d, self.s)
    }

    /// Sums of `θ_j²` over each block `j_p ≤ j < j_{p+1}` (the last block
    /// ends at `n`).
    pub fn block_sums(&self, ladder: &Ladder) -> Vec<f64> {
        let sel = ladder.selected();
        let n = ladder.depth();
        (0..sel.len())
            .map(|p| {
                let end = if p + 1 < sel.len() { sel[p + 1] } else { n + 1 };
                crate::sum::sum((sel[p]..end).map(|j| self.theta[j - 1].powi(2)))
            })
            .collect()
    }
}

pub fn block_constant(d: usize, s: f64) -> f64 {
    1.0 / (1.0 - (-2.0 * (d as f64 - s)).exp2())
}

pub fn decay_exponent(d: usize, s: f64) -> f64 {
    (0.5 * (d as f64 - s)).min(0.5)
}

/// `2^{-dj} / scale^s`.
pub fn density(d: usize, s: f64, j: usize, scale: f64) -> f64 {
    (-((d * j) as f64)).exp2() / scale.powf(s)
}

pub fn ladder_stats(ladder: &Ladder, d: usize, s: f64) -> Result<LadderStats> {
    if d == 0 {
        return Err(Error::Parameter("dimension must be at least 1".into()));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Parameter(format!("s = {s} must be positive")));
    }
    let theta: Vec<f64> = (1..=ladder.depth())
        .map(|j| density(d, s, j, ladder.ell_at(j)))
        .collect();
    let block_theta: Vec<f64> = ladder.selected().iter().map(|&j| theta[j - 1]).collect();
    let mut acc = crate::sum::Neumaier::new();
    let partial = block_theta
        .iter()
        .map(|t| {
            acc.add(t * t);
            acc.value()
        })
        .collect();
    let total = crate::sum::sum(theta.iter().map(|t| t * t));
    Ok(LadderStats {
        d,
        s,
        theta,
        block_theta,
        partial,
        total,
    })
}

/// Like [`ladder_stats`] but restricted to `s ∈ (0, d)`, the range where
/// the two-sided estimates are meaningful.
pub fn ladder_stats_strict(ladder: &Ladder, d: usize, s: f64) -> Result<LadderStats> {
    if !(s > 0.0 && s < d as f64) {
        return Err(Error::Parameter(format!("s = {s} not in (0, {d})")));
    }
    ladder_stats(ladder, d, s)
}

/// Backward greedy subsequence: each pick is the least maximizer of the
/// discounted score `2^{-δ(ref-p)} a_p` to the left of the previous pick.
/// Returns one-based indices in increasing order.
pub fn select_subsequence(a: &[f64], delta: f64, kappa: f64) -> Result<Vec<usize>> {
    if a.is_empty() {
        return Err(Error::Empty("subsequence input"));
    }
    if !(delta > 0.0 && kappa > 0.0) {
        return Err(Error::Parameter(format!(
            "delta = {delta}, kappa = {kappa} must be positive"
        )));
    }
    if a.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Parameter("subsequence entries must be positive".into()));
    }
    let m = a.len();
    let mut picks = Vec::new();
    let mut reference = m;
    let mut upper = m; // candidates are 1..=upper
    while upper >= 1 {
        let mut best = 1;
        let mut best_score = f64::NEG_INFINITY;
        for p in 1..=upper {
            let score = a[p - 1] * (-delta * (reference - p) as f64).exp2();
            if score > best_score {
                best_score = score;
                best = p;
            }
        }
        picks.push(best);
        reference = best;
        upper = best - 1;
    }
    picks.reverse();
    Ok(picks)
}

/// `(Σ_{i≥0} 2^{-κδi})^{-1} = 1 - 2^{-κδ}`.
pub fn subsequence_constant(delta: f64, kappa: f64) -> f64 {
    1.0 - (-kappa * delta).exp2()
}

type GaugeEval = dyn Fn(f64) -> f64 + Send + Sync;

/// A measure function `h`: continuous, increasing, `h(0) = 0`.
#[derive(Clone)]
pub struct GaugeFunction {
    label: String,
    eval: Arc<GaugeEval>,
    exponent: Option<f64>,
}

impl fmt::Debug for GaugeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GaugeFunction")
            .field("label", &self.label)
            .field("exponent", &self.exponent)
            .finish()
    }
}

impl GaugeFunction {
    pub fn new(label: impl Into<String>, eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            eval: Arc::new(eval),
            exponent: None,
        }
    }

    /// `h(t) = t^β`.
    pub fn power(beta: f64) -> Self {
        Self {
            label: format!("t^{beta}"),
            eval: Arc::new(move |t: f64| t.powf(beta)),
            exponent: Some(beta),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// The exponent when the gauge is a pure power.
    pub fn exponent(&self) -> Option<f64> {
        self.exponent
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            (self.eval)(t)
        }
    }

    /// Numeric inverse by log-scale bisection.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        self.inverse_near(y, 1.0)
    }

    pub fn inverse_near(&self, y: f64, guess: f64) -> Result<f64> {
        quad::solve_increasing_log(|t| self.eval(t), y, guess)
    }

    /// Check monotonicity and `h(t₂)/h(t₁) ≤ (t₂/t₁)^d` on a log grid over
    /// `[lo, hi]`.
    pub fn validate(&self, d: usize, lo: f64, hi: f64, samples: usize) -> Result<()> {
        if !(lo > 0.0 && hi > lo) || samples < 2 {
            return Err(Error::Parameter(format!("gauge probe range [{lo}, {hi}]")));
        }
        let step = (hi / lo).ln() / (samples - 1) as f64;
        let ts: Vec<f64> = (0..samples).map(|i| lo * (step * i as f64).exp()).collect();
        let hs: Vec<f64> = ts.iter().map(|&t| self.eval(t)).collect();
        for i in 1..samples {
            if !(hs[i] > hs[i - 1]) {
                return Err(Error::Hypothesis(format!(
                    "gauge {} not increasing near t = {:e}",
                    self.label, ts[i]
                )));
            }
            // h(t)/t^d nonincreasing between neighbours
            let lhs = hs[i] / hs[i - 1];
            let rhs = (ts[i] / ts[i - 1]).powi(d as i32);
            if lhs > rhs * (1.0 + 1e-12) {
                return Err(Error::Hypothesis(format!(
                    "gauge {} grows faster than t^{d} near t = {:e}",
                    self.label, ts[i]
                )));
            }
        }
        Ok(())
    }
}

/// Scales with `h(σ_j) = 2^{-dj} h(σ_0)`, `j = 1..=n`.
pub fn sigma_from_gauge(h: &GaugeFunction, sigma0: f64, n: usize, d: usize) -> Result<SigmaSequence> {
    if !(sigma0 > 0.0 && sigma0.is_finite()) {
        return Err(Error::Parameter(format!("sigma0 = {sigma0}")));
    }
    if n == 0 {
        return Err(Error::Parameter("n must be at least 1".into()));
    }
    let h0 = h.eval(sigma0);
    let mut values = Vec::with_capacity(n);
    let mut prev = sigma0;
    for j in 1..=n {
        let target = h0 * (-((d * j) as f64)).exp2();
        let mut sj = h.inverse_near(target, prev * 0.5)?;
        let rel = (h.eval(sj) - target).abs() / target;
        if rel > 1e-10 {
            return Err(Error::Bracket(format!(
                "level {j}: |h(sigma) - target| / target = {rel:e}"
            )));
        }
        // the halving law holds exactly for admissible gauges; absorb rounding
        if 2.0 * sj > prev {
            if 2.0 * sj > prev * (1.0 + 1e-9) {
                return Err(Error::Hypothesis(format!(
                    "gauge {} violates the growth bound at level {j}",
                    h.label()
                )));
            }
            sj = prev * 0.5;
        }
        values.push(sj);
        prev = sj;
    }
    SigmaSequence::new(values)
}

/// `[∫_a^b (h(t)/t^s)² dt/t]`, integrated in `ln t`.
pub fn gauge_energy(h: &GaugeFunction, s: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b >= a) {
        return Err(Error::Parameter(format!("energy interval [{a}, {b}]")));
    }
    quad::integrate(
        |u: f64| {
            let t = u.exp();
            let v = h.eval(t) / t.powf(s);
            v * v
        },
        a.ln(),
        b.ln(),
        1e-10,
    )
}

/// `κ(σ) = [∫_{a_σ}^σ (h/t^s)² dt/t]^{1/2} / (P h(σ))` with `h(a_σ) = h(σ)/N`.
pub fn calibration_ratio(h: &GaugeFunction, points: f64, level: f64, s: f64, sigma: f64) -> Result<f64> {
    let hs = h.eval(sigma);
    let a = h.inverse_near(hs / points, sigma * 0.5)?;
    let energy = gauge_energy(h, s, a, sigma)?;
    Ok(energy.sqrt() / (level * hs))
}

/// The largest `σ_0` with `κ(σ_0) = C4`, found by scanning down from a large
/// scale in factor-2 steps and bisecting the first crossing.
pub fn calibrate_sigma0(
    h: &GaugeFunction,
    points: f64,
    level: f64,
    d: usize,
    s: f64,
    c4: f64,
) -> Result<f64> {
    if !(points >= 2.0) {
        return Err(Error::Parameter(format!("N = {points} must be at least 2")));
    }
    if !(level > 0.0 && c4 > 1.0 && s > 0.0) || d == 0 {
        return Err(Error::Parameter(format!(
            "need P > 0, C4 > 1, s > 0 (got P = {level}, C4 = {c4}, s = {s})"
        )));
    }
    let kappa = |sigma: f64| calibration_ratio(h, points, level, s, sigma);
    let (mut lo_seen, mut hi_seen) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut track = |k: f64| {
        lo_seen = lo_seen.min(k);
        hi_seen = hi_seen.max(k);
        k
    };

    let mut hi = 1e6;
    let mut steps = 0;
    while track(kappa(hi)?) >= c4 {
        hi *= 2.0;
        steps += 1;
        if steps > 400 {
            return Err(Error::Calibration(format!(
                "ratio stays above C4 = {c4} up to sigma = {hi:e} (range seen [{lo_seen:e}, {hi_seen:e}])"
            )));
        }
    }
    let mut lo = hi * 0.5;
    steps = 0;
    while track(kappa(lo)?) < c4 {
        hi = lo;
        lo *= 0.5;
        steps += 1;
        if steps > 600 || lo < 1e-150 {
            return Err(Error::Calibration(format!(
                "ratio never reaches C4 = {c4} above sigma = {lo:e} (range seen [{lo_seen:e}, {hi_seen:e}])"
            )));
        }
    }
    // κ(lo) ≥ C4 > κ(hi)
    let (mut a, mut b) = (lo.ln(), hi.ln());
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if kappa(mid.exp())? >= c4 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok((0.5 * (a + b)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha: f64) -> LadderParams {
        LadderParams::new(alpha, 4.0).unwrap()
    }

    #[test]
    fn halving_sequence_drops_only_at_the_end() {
        let sigma = SigmaSequence::new((0..4).map(|j| 0.5f64.powi(j)).collect()).unwrap();
        let l = regularize(&sigma, params(0.1)).unwrap();
        assert_eq!(l.selected(), &[1, 4]);
        assert_eq!(l.ell(), &[1.0, 0.5, 0.25, 0.1 * 0.125]);
        assert!(l.violations().is_empty());
    }

    #[test]
    fn single_level_ladder_is_sigma() {
        let sigma = SigmaSequence::new(vec![1.0]).unwrap();
        let l = regularize(&sigma, params(0.1)).unwrap();
        assert_eq!(l.selected(), &[1]);
        assert_eq!(l.ell(), &[1.0]);
        let st = ladder_stats(&l, 2, 1.0).unwrap();
        assert_eq!(st.total, (0.25f64).powi(2));
        assert_eq!(st.block_sums(&l), vec![st.total]);
    }

    #[test]
    fn quartering_sequence_selects_level_five() {
        let sigma = SigmaSequence::new((1..=6).map(|j| 0.25f64.powi(j)).collect()).unwrap();
        let l = regularize(&sigma, params(0.1)).unwrap();
        assert_eq!(l.selected()[1], 5);
        assert!(l.violations().is_empty());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(SigmaSequence::new(vec![]).is_err());
        assert!(SigmaSequence::new(vec![1.0, 0.6]).is_err());
        assert!(SigmaSequence::new(vec![1.0, -0.1]).is_err());
        assert!(LadderParams::new(0.5, 1.5).is_err());
        assert!(LadderParams::new(0.1, 5.0).is_err());
        assert!(LadderParams::new(0.1, 1.0).is_err());
        assert_eq!(LadderParams::default().alpha, 0.0625);
    }

    #[test]
    fn unit_densities_for_matched_scales() {
        // ℓ_j = 4^{-j} directly; the stats only need the ladder's scales.
        let sigma = SigmaSequence::new((1..=3).map(|j| 0.25f64.powi(j)).collect()).unwrap();
        let mut l = regularize(&sigma, params(0.1)).unwrap();
        l.ell = (1..=3).map(|j| 0.25f64.powi(j)).collect();
        let st = ladder_stats(&l, 2, 1.0).unwrap();
        assert_eq!(st.theta, vec![1.0, 1.0, 1.0]);
        assert_eq!(st.total, 3.0);
        assert_eq!(st.decay_exponent(), 0.5);
        assert!(ladder_stats_strict(&l, 2, 2.0).is_err());
        assert!(ladder_stats(&l, 2, 2.5).is_ok());
    }

    #[test]
    fn text_round_trip() {
        let sigma = SigmaSequence::new(vec![1.0, 0.5, 0.25]).unwrap();
        let l = regularize(&sigma, LadderParams::default()).unwrap();
        let text = l.to_text(2, 1.0);
        assert!(text.starts_with("d=2 s=1.0000000000000000e0 alpha=6.2500000000000000e-2"));
        assert_eq!(text.lines().count(), 4);
        let (d, s, back) = Ladder::from_text(&text).unwrap();
        assert_eq!((d, s), (2, 1.0));
        assert_eq!(back, l);
        let broken = text.replace(" 1\n", " 0\n");
        assert!(Ladder::from_text(&broken).is_err());
    }

    #[test]
    fn subsequence_examples() {
        assert_eq!(select_subsequence(&[1.0; 5], 0.5, 2.0).unwrap(), vec![1, 2, 3, 4, 5]);
        let a: Vec<f64> = (1..=4).map(|p| 0.5f64.powi(p)).collect();
        let picks = select_subsequence(&a, 0.5, 2.0).unwrap();
        assert_eq!(picks, vec![1]);
        let c = subsequence_constant(0.5, 2.0);
        assert_eq!(c, 0.5);
        let all: f64 = a.iter().map(|x| x * x).sum();
        assert_eq!(all, 85.0 / 256.0);
        assert!(0.25 >= c * all);
        assert!(select_subsequence(&[], 0.5, 2.0).is_err());
    }

    #[test]
    fn power_gauges_give_geometric_scales() {
        let s = sigma_from_gauge(&GaugeFunction::power(2.0), 1.0, 5, 2).unwrap();
        for (j, v) in s.values().iter().enumerate() {
            assert!((v / 0.5f64.powi(j as i32 + 1) - 1.0).abs() < 1e-12);
        }
        let s = sigma_from_gauge(&GaugeFunction::power(1.0), 1.0, 4, 2).unwrap();
        for (j, v) in s.values().iter().enumerate() {
            assert!((v / 0.25f64.powi(j as i32 + 1) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gauge_validation_catches_fast_growth() {
        assert!(GaugeFunction::power(1.5).validate(2, 1e-6, 1e3, 200).is_ok());
        assert!(GaugeFunction::power(2.5).validate(2, 1e-6, 1e3, 200).is_err());
        let flat = GaugeFunction::new("flat", |t: f64| t.min(1.0));
        assert!(flat.validate(2, 0.1, 10.0, 50).is_err());
    }

    #[test]
    fn calibration_matches_power_closed_form() {
        let (d, s, n, p, c4) = (2usize, 1.5f64, 3usize, 1.0, 2.0);
        let h = GaugeFunction::power(s);
        let points = (2.0f64).powi((d * n) as i32);
        let got = calibrate_sigma0(&h, points, p, d, s, c4).unwrap();
        let want = (((d * n) as f64 * std::f64::consts::LN_2 / s).sqrt() / (p * c4)).powf(1.0 / s);
        assert!((got / want - 1.0).abs() < 1e-8, "{got} vs {want}");
        let k = calibration_ratio(&h, points, p, s, got).unwrap();
        assert!((k / c4 - 1.0).abs() < 1e-6);
        assert!(calibration_ratio(&h, points, p, s, 2.0 * got).unwrap() < c4);
    }
}
