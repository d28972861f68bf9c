use std::path::{Path, PathBuf};

use anyhow::Context as _;
use cantor_riesz::riesz::Backend;
use cantor_riesz::sequence::{regularize, sigma_from_gauge, GaugeFunction, LadderParams, SigmaSequence};
use serde::{Deserialize, Serialize};

/// A configuration problem found before any computation starts.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// Inclusive depth range, written `5` or `1..5`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DepthRange {
    pub first: usize,
    pub last: usize,
}

impl DepthRange {
    pub fn depths(&self) -> Vec<usize> {
        (self.first..=self.last).collect()
    }
}

impl std::str::FromStr for DepthRange {
    type Err = String;

    fn from_str(text: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("depth {t:?}: {e}"));
        let (first, last) = match text.split_once("..") {
            Some((a, b)) => (num(a)?, num(b.trim_start_matches('='))?),
            None => {
                let n = num(text)?;
                (n, n)
            }
        };
        if first == 0 || first > last {
            return Err(format!("depth range {text:?} must satisfy 1 <= first <= last"));
        }
        Ok(Self { first, last })
    }
}

impl TryFrom<String> for DepthRange {
    type Error = String;

    fn try_from(text: String) -> Result<Self, String> {
        text.parse()
    }
}

impl From<DepthRange> for String {
    fn from(r: DepthRange) -> String {
        if r.first == r.last {
            r.first.to_string()
        } else {
            format!("{}..{}", r.first, r.last)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendName {
    Naive,
    Tree,
}

/// Every knob of a run. Missing fields take the defaults below, and the
/// resolved document is written next to the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub d: usize,
    pub s: f64,
    pub n: DepthRange,
    /// Geometric sequence `σ_j = ratio^{-j}`.
    pub ratio: f64,
    /// Explicit sequence; overrides `ratio`.
    pub sigma: Option<Vec<f64>>,
    /// Gauge function `power:β`; overrides `ratio` for the gauge command.
    pub gauge: Option<String>,
    /// Top scale of gauge-built sequences.
    pub sigma0: f64,
    pub alpha: f64,
    #[serde(rename = "T")]
    pub frame: f64,
    /// Quadrature order; `1` puts one node at each cube center.
    pub q: usize,
    pub backend: BackendName,
    pub mac: f64,
    pub eps: f64,
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; `0` uses the available parallelism.
    pub workers: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Superlevel `P` of the gauge experiment.
    pub level: f64,
    /// Calibration constant of the gauge experiment.
    pub c4: f64,
    /// Threshold constant for `cubes`; calibrated at the first depth when absent.
    pub c0: Option<f64>,
    /// Cube fraction kept by the threshold calibration.
    pub fraction: f64,
    /// Survival thresholds for `distribution`.
    pub b_grid: Vec<f64>,
    pub maximal: bool,
    pub infinite: bool,
    /// Monte Carlo trials for `lemmas`.
    pub trials: usize,
    /// Random cases per checker for `lemmas`.
    pub cases: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let params = LadderParams::default();
        Self {
            d: 2,
            s: 1.0,
            n: DepthRange { first: 1, last: 4 },
            ratio: 4.0,
            sigma: None,
            gauge: None,
            sigma0: 1.0,
            alpha: params.alpha,
            frame: params.frame,
            q: 3,
            backend: BackendName::Naive,
            mac: 0.3,
            eps: 0.0,
            seed: 1,
            out: PathBuf::from("out"),
            workers: 0,
            tol: 1e-7,
            max_iter: 2000,
            level: 1.0,
            c4: 2.0,
            c0: None,
            fraction: 0.1,
            b_grid: vec![0.01, 0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0],
            maximal: false,
            infinite: false,
            trials: 100_000,
            cases: 1000,
        }
    }
}

/// Whitespace- or comma-separated numbers; `#` starts a comment.
pub fn read_sigma_file(path: &Path) -> anyhow::Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut values = Vec::new();
    for line in text.lines() {
        let body = line.split('#').next().unwrap_or("");
        for tok in body.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
            values.push(
                tok.parse::<f64>()
                    .map_err(|e| bad(format!("{}: {tok:?}: {e}", path.display())))?,
            );
        }
    }
    Ok(values)
}

pub fn parse_gauge(spec: &str) -> anyhow::Result<GaugeFunction> {
    match spec.split_once(':') {
        Some(("power", beta)) => {
            let beta: f64 = beta.parse().map_err(|e| bad(format!("gauge exponent {beta:?}: {e}")))?;
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(bad(format!("gauge exponent {beta} must be positive")));
            }
            Ok(GaugeFunction::power(beta))
        }
        _ => Err(bad(format!("unknown gauge {spec:?}; expected power:<beta>"))),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))
    }

    pub fn params(&self) -> anyhow::Result<LadderParams> {
        LadderParams::new(self.alpha, self.frame).map_err(|e| bad(e.to_string()))
    }

    pub fn backend(&self) -> Backend {
        match self.backend {
            BackendName::Naive => Backend::Naive,
            BackendName::Tree => Backend::Tree { mac: self.mac },
        }
    }

    /// The sequence truncated to depth `n`.
    pub fn sigma(&self, n: usize) -> anyhow::Result<SigmaSequence> {
        let full = match (&self.sigma, &self.gauge) {
            (Some(values), _) => SigmaSequence::new(values.clone()),
            (None, Some(g)) => sigma_from_gauge(&parse_gauge(g)?, self.sigma0, n, self.d),
            (None, None) => SigmaSequence::geometric(1.0 / self.ratio, self.ratio, n),
        }?;
        Ok(full.truncate(n)?)
    }

    pub fn depths(&self) -> Vec<usize> {
        self.n.depths()
    }

    /// Checks every precondition that does not need a built set.
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.d == 0 {
            return Err(bad("d must be positive"));
        }
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(bad(format!("s = {} must be positive", self.s)));
        }
        if self.d * self.n.last > 24 {
            return Err(bad(format!("d·n = {} exceeds 24", self.d * self.n.last)));
        }
        if self.sigma.is_none() && self.gauge.is_none() && !(self.ratio > 1.0 && self.ratio.is_finite()) {
            return Err(bad(format!("ratio = {} must exceed 1", self.ratio)));
        }
        if let Some(values) = &self.sigma {
            if values.len() < self.n.last {
                return Err(bad(format!(
                    "sequence has {} terms, depth {} requested",
                    values.len(),
                    self.n.last
                )));
            }
        }
        if let Some(g) = &self.gauge {
            parse_gauge(g)?;
            if !(self.sigma0 > 0.0 && self.sigma0 <= 1.0) {
                return Err(bad(format!("sigma0 = {} not in (0, 1]", self.sigma0)));
            }
        }
        self.params()?;
        if self.q == 0 || self.q % 2 == 0 {
            return Err(bad(format!("q = {} must be odd", self.q)));
        }
        if !(self.mac > 0.0 && self.mac < 1.0) {
            return Err(bad(format!("mac = {} not in (0, 1)", self.mac)));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(bad(format!("eps = {} must be non-negative", self.eps)));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) || self.max_iter == 0 {
            return Err(bad("tol must lie in (0, 1) and max_iter be positive"));
        }
        if !(self.level > 0.0 && self.c4 > 0.0) {
            return Err(bad("level and c4 must be positive"));
        }
        if let Some(c0) = self.c0 {
            if !(c0 >= 0.0 && c0.is_finite()) {
                return Err(bad(format!("c0 = {c0} must be non-negative")));
            }
        }
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(bad(format!("fraction = {} not in (0, 1]", self.fraction)));
        }
        if self.b_grid.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
            return Err(bad("b grid entries must be non-negative"));
        }
        if self.trials < 10_000 {
            return Err(bad(format!("trials = {} below 10000", self.trials)));
        }
        let params = self.params()?;
        for n in self.depths() {
            regularize(&self.sigma(n)?, params)?;
        }
        Ok(())
    }
}
