use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::CantorSet;

pub const SCHEMA_VERSION: u32 = 1;

/// Configuration a report was produced under.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Context {
    pub d: usize,
    pub s: f64,
    pub n: Option<usize>,
    pub alpha: Option<f64>,
    #[serde(rename = "T")]
    pub frame: Option<f64>,
    pub q: Option<usize>,
    pub seed: Option<u64>,
    pub backend: String,
    #[serde(default)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl Context {
    pub fn new(d: usize, s: f64) -> Self {
        Self {
            d,
            s,
            backend: "naive".into(),
            ..Self::default()
        }
    }

    pub fn for_set(set: &CantorSet, s: f64) -> Self {
        Self {
            n: Some(set.depth()),
            alpha: Some(set.ladder().alpha()),
            frame: Some(set.frame()),
            ..Self::new(set.dim(), s)
        }
        .with_extra("ladder_digest", set.ladder_digest(s))
    }

    pub fn with_q(mut self, q: usize) -> Self {
        self.q = Some(q);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_backend(mut self, backend: impl ToString) -> Self {
        self.backend = backend.to_string();
        self
    }

    pub fn with_extra(mut self, key: &str, value: impl Serialize) -> Self {
        self.extra.insert(
            key.to_string(),
            serde_json::to_value(value).unwrap_or(serde_json::Value::Null),
        );
        self
    }

    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("context serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// A measured quantity over a theoretical one, with both operands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub numerator: String,
    pub denominator: String,
    pub numerator_value: f64,
    pub denominator_value: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub schema_version: u32,
    pub kind: String,
    pub context: Context,
    pub config_digest: String,
    pub measured: BTreeMap<String, f64>,
    pub theoretical: BTreeMap<String, f64>,
    pub ratios: BTreeMap<String, Ratio>,
    /// Columns of equal length.
    pub series: BTreeMap<String, Vec<f64>>,
    /// Named assertions evaluated on this run.
    pub checks: BTreeMap<String, bool>,
    pub notes: Vec<String>,
}

impl EstimateReport {
    pub fn new(kind: &str, context: Context) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind: kind.to_string(),
            config_digest: context.digest(),
            context,
            measured: BTreeMap::new(),
            theoretical: BTreeMap::new(),
            ratios: BTreeMap::new(),
            series: BTreeMap::new(),
            checks: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn measure(&mut self, key: &str, value: f64) -> &mut Self {
        self.measured.insert(key.to_string(), value);
        self
    }

    pub fn theory(&mut self, key: &str, value: f64) -> &mut Self {
        self.theoretical.insert(key.to_string(), value);
        self
    }

    fn lookup(&self, key: &str) -> Option<f64> {
        self.measured.get(key).or_else(|| self.theoretical.get(key)).copied()
    }

    /// Record `numerator / denominator`, each looked up among the measured
    /// then the theoretical entries.
    pub fn ratio(&mut self, name: &str, numerator: &str, denominator: &str) -> Result<f64> {
        let num = self
            .lookup(numerator)
            .ok_or_else(|| Error::Parameter(format!("unknown report entry {numerator}")))?;
        let den = self
            .lookup(denominator)
            .ok_or_else(|| Error::Parameter(format!("unknown report entry {denominator}")))?;
        let value = num / den;
        self.ratios.insert(
            name.to_string(),
            Ratio {
                numerator: numerator.to_string(),
                denominator: denominator.to_string(),
                numerator_value: num,
                denominator_value: den,
                value,
            },
        );
        Ok(value)
    }

    pub fn column(&mut self, key: &str, values: Vec<f64>) -> &mut Self {
        self.series.insert(key.to_string(), values);
        self
    }

    pub fn check(&mut self, key: &str, ok: bool) -> &mut Self {
        self.checks.insert(key.to_string(), ok);
        self
    }

    pub fn note(&mut self, text: impl Into<String>) -> &mut Self {
        self.notes.push(text.into());
        self
    }

    pub fn all_checks_pass(&self) -> bool {
        self.checks.values().all(|&ok| ok)
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.lookup(key)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })
    }

    /// The series columns as CSV, in the given order (all columns when
    /// `order` is empty).
    pub fn series_csv(&self, order: &[&str]) -> Result<String> {
        let keys: Vec<String> = if order.is_empty() {
            self.series.keys().cloned().collect()
        } else {
            order.iter().map(|s| s.to_string()).collect()
        };
        let cols = keys
            .iter()
            .map(|k| {
                self.series
                    .get(k)
                    .ok_or_else(|| Error::Parameter(format!("no series column {k}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let rows = cols.first().map_or(0, |c| c.len());
        if cols.iter().any(|c| c.len() != rows) {
            return Err(Error::Invariant("series columns differ in length".into()));
        }
        let mut out = keys.join(",");
        out.push('\n');
        for r in 0..rows {
            let line = cols.iter().map(|c| format!("{}", c[r])).collect::<Vec<_>>().join(",");
            let _ = writeln!(out, "{line}");
        }
        Ok(out)
    }
}

/// `max / min` of a positive sample.
pub fn band_width(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

/// Collect one key from each report of an `n`-sweep into a summary report.
pub fn sweep_summary(
    kind: &str,
    context: Context,
    reports: &[EstimateReport],
    columns: &[&str],
    band_key: &str,
) -> Result<EstimateReport> {
    let mut out = EstimateReport::new(kind, context);
    let ns: Vec<f64> = reports
        .iter()
        .map(|r| r.context.n.map(|n| n as f64).unwrap_or(f64::NAN))
        .collect();
    out.column("n", ns);
    for &key in columns {
        let col = reports
            .iter()
            .map(|r| {
                r.get(key)
                    .or_else(|| r.ratios.get(key).map(|x| x.value))
                    .ok_or_else(|| Error::Parameter(format!("sweep entry {key} missing")))
            })
            .collect::<Result<Vec<_>>>()?;
        out.column(key, col);
    }
    let band = out
        .series
        .get(band_key)
        .ok_or_else(|| Error::Parameter(format!("band column {band_key} missing")))?;
    let width = band_width(band);
    out.measure("band_width", width);
    for r in reports {
        for note in &r.notes {
            out.note(format!("n={}: {note}", r.context.n.unwrap_or(0)));
        }
        for (k, v) in &r.checks {
            let key = format!("n{}_{k}", r.context.n.unwrap_or(0));
            out.check(&key, *v);
        }
    }
    Ok(out)
}
