//! Experiment reports and the artifact files they list.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dipbias_core::optimizer::{FitConfig, Trajectory};
use dipbias_core::pgm::save_pgm;
use dipbias_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{ExpError, Result};
use crate::stats::Aggregate;

/// Serializes non-finite reals as the strings `"inf"`, `"-inf"` and `"nan"`,
/// which plain JSON numbers cannot express.
pub mod finite_or_tag {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&super::fmt_f64(*v))
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Tag(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Tag(t) => t
                .parse::<f64>()
                .map_err(|_| serde::de::Error::custom(format!("not a number: {t:?}"))),
        }
    }
}

/// A metric value that keeps infinities through JSON.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Metric(#[serde(with = "finite_or_tag")] pub f64);

/// Shortest round-trip decimal rendering, `inf`/`-inf`/`NaN` otherwise.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v}")
    }
}

pub fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub label: String,
    pub seed: u64,
    pub metrics: BTreeMap<String, Metric>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub label: String,
    pub metric: String,
    #[serde(flatten)]
    pub value: Aggregate,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config: serde_json::Value,
    pub per_seed: Vec<SeedRecord>,
    pub aggregates: Vec<AggregateRow>,
    /// Experiment-specific derived results.
    pub summary: serde_json::Value,
    pub wall_clock_seconds: f64,
    /// Artifact paths relative to the output directory.
    pub manifest: Vec<String>,
}

impl ExperimentReport {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| ExpError::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| ExpError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn aggregate(&self, label: &str, metric: &str) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.label == label && a.metric == metric)
            .map(|a| &a.value)
    }
}

/// Mean and std of every metric, per label, in first-seen order.
pub fn aggregate_records(records: &[SeedRecord]) -> Vec<AggregateRow> {
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in records {
        for m in r.metrics.keys() {
            let key = (r.label.clone(), m.clone());
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
    }
    keys.into_iter()
        .map(|(label, metric)| {
            let values: Vec<f64> = records
                .iter()
                .filter(|r| r.label == label)
                .filter_map(|r| r.metrics.get(&metric).map(|m| m.0))
                .collect();
            AggregateRow {
                value: Aggregate::of(&values),
                label,
                metric,
            }
        })
        .collect()
}

/// Writes files under one output directory and remembers what was written.
#[derive(Debug)]
pub struct Artifacts {
    root: PathBuf,
    manifest: Vec<String>,
    started: Instant,
}

impl Artifacts {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| ExpError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            manifest: Vec::new(),
            started: Instant::now(),
        })
    }

    /// Artifacts of a run whose wall clock started with `ctx`.
    pub fn for_run(ctx: &crate::runner::RunContext) -> Result<Self> {
        let mut art = Self::create(&ctx.out_dir)?;
        art.started = ctx.started;
        Ok(art)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn target(&mut self, name: &str) -> Result<PathBuf> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| ExpError::io(parent, e))?;
        }
        self.manifest.push(name.to_string());
        Ok(path)
    }

    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<PathBuf>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.target(name)?;
        let wrap = |source| ExpError::Csv {
            path: path.clone(),
            source,
        };
        let mut w = csv::Writer::from_path(&path).map_err(wrap)?;
        w.write_record(header).map_err(wrap)?;
        for row in rows {
            w.write_record(&row).map_err(wrap)?;
        }
        w.flush().map_err(|e| ExpError::io(&path, e))?;
        Ok(path)
    }

    /// Grayscale image; values are clamped to `[0, 1]` and quantized.
    pub fn pgm(&mut self, name: &str, image: &Tensor) -> Result<PathBuf> {
        let path = self.target(name)?;
        save_pgm(image, &path)?;
        Ok(path)
    }

    pub fn trajectory(&mut self, name: &str, traj: &Trajectory, fit: &FitConfig) -> Result<PathBuf> {
        let dir = self.root.join(name);
        let files = traj.save(&dir, Some(fit))?;
        for f in files {
            let rel = f.strip_prefix(&self.root).unwrap_or(&f);
            self.manifest.push(rel.to_string_lossy().into_owned());
        }
        Ok(dir)
    }

    /// Writes `per_seed.csv` and `report.json` and returns the report.
    pub fn finish(
        mut self,
        experiment: &str,
        config: serde_json::Value,
        per_seed: Vec<SeedRecord>,
        summary: serde_json::Value,
    ) -> Result<ExperimentReport> {
        let rows: Vec<Vec<String>> = per_seed
            .iter()
            .flat_map(|r| {
                r.metrics
                    .iter()
                    .map(|(m, v)| vec![r.label.clone(), r.seed.to_string(), m.clone(), fmt_f64(v.0)])
            })
            .collect();
        self.csv("per_seed.csv", &["label", "seed", "metric", "value"], rows)?;
        let report = ExperimentReport {
            experiment: experiment.to_string(),
            config,
            aggregates: aggregate_records(&per_seed),
            per_seed,
            summary,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            manifest: self.manifest,
        };
        let path = self.root.join("report.json");
        let text = serde_json::to_string_pretty(&report).map_err(|source| ExpError::Json {
            path: path.clone(),
            source,
        })?;
        fs::write(&path, text).map_err(|e| ExpError::io(&path, e))?;
        Ok(report)
    }
}

/// Builds a [`SeedRecord`] from `(name, value)` pairs.
pub fn record(label: &str, seed: u64, metrics: &[(&str, f64)]) -> SeedRecord {
    SeedRecord {
        label: label.to_string(),
        seed,
        metrics: metrics.iter().map(|(k, v)| (k.to_string(), Metric(*v))).collect(),
    }
}
