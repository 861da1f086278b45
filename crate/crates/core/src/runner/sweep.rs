//! One-parameter scans over a configuration.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::dvr_job::{run_dvr, DvrConfig};
use super::{run, RunConfig};
use crate::error::{Error, Result};
use crate::estimators::EstimateSeries;

/// Which kind of job each sweep point runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepJob {
    Ensemble,
    Dvr,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub value: toml::Value,
    pub output_dir: PathBuf,
    pub failed: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub parameter: String,
    pub job: SweepJob,
    pub points: Vec<SweepPoint>,
    /// Combined CSV: one row per value and output series.
    pub combined: PathBuf,
    pub rows: usize,
}

/// Sets a dotted key (`model.p0`, `method.gamma`) in a TOML document.
pub fn set_dotted(doc: &mut toml::Table, path: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| Error::Config("empty parameter name".into()))?;
    let mut table = doc;
    for p in parts {
        table = table
            .get_mut(p)
            .and_then(toml::Value::as_table_mut)
            .ok_or_else(|| Error::Config(format!("parameter {path}: no table `{p}`")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

fn value_label(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn final_rows(series: &[EstimateSeries]) -> Vec<(String, f64, Option<f64>, Option<f64>, Option<f64>, usize)> {
    series
        .iter()
        .map(|s| {
            let i = s.len() - 1;
            (
                s.descriptor.file_stem(),
                s.times[i],
                s.values[i].map(|z| z.re),
                s.values[i].map(|z| z.im),
                s.stderr[i],
                s.n_traj,
            )
        })
        .collect()
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.17e}")).unwrap_or_default()
}

/// Runs `job` once per value of `parameter`, each into
/// `<output_dir>/<parameter>=<value>`, and writes `sweep.csv` with the final
/// value of every output series.
pub fn sweep(
    text: &str,
    base_dir: Option<&Path>,
    job: SweepJob,
    parameter: &str,
    values: &[toml::Value],
    output_override: Option<&Path>,
) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let doc: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let prepare = |v: &toml::Value| -> Result<(toml::Table, PathBuf)> {
        let mut d = doc.clone();
        set_dotted(&mut d, parameter, v.clone())?;
        let base = match output_override {
            Some(p) => p.to_path_buf(),
            None => PathBuf::from(d.get("output_dir").and_then(|x| x.as_str()).unwrap_or("out")),
        };
        let dir = base.join(format!("{parameter}={}", value_label(v)));
        d.insert("output_dir".into(), toml::Value::String(dir.to_string_lossy().into_owned()));
        Ok((d, dir))
    };
    let root = match output_override {
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(doc.get("output_dir").and_then(|x| x.as_str()).unwrap_or("out")),
    };
    let results: Vec<(SweepPoint, Vec<EstimateSeries>)> = match job {
        SweepJob::Ensemble => values
            .iter()
            .map(|v| {
                let (d, dir) = prepare(v)?;
                let mut cfg: RunConfig = d.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
                cfg.base_dir = base_dir.map(Path::to_path_buf);
                let rep = run(&cfg)?;
                rep.check()?;
                Ok((SweepPoint { value: v.clone(), output_dir: dir, failed: rep.manifest.failed }, rep.series))
            })
            .collect::<Result<_>>()?,
        SweepJob::Dvr => values
            .par_iter()
            .map(|v| {
                let (d, dir) = prepare(v)?;
                let mut cfg: DvrConfig = d.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
                cfg.base_dir = base_dir.map(Path::to_path_buf);
                let rep = run_dvr(&cfg)?;
                Ok((SweepPoint { value: v.clone(), output_dir: dir, failed: 0 }, rep.series))
            })
            .collect::<Result<_>>()?,
    };
    std::fs::create_dir_all(&root)?;
    let combined = root.join("sweep.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&combined)?);
    writeln!(w, "# {}", serde_json::json!({ "parameter": parameter, "job": job }))?;
    writeln!(w, "value,series,time,re,im,stderr,n_traj")?;
    let mut rows = 0;
    for (p, series) in &results {
        for (stem, t, re, im, err, n) in final_rows(series) {
            writeln!(w, "{},{stem},{t:.17e},{},{},{},{n}", value_label(&p.value), opt(re), opt(im), opt(err))?;
            rows += 1;
        }
    }
    w.flush()?;
    Ok(SweepReport {
        parameter: parameter.to_string(),
        job,
        points: results.into_iter().map(|(p, _)| p).collect(),
        combined,
        rows,
    })
}
