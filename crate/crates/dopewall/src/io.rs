//! File formats: weight tables, kernels with a JSON sidecar, sample
//! batches, CDF sweeps, line profiles and JSON documents.
//!
//! Floats are written in Rust's shortest round-trip form, so reading a
//! file back gives the same bits.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::asymptotics::CdfValue;
use crate::dpp::ParticleConfiguration;
use crate::ensembles::NodeSet;
use crate::equilibrium::{EquilibriumMeasure, Kkt, Region};
use crate::error::{invalid, Result};
use crate::halfhex::ArcticProfile;
use crate::orthopoly::{KernelKind, KernelMatrix};

fn parse(field: &str, line: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| invalid(format!("line {line}: {field:?} is not a number")))
}

/// Reads `node,log_weight` rows (with that header).
pub fn read_weight_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || headers[0].trim() != "node" || headers[1].trim() != "log_weight" {
        return Err(invalid("weight table header must be node,log_weight"));
    }
    let (mut xs, mut lw) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        xs.push(parse(&rec[0], i + 2)?);
        lw.push(parse(&rec[1], i + 2)?);
    }
    Ok((xs, lw))
}

pub fn write_weight_table(path: &Path, nodes: &[f64], logw: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["node", "log_weight"])?;
    for (x, l) in nodes.iter().zip(logw) {
        w.write_record([x.to_string(), l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSidecar {
    pub family: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub k: usize,
    pub kind: KernelKind,
    pub precision_bits: u32,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Kernel CSV: a header row and first column of node values, then the
/// entries. The sidecar goes next to it with a `.json` extension.
pub fn write_kernel(path: &Path, km: &KernelMatrix, sidecar: &KernelSidecar) -> Result<()> {
    let xs = km.nodes().values();
    let mut w = csv::Writer::from_path(path)?;
    let mut head = vec!["node".to_string()];
    head.extend(xs.iter().map(|x| x.to_string()));
    w.write_record(&head)?;
    for (i, x) in xs.iter().enumerate() {
        let mut row = vec![x.to_string()];
        row.extend((0..xs.len()).map(|j| km.get(i, j).to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    write_json(&sidecar_path(path), sidecar)
}

pub fn read_kernel(path: &Path) -> Result<(KernelMatrix, KernelSidecar)> {
    let sidecar: KernelSidecar = read_json(&sidecar_path(path))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let rows: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
    let head = rows.first().ok_or_else(|| invalid("empty kernel file"))?;
    let xs: Vec<f64> = head.iter().skip(1).map(|f| parse(f, 1)).collect::<Result<_>>()?;
    let n = xs.len();
    if rows.len() != n + 1 {
        return Err(invalid(format!("kernel has {} rows for {n} nodes", rows.len() - 1)));
    }
    let mut m = DMatrix::zeros(n, n);
    for (i, rec) in rows[1..].iter().enumerate() {
        if rec.len() != n + 1 || parse(&rec[0], i + 2)? != xs[i] {
            return Err(invalid(format!("kernel row {} does not match the header", i + 2)));
        }
        for j in 0..n {
            m[(i, j)] = parse(&rec[j + 1], i + 2)?;
        }
    }
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let nodes = Arc::new(NodeSet::new(xs, (lo, hi), None)?);
    Ok((KernelMatrix::from_matrix(nodes, m, sidecar.kind)?, sidecar))
}

/// One row per configuration: the occupied node values, ascending.
pub fn write_samples(path: &Path, nodes: &NodeSet, batch: &[ParticleConfiguration]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_path(path)?;
    for c in batch {
        let row: Vec<String> = c.indices.iter().map(|&i| nodes.values()[i].to_string()).collect();
        if row.is_empty() {
            // An empty configuration still needs a line of its own.
            w.write_record([""])?;
        } else {
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        out.push(rec.iter().filter(|f| !f.trim().is_empty()).map(|f| parse(f, i + 1)).collect::<Result<_>>()?);
    }
    Ok(out)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumResiduals {
    pub iterations: usize,
    pub step: f64,
    pub mass_error: f64,
    pub kkt: Kkt,
    pub field_scale: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumFile {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub regions: Vec<Region>,
    pub l_c: f64,
    pub residuals: EquilibriumResiduals,
}

impl From<&EquilibriumMeasure> for EquilibriumFile {
    fn from(em: &EquilibriumMeasure) -> Self {
        Self {
            grid: em.grid.clone(),
            density: em.density.clone(),
            regions: em.regions.clone(),
            l_c: em.multiplier,
            residuals: EquilibriumResiduals {
                iterations: em.iterations,
                step: em.residual,
                mass_error: (em.mass() - 1.0).abs(),
                kkt: em.kkt(),
                field_scale: em.field_scale,
            },
        }
    }
}

pub fn write_cdf(path: &Path, values: &[CdfValue]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["s", "value", "order"])?;
    for v in values {
        w.write_record([v.s.to_string(), v.value.to_string(), v.order.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_profile(path: &Path, p: &ArcticProfile) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["ordinate", "frequency", "prediction"])?;
    for i in 0..p.ordinates.len() {
        w.write_record([p.ordinates[i].to_string(), p.frequency[i].to_string(), p.prediction[i].to_string()])?;
    }
    w.flush()?;
    Ok(())
}
