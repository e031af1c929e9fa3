//! Matrix-based Rényi estimates on a table of samples.

use std::path::Path;

use cgrl_core::{conditional_mi, gram, mutual_information, renyi_entropy, KernelWidth, Tensor64};

use crate::error::{HarnessError, Result};

/// Columns grouped into variables by the header prefix before the first
/// `.`, so `x.0,x.1,y.0` holds a 2-d `x` and a 1-d `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Blocks {
    pub names: Vec<String>,
    /// One samples × dims matrix per block.
    pub data: Vec<Tensor64>,
}

pub fn read_blocks(path: &Path) -> Result<Blocks> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut names: Vec<String> = Vec::new();
    let mut owner = Vec::with_capacity(header.len());
    for h in &header {
        let name = h.split('.').next().unwrap_or(h).to_string();
        let idx = names.iter().position(|n| *n == name).unwrap_or_else(|| {
            names.push(name);
            names.len() - 1
        });
        owner.push(idx);
    }
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec?;
        for (cell, &b) in rec.iter().zip(&owner) {
            let v: f64 = cell.parse().map_err(|_| HarnessError::Format(format!("non-numeric cell {cell:?} in row {}", rows + 1)))?;
            if !v.is_finite() {
                return Err(HarnessError::Format(format!("non-finite cell in row {}", rows + 1)));
            }
            cols[b].push(v);
        }
        rows += 1;
    }
    if rows < 2 {
        return Err(HarnessError::Domain("need at least two samples".into()));
    }
    let data = cols
        .into_iter()
        .map(|v| {
            let d = v.len() / rows;
            Tensor64::new([rows, d], v)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Blocks { names, data })
}

/// Report lines: entropy per block, MI of the first two, and the CMI of
/// the first two given the third when there is one.
pub fn estimate(blocks: &Blocks, alpha: f64) -> Result<Vec<String>> {
    if !(alpha > 0.0) || alpha == 1.0 {
        return Err(HarnessError::Config(format!("alpha must be positive and not 1, got {alpha}")));
    }
    let mut out = Vec::new();
    for (n, x) in blocks.names.iter().zip(&blocks.data) {
        let k = gram(x, KernelWidth::Median)?.matrix;
        out.push(format!("S({n}) = {:.6}", renyi_entropy(&k, alpha)?));
    }
    if let [x, y, rest @ ..] = blocks.data.as_slice() {
        let (a, b) = (&blocks.names[0], &blocks.names[1]);
        out.push(format!("I({a};{b}) = {:.6}", mutual_information(x, y, alpha)?));
        if let Some(z) = rest.first() {
            out.push(format!("I({a};{b}|{}) = {:.6}", blocks.names[2], conditional_mi(x, y, z, alpha)?));
        }
    }
    Ok(out)
}
