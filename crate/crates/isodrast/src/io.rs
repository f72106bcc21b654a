//! File formats: loop and metric JSON schemas, functional specifications,
//! and the CSV trajectory exports. Parsing reports the offending field path
//! so a bad file can be fixed without reading source code.
//!
//! Loop files:
//! {"half_dim": n, "samples": [[q1..qn, p1..pn], ...],
//!  "weighting": {"kind": "...", "values": [...]},           optional
//!  "tangents": [{"x": [[...]], "vartheta": [...]}, ...]}    optional
//!
//! Metric files:
//! {"base_dim": d, "grid": [n1, ...], "signature": [pos, neg],
//!  "cells": [[row-major d*d entries], ...],
//!  "momentum": [[row-major d*d entries], ...]}              optional
//!
//! Functional files:
//! {"outer": "y1*y2", "inner": ["q^2", "p^2"], "half_dim": 1}

use crate::ambient::HamiltonianFn;
use crate::error::{Error, Result};
use crate::flows::action_integral;
use crate::loops::{LoopEmbedding, TangentVector, WeightKind, Weighting};
use crate::metrics::{MetricField, MomentumField};
use crate::poisson::IntegralFunctional;
use crate::{ambient::AmbientSpace, spectral};
use nalgebra::DMatrix;
use serde_json::{json, Value};

fn schema(location: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        location: location.to_string(),
        message: message.into(),
    }
}

fn req<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key)
        .ok_or_else(|| schema(key, "required field is missing"))
}

fn as_usize(v: &Value, loc: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| schema(loc, "expected a nonnegative integer"))
}

fn as_f64(v: &Value, loc: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| schema(loc, "expected a number"))
}

fn as_array<'a>(v: &'a Value, loc: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| schema(loc, "expected an array"))
}

fn number_vec(v: &Value, loc: &str) -> Result<Vec<f64>> {
    as_array(v, loc)?
        .iter()
        .enumerate()
        .map(|(i, x)| as_f64(x, &format!("{loc}[{i}]")))
        .collect()
}

fn number_rows(v: &Value, loc: &str, width: usize) -> Result<Vec<Vec<f64>>> {
    let rows = as_array(v, loc)?;
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            let r = number_vec(row, &format!("{loc}[{i}]"))?;
            if r.len() != width {
                return Err(schema(
                    &format!("{loc}[{i}]"),
                    format!("expected {width} entries, found {}", r.len()),
                ));
            }
            Ok(r)
        })
        .collect()
}

/// Parse a loop file. The weighting defaults to uniform, tangent entries
/// default their weight variation to zero.
pub fn loop_from_json(v: &Value) -> Result<(LoopEmbedding, Weighting, Vec<TangentVector>)> {
    let half_dim = as_usize(req(v, "half_dim")?, "half_dim")?;
    if half_dim == 0 {
        return Err(schema("half_dim", "must be at least 1"));
    }
    let samples = number_rows(req(v, "samples")?, "samples", 2 * half_dim)?;
    let n = samples.len();
    let lp = LoopEmbedding::from_samples(AmbientSpace::new(half_dim), samples)?;

    let weighting = match v.get("weighting") {
        None => Weighting::uniform(n),
        Some(wv) => {
            let kind: WeightKind = serde_json::from_value(req(wv, "kind")?.clone())
                .map_err(|e| schema("weighting.kind", e.to_string()))?;
            let values = number_vec(req(wv, "values")?, "weighting.values")?;
            if values.len() != n {
                return Err(schema(
                    "weighting.values",
                    format!(
                        "expected {n} entries to match samples, found {}",
                        values.len()
                    ),
                ));
            }
            Weighting::new(kind, values)?
        }
    };

    let mut tangents = Vec::new();
    if let Some(tv) = v.get("tangents") {
        for (i, entry) in as_array(tv, "tangents")?.iter().enumerate() {
            let loc = format!("tangents[{i}]");
            let x = number_rows(
                req(entry, "x")
                    .map_err(|_| schema(&format!("{loc}.x"), "required field is missing"))?,
                &format!("{loc}.x"),
                2 * half_dim,
            )?;
            if x.len() != n {
                return Err(schema(
                    &format!("{loc}.x"),
                    format!("expected {n} samples, found {}", x.len()),
                ));
            }
            let vartheta = match entry.get("vartheta") {
                None => vec![0.0; n],
                Some(th) => {
                    let th = number_vec(th, &format!("{loc}.vartheta"))?;
                    if th.len() != n {
                        return Err(schema(
                            &format!("{loc}.vartheta"),
                            format!("expected {n} samples, found {}", th.len()),
                        ));
                    }
                    th
                }
            };
            tangents.push(TangentVector::new(x, vartheta)?);
        }
    }
    Ok((lp, weighting, tangents))
}

pub fn loop_to_json(lp: &LoopEmbedding, w: &Weighting, tangents: &[TangentVector]) -> Value {
    let mut v = json!({
        "half_dim": lp.ambient.half_dim,
        "samples": lp.samples(),
        "weighting": {"kind": w.kind, "values": w.values},
    });
    if !tangents.is_empty() {
        v["tangents"] = Value::Array(
            tangents
                .iter()
                .map(|t| json!({"x": t.x, "vartheta": t.vartheta}))
                .collect(),
        );
    }
    v
}

/// Parse a metric file into a metric and, when present, its momentum field.
pub fn metric_from_json(v: &Value) -> Result<(MetricField, Option<MomentumField>)> {
    let base_dim = as_usize(req(v, "base_dim")?, "base_dim")?;
    let grid: Vec<usize> = as_array(req(v, "grid")?, "grid")?
        .iter()
        .enumerate()
        .map(|(i, x)| as_usize(x, &format!("grid[{i}]")))
        .collect::<Result<_>>()?;
    let sig = as_array(req(v, "signature")?, "signature")?;
    if sig.len() != 2 {
        return Err(schema("signature", "expected [positive, negative]"));
    }
    let signature = (
        as_usize(&sig[0], "signature[0]")?,
        as_usize(&sig[1], "signature[1]")?,
    );
    let cells = cell_matrices(req(v, "cells")?, "cells", base_dim)?;
    let g = MetricField::new(base_dim, grid, signature, cells)?;
    let momentum = match v.get("momentum") {
        None => None,
        Some(mv) => {
            let cells = cell_matrices(mv, "momentum", base_dim)?;
            if cells.len() != g.n_cells() {
                return Err(schema(
                    "momentum",
                    format!("expected {} cells, found {}", g.n_cells(), cells.len()),
                ));
            }
            Some(MomentumField::new(cells)?)
        }
    };
    Ok((g, momentum))
}

fn cell_matrices(v: &Value, loc: &str, d: usize) -> Result<Vec<DMatrix<f64>>> {
    as_array(v, loc)?
        .iter()
        .enumerate()
        .map(|(i, cell)| {
            let entries = number_vec(cell, &format!("{loc}[{i}]"))?;
            if entries.len() != d * d {
                return Err(schema(
                    &format!("{loc}[{i}]"),
                    format!(
                        "expected {} row-major entries, found {}",
                        d * d,
                        entries.len()
                    ),
                ));
            }
            Ok(DMatrix::from_row_slice(d, d, &entries))
        })
        .collect()
}

pub fn metric_to_json(g: &MetricField, h: Option<&MomentumField>) -> Value {
    let cells: Vec<Vec<f64>> = (0..g.n_cells())
        .map(|c| g.cell(c).transpose().as_slice().to_vec())
        .collect();
    let mut v = json!({
        "base_dim": g.base_dim,
        "grid": g.grid,
        "signature": [g.signature.0, g.signature.1],
        "cells": cells,
    });
    if let Some(h) = h {
        v["momentum"] = Value::Array(
            h.cells
                .iter()
                .map(|m| json!(m.transpose().as_slice().to_vec()))
                .collect(),
        );
    }
    v
}

/// Parse a functional file: outer map over y-variables, integrand
/// expressions over phase variables.
pub fn functional_from_json(v: &Value) -> Result<IntegralFunctional> {
    let outer = req(v, "outer")?
        .as_str()
        .ok_or_else(|| schema("outer", "expected an expression string"))?;
    let half_dim = match v.get("half_dim") {
        None => 1,
        Some(x) => as_usize(x, "half_dim")?,
    };
    let inner_vals = as_array(req(v, "inner")?, "inner")?;
    if inner_vals.is_empty() {
        return Err(schema("inner", "needs at least one integrand"));
    }
    let inner: Vec<HamiltonianFn> = inner_vals
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let src = x
                .as_str()
                .ok_or_else(|| schema(&format!("inner[{i}]"), "expected an expression string"))?;
            HamiltonianFn::from_expr(src, src, half_dim)
        })
        .collect::<Result<_>>()?;
    IntegralFunctional::new(outer, outer, inner)
}

/// Trajectory CSV: one row per (step, sample point) with the phase
/// coordinates spelled out per axis.
pub fn trajectory_csv(trajectory: &[LoopEmbedding], t_final: f64) -> String {
    let mut out = String::from("step,t,point_index");
    if let Some(first) = trajectory.first() {
        let n_half = first.ambient.half_dim;
        for k in 1..=n_half {
            out.push_str(&format!(",q{k}"));
        }
        for k in 1..=n_half {
            out.push_str(&format!(",p{k}"));
        }
    }
    out.push('\n');
    let dt = step_time(trajectory.len(), t_final);
    for (s, lp) in trajectory.iter().enumerate() {
        let t = s as f64 * dt;
        for (idx, pt) in lp.samples().iter().enumerate() {
            out.push_str(&format!("{s},{t}"));
            out.push_str(&format!(",{idx}"));
            for c in pt {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
    }
    out
}

/// Sidecar CSV: the action integral along the trajectory.
pub fn action_csv(trajectory: &[LoopEmbedding], t_final: f64) -> String {
    let mut out = String::from("step,t,action_integral\n");
    let dt = step_time(trajectory.len(), t_final);
    for (s, lp) in trajectory.iter().enumerate() {
        out.push_str(&format!("{s},{},{}\n", s as f64 * dt, action_integral(lp)));
    }
    out
}

fn step_time(len: usize, t_final: f64) -> f64 {
    if len > 1 {
        t_final / (len - 1) as f64
    } else {
        0.0
    }
}

/// Grid helper for fixture writers.
pub fn sample_grid(n: usize) -> Vec<f64> {
    spectral::grid(n)
}
