//! Browser bindings: D_k traces, the k-hierarchy and divisibility scans for
//! qubit Pauli dynamics. Each export takes and returns a JSON string.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use kdiv::channels::{Channel, SeesawOptions};
use kdiv::discrimination::{hierarchy_check, monotonicity_trace, MonotonicityOptions};
use kdiv::dynamics::{divisibility_scan, integrate, presets, TimeGrid};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

const MAX_POINTS: f64 = 2000.0;

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Model {
    Eternal,
    Semigroup { rates: [f64; 3] },
}

#[derive(Clone, Debug, Deserialize)]
pub struct Grid {
    pub t_max: f64,
    pub step: f64,
}

#[derive(Clone, Debug, Deserialize)]
pub struct TraceRequest {
    #[serde(flatten)]
    pub model: Model,
    pub grid: Grid,
    /// Pauli weights `(I, X, Y, Z)` of the two channels.
    pub phi1: [f64; 4],
    pub phi2: [f64; 4],
    pub p: f64,
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceResponse {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub h_min: Vec<f64>,
    /// Arrival times of certified increases.
    pub violations: Vec<f64>,
    pub max_increase: f64,
}

#[derive(Clone, Debug, Deserialize)]
pub struct HierarchyRequest {
    pub phi1: [f64; 4],
    pub phi2: [f64; 4],
    pub p: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct HierarchyResponse {
    pub values: Vec<f64>,
    pub monotone: bool,
    pub input_ranks: Vec<usize>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct ScanRequest {
    #[serde(flatten)]
    pub model: Model,
    pub grid: Grid,
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanResponse {
    pub times: Vec<f64>,
    pub min_values: Vec<f64>,
    pub violation: Vec<bool>,
    pub halted_at: Option<f64>,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn trajectory(model: &Model, grid: &Grid) -> Result<kdiv::dynamics::MapTrajectory, String> {
    if !(grid.step > 0.0) || grid.t_max / grid.step > MAX_POINTS {
        return Err(format!("grid must have a positive step and at most {MAX_POINTS} points"));
    }
    let g = match model {
        Model::Eternal => presets::eternal(),
        Model::Semigroup { rates } => presets::semigroup(*rates, 0.0),
    };
    integrate(&g, &TimeGrid::uniform(grid.t_max, grid.step).map_err(err)?).map_err(err)
}

fn seesaw(seed: u64) -> SeesawOptions {
    SeesawOptions::default().with_restarts(8).with_seed(seed)
}

pub fn trace(req: &TraceRequest) -> Result<TraceResponse, String> {
    let traj = trajectory(&req.model, &req.grid)?;
    let a = Channel::pauli(req.phi1).map_err(err)?;
    let b = Channel::pauli(req.phi2).map_err(err)?;
    let o = MonotonicityOptions {
        seesaw: seesaw(req.seed),
        ..MonotonicityOptions::default()
    };
    let t = monotonicity_trace(&traj, &a, &b, req.p, req.k, &o).map_err(err)?;
    Ok(TraceResponse {
        violations: t.violations.iter().map(|v| v.time).collect(),
        times: t.times,
        values: t.values,
        h_min: t.h_min,
        max_increase: t.max_increase,
    })
}

pub fn hierarchy(req: &HierarchyRequest) -> Result<HierarchyResponse, String> {
    let a = Channel::pauli(req.phi1).map_err(err)?;
    let b = Channel::pauli(req.phi2).map_err(err)?;
    let h = hierarchy_check(&a, &b, req.p, &seesaw(req.seed)).map_err(err)?;
    Ok(HierarchyResponse {
        input_ranks: h.results.iter().map(|r| r.input_rank).collect(),
        values: h.values,
        monotone: h.monotone,
    })
}

pub fn scan(req: &ScanRequest) -> Result<ScanResponse, String> {
    let traj = trajectory(&req.model, &req.grid)?;
    let r = divisibility_scan(&traj, req.k, req.grid.step, &seesaw(req.seed)).map_err(err)?;
    Ok(ScanResponse {
        times: r.entries.iter().map(|e| e.time).collect(),
        min_values: r.entries.iter().map(|e| e.verdict.min_value).collect(),
        violation: r.entries.iter().map(|e| e.verdict.is_violation()).collect(),
        halted_at: r.halted.map(|h| h.time),
    })
}

fn call<Req: for<'de> Deserialize<'de>, Resp: Serialize>(
    json: &str,
    f: impl Fn(&Req) -> Result<Resp, String>,
) -> Result<String, JsError> {
    let req: Req = serde_json::from_str(json).map_err(|e| JsError::new(&e.to_string()))?;
    let resp = f(&req).map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&resp).map_err(|e| JsError::new(&e.to_string()))
}

/// `D_k` of two evolved Pauli channels along the grid.
#[wasm_bindgen]
pub fn distinguishability_trace(request: &str) -> Result<String, JsError> {
    call(request, trace)
}

/// `D_1 ≤ D_2` for two Pauli channels.
#[wasm_bindgen]
pub fn k_hierarchy(request: &str) -> Result<String, JsError> {
    call(request, hierarchy)
}

/// k-positivity of `Λ(t + step, t)` at every grid time.
#[wasm_bindgen]
pub fn divisibility(request: &str) -> Result<String, JsError> {
    call(request, scan)
}
