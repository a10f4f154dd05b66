//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export returns a JSON string; options are passed as JSON too, with
//! any omitted field taking its default.

pub mod demo;

use wasm_bindgen::prelude::*;

fn finish(r: chansel::Result<serde_json::Value>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

/// Spatial relevance of a built-in montage for kernel width `sigma`.
#[wasm_bindgen]
pub fn relevance_topomap(montage: &str, sigma: f64) -> Result<String, JsError> {
    finish(demo::relevance_topomap(montage, sigma))
}

/// Optimizer run on a synthetic recording; see [`demo::ParetoOptions`].
#[wasm_bindgen]
pub fn pareto_explorer(options: &str) -> Result<String, JsError> {
    finish(demo::pareto_explorer(options))
}

/// Spectra and ITTRD of one channel of a synthetic recording; see
/// [`demo::IttrdOptions`].
#[wasm_bindgen]
pub fn ittrd_demo(options: &str) -> Result<String, JsError> {
    finish(demo::ittrd_demo(options))
}
