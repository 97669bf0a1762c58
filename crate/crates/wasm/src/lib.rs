//! wasm-bindgen surface for the browser demo. Each call returns a JSON
//! string (parsed on the JS side) or throws a string error; all the actual
//! work lives in `maglap::demo`.

use maglap::demo::{DemoFamily, DemoSampler};
use wasm_bindgen::prelude::wasm_bindgen;

fn family(kind: &str, n: usize, p: f64) -> Result<DemoFamily, String> {
    match kind {
        "grid" => {
            let side = (n as f64).sqrt().round().max(2.0) as usize;
            Ok(DemoFamily::Grid {
                rows: side,
                cols: side,
            })
        }
        "er" => Ok(DemoFamily::Er { n, p }),
        other => Err(format!("unknown graph family `{other}`")),
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

/// Samples one spanning subgraph (spanning tree, forest, CRSF or MTSF
/// depending on q and the noise level) and returns drawing geometry.
#[wasm_bindgen]
pub fn sample_subgraph(
    kind: &str,
    n: usize,
    p: f64,
    eta: f64,
    q: f64,
    use_wilson: bool,
    seed: u64,
    replicate: u64,
) -> Result<String, String> {
    let sampler = if use_wilson {
        DemoSampler::SpanningTree
    } else {
        DemoSampler::CyclePopping
    };
    let scene = maglap::demo::sample_scene(family(kind, n, p)?, eta, q, sampler, seed, replicate)
        .map_err(|e| e.to_string())?;
    to_json(&scene)
}

/// Exact leverage scores for edge coloring plus kernel statistics.
#[wasm_bindgen]
pub fn leverage_heatmap(
    kind: &str,
    n: usize,
    p: f64,
    eta: f64,
    q: f64,
    seed: u64,
) -> Result<String, String> {
    let scene = maglap::demo::leverage_scene(family(kind, n, p)?, eta, q, seed)
        .map_err(|e| e.to_string())?;
    to_json(&scene)
}

/// Planted-ranking recovery on a noisy comparison graph.
#[wasm_bindgen]
pub fn syncrank_recovery(n: usize, p: f64, eta: f64, seed: u64) -> Result<String, String> {
    let scene = maglap::demo::syncrank_scene(n, p, eta, seed).map_err(|e| e.to_string())?;
    to_json(&scene)
}
