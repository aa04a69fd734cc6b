use wasm_bindgen::prelude::*;

fn js<T: serde::Serialize>(result: moe_ram::Result<T>) -> Result<String, JsError> {
    result.map(|v| crate::to_json(&v)).map_err(|e| JsError::new(&e.to_string()))
}

/// KL both ways and JS between the softmaxes of two raw vectors.
#[wasm_bindgen]
pub fn divergences(p: &[f64], q: &[f64]) -> Result<String, JsError> {
    js(crate::divergences(p, q))
}

#[wasm_bindgen]
pub fn routing(query: &[f64], experts: &[f64], tau: f64, epsilon: f64, top_k: usize) -> Result<String, JsError> {
    js(crate::routing(query, experts, tau, epsilon, top_k))
}

#[wasm_bindgen]
pub fn toy_training(seed: u32, steps: usize, router: &str) -> Result<String, JsError> {
    js(crate::toy_training(seed as u64, steps, router))
}
