//! Browser demo: every export takes plain numbers and returns a JSON string.

use ams_sfe::manifold::EmbeddedManifold;
use ams_sfe::pipeline::{prepare, run_ablation, train_expansion_model, PipelineConfig};
use ams_sfe::synthetic::{generate_synthetic, SyntheticSpec};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn demo_spec(seed: u64, noise: f64) -> SyntheticSpec {
    SyntheticSpec {
        m_seen: 10,
        v_unseen: 4,
        d: 32,
        n: 10,
        examples_per_class: 25,
        noise_sigma: noise,
        latent_dim: 8,
        seed,
        ..Default::default()
    }
}

fn demo_config(seed: u64, epochs: usize) -> PipelineConfig {
    PipelineConfig {
        k: 6,
        epochs,
        learning_rate: 3e-3,
        batch_size: 32,
        top_k: 4,
        seed,
        ..Default::default()
    }
}

/// 2-D classical MDS of the seen class centers.
pub fn embedding(seed: u64, noise: f64) -> ams_sfe::Result<Value> {
    let (seen, _) = generate_synthetic(&demo_spec(seed, noise))?;
    let manifold = EmbeddedManifold::from_dataset(&seen, 2)?;
    let points: Vec<Value> = manifold
        .class_ids
        .iter()
        .enumerate()
        .map(|(j, id)| json!({ "class": id.0, "x": manifold.o[(0, j)], "y": manifold.o[(1, j)] }))
        .collect();
    Ok(json!({ "points": points, "rank": manifold.effective_rank }))
}

/// Per-epoch loss curves of the joint objective.
pub fn training_curve(seed: u64, epochs: usize, alpha: f64, beta: f64) -> ams_sfe::Result<Value> {
    let (seen, unseen) = generate_synthetic(&demo_spec(seed, 0.5))?;
    let config = PipelineConfig {
        alpha,
        beta,
        ..demo_config(seed, epochs)
    };
    let (_, seen, _) = prepare(&config, &seen, &unseen)?;
    let (_, report) = train_expansion_model(&config, &seen)?;
    Ok(json!({
        "total": report.total,
        "reconstruction": report.reconstruction,
        "alignment": report.alignment,
    }))
}

/// Hit@k for the P, E and P+E views.
pub fn ablation(seed: u64, epochs: usize, noise: f64) -> ams_sfe::Result<Value> {
    let (seen, unseen) = generate_synthetic(&demo_spec(seed, noise))?;
    let outcomes = run_ablation(&demo_config(seed, epochs), &seen, &unseen)?;
    let views: Vec<Value> = outcomes
        .iter()
        .map(|o| json!({ "view": o.view.label(), "hit_at_k": o.report.hit_at_k }))
        .collect();
    Ok(json!({ "views": views }))
}

fn to_js(r: ams_sfe::Result<Value>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = embedClasses)]
pub fn embed_classes(seed: u32, noise: f64) -> Result<String, JsValue> {
    to_js(embedding(seed as u64, noise))
}

#[wasm_bindgen(js_name = trainingCurve)]
pub fn training_curve_js(seed: u32, epochs: u32, alpha: f64, beta: f64) -> Result<String, JsValue> {
    to_js(training_curve(seed as u64, epochs as usize, alpha, beta))
}

#[wasm_bindgen(js_name = ablate)]
pub fn ablation_js(seed: u32, epochs: u32, noise: f64) -> Result<String, JsValue> {
    to_js(ablation(seed as u64, epochs as usize, noise))
}
