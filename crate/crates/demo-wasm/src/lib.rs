//! Browser bindings: each export takes a TOML problem and returns a CSV table
//! that the page plots.

use wasm_bindgen::prelude::*;
use wedge_core::commands::{run, Command, RunOptions};
use wedge_core::config::ProblemConfig;

const PRESETS: [(&str, &str); 6] = [
    ("dbar_identity", include_str!("../../core/configs/dbar_identity.toml")),
    ("dbar_aps", include_str!("../../core/configs/dbar_aps.toml")),
    ("jordan_aps", include_str!("../../core/configs/jordan_aps.toml")),
    ("dirac_matrix", include_str!("../../core/configs/dirac_matrix.toml")),
    ("flat_counterexample", include_str!("../../core/configs/flat_counterexample.toml")),
    ("weight_line", include_str!("../../core/configs/weight_line.toml")),
];

fn artifact(cmd: Command, toml: &str, opts: RunOptions, name: &str) -> Result<String, String> {
    let cfg = ProblemConfig::parse(toml).map_err(|e| e.to_string())?;
    let out = run(cmd, &cfg, &opts).map_err(|e| e.to_string())?;
    out.artifacts
        .into_iter()
        .find(|a| a.name == name)
        .map(|a| a.contents)
        .ok_or_else(|| format!("{name} was not produced"))
}

/// `re,im,mult,in_strip` for every root of the indicial pencil at `y`.
pub fn roots_csv(toml: &str, y: f64) -> Result<String, String> {
    artifact(Command::Spectrum, toml, RunOptions { y: Some(vec![y]), ..Default::default() }, "roots_plane.csv")
}

/// `x,element,abs,re_first,im_first` for the decaying kernel at `(y, eta)`.
pub fn kernel_csv(toml: &str, y: f64, eta: f64) -> Result<String, String> {
    let opts = RunOptions { y: Some(vec![y]), eta: Some(vec![eta]), ..Default::default() };
    artifact(Command::Kernel, toml, opts, "kernel_profile.csv")
}

/// `x,abs_at_y0` for the extension of a band-16 section.
pub fn extension_csv(toml: &str, y: f64) -> Result<String, String> {
    artifact(Command::SymbolsExtend, toml, RunOptions { y: Some(vec![y]), ..Default::default() }, "extension_profile.csv")
}

#[wasm_bindgen]
pub fn preset_names() -> String {
    PRESETS.iter().map(|p| p.0).collect::<Vec<_>>().join(",")
}

#[wasm_bindgen]
pub fn preset(name: &str) -> Option<String> {
    PRESETS.iter().find(|p| p.0 == name).map(|p| p.1.to_string())
}

#[wasm_bindgen]
pub fn roots_plot(toml: &str, y: f64) -> Result<String, JsValue> {
    roots_csv(toml, y).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn kernel_profile(toml: &str, y: f64, eta: f64) -> Result<String, JsValue> {
    kernel_csv(toml, y, eta).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn extension_profile(toml: &str, y: f64) -> Result<String, JsValue> {
    extension_csv(toml, y).map_err(|e| JsValue::from_str(&e))
}
