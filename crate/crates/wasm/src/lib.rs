//! Browser bindings for the Ablowitz-Ladik CMV toolkit.
//!
//! Three interactive operations back the demo page in `www/index.html`:
//! evolving coefficient trajectories under a chosen Hamiltonian flow,
//! scanning the discriminant over the unit circle, and checking a Lax-pair
//! residual on seeded random data. All results cross the boundary as JSON
//! strings; the page does its own drawing on a canvas.
//!
//! The `*_impl` functions carry the logic and are plain Rust (tested on the
//! host); the exported wrappers only translate errors into `JsValue`, which
//! exists solely on the wasm32 target.

use alcmv::coeffs::{self, SequenceCase};
use alcmv::flows::{drift_report, integrate, FlowConfig};
use alcmv::hamiltonians::{DiscriminantPoly, HamiltonianSpec};
use alcmv::lax::{lax_residual, GradientMethod, LaxVariant};
use alcmv::rng::random_periodic;
use alcmv::C64;
use serde_json::json;
use wasm_bindgen::prelude::*;

/// A fresh random periodic coefficient file, for seeding the page inputs.
#[wasm_bindgen]
pub fn random_coeffs(p: usize, seed: u64) -> Result<String, JsValue> {
    random_coeffs_impl(p, seed).map_err(|e| JsValue::from_str(&e))
}

/// Integrate a Hamiltonian flow; returns sampled trajectory points plus the
/// conserved-quantity drift table.
#[wasm_bindgen]
pub fn flow_trajectory(
    coeffs_json: &str,
    hamiltonian: &str,
    t_end: f64,
    dt: f64,
    samples: usize,
) -> Result<String, JsValue> {
    flow_trajectory_impl(coeffs_json, hamiltonian, t_end, dt, samples)
        .map_err(|e| JsValue::from_str(&e))
}

/// Evaluate the discriminant on a uniform grid of the unit circle. For
/// period-2 input the closed form is included for comparison.
#[wasm_bindgen]
pub fn discriminant_scan(coeffs_json: &str, grid: usize) -> Result<String, JsValue> {
    discriminant_scan_impl(coeffs_json, grid).map_err(|e| JsValue::from_str(&e))
}

/// One Lax-pair residual on a seeded random periodic sequence.
#[wasm_bindgen]
pub fn verify_lax(
    p: usize,
    seed: u64,
    variant: &str,
    d: usize,
    method: &str,
) -> Result<String, JsValue> {
    verify_lax_impl(p, seed, variant, d, method).map_err(|e| JsValue::from_str(&e))
}

pub fn random_coeffs_impl(p: usize, seed: u64) -> Result<String, String> {
    if p == 0 || p > 16 {
        return Err("period must be in 1..=16".into());
    }
    let seq = random_periodic(p, seed);
    Ok(coeffs::to_json(&seq))
}

pub fn flow_trajectory_impl(
    coeffs_json: &str,
    hamiltonian: &str,
    t_end: f64,
    dt: f64,
    samples: usize,
) -> Result<String, String> {
    let seq = coeffs::from_json(coeffs_json).map_err(|e| e.to_string())?;
    seq.validate().map_err(|e| e.to_string())?;
    let spec = HamiltonianSpec::parse(hamiltonian)
        .ok_or_else(|| format!("unknown hamiltonian {hamiltonian:?}"))?;
    if !(dt > 0.0) || !(t_end >= 0.0) || t_end / dt > 2e6 {
        return Err("need dt > 0, t_end >= 0, and t_end/dt <= 2e6".into());
    }
    let steps = (t_end / dt).ceil() as usize;
    let config = FlowConfig {
        hamiltonian: spec,
        t_end,
        dt,
        monitor_every: (steps / samples.clamp(1, 4000)).max(1),
        gradient_method: GradientMethod::Analytic,
    };
    let trajectory = integrate(&config, &seq).map_err(|e| e.to_string())?;
    let t: Vec<f64> = trajectory.iter().map(|r| r.t).collect();
    let alphas: Vec<Vec<[f64; 2]>> = trajectory
        .iter()
        .map(|r| r.alphas.iter().map(|a| [a.re, a.im]).collect())
        .collect();
    let k0: Vec<f64> = trajectory.iter().map(|r| r.monitors.k0).collect();
    let drift = drift_report(&trajectory);
    Ok(json!({
        "t": t,
        "alphas": alphas,
        "K0": k0,
        "drift": drift,
    })
    .to_string())
}

pub fn discriminant_scan_impl(coeffs_json: &str, grid: usize) -> Result<String, String> {
    let seq = coeffs::from_json(coeffs_json).map_err(|e| e.to_string())?;
    seq.validate().map_err(|e| e.to_string())?;
    if seq.case() != SequenceCase::Periodic {
        return Err("discriminant needs periodic coefficients".into());
    }
    let grid = grid.clamp(8, 4096);
    let poly = DiscriminantPoly::from_sequence(&seq).map_err(|e| e.to_string())?;
    let p2 = seq.effective_period() == 2;
    let mut theta = Vec::with_capacity(grid);
    let mut re = Vec::with_capacity(grid);
    let mut im = Vec::with_capacity(grid);
    let mut closed = Vec::new();
    for i in 0..grid {
        let th = 2.0 * std::f64::consts::PI * i as f64 / grid as f64;
        let z = C64::from_polar(1.0, th);
        let delta = poly.delta_at(z).map_err(|e| e.to_string())?;
        theta.push(th);
        re.push(delta.re);
        im.push(delta.im);
        if p2 {
            closed.push(
                alcmv::hamiltonians::delta_closed_form_p2(seq.alphas()[0], seq.alphas()[1], th).re,
            );
        }
    }
    Ok(json!({
        "theta": theta,
        "re": re,
        "im": im,
        "closed_form": if p2 { Some(closed) } else { None },
    })
    .to_string())
}

pub fn verify_lax_impl(
    p: usize,
    seed: u64,
    variant: &str,
    d: usize,
    method: &str,
) -> Result<String, String> {
    if p == 0 || p > 12 || d == 0 || d > 4 {
        return Err("need 1 <= p <= 12 and 1 <= d <= 4".into());
    }
    let seq = random_periodic(p, seed);
    let variant =
        LaxVariant::parse(variant).ok_or_else(|| format!("unknown variant {variant:?}"))?;
    let method = match method {
        "analytic" => GradientMethod::Analytic,
        "fd" => GradientMethod::Fd,
        other => return Err(format!("unknown method {other:?}")),
    };
    let report = lax_residual(variant, &seq, d, method).map_err(|e| e.to_string())?;
    Ok(json!({
        "variant": report.variant.label(),
        "p": p,
        "seed": seed,
        "d": d,
        "method": report.method.label(),
        "matrix_dim": report.matrix_dim,
        "max_abs_residual": report.max_abs_residual,
        "worst_entry": [report.worst_entry.0, report.worst_entry.1],
        "wraparound_sums": report.wraparound_sums,
        "threshold": method.default_threshold(),
        "pass": report.max_abs_residual < method.default_threshold(),
    })
    .to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bindings_round_trip() {
        let coeffs = random_coeffs_impl(4, 7).unwrap();
        let flow = flow_trajectory_impl(&coeffs, "AL", 0.5, 1e-2, 100).unwrap();
        assert!(flow.contains("drift"));
        let scan = discriminant_scan_impl(&coeffs, 64).unwrap();
        assert!(scan.contains("theta"));
        let verify = verify_lax_impl(4, 7, "PeriodicK:2", 1, "analytic").unwrap();
        assert!(verify.contains("\"pass\":true"));
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(flow_trajectory_impl("not json", "AL", 1.0, 1e-3, 10).is_err());
        let coeffs = random_coeffs_impl(2, 1).unwrap();
        assert!(flow_trajectory_impl(&coeffs, "bogus", 1.0, 1e-3, 10).is_err());
        assert!(verify_lax_impl(4, 1, "NotAVariant:1", 1, "analytic").is_err());
    }
}
