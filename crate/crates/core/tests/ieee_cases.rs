use std::path::PathBuf;

use maopf::network::ControlSettings;
use maopf::powerflow::{compute_branch_flows, PowerFlowOptions};
use maopf::{evaluate_individual, load_case, solve_power_flow, PowerNetwork};
use serde::Deserialize;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

fn controls(name: &str) -> ControlSettings {
    serde_json::from_str(&std::fs::read_to_string(data(name)).unwrap()).unwrap()
}

/// Solution written by an external Newton solver at tight tolerance.
#[derive(Deserialize)]
struct Reference {
    vm: Vec<f64>,
    va_deg: Vec<f64>,
    p_gen_mw: Vec<f64>,
    q_gen_mvar: Vec<f64>,
    branch_s_from_mva: Vec<f64>,
    branch_s_to_mva: Vec<f64>,
}

fn reference(name: &str) -> Reference {
    serde_json::from_str(&std::fs::read_to_string(data(name)).unwrap()).unwrap()
}

fn tight() -> PowerFlowOptions {
    PowerFlowOptions {
        tolerance: 1e-10,
        enforce_q_limits: false,
        ..Default::default()
    }
}

fn compare(net: &PowerNetwork, c: &ControlSettings, r: &Reference, tol: f64) {
    let res = solve_power_flow(net, c, &tight()).unwrap();
    assert!(res.converged, "max mismatch {}", res.max_mismatch);
    let p = res.point.unwrap();
    let base = net.base_mva();
    // Angles are compared relative to the slack, whose reference angle may differ.
    let slack = net.slack_position();
    for i in 0..net.bus_count() {
        assert!((p.vm[i] - r.vm[i]).abs() < tol, "vm at bus {i}");
        let theirs = r.va_deg[i] - r.va_deg[slack];
        assert!(
            (p.va[i].to_degrees() - theirs).abs() < tol * 100.0,
            "va at bus {i}"
        );
    }
    for g in 0..net.generators().len() {
        assert!(
            (p.p_gen[g] * base - r.p_gen_mw[g]).abs() < tol * base,
            "P of unit {g}"
        );
        assert!(
            (p.q_gen[g] * base - r.q_gen_mvar[g]).abs() < tol * base,
            "Q of unit {g}"
        );
    }
    let flows = compute_branch_flows(net, &net.device_settings(c), &p).unwrap();
    for (k, f) in flows.iter().enumerate() {
        assert!((f.s_from.norm() * base - r.branch_s_from_mva[k]).abs() < tol * base);
        assert!((f.s_to.norm() * base - r.branch_s_to_mva[k]).abs() < tol * base);
    }
}

#[test]
fn ieee14_matches_reference_solver() {
    let net = load_case(data("ieee14.json")).unwrap();
    let c = controls("ieee14_controls.json");
    compare(&net, &c, &reference("reference/ieee14_pypower.json"), 1e-4);
}

#[test]
fn ieee118_base_matches_reference_solver() {
    let net = load_case(data("ieee118.json")).unwrap();
    let c = controls("ieee118_base_controls.json");
    compare(
        &net,
        &c,
        &reference("reference/ieee118_base_pypower.json"),
        1e-4,
    );
}

#[test]
fn ieee118_shape() {
    let net = load_case(data("ieee118.json")).unwrap();
    assert_eq!(net.bus_count(), 118);
    assert_eq!(net.active_generator_count(), 14);
    assert_eq!(net.tap_branches().len(), 9);
    assert_eq!(net.generators().len(), 54);
}

#[test]
fn ieee118_base_converges_quickly() {
    let net = load_case(data("ieee118.json")).unwrap();
    let c = controls("ieee118_base_controls.json");
    let res = solve_power_flow(&net, &c, &PowerFlowOptions::default()).unwrap();
    assert!(res.converged);
    assert!(res.iterations < 30);
    assert!(res.max_mismatch <= 1e-6);
}

#[test]
fn generation_balances_load_plus_losses() {
    for (case, ctl) in [
        ("ieee14.json", "ieee14_controls.json"),
        ("ieee118.json", "ieee118_base_controls.json"),
    ] {
        let net = load_case(data(case)).unwrap();
        let c = controls(ctl);
        let res = solve_power_flow(&net, &c, &tight()).unwrap();
        let p = res.point.unwrap();
        let flows = compute_branch_flows(&net, &net.device_settings(&c), &p).unwrap();
        let losses: f64 = flows.iter().map(|f| f.s_from.re + f.s_to.re).sum();
        let generation: f64 = p.p_gen.iter().sum();
        let (load, _) = net.total_load();
        assert!(
            (generation - load - losses).abs() < 1e-8,
            "{case}: {generation} vs {load} + {losses}"
        );
    }
}

#[test]
fn ieee118_base_evaluation_is_finite() {
    let net = load_case(data("ieee118.json")).unwrap();
    let c = controls("ieee118_base_controls.json");
    let e = evaluate_individual(&net, &c).unwrap();
    assert!(e.detail.report.converged);
    let f = e.objectives;
    assert!(f.f1 > 0.0 && f.f2 > 0.0 && f.f3 > 0.0 && f.f3 < 1.0 && f.f4 > 0.0);
}
