use serde::{Deserialize, Serialize};

use crate::cga::{KinematicChain, Multivector};
use crate::control::{
    control_torques, end_effector_line, toy_integrate, wrench_coefficients,
    wrench_from_coefficients, ControllerGains, WrenchPidState,
};
use crate::{Error, Result};

/// Settings for the toy closed loop. The joint model is `q̇ = gain·τ`;
/// it shows the torque mapping at work and nothing about real dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    pub steps: usize,
    pub dt: f64,
    pub gain: f64,
    pub start: Vec<f64>,
    /// Configuration whose end-effector line is the target.
    pub target: Vec<f64>,
    /// Desired normal force along the tool axis. No contact is simulated,
    /// so a nonzero value only exercises the clamped integral.
    pub force: f64,
    pub gains: ControllerGains,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            steps: 2000,
            dt: 0.001,
            gain: 0.02,
            start: vec![0.0, -0.3, 0.0, -2.0, 0.0, 1.8, 0.8],
            target: vec![0.15, -0.2, 0.1, -1.9, 0.05, 1.75, 0.8],
            force: 0.0,
            gains: ControllerGains {
                kp: 0.0,
                ki: 0.0,
                kd: 0.0,
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoRecord {
    pub t: f64,
    pub q: Vec<f64>,
    pub torques: Vec<f64>,
    pub line_error: f64,
    pub wrench_error: f64,
}

fn norm(c: &[f64; 6]) -> f64 {
    c.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn control_demo(chain: &KinematicChain, cfg: &DemoConfig) -> Result<Vec<DemoRecord>> {
    if cfg.steps == 0 || !(cfg.dt > 0.0) || !(cfg.gain > 0.0) {
        return Err(Error::Config(
            "demo needs steps, a positive dt and a positive gain".into(),
        ));
    }
    cfg.gains.validate()?;
    let target = end_effector_line(chain, &cfg.target)?;
    let desired = wrench_from_coefficients(&[0.0, 0.0, 0.0, 0.0, 0.0, cfg.force]);
    let measured = Multivector::ZERO;
    let mut pid = WrenchPidState::new(cfg.dt)?;
    let mut q = cfg.start.clone();
    let mut qdot = vec![0.0; q.len()];
    let mut records = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let out = control_torques(
            chain, &q, &qdot, &target, &desired, &measured, &cfg.gains, &pid,
        )?;
        records.push(DemoRecord {
            t: step as f64 * cfg.dt,
            q: q.clone(),
            torques: out.torques.clone(),
            line_error: norm(&wrench_coefficients(&out.line_wrench)),
            wrench_error: norm(&wrench_coefficients(&out.wrench_error)),
        });
        pid = out.pid;
        (q, qdot) = toy_integrate(&q, &out.torques, cfg.gain, cfg.dt);
    }
    Ok(records)
}

pub fn demo_csv(records: &[DemoRecord]) -> String {
    let joints = records.first().map_or(0, |r| r.q.len());
    let mut header = vec!["t".to_string()];
    header.extend((0..joints).map(|i| format!("q{i}")));
    header.extend((0..joints).map(|i| format!("tau{i}")));
    header.push("line_error".into());
    header.push("wrench_error".into());
    let mut out = header.join(",");
    out.push('\n');
    for r in records {
        let mut fields = vec![format!("{}", r.t)];
        fields.extend(r.q.iter().chain(&r.torques).map(|x| format!("{x}")));
        fields.push(format!("{}", r.line_error));
        fields.push(format!("{}", r.wrench_error));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}
