//! Serializable summary of an optimisation run.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::optics::{format_sig6, Rta, SpectralResponse};

/// Best-so-far design at the end of one episode or generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub index: u64,
    pub best_aim: f64,
    #[serde(rename = "mean_R")]
    pub mean_r: f64,
    #[serde(rename = "mean_T")]
    pub mean_t: f64,
    #[serde(rename = "mean_A")]
    pub mean_a: f64,
}

impl CurvePoint {
    pub fn new(index: u64, best_aim: f64, means: &Rta) -> Self {
        Self {
            index,
            best_aim,
            mean_r: means.r,
            mean_t: means.t,
            mean_a: means.a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Dqn,
    Ga,
}

impl OptimizerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::Dqn => "dqn",
            OptimizerKind::Ga => "ga",
        }
    }
}

/// Outcome of one run. Field order is the serialized key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Episodes (DQN) or generations (GA) actually run.
    pub episodes: u64,
    /// Environment steps (DQN) or offspring created (GA).
    pub total_steps: u64,
    pub evaluations: u64,
    pub best_thicknesses_nm: Vec<f64>,
    pub best_aim: f64,
    #[serde(rename = "mean_R")]
    pub mean_r: f64,
    #[serde(rename = "mean_T")]
    pub mean_t: f64,
    #[serde(rename = "mean_A")]
    pub mean_a: f64,
    pub curve: Vec<CurvePoint>,
    #[serde(skip)]
    pub best_response: Option<SpectralResponse>,
}

impl RunReport {
    /// `index,best_aim,mean_R,mean_T,mean_A`, one row per curve point.
    pub fn convergence_csv(&self) -> String {
        let mut out = String::from("index,best_aim,mean_R,mean_T,mean_A\n");
        for p in &self.curve {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                p.index,
                format_sig6(p.best_aim),
                format_sig6(p.mean_r),
                format_sig6(p.mean_t),
                format_sig6(p.mean_a)
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convergence_csv_rows() {
        let report = RunReport {
            optimizer: OptimizerKind::Ga,
            seed: 1,
            episodes: 1,
            total_steps: 0,
            evaluations: 1,
            best_thicknesses_nm: vec![1.0],
            best_aim: 0.5,
            mean_r: 0.25,
            mean_t: 0.25,
            mean_a: 0.5,
            curve: vec![CurvePoint::new(0, 0.5, &Rta { r: 0.25, t: 0.25, a: 0.5 })],
            best_response: None,
        };
        assert_eq!(
            report.convergence_csv(),
            "index,best_aim,mean_R,mean_T,mean_A\n0,0.5,0.25,0.25,0.5\n"
        );
    }
}
