//! Files exchanged between the subcommands: the run archive, the
//! coefficient override file and their CSV mirrors.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use maopf::knea::{GenerationRecord, KneaConfig, ParetoArchive};
use maopf::network::{CostCurve, EmissionCurve};
use maopf::objectives::OpfDetail;
use maopf::{
    CaseFile, ConstraintReport, ControlSettings, ObjectiveVector, OpfProblem, PowerNetwork,
};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// Replacement cost and emission curves, keyed by generator bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientFile {
    pub generators: Vec<CoefficientRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientRecord {
    pub bus: usize,
    pub cost: Option<CostCurve>,
    pub emission: Option<EmissionCurve>,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Loads a case file, applying coefficient overrides when given.
pub fn load_network(case: &Path, coefficients: Option<&Path>) -> Result<PowerNetwork> {
    let mut file: CaseFile = serde_json::from_str(&read_text(case)?)
        .with_context(|| format!("malformed case file {}", case.display()))?;
    if let Some(path) = coefficients {
        let overrides: CoefficientFile = serde_json::from_str(&read_text(path)?)
            .with_context(|| format!("malformed coefficient file {}", path.display()))?;
        apply_coefficients(&mut file, &overrides)
            .with_context(|| format!("cannot apply {}", path.display()))?;
    }
    file.into_network()
        .with_context(|| format!("invalid case {}", case.display()))
}

pub fn apply_coefficients(case: &mut CaseFile, overrides: &CoefficientFile) -> Result<()> {
    let by_bus: HashMap<usize, usize> = case
        .generators
        .iter()
        .enumerate()
        .map(|(i, g)| (g.bus, i))
        .collect();
    for rec in &overrides.generators {
        let Some(&i) = by_bus.get(&rec.bus) else {
            bail!("no generator at bus {}", rec.bus);
        };
        if let Some(cost) = rec.cost {
            case.generators[i].cost = cost;
        }
        if let Some(emission) = rec.emission {
            case.generators[i].emission = emission;
        }
    }
    Ok(())
}

pub fn read_controls(path: &Path) -> Result<ControlSettings> {
    serde_json::from_str(&read_text(path)?)
        .with_context(|| format!("malformed control file {}", path.display()))
}

/// What produced an archive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunEcho {
    pub case: PathBuf,
    pub coefficients: Option<PathBuf>,
    pub algorithm: KneaConfig,
}

/// Condensed view of a solved operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSummary {
    pub iterations: usize,
    pub max_mismatch: f64,
    pub vm_min: f64,
    pub vm_max: f64,
    /// Largest branch flow over its rating.
    pub max_branch_loading: f64,
    pub slack_p_mw: f64,
    pub losses_mw: f64,
    /// Generators held at a reactive limit instead of their voltage set point.
    pub q_limited: Vec<usize>,
}

impl PointSummary {
    pub fn of(net: &PowerNetwork, detail: &OpfDetail) -> Option<Self> {
        let p = detail.point.as_ref()?;
        let base = net.base_mva();
        let loading = net
            .branches()
            .iter()
            .zip(&p.branch_flow)
            .map(|(b, s)| s / b.s_max)
            .fold(0.0, f64::max);
        Some(Self {
            iterations: detail.iterations,
            max_mismatch: detail.max_mismatch,
            vm_min: p.vm.iter().copied().fold(f64::INFINITY, f64::min),
            vm_max: p.vm.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            max_branch_loading: loading,
            slack_p_mw: p.p_gen[net.slack_generator()] * base,
            losses_mw: (p.p_gen.iter().sum::<f64>() - net.total_load().0) * base,
            q_limited: p.switched.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionRecord {
    pub controls: ControlSettings,
    pub objectives: ObjectiveVector,
    pub feasible: bool,
    pub constraints: ConstraintReport,
    /// Absent when the power flow did not converge.
    pub summary: Option<PointSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchiveFile {
    pub schema_version: u32,
    /// Seconds since the Unix epoch; the only field that differs between
    /// repeated runs.
    pub timestamp: u64,
    pub config: RunEcho,
    /// False when no feasible solution was found; `solutions` then holds
    /// the least-violating ones.
    pub feasible: bool,
    pub warning: Option<String>,
    pub solutions: Vec<SolutionRecord>,
    pub progress: Vec<GenerationRecord>,
}

impl ArchiveFile {
    pub fn build(
        problem: &OpfProblem<'_>,
        config: RunEcho,
        archive: ParetoArchive<OpfDetail>,
    ) -> Self {
        let net = problem.network();
        let solutions = archive
            .members
            .iter()
            .map(|ind| {
                let eval = ind.eval();
                SolutionRecord {
                    controls: problem.layout().decode(&ind.controls),
                    objectives: ObjectiveVector::from_slice(&eval.objectives),
                    feasible: eval.feasible,
                    constraints: eval.detail.report,
                    summary: PointSummary::of(net, &eval.detail),
                }
            })
            .collect();
        let warning = (!archive.feasible).then(|| {
            "no feasible solution found; archive holds the least-violating individuals".to_string()
        });
        Self {
            schema_version: SCHEMA_VERSION,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            config,
            feasible: archive.feasible,
            warning,
            solutions,
            progress: archive.progress,
        }
    }

    pub fn objective_rows(&self) -> Vec<Vec<f64>> {
        self.solutions
            .iter()
            .map(|s| s.objectives.to_vec())
            .collect()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let archive: Self = serde_json::from_str(&read_text(path)?)
            .with_context(|| format!("malformed archive {}", path.display()))?;
        if archive.schema_version != SCHEMA_VERSION {
            bail!(
                "{} has schema version {}, expected {SCHEMA_VERSION}",
                path.display(),
                archive.schema_version
            );
        }
        Ok(archive)
    }

    /// Writes the JSON archive and a CSV of its objective matrix next to it.
    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        write_text(path, &serde_json::to_string_pretty(self)?)?;
        let csv_path = path.with_extension("csv");
        let mut w = csv::Writer::from_path(&csv_path)
            .with_context(|| format!("cannot write {}", csv_path.display()))?;
        w.write_record(["solution", "f1", "f2", "f3", "f4", "feasible", "violation"])?;
        for (i, s) in self.solutions.iter().enumerate() {
            let f = &s.objectives;
            w.write_record([
                i.to_string(),
                f.f1.to_string(),
                f.f2.to_string(),
                f.f3.to_string(),
                f.f4.to_string(),
                s.feasible.to_string(),
                s.constraints.total.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(csv_path)
    }

    /// Re-evaluates every stored solution and returns the largest relative
    /// objective discrepancy.
    pub fn reevaluation_error(&self, net: &PowerNetwork) -> Result<f64> {
        let problem = OpfProblem::new(net);
        let mut worst: f64 = 0.0;
        for (i, s) in self.solutions.iter().enumerate() {
            let eval = problem
                .evaluate_settings(&s.controls)
                .with_context(|| format!("solution {i}"))?;
            for (a, b) in eval.objectives.to_vec().iter().zip(s.objectives.to_vec()) {
                worst = worst.max((a - b).abs() / b.abs().max(1.0));
            }
        }
        Ok(worst)
    }
}
