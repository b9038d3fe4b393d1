//! Subcommand bodies, kept free of argument parsing so tests can call them.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use maopf::decision::{decide, FcmOptions};
use maopf::knea::{run_knea, KneaConfig};
use maopf::metrics::{
    build_reference_front, generational_distance, normalize_together, spacing, Summary,
};
use maopf::{
    evaluate_individual, ConstraintReport, ControlSettings, ObjectiveVector, OpfProblem,
    PowerNetwork,
};
use serde::{Deserialize, Serialize};

use crate::archive::{load_network, read_controls, ArchiveFile, RunEcho, SCHEMA_VERSION};

/// Environment variable that overrides the worker thread count.
pub const THREADS_ENV: &str = "MAOPF_THREADS";

/// Thread count from the environment if set, else `requested`; 0 lets rayon
/// decide.
pub fn resolve_threads(requested: usize) -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("{THREADS_ENV} must be a whole number, got {v:?}")),
        Err(_) => Ok(requested),
    }
}

#[derive(Debug, Clone)]
pub struct RunRequest {
    pub case: PathBuf,
    pub coefficients: Option<PathBuf>,
    pub algorithm: KneaConfig,
    pub threads: usize,
    pub out: PathBuf,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub archive: ArchiveFile,
    pub json: PathBuf,
    pub csv: PathBuf,
    pub seconds: f64,
}

pub fn cmd_run(req: &RunRequest) -> Result<RunOutcome> {
    req.algorithm.validate()?;
    let net = load_network(&req.case, req.coefficients.as_deref())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(req.threads)
        .build()
        .context("cannot start worker threads")?;
    let problem = OpfProblem::new(&net);
    let start = Instant::now();
    let result = pool.install(|| run_knea(&problem, &req.algorithm))?;
    let seconds = start.elapsed().as_secs_f64();
    let echo = RunEcho {
        case: req.case.clone(),
        coefficients: req.coefficients.clone(),
        algorithm: req.algorithm.clone(),
    };
    let archive = ArchiveFile::build(&problem, echo, result);
    if let Some(w) = &archive.warning {
        log::warn!("{w}");
    }
    let csv = archive.write(&req.out)?;
    Ok(RunOutcome {
        archive,
        json: req.out.clone(),
        csv,
        seconds,
    })
}

/// `out` with `_NN` appended to the file stem, for repeated runs.
pub fn indexed_path(out: &Path, index: usize, width: usize) -> PathBuf {
    let stem = out
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("archive");
    let ext = out.extension().and_then(|s| s.to_str()).unwrap_or("json");
    out.with_file_name(format!("{stem}_{index:0width$}.{ext}"))
}

/// Row label for a cluster: the objective it prefers, if any.
pub fn preference_label(prefers: Option<usize>, cluster: usize) -> String {
    match prefers {
        Some(k) => format!("prefer for f{}", k + 1),
        None => format!("cluster {}", cluster + 1),
    }
}

/// One best-compromise solution of the decision report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcsRow {
    pub label: String,
    pub cluster: usize,
    pub prefers: Option<usize>,
    /// Index into the archive's solutions.
    pub solution: usize,
    pub members: Vec<usize>,
    pub objectives: ObjectiveVector,
    pub pm: f64,
    pub feasible: bool,
    pub controls: ControlSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionFile {
    pub schema_version: u32,
    pub archive: PathBuf,
    pub weights: Vec<f64>,
    pub clusters: usize,
    pub fcm_iterations: usize,
    pub fcm_loss: f64,
    pub rows: Vec<BcsRow>,
    /// Priority membership of every archive solution.
    pub pm: Vec<f64>,
    pub hard_labels: Vec<usize>,
    pub notes: Vec<String>,
}

impl DecisionFile {
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<16} {:>14} {:>10} {:>10} {:>14} {:>8}\n",
            "", "f1", "f2", "f3", "f4", "PM"
        );
        for r in &self.rows {
            let f = &r.objectives;
            let _ = writeln!(
                s,
                "{:<16} {:>14.4} {:>10.6} {:>10.6} {:>14.4} {:>8.4}",
                r.label, f.f1, f.f2, f.f3, f.f4, r.pm
            );
        }
        s
    }

    /// Writes the JSON report and its CSV mirror, one row per BCS.
    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)
            .with_context(|| format!("cannot write {}", path.display()))?;
        let csv_path = path.with_extension("csv");
        let mut w = csv::Writer::from_path(&csv_path)
            .with_context(|| format!("cannot write {}", csv_path.display()))?;
        w.write_record(["label", "solution", "f1", "f2", "f3", "f4", "pm", "members"])?;
        for r in &self.rows {
            let f = &r.objectives;
            w.write_record([
                r.label.clone(),
                r.solution.to_string(),
                f.f1.to_string(),
                f.f2.to_string(),
                f.f3.to_string(),
                f.f4.to_string(),
                r.pm.to_string(),
                r.members.len().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(csv_path)
    }
}

pub fn cmd_decide(archive_path: &Path, fcm: &FcmOptions, weights: &[f64]) -> Result<DecisionFile> {
    let archive = ArchiveFile::read(archive_path)?;
    let n = archive.solutions.len();
    ensure!(
        n >= fcm.clusters,
        "{} holds {n} solutions, fewer than the {} clusters requested",
        archive_path.display(),
        fcm.clusters
    );
    let raw = archive.objective_rows();
    let d = decide(&raw, fcm, weights)?;
    let mut notes = d.report.notes.clone();
    if !archive.feasible {
        notes.push("archive contains no feasible solution".into());
    }
    let rows = d
        .report
        .clusters
        .iter()
        .map(|c| {
            let s = &archive.solutions[c.bcs];
            BcsRow {
                label: preference_label(c.prefers, c.cluster),
                cluster: c.cluster,
                prefers: c.prefers,
                solution: c.bcs,
                members: c.members.clone(),
                objectives: s.objectives,
                pm: c.pm,
                feasible: s.feasible,
                controls: s.controls.clone(),
            }
        })
        .collect();
    Ok(DecisionFile {
        schema_version: SCHEMA_VERSION,
        archive: archive_path.to_path_buf(),
        weights: d.report.weights.clone(),
        clusters: fcm.clusters,
        fcm_iterations: d.fcm.iterations,
        fcm_loss: d.fcm.final_loss(),
        rows,
        pm: d.grp.pm.clone(),
        hard_labels: d.fcm.hard_labels.clone(),
        notes,
    })
}

/// Parses `a,b,c,d` into weights.
pub fn parse_weights(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|w| {
            w.trim()
                .parse::<f64>()
                .with_context(|| format!("bad weight {w:?}"))
        })
        .collect()
}

/// Objective vectors of a front file: a run archive or a bare JSON array of
/// vectors.
pub fn read_front(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    if let Ok(archive) = serde_json::from_str::<ArchiveFile>(&text) {
        return Ok(archive.objective_rows());
    }
    serde_json::from_str(&text).with_context(|| {
        format!(
            "{} is neither a run archive nor an array of objective vectors",
            path.display()
        )
    })
}

/// A labelled front file given on the command line as `[LABEL=]PATH`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontArg {
    pub label: String,
    pub path: PathBuf,
}

impl std::str::FromStr for FrontArg {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.split_once('=') {
            Some((label, path)) if !label.is_empty() => Self {
                label: label.to_string(),
                path: PathBuf::from(path),
            },
            _ => Self {
                label: "runs".to_string(),
                path: PathBuf::from(s),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupMetrics {
    pub label: String,
    pub runs: usize,
    pub gd: Summary,
    pub sp: Summary,
}

pub fn format_metrics(groups: &[GroupMetrics]) -> String {
    let mut s = format!(
        "{:<12} {:>5} {:>8} {:>14} {:>14} {:>14}\n",
        "group", "runs", "metric", "best", "average", "worst"
    );
    for g in groups {
        for (name, m) in [("GD", g.gd), ("SP", g.sp)] {
            let _ = writeln!(
                s,
                "{:<12} {:>5} {:>8} {:>14.6e} {:>14.6e} {:>14.6e}",
                g.label, g.runs, name, m.best, m.average, m.worst
            );
        }
    }
    s
}

/// GD and SP per label group. Without a reference the non-dominated union
/// of all inputs is used. Unless `raw`, every front and the reference share
/// one min-max scaling computed over all of them.
pub fn cmd_metrics(
    fronts: &[FrontArg],
    reference: Option<&Path>,
    raw: bool,
) -> Result<Vec<GroupMetrics>> {
    ensure!(!fronts.is_empty(), "no front files given");
    let mut points = Vec::with_capacity(fronts.len());
    for f in fronts {
        points.push(read_front(&f.path)?);
    }
    let reference = match reference {
        Some(p) => read_front(p)?,
        None => build_reference_front(&points),
    };
    let dim = reference.first().map(Vec::len);
    for (f, pts) in fronts.iter().zip(&points) {
        if pts.iter().any(|p| Some(p.len()) != dim) {
            bail!(
                "{} does not match the reference dimension",
                f.path.display()
            );
        }
    }
    let (points, reference) = if raw {
        (points, reference)
    } else {
        let mut all: Vec<&[Vec<f64>]> = points.iter().map(Vec::as_slice).collect();
        all.push(&reference);
        let mut scaled = normalize_together(&all);
        let reference = scaled.pop().unwrap();
        (scaled, reference)
    };

    let mut labels: Vec<&str> = Vec::new();
    for f in fronts {
        if !labels.contains(&f.label.as_str()) {
            labels.push(&f.label);
        }
    }
    labels
        .into_iter()
        .map(|label| {
            let mut gd = Vec::new();
            let mut sp = Vec::new();
            for (f, pts) in fronts.iter().zip(&points).filter(|(f, _)| f.label == label) {
                let ctx = || format!("{}", f.path.display());
                gd.push(generational_distance(pts, &reference).with_context(ctx)?);
                sp.push(spacing(pts).with_context(ctx)?);
            }
            Ok(GroupMetrics {
                label: label.to_string(),
                runs: gd.len(),
                gd: Summary::of(&gd).unwrap(),
                sp: Summary::of(&sp).unwrap(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfReport {
    pub converged: bool,
    pub iterations: usize,
    pub max_mismatch: f64,
    pub objectives: ObjectiveVector,
    pub constraints: ConstraintReport,
    pub vm: Vec<f64>,
    pub va_deg: Vec<f64>,
    pub p_gen_mw: Vec<f64>,
    pub q_gen_mvar: Vec<f64>,
    /// Branch flow over rating, per branch.
    pub branch_loading: Vec<f64>,
}

/// Solves one control assignment; nominal controls when `controls` is None.
pub fn cmd_pf(net: &PowerNetwork, controls: Option<&Path>) -> Result<PfReport> {
    let controls = match controls {
        Some(p) => read_controls(p)?,
        None => net.nominal_controls(),
    };
    let eval = evaluate_individual(net, &controls)?;
    let d = &eval.detail;
    let base = net.base_mva();
    let (vm, va_deg, p_gen_mw, q_gen_mvar, branch_loading) = match &d.point {
        Some(p) => (
            p.vm.clone(),
            p.va.iter().map(|a| a.to_degrees()).collect(),
            p.p_gen.iter().map(|v| v * base).collect(),
            p.q_gen.iter().map(|v| v * base).collect(),
            net.branches()
                .iter()
                .zip(&p.branch_flow)
                .map(|(b, s)| s / b.s_max)
                .collect(),
        ),
        None => Default::default(),
    };
    Ok(PfReport {
        converged: d.point.is_some(),
        iterations: d.iterations,
        max_mismatch: d.max_mismatch,
        objectives: eval.objectives,
        constraints: d.report,
        vm,
        va_deg,
        p_gen_mw,
        q_gen_mvar,
        branch_loading,
    })
}

/// Before/after objective table for two control files.
pub fn compare_table(before: &PfReport, after: &PfReport) -> String {
    let mut s = format!(
        "{:<8} {:>14} {:>10} {:>10} {:>14} {:>10}\n",
        "", "f1", "f2", "f3", "f4", "converged"
    );
    for (name, r) in [("before", before), ("after", after)] {
        let f = &r.objectives;
        let _ = writeln!(
            s,
            "{:<8} {:>14.4} {:>10.6} {:>10.6} {:>14.4} {:>10}",
            name, f.f1, f.f2, f.f3, f.f4, r.converged
        );
    }
    s
}
