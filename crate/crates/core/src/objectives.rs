//! The four optimal power flow objectives, the inequality-constraint report,
//! and the binding of the power network to the evolutionary [`Problem`].

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::moea::{ControlVector, Evaluation, GeneSpace, Problem};
use crate::network::{ControlSettings, PowerNetwork};
use crate::powerflow::{
    compute_l_index, solve_with_admittance, LIndexFactors, ModelCache, OperatingPoint,
    PowerFlowOptions,
};

/// Violation assigned to a control assignment whose power flow failed.
pub const NONCONVERGENCE_VIOLATION: f64 = 1e6;
/// L-index reported when no operating point exists.
const COLLAPSED_L_INDEX: f64 = 1.0;

pub const OBJECTIVE_NAMES: [&str; 4] = ["f1", "f2", "f3", "f4"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    /// Generation cost ($/h).
    pub f1: f64,
    /// Sum of squared voltage deviations (p.u.²).
    pub f2: f64,
    /// Largest L-index over the load buses.
    pub f3: f64,
    /// Emissions (lb/h).
    pub f4: f64,
}

impl ObjectiveVector {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.f1, self.f2, self.f3, self.f4]
    }

    pub fn from_slice(f: &[f64]) -> Self {
        Self {
            f1: f[0],
            f2: f[1],
            f3: f[2],
            f4: f[3],
        }
    }
}

/// Normalised bound excesses per constraint family.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub generator_p: f64,
    pub generator_q: f64,
    pub bus_voltage: f64,
    pub branch_loading: f64,
    pub total: f64,
    pub converged: bool,
    pub feasible: bool,
}

impl ConstraintReport {
    /// Report for a control assignment without a power-flow solution.
    pub fn nonconverged() -> Self {
        Self {
            total: NONCONVERGENCE_VIOLATION,
            converged: false,
            feasible: false,
            ..Default::default()
        }
    }
}

/// `max(0, q − hi, lo − q)` scaled by the width of `[lo, hi]`.
fn bound_excess(q: f64, lo: f64, hi: f64) -> f64 {
    let excess = (q - hi).max(lo - q).max(0.0);
    if excess == 0.0 {
        return 0.0;
    }
    let span = hi - lo;
    excess / if span > 0.0 { span } else { 1.0 }
}

/// Σ α·P² + β·P + γ over the generators, `p_gen` in p.u.
pub fn eval_cost(net: &PowerNetwork, p_gen: &[f64]) -> f64 {
    let base = net.base_mva();
    net.generators()
        .iter()
        .zip(p_gen)
        .map(|(g, &p)| g.cost.eval(p * base))
        .sum()
}

/// Σ a·P² + b·P + c over the generators, `p_gen` in p.u.
pub fn eval_emissions(net: &PowerNetwork, p_gen: &[f64]) -> f64 {
    let base = net.base_mva();
    net.generators()
        .iter()
        .zip(p_gen)
        .map(|(g, &p)| g.emission.eval(p * base))
        .sum()
}

/// Σ (U_i − U_ref,i)² over every bus.
pub fn eval_voltage_deviation(net: &PowerNetwork, vm: &[f64]) -> f64 {
    net.buses()
        .iter()
        .zip(vm)
        .map(|(b, &u)| (u - b.u_ref) * (u - b.u_ref))
        .sum()
}

/// Checks the quantities the power flow determines: every generator's P and
/// Q, every bus voltage and every branch loading.
pub fn eval_constraints(net: &PowerNetwork, point: Option<&OperatingPoint>) -> ConstraintReport {
    let Some(point) = point else {
        return ConstraintReport::nonconverged();
    };
    let gens = net.generators();
    let generator_p = gens
        .iter()
        .zip(&point.p_gen)
        .map(|(g, &p)| bound_excess(p, g.p_min, g.p_max))
        .sum::<f64>();
    let generator_q = gens
        .iter()
        .zip(&point.q_gen_required)
        .map(|(g, &q)| bound_excess(q, g.q_min, g.q_max))
        .sum::<f64>();
    let bus_voltage = net
        .buses()
        .iter()
        .zip(&point.vm)
        .map(|(b, &u)| bound_excess(u, b.v_min, b.v_max))
        .sum::<f64>();
    let branch_loading = net
        .branches()
        .iter()
        .zip(&point.branch_flow)
        .map(|(br, &s)| bound_excess(s, 0.0, br.s_max))
        .sum::<f64>();
    let total = generator_p + generator_q + bus_voltage + branch_loading;
    ConstraintReport {
        generator_p,
        generator_q,
        bus_voltage,
        branch_loading,
        total,
        converged: true,
        feasible: total == 0.0,
    }
}

/// Objectives of a solved operating point.
pub fn objectives_at(
    net: &PowerNetwork,
    factors: &LIndexFactors,
    point: &OperatingPoint,
) -> ObjectiveVector {
    ObjectiveVector {
        f1: eval_cost(net, &point.p_gen),
        f2: eval_voltage_deviation(net, &point.vm),
        f3: compute_l_index(factors, point).max,
        f4: eval_emissions(net, &point.p_gen),
    }
}

/// Objectives used for ranking when no operating point exists: dispatch
/// from the controls with a lossless slack balance, set points at generator
/// buses and 1 p.u. elsewhere, and an L-index at collapse.
fn placeholder_objectives(net: &PowerNetwork, controls: &ControlSettings) -> ObjectiveVector {
    let mut p_gen = vec![0.0; net.generators().len()];
    for (g, &p) in net.dispatchable_generators().zip(&controls.p_gen_pu) {
        p_gen[g] = p;
    }
    let dispatched: f64 = controls.p_gen_pu.iter().sum();
    p_gen[net.slack_generator()] = net.total_load().0 - dispatched;
    let mut vm = vec![1.0; net.bus_count()];
    for (g, &pos) in net.generator_positions().iter().enumerate() {
        vm[pos] = controls.v_gen_pu[g];
    }
    ObjectiveVector {
        f1: eval_cost(net, &p_gen),
        f2: eval_voltage_deviation(net, &vm),
        f3: COLLAPSED_L_INDEX,
        f4: eval_emissions(net, &p_gen),
    }
}

/// Problem-specific payload of an evaluated OPF individual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpfDetail {
    pub report: ConstraintReport,
    pub iterations: usize,
    pub max_mismatch: f64,
    /// Present whenever the power flow converged.
    pub point: Option<OperatingPoint>,
}

/// Full result of [`evaluate_individual`].
#[derive(Debug, Clone, PartialEq)]
pub struct OpfEvaluation {
    pub objectives: ObjectiveVector,
    pub detail: OpfDetail,
}

/// Maps between the flat hybrid genome and named OPF controls.
///
/// Continuous genes: P of each non-slack generator, then U of every
/// generator. Discrete genes: each adjustable tap, then each compensator.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlLayout {
    n_p: usize,
    n_v: usize,
    n_tap: usize,
    space: GeneSpace,
}

impl ControlLayout {
    pub fn new(net: &PowerNetwork) -> Self {
        let mut continuous: Vec<(f64, f64)> = net
            .dispatchable_generators()
            .map(|g| (net.generators()[g].p_min, net.generators()[g].p_max))
            .collect();
        let n_p = continuous.len();
        continuous.extend(net.generator_positions().iter().map(|&b| {
            let bus = &net.buses()[b];
            (bus.v_min, bus.v_max)
        }));
        let mut levels: Vec<usize> = net
            .tap_branches()
            .iter()
            .map(|&k| net.branches()[k].tap.as_ref().unwrap().levels())
            .collect();
        let n_tap = levels.len();
        levels.extend(net.shunts().iter().map(|s| s.levels()));
        Self {
            n_p,
            n_v: net.generators().len(),
            n_tap,
            space: GeneSpace { continuous, levels },
        }
    }

    pub fn space(&self) -> &GeneSpace {
        &self.space
    }

    pub fn decode(&self, x: &ControlVector) -> ControlSettings {
        ControlSettings {
            p_gen_pu: x.continuous[..self.n_p].to_vec(),
            v_gen_pu: x.continuous[self.n_p..self.n_p + self.n_v].to_vec(),
            tap_index: x.discrete[..self.n_tap].to_vec(),
            shunt_index: x.discrete[self.n_tap..].to_vec(),
        }
    }

    pub fn encode(&self, c: &ControlSettings) -> ControlVector {
        let mut continuous = c.p_gen_pu.clone();
        continuous.extend_from_slice(&c.v_gen_pu);
        let mut discrete = c.tap_index.clone();
        discrete.extend_from_slice(&c.shunt_index);
        ControlVector {
            continuous,
            discrete,
        }
    }
}

/// The four-objective OPF as an evolutionary problem over one network.
#[derive(Debug)]
pub struct OpfProblem<'a> {
    net: &'a PowerNetwork,
    layout: ControlLayout,
    options: PowerFlowOptions,
    cache: ModelCache,
}

impl<'a> OpfProblem<'a> {
    pub fn new(net: &'a PowerNetwork) -> Self {
        Self::with_options(net, PowerFlowOptions::default())
    }

    pub fn with_options(net: &'a PowerNetwork, options: PowerFlowOptions) -> Self {
        Self {
            net,
            layout: ControlLayout::new(net),
            options,
            cache: ModelCache::default(),
        }
    }

    pub fn network(&self) -> &PowerNetwork {
        self.net
    }

    pub fn layout(&self) -> &ControlLayout {
        &self.layout
    }

    /// Solves and scores one control assignment. Physical failures land in
    /// the constraint report; only malformed controls return `Err`.
    pub fn evaluate_settings(&self, controls: &ControlSettings) -> Result<OpfEvaluation> {
        self.net.check_controls(controls)?;
        let model = self.cache.get(self.net, controls)?;
        let pf = solve_with_admittance(
            self.net,
            &model.admittance,
            &model.settings,
            controls,
            &self.options,
        );
        let (objectives, report, point) = match (pf.point, &model.l_factors) {
            (Some(point), Ok(factors)) => {
                let objectives = objectives_at(self.net, factors, &point);
                let report = eval_constraints(self.net, Some(&point));
                (objectives, report, Some(point))
            }
            // Without L-index factors the point cannot be scored; treat it
            // like a failed solve.
            (point, _) => (
                placeholder_objectives(self.net, controls),
                ConstraintReport::nonconverged(),
                point,
            ),
        };
        Ok(OpfEvaluation {
            objectives,
            detail: OpfDetail {
                report,
                iterations: pf.iterations,
                max_mismatch: pf.max_mismatch,
                point,
            },
        })
    }
}

impl Problem for OpfProblem<'_> {
    type Detail = OpfDetail;

    fn gene_space(&self) -> &GeneSpace {
        self.layout.space()
    }

    fn num_objectives(&self) -> usize {
        4
    }

    fn evaluate(&self, x: &ControlVector) -> Evaluation<OpfDetail> {
        let controls = self.layout.decode(x);
        let eval = self
            .evaluate_settings(&controls)
            .expect("genome decoded from the gene space is always valid");
        Evaluation {
            objectives: eval.objectives.to_vec(),
            violation: eval.detail.report.total,
            feasible: eval.detail.report.feasible,
            detail: eval.detail,
        }
    }
}

/// One-shot evaluation of a control assignment.
pub fn evaluate_individual(
    net: &PowerNetwork,
    controls: &ControlSettings,
) -> Result<OpfEvaluation> {
    OpfProblem::new(net).evaluate_settings(controls)
}
