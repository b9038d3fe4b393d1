//! Power network data model, case-file I/O and bus admittance matrix.
//!
//! Electrical quantities are held in per-unit on the case's `base_mva`.
//! Case files carry MW/MVAr and are converted on load and save.

use std::collections::{HashMap, VecDeque};
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when checking that a range is a whole number of steps.
const GRID_TOLERANCE: f64 = 1e-6;
/// Absolute slack allowed when checking a tap ratio against its bounds.
const BOUND_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Slack,
    /// Voltage-controlled generator bus.
    Pv,
    /// Load bus with fixed injections.
    Pq,
}

impl BusKind {
    pub fn is_generator(self) -> bool {
        matches!(self, BusKind::Slack | BusKind::Pv)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: usize,
    pub kind: BusKind,
    pub v_min: f64,
    pub v_max: f64,
    /// Reference magnitude for the voltage deviation objective.
    pub u_ref: f64,
    pub p_load: f64,
    pub q_load: f64,
}

/// Quadratic curve `c2·P² + c1·P + c0` with `P` in MW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostCurve {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl CostCurve {
    pub fn eval(&self, p_mw: f64) -> f64 {
        self.alpha * p_mw * p_mw + self.beta * p_mw + self.gamma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionCurve {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl EmissionCurve {
    pub fn eval(&self, p_mw: f64) -> f64 {
        self.a * p_mw * p_mw + self.b * p_mw + self.c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub cost: CostCurve,
    pub emission: EmissionCurve,
}

/// Discrete grid `t_min, t_min + step, …, t_max` of an adjustable transformer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TapSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub step: f64,
}

impl TapSpec {
    pub fn levels(&self) -> usize {
        grid_levels(self.t_min, self.t_max, self.step)
    }

    pub fn ratio(&self, index: usize) -> f64 {
        self.t_min + index as f64 * self.step
    }

    pub fn nearest_index(&self, ratio: f64) -> usize {
        nearest_level(self.t_min, self.step, self.levels(), ratio)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    /// Total line-charging susceptance.
    pub b_sh: f64,
    pub s_max: f64,
    pub tap: Option<TapSpec>,
}

/// Switchable reactive compensation, modelled as a shunt susceptance whose
/// reactive injection at 1 p.u. voltage is the grid value.
#[derive(Debug, Clone, PartialEq)]
pub struct ShuntCompensator {
    pub bus: usize,
    pub q_min: f64,
    pub q_max: f64,
    pub step: f64,
}

impl ShuntCompensator {
    pub fn levels(&self) -> usize {
        grid_levels(self.q_min, self.q_max, self.step)
    }

    pub fn value(&self, index: usize) -> f64 {
        self.q_min + index as f64 * self.step
    }

    pub fn nearest_index(&self, q: f64) -> usize {
        nearest_level(self.q_min, self.step, self.levels(), q)
    }
}

fn grid_levels(lo: f64, hi: f64, step: f64) -> usize {
    ((hi - lo) / step).round() as usize + 1
}

fn nearest_level(lo: f64, step: f64, levels: usize, value: f64) -> usize {
    let raw = ((value - lo) / step).round();
    raw.clamp(0.0, (levels - 1) as f64) as usize
}

fn is_whole_grid(lo: f64, hi: f64, step: f64) -> bool {
    let steps = (hi - lo) / step;
    (steps - steps.round()).abs() <= GRID_TOLERANCE * steps.abs().max(1.0)
}

/// A validated network. Construct with [`PowerNetwork::new`] or [`load_case`].
#[derive(Debug, Clone)]
pub struct PowerNetwork {
    base_mva: f64,
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    generators: Vec<Generator>,
    shunts: Vec<ShuntCompensator>,
    index: NetworkIndex,
}

/// Position lookups derived once at construction.
#[derive(Debug, Clone)]
struct NetworkIndex {
    bus_pos: HashMap<usize, usize>,
    slack: usize,
    slack_gen: usize,
    gen_pos: Vec<usize>,
    bus_gen: Vec<Option<usize>>,
    branch_ends: Vec<(usize, usize)>,
    shunt_pos: Vec<usize>,
    tap_branches: Vec<usize>,
    load_buses: Vec<usize>,
    gen_buses: Vec<usize>,
}

impl PowerNetwork {
    pub fn new(
        base_mva: f64,
        buses: Vec<Bus>,
        branches: Vec<Branch>,
        generators: Vec<Generator>,
        shunts: Vec<ShuntCompensator>,
    ) -> Result<Self> {
        let index = validate(base_mva, &buses, &branches, &generators, &shunts)?;
        Ok(Self {
            base_mva,
            buses,
            branches,
            generators,
            shunts,
            index,
        })
    }

    pub fn base_mva(&self) -> f64 {
        self.base_mva
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn shunts(&self) -> &[ShuntCompensator] {
        &self.shunts
    }

    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    /// Position of a bus id in [`Self::buses`].
    pub fn bus_position(&self, id: usize) -> Option<usize> {
        self.index.bus_pos.get(&id).copied()
    }

    pub fn slack_position(&self) -> usize {
        self.index.slack
    }

    /// Index of the generator at the slack bus.
    pub fn slack_generator(&self) -> usize {
        self.index.slack_gen
    }

    /// Bus position of every generator.
    pub fn generator_positions(&self) -> &[usize] {
        &self.index.gen_pos
    }

    /// Generator index at each bus position, if any.
    pub fn generator_at(&self, bus_pos: usize) -> Option<usize> {
        self.index.bus_gen[bus_pos]
    }

    /// `(from, to)` bus positions of every branch.
    pub fn branch_ends(&self) -> &[(usize, usize)] {
        &self.index.branch_ends
    }

    pub fn shunt_positions(&self) -> &[usize] {
        &self.index.shunt_pos
    }

    /// Indices of branches carrying an adjustable tap, in branch order.
    pub fn tap_branches(&self) -> &[usize] {
        &self.index.tap_branches
    }

    /// Bus positions of load (PQ) buses in bus order.
    pub fn load_buses(&self) -> &[usize] {
        &self.index.load_buses
    }

    /// Bus positions of slack and PV buses in bus order.
    pub fn generator_buses(&self) -> &[usize] {
        &self.index.gen_buses
    }

    /// Generators whose active output is a control (every one but the slack).
    pub fn dispatchable_generators(&self) -> impl Iterator<Item = usize> + '_ {
        let slack = self.index.slack_gen;
        (0..self.generators.len()).filter(move |&g| g != slack)
    }

    /// Generators with a nonzero active-power range.
    pub fn active_generator_count(&self) -> usize {
        self.generators.iter().filter(|g| g.p_max > g.p_min).count()
    }

    pub fn total_load(&self) -> (f64, f64) {
        self.buses
            .iter()
            .fold((0.0, 0.0), |(p, q), b| (p + b.p_load, q + b.q_load))
    }

    /// Default operating controls: dispatchable units at the middle of their
    /// range, generator voltages at the bus reference, taps nearest 1.0 and
    /// compensators nearest zero injection.
    pub fn nominal_controls(&self) -> ControlSettings {
        let p_gen_pu = self
            .dispatchable_generators()
            .map(|g| {
                let gen = &self.generators[g];
                gen.p_min + 0.5 * (gen.p_max - gen.p_min)
            })
            .collect();
        let v_gen_pu = self
            .index
            .gen_pos
            .iter()
            .map(|&b| {
                let bus = &self.buses[b];
                bus.u_ref.clamp(bus.v_min, bus.v_max)
            })
            .collect();
        let tap_index = self
            .index
            .tap_branches
            .iter()
            .map(|&k| self.branches[k].tap.as_ref().unwrap().nearest_index(1.0))
            .collect();
        let shunt_index = self.shunts.iter().map(|s| s.nearest_index(0.0)).collect();
        ControlSettings {
            p_gen_pu,
            v_gen_pu,
            tap_index,
            shunt_index,
        }
    }

    /// Checks dimensions, continuous bounds and grid membership of `controls`.
    pub fn check_controls(&self, controls: &ControlSettings) -> Result<()> {
        let n_disp = self.generators.len() - 1;
        let expect = |name: &str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(Error::Controls(format!(
                    "{name} has {got} entries, expected {want}"
                )))
            }
        };
        expect("p_gen_pu", controls.p_gen_pu.len(), n_disp)?;
        expect("v_gen_pu", controls.v_gen_pu.len(), self.generators.len())?;
        expect(
            "tap_index",
            controls.tap_index.len(),
            self.index.tap_branches.len(),
        )?;
        expect("shunt_index", controls.shunt_index.len(), self.shunts.len())?;

        for (g, &p) in self.dispatchable_generators().zip(&controls.p_gen_pu) {
            let gen = &self.generators[g];
            if !(p >= gen.p_min - BOUND_TOLERANCE && p <= gen.p_max + BOUND_TOLERANCE) {
                return Err(Error::Controls(format!(
                    "generator at bus {} output {p} outside [{}, {}]",
                    gen.bus, gen.p_min, gen.p_max
                )));
            }
        }
        for (g, &v) in controls.v_gen_pu.iter().enumerate() {
            let bus = &self.buses[self.index.gen_pos[g]];
            if !(v >= bus.v_min - BOUND_TOLERANCE && v <= bus.v_max + BOUND_TOLERANCE) {
                return Err(Error::Controls(format!(
                    "voltage set point {v} at bus {} outside [{}, {}]",
                    bus.id, bus.v_min, bus.v_max
                )));
            }
        }
        for (&k, &i) in self.index.tap_branches.iter().zip(&controls.tap_index) {
            let tap = self.branches[k].tap.as_ref().unwrap();
            if i >= tap.levels() {
                return Err(Error::Controls(format!(
                    "tap index {i} on branch {}-{} exceeds grid of {} levels",
                    self.branches[k].from,
                    self.branches[k].to,
                    tap.levels()
                )));
            }
        }
        for (s, &i) in self.shunts.iter().zip(&controls.shunt_index) {
            if i >= s.levels() {
                return Err(Error::Controls(format!(
                    "shunt index {i} at bus {} exceeds grid of {} levels",
                    s.bus,
                    s.levels()
                )));
            }
        }
        Ok(())
    }

    /// Tap ratios and compensator injections selected by `controls`.
    pub fn device_settings(&self, controls: &ControlSettings) -> DeviceSettings {
        let tap_ratio = self
            .index
            .tap_branches
            .iter()
            .zip(&controls.tap_index)
            .map(|(&k, &i)| self.branches[k].tap.as_ref().unwrap().ratio(i))
            .collect();
        let shunt_q = self
            .shunts
            .iter()
            .zip(&controls.shunt_index)
            .map(|(s, &i)| s.value(i))
            .collect();
        DeviceSettings { tap_ratio, shunt_q }
    }

    /// Same network with `keep` deciding which branches remain.
    pub fn with_branches(&self, keep: impl Fn(usize, &Branch) -> bool) -> Result<Self> {
        let branches = self
            .branches
            .iter()
            .enumerate()
            .filter(|(k, b)| keep(*k, b))
            .map(|(_, b)| b.clone())
            .collect();
        Self::new(
            self.base_mva,
            self.buses.clone(),
            branches,
            self.generators.clone(),
            self.shunts.clone(),
        )
    }
}

/// Control assignment of the optimal power flow, as stored in files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSettings {
    /// Active output of every generator except the slack, in generator order.
    pub p_gen_pu: Vec<f64>,
    /// Voltage set point of every generator.
    pub v_gen_pu: Vec<f64>,
    /// Grid index per adjustable transformer, in branch order.
    pub tap_index: Vec<usize>,
    /// Grid index per compensator.
    pub shunt_index: Vec<usize>,
}

/// Physical values of the discrete devices.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSettings {
    pub tap_ratio: Vec<f64>,
    pub shunt_q: Vec<f64>,
}

impl DeviceSettings {
    /// All taps nominal, all compensators off.
    pub fn nominal(net: &PowerNetwork) -> Self {
        Self {
            tap_ratio: vec![1.0; net.tap_branches().len()],
            shunt_q: vec![0.0; net.shunts().len()],
        }
    }
}

fn validate(
    base_mva: f64,
    buses: &[Bus],
    branches: &[Branch],
    generators: &[Generator],
    shunts: &[ShuntCompensator],
) -> Result<NetworkIndex> {
    let fail = |msg: String| Err(Error::Validation(msg));
    if !(base_mva > 0.0) {
        return fail(format!("base_mva must be positive, got {base_mva}"));
    }
    if buses.is_empty() {
        return fail("network has no buses".into());
    }

    let mut bus_pos = HashMap::with_capacity(buses.len());
    let mut slack: Option<usize> = None;
    for (pos, bus) in buses.iter().enumerate() {
        if bus_pos.insert(bus.id, pos).is_some() {
            return fail(format!("duplicate bus id {}", bus.id));
        }
        if !(bus.v_min > 0.0 && bus.v_min < bus.v_max) {
            return fail(format!(
                "bus {} voltage bounds must satisfy 0 < v_min < v_max, got [{}, {}]",
                bus.id, bus.v_min, bus.v_max
            ));
        }
        if !(bus.u_ref > 0.0) {
            return fail(format!("bus {} reference voltage must be positive", bus.id));
        }
        if !(bus.p_load >= 0.0) || !bus.q_load.is_finite() {
            return fail(format!(
                "bus {} has a negative or non-finite active load",
                bus.id
            ));
        }
        if bus.kind == BusKind::Slack {
            if let Some(prev) = slack {
                return fail(format!(
                    "more than one slack bus (buses {} and {})",
                    buses[prev].id, bus.id
                ));
            }
            slack = Some(pos);
        }
    }
    let Some(slack) = slack else {
        return fail("network has no slack bus".into());
    };
    let resolve = |id: usize, what: &str| -> Result<usize> {
        bus_pos
            .get(&id)
            .copied()
            .ok_or_else(|| Error::Validation(format!("{what} refers to unknown bus {id}")))
    };

    let mut bus_gen = vec![None; buses.len()];
    let mut gen_pos = Vec::with_capacity(generators.len());
    for (g, gen) in generators.iter().enumerate() {
        let pos = resolve(gen.bus, "generator")?;
        if !buses[pos].kind.is_generator() {
            return fail(format!(
                "generator at bus {} which is not a slack or pv bus",
                gen.bus
            ));
        }
        if bus_gen[pos].replace(g).is_some() {
            return fail(format!("more than one generator at bus {}", gen.bus));
        }
        if !(gen.p_min <= gen.p_max) {
            return fail(format!("generator at bus {} has p_min > p_max", gen.bus));
        }
        if !(gen.q_min <= gen.q_max) {
            return fail(format!("generator at bus {} has q_min > q_max", gen.bus));
        }
        if !(gen.cost.alpha >= 0.0) {
            return fail(format!(
                "generator at bus {} has a negative quadratic cost",
                gen.bus
            ));
        }
        gen_pos.push(pos);
    }
    for (pos, bus) in buses.iter().enumerate() {
        if bus.kind.is_generator() && bus_gen[pos].is_none() {
            return fail(format!("{:?} bus {} has no generator", bus.kind, bus.id));
        }
    }
    let slack_gen = bus_gen[slack].expect("checked above");

    let mut branch_ends = Vec::with_capacity(branches.len());
    let mut tap_branches = Vec::new();
    for (k, br) in branches.iter().enumerate() {
        let f = resolve(br.from, "branch")?;
        let t = resolve(br.to, "branch")?;
        if f == t {
            return fail(format!(
                "branch {}-{} connects a bus to itself",
                br.from, br.to
            ));
        }
        if br.x == 0.0 || !br.x.is_finite() {
            return fail(format!("branch {}-{} has zero reactance", br.from, br.to));
        }
        if !(br.s_max > 0.0) {
            return fail(format!(
                "branch {}-{} rating must be positive",
                br.from, br.to
            ));
        }
        if let Some(tap) = &br.tap {
            if !(tap.t_min < tap.t_max) || !(tap.step > 0.0) {
                return fail(format!(
                    "branch {}-{} tap range must satisfy t_min < t_max and step > 0",
                    br.from, br.to
                ));
            }
            if !is_whole_grid(tap.t_min, tap.t_max, tap.step) {
                return fail(format!(
                    "branch {}-{} tap range [{}, {}] is not a whole number of {} steps",
                    br.from, br.to, tap.t_min, tap.t_max, tap.step
                ));
            }
            tap_branches.push(k);
        }
        branch_ends.push((f, t));
    }

    let mut shunt_pos = Vec::with_capacity(shunts.len());
    for sh in shunts {
        shunt_pos.push(resolve(sh.bus, "shunt")?);
        if !(sh.q_min <= sh.q_max) || !(sh.step > 0.0) {
            return fail(format!(
                "shunt at bus {} must satisfy q_min <= q_max and step > 0",
                sh.bus
            ));
        }
        if !is_whole_grid(sh.q_min, sh.q_max, sh.step) {
            return fail(format!(
                "shunt at bus {} range is not a whole number of steps",
                sh.bus
            ));
        }
    }

    // Connectivity from the slack bus.
    let mut adj = vec![Vec::new(); buses.len()];
    for &(f, t) in &branch_ends {
        adj[f].push(t);
        adj[t].push(f);
    }
    let mut seen = vec![false; buses.len()];
    let mut queue = VecDeque::from([slack]);
    seen[slack] = true;
    while let Some(b) = queue.pop_front() {
        for &n in &adj[b] {
            if !seen[n] {
                seen[n] = true;
                queue.push_back(n);
            }
        }
    }
    if let Some(pos) = seen.iter().position(|s| !s) {
        return fail(format!(
            "network is not connected; bus {} is unreachable from the slack",
            buses[pos].id
        ));
    }

    let load_buses = (0..buses.len())
        .filter(|&b| buses[b].kind == BusKind::Pq)
        .collect();
    let gen_buses = (0..buses.len())
        .filter(|&b| buses[b].kind.is_generator())
        .collect();

    Ok(NetworkIndex {
        bus_pos,
        slack,
        slack_gen,
        gen_pos,
        bus_gen,
        branch_ends,
        shunt_pos,
        tap_branches,
        load_buses,
        gen_buses,
    })
}

// ---------------------------------------------------------------------------
// Case file schema (MW / MVAr units)

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub base_mva: f64,
    pub buses: Vec<BusRecord>,
    pub branches: Vec<BranchRecord>,
    pub generators: Vec<GeneratorRecord>,
    #[serde(default)]
    pub shunts: Vec<ShuntRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusRecord {
    pub id: usize,
    pub kind: BusKind,
    pub v_min: f64,
    pub v_max: f64,
    #[serde(default = "default_u_ref")]
    pub u_ref: f64,
    pub p_load_mw: f64,
    pub q_load_mvar: f64,
}

fn default_u_ref() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchRecord {
    pub from: usize,
    pub to: usize,
    pub r_pu: f64,
    pub x_pu: f64,
    pub b_pu: f64,
    pub s_max_mva: f64,
    pub tap: Option<TapSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorRecord {
    pub bus: usize,
    pub p_min_mw: f64,
    pub p_max_mw: f64,
    pub q_min_mvar: f64,
    pub q_max_mvar: f64,
    pub cost: CostCurve,
    pub emission: EmissionCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShuntRecord {
    pub bus: usize,
    pub q_min_mvar: f64,
    pub q_max_mvar: f64,
    pub step_mvar: f64,
}

impl CaseFile {
    pub fn into_network(self) -> Result<PowerNetwork> {
        let base = self.base_mva;
        if !(base > 0.0) {
            return Err(Error::Validation(format!(
                "base_mva must be positive, got {base}"
            )));
        }
        let buses = self
            .buses
            .into_iter()
            .map(|b| Bus {
                id: b.id,
                kind: b.kind,
                v_min: b.v_min,
                v_max: b.v_max,
                u_ref: b.u_ref,
                p_load: b.p_load_mw / base,
                q_load: b.q_load_mvar / base,
            })
            .collect();
        let branches = self
            .branches
            .into_iter()
            .map(|b| Branch {
                from: b.from,
                to: b.to,
                r: b.r_pu,
                x: b.x_pu,
                b_sh: b.b_pu,
                s_max: b.s_max_mva / base,
                tap: b.tap,
            })
            .collect();
        let generators = self
            .generators
            .into_iter()
            .map(|g| Generator {
                bus: g.bus,
                p_min: g.p_min_mw / base,
                p_max: g.p_max_mw / base,
                q_min: g.q_min_mvar / base,
                q_max: g.q_max_mvar / base,
                cost: g.cost,
                emission: g.emission,
            })
            .collect();
        let shunts = self
            .shunts
            .into_iter()
            .map(|s| ShuntCompensator {
                bus: s.bus,
                q_min: s.q_min_mvar / base,
                q_max: s.q_max_mvar / base,
                step: s.step_mvar / base,
            })
            .collect();
        PowerNetwork::new(base, buses, branches, generators, shunts)
    }

    pub fn from_network(net: &PowerNetwork) -> Self {
        let base = net.base_mva;
        Self {
            base_mva: base,
            buses: net
                .buses
                .iter()
                .map(|b| BusRecord {
                    id: b.id,
                    kind: b.kind,
                    v_min: b.v_min,
                    v_max: b.v_max,
                    u_ref: b.u_ref,
                    p_load_mw: b.p_load * base,
                    q_load_mvar: b.q_load * base,
                })
                .collect(),
            branches: net
                .branches
                .iter()
                .map(|b| BranchRecord {
                    from: b.from,
                    to: b.to,
                    r_pu: b.r,
                    x_pu: b.x,
                    b_pu: b.b_sh,
                    s_max_mva: b.s_max * base,
                    tap: b.tap,
                })
                .collect(),
            generators: net
                .generators
                .iter()
                .map(|g| GeneratorRecord {
                    bus: g.bus,
                    p_min_mw: g.p_min * base,
                    p_max_mw: g.p_max * base,
                    q_min_mvar: g.q_min * base,
                    q_max_mvar: g.q_max * base,
                    cost: g.cost,
                    emission: g.emission,
                })
                .collect(),
            shunts: net
                .shunts
                .iter()
                .map(|s| ShuntRecord {
                    bus: s.bus,
                    q_min_mvar: s.q_min * base,
                    q_max_mvar: s.q_max * base,
                    step_mvar: s.step * base,
                })
                .collect(),
        }
    }
}

pub fn parse_case(text: &str) -> Result<PowerNetwork> {
    let file: CaseFile = serde_json::from_str(text)?;
    file.into_network()
}

pub fn load_case(path: impl AsRef<Path>) -> Result<PowerNetwork> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_case(&text)
}

pub fn save_case(net: &PowerNetwork, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(&CaseFile::from_network(net))?;
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

// ---------------------------------------------------------------------------
// Admittance matrix

/// Dense bus admittance matrix with its load/generator partition.
#[derive(Debug, Clone)]
pub struct AdmittanceMatrix {
    pub y: DMatrix<Complex64>,
    load_buses: Vec<usize>,
    gen_buses: Vec<usize>,
}

impl AdmittanceMatrix {
    pub fn size(&self) -> usize {
        self.y.nrows()
    }

    pub fn load_buses(&self) -> &[usize] {
        &self.load_buses
    }

    pub fn generator_buses(&self) -> &[usize] {
        &self.gen_buses
    }

    /// Load-by-load block.
    pub fn y_ll(&self) -> DMatrix<Complex64> {
        self.y
            .select_rows(&self.load_buses)
            .select_columns(&self.load_buses)
    }

    /// Load-by-generator block.
    pub fn y_lg(&self) -> DMatrix<Complex64> {
        self.y
            .select_rows(&self.load_buses)
            .select_columns(&self.gen_buses)
    }
}

/// Series and shunt terms of one branch's π model, tap on the from side.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BranchStamp {
    pub ff: Complex64,
    pub ft: Complex64,
    pub tf: Complex64,
    pub tt: Complex64,
}

impl BranchStamp {
    pub fn new(branch: &Branch, tap: f64) -> Self {
        let ys = Complex64::new(1.0, 0.0) / Complex64::new(branch.r, branch.x);
        let half_b = Complex64::new(0.0, branch.b_sh / 2.0);
        Self {
            ff: (ys + half_b) / (tap * tap),
            ft: -ys / tap,
            tf: -ys / tap,
            tt: ys + half_b,
        }
    }
}

pub(crate) fn branch_taps(net: &PowerNetwork, settings: &DeviceSettings) -> Result<Vec<f64>> {
    let mut taps = vec![1.0; net.branches.len()];
    if settings.tap_ratio.len() != net.index.tap_branches.len() {
        return Err(Error::Controls(format!(
            "{} tap ratios given for {} adjustable transformers",
            settings.tap_ratio.len(),
            net.index.tap_branches.len()
        )));
    }
    for (&k, &ratio) in net.index.tap_branches.iter().zip(&settings.tap_ratio) {
        let br = &net.branches[k];
        let spec = br.tap.as_ref().unwrap();
        if !(ratio >= spec.t_min - BOUND_TOLERANCE && ratio <= spec.t_max + BOUND_TOLERANCE) {
            return Err(Error::TapOutOfBounds {
                from: br.from,
                to: br.to,
                ratio,
                t_min: spec.t_min,
                t_max: spec.t_max,
            });
        }
        taps[k] = ratio;
    }
    Ok(taps)
}

/// Stamps every branch and compensator into the bus admittance matrix.
pub fn build_admittance(net: &PowerNetwork, settings: &DeviceSettings) -> Result<AdmittanceMatrix> {
    let taps = branch_taps(net, settings)?;
    if settings.shunt_q.len() != net.shunts.len() {
        return Err(Error::Controls(format!(
            "{} compensator values given for {} compensators",
            settings.shunt_q.len(),
            net.shunts.len()
        )));
    }
    let n = net.buses.len();
    let mut y = DMatrix::<Complex64>::zeros(n, n);
    for (k, br) in net.branches.iter().enumerate() {
        let (f, t) = net.index.branch_ends[k];
        let s = BranchStamp::new(br, taps[k]);
        y[(f, f)] += s.ff;
        y[(f, t)] += s.ft;
        y[(t, f)] += s.tf;
        y[(t, t)] += s.tt;
    }
    for (&pos, &q) in net.index.shunt_pos.iter().zip(&settings.shunt_q) {
        y[(pos, pos)] += Complex64::new(0.0, q);
    }
    Ok(AdmittanceMatrix {
        y,
        load_buses: net.index.load_buses.clone(),
        gen_buses: net.index.gen_buses.clone(),
    })
}

/// Load buses with no path to a generator bus through load buses.
pub(crate) fn isolated_load_islands(net: &PowerNetwork) -> Vec<usize> {
    let n = net.buses.len();
    let is_load = |b: usize| net.buses[b].kind == BusKind::Pq;
    let mut adj = vec![Vec::new(); n];
    for &(f, t) in &net.index.branch_ends {
        adj[f].push(t);
        adj[t].push(f);
    }
    let mut comp = vec![usize::MAX; n];
    for start in net.index.load_buses.iter().copied() {
        if comp[start] != usize::MAX {
            continue;
        }
        let mut members = vec![start];
        let mut touches_gen = false;
        comp[start] = start;
        let mut i = 0;
        while i < members.len() {
            let b = members[i];
            i += 1;
            for &nb in &adj[b] {
                if !is_load(nb) {
                    touches_gen = true;
                } else if comp[nb] == usize::MAX {
                    comp[nb] = start;
                    members.push(nb);
                }
            }
        }
        if !touches_gen {
            return members.into_iter().map(|b| net.buses[b].id).collect();
        }
    }
    Vec::new()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn two_bus_case(x: f64, p_load_mw: f64, q_load_mvar: f64) -> CaseFile {
        CaseFile {
            base_mva: 100.0,
            buses: vec![
                BusRecord {
                    id: 1,
                    kind: BusKind::Slack,
                    v_min: 0.9,
                    v_max: 1.1,
                    u_ref: 1.0,
                    p_load_mw: 0.0,
                    q_load_mvar: 0.0,
                },
                BusRecord {
                    id: 2,
                    kind: BusKind::Pq,
                    v_min: 0.9,
                    v_max: 1.1,
                    u_ref: 1.0,
                    p_load_mw,
                    q_load_mvar,
                },
            ],
            branches: vec![BranchRecord {
                from: 1,
                to: 2,
                r_pu: 0.0,
                x_pu: x,
                b_pu: 0.0,
                s_max_mva: 100.0,
                tap: None,
            }],
            generators: vec![GeneratorRecord {
                bus: 1,
                p_min_mw: 0.0,
                p_max_mw: 200.0,
                q_min_mvar: -100.0,
                q_max_mvar: 100.0,
                cost: CostCurve {
                    alpha: 0.0,
                    beta: 2.0,
                    gamma: 1.0,
                },
                emission: EmissionCurve {
                    a: 0.0,
                    b: 0.0,
                    c: 3.0,
                },
            }],
            shunts: vec![],
        }
    }

    #[test]
    fn minimal_two_bus_case() {
        let net = two_bus_case(0.1, 0.0, 0.0).into_network().unwrap();
        assert_eq!(net.bus_count(), 2);
        assert_eq!(net.branches().len(), 1);
        assert_eq!(net.load_buses(), &[1]);
        assert_eq!(net.slack_position(), 0);
    }

    #[test]
    fn two_slack_buses_rejected() {
        let mut case = two_bus_case(0.1, 0.0, 0.0);
        case.buses[1].kind = BusKind::Slack;
        let err = case.into_network().unwrap_err().to_string();
        assert!(err.contains("more than one slack"), "{err}");
    }

    #[test]
    fn tap_range_must_be_whole_steps() {
        let mut case = two_bus_case(0.1, 0.0, 0.0);
        case.branches[0].tap = Some(TapSpec {
            t_min: 0.9,
            t_max: 1.1,
            step: 0.013,
        });
        let err = case.into_network().unwrap_err().to_string();
        assert!(err.contains("whole number"), "{err}");

        let mut case = two_bus_case(0.1, 0.0, 0.0);
        case.branches[0].tap = Some(TapSpec {
            t_min: 0.9,
            t_max: 1.1,
            step: 0.0125,
        });
        let net = case.into_network().unwrap();
        assert_eq!(net.branches()[0].tap.unwrap().levels(), 17);
    }

    #[test]
    fn zero_reactance_and_disconnected_rejected() {
        let mut case = two_bus_case(0.0, 0.0, 0.0);
        assert!(case.clone().into_network().is_err());
        case.branches.clear();
        let err = case.into_network().unwrap_err().to_string();
        assert!(err.contains("not connected"), "{err}");
    }

    #[test]
    fn generator_must_sit_on_voltage_controlled_bus() {
        let mut case = two_bus_case(0.1, 0.0, 0.0);
        let mut extra = case.generators[0].clone();
        extra.bus = 2;
        case.generators.push(extra);
        assert!(case.into_network().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text =
            r#"{"base_mva": 100, "buses": [], "branches": [], "generators": [], "extra": 1}"#;
        assert!(matches!(parse_case(text), Err(Error::Parse(_))));
    }

    #[test]
    fn two_bus_admittance() {
        let net = two_bus_case(0.1, 0.0, 0.0).into_network().unwrap();
        let y = build_admittance(&net, &DeviceSettings::nominal(&net)).unwrap();
        let expect = [[-10.0, 10.0], [10.0, -10.0]];
        for i in 0..2 {
            for k in 0..2 {
                assert!((y.y[(i, k)] - Complex64::new(0.0, expect[i][k])).norm() < 1e-12);
            }
        }
        assert_eq!(y.y_ll().shape(), (1, 1));
        assert_eq!(y.y_lg().shape(), (1, 1));
    }

    #[test]
    fn nominal_tap_is_identity() {
        let plain = two_bus_case(0.1, 0.0, 0.0).into_network().unwrap();
        let mut case = two_bus_case(0.1, 0.0, 0.0);
        case.branches[0].tap = Some(TapSpec {
            t_min: 0.9,
            t_max: 1.1,
            step: 0.0125,
        });
        let tapped = case.into_network().unwrap();
        let y0 = build_admittance(&plain, &DeviceSettings::nominal(&plain)).unwrap();
        let y1 = build_admittance(&tapped, &DeviceSettings::nominal(&tapped)).unwrap();
        assert_eq!(y0.y, y1.y);

        let err = build_admittance(
            &tapped,
            &DeviceSettings {
                tap_ratio: vec![1.2],
                shunt_q: vec![],
            },
        );
        assert!(matches!(err, Err(Error::TapOutOfBounds { .. })));
    }

    #[test]
    fn nominal_controls_are_valid() {
        let mut case = two_bus_case(0.1, 0.0, 0.0);
        case.branches[0].tap = Some(TapSpec {
            t_min: 0.9,
            t_max: 1.1,
            step: 0.0125,
        });
        case.shunts.push(ShuntRecord {
            bus: 2,
            q_min_mvar: 0.0,
            q_max_mvar: 50.0,
            step_mvar: 1.0,
        });
        let net = case.into_network().unwrap();
        let c = net.nominal_controls();
        net.check_controls(&c).unwrap();
        assert_eq!(c.tap_index, vec![8]);
        assert_eq!(c.shunt_index, vec![0]);
        let d = net.device_settings(&c);
        assert!((d.tap_ratio[0] - 1.0).abs() < 1e-12);

        let mut bad = c.clone();
        bad.tap_index[0] = 17;
        assert!(net.check_controls(&bad).is_err());
    }
}
