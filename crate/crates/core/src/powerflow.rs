//! AC power flow by full Newton-Raphson in polar form, branch loadings and
//! the L-index voltage stability indicator.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{
    branch_taps, build_admittance, isolated_load_islands, AdmittanceMatrix, BranchStamp,
    ControlSettings, DeviceSettings, PowerNetwork,
};

const Q_LIMIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowOptions {
    /// Largest acceptable |ΔP|, |ΔQ| in p.u.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Convert PV buses to PQ when their generator hits a reactive limit.
    pub enforce_q_limits: bool,
}

impl Default for PowerFlowOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 30,
            enforce_q_limits: true,
        }
    }
}

/// Solved state of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    /// Voltage magnitude per bus (p.u.).
    pub vm: Vec<f64>,
    /// Voltage angle per bus (rad); the slack is 0.
    pub va: Vec<f64>,
    /// Active output per generator; the slack entry is the solved balance.
    pub p_gen: Vec<f64>,
    /// Reactive output per generator.
    pub q_gen: Vec<f64>,
    /// Reactive output each generator would need to hold its set point.
    /// Differs from `q_gen` only for units switched to PQ at a limit.
    pub q_gen_required: Vec<f64>,
    /// Apparent power per branch, the larger of the two ends (p.u.).
    pub branch_flow: Vec<f64>,
    /// Generators whose bus was switched from PV to PQ.
    pub switched: Vec<usize>,
}

impl OperatingPoint {
    pub fn voltages(&self) -> Vec<Complex64> {
        self.vm
            .iter()
            .zip(&self.va)
            .map(|(&m, &a)| Complex64::from_polar(m, a))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowResult {
    pub converged: bool,
    pub iterations: usize,
    pub max_mismatch: f64,
    /// Newton step failed on a singular Jacobian.
    pub singular: bool,
    pub point: Option<OperatingPoint>,
}

/// Per-end apparent power of one branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchFlow {
    pub s_from: Complex64,
    pub s_to: Complex64,
}

impl BranchFlow {
    pub fn loading(&self) -> f64 {
        self.s_from.norm().max(self.s_to.norm())
    }
}

/// Solves the network for `controls`, building the admittance matrix.
pub fn solve_power_flow(
    net: &PowerNetwork,
    controls: &ControlSettings,
    opts: &PowerFlowOptions,
) -> Result<PowerFlowResult> {
    net.check_controls(controls)?;
    let settings = net.device_settings(controls);
    let y = build_admittance(net, &settings)?;
    Ok(solve_with_admittance(net, &y, &settings, controls, opts))
}

/// Solves with a prebuilt admittance matrix matching `settings`.
pub fn solve_with_admittance(
    net: &PowerNetwork,
    y: &AdmittanceMatrix,
    settings: &DeviceSettings,
    controls: &ControlSettings,
    opts: &PowerFlowOptions,
) -> PowerFlowResult {
    let n = net.bus_count();
    let buses = net.buses();
    let gens = net.generators();
    let slack = net.slack_position();

    let mut vm = vec![1.0; n];
    let mut va = vec![0.0; n];
    for (g, &pos) in net.generator_positions().iter().enumerate() {
        vm[pos] = controls.v_gen_pu[g];
    }

    let mut p_spec: Vec<f64> = buses.iter().map(|b| -b.p_load).collect();
    let mut q_spec: Vec<f64> = buses.iter().map(|b| -b.q_load).collect();
    for (g, &p) in net.dispatchable_generators().zip(&controls.p_gen_pu) {
        p_spec[net.generator_positions()[g]] += p;
    }

    let mut is_pq: Vec<bool> = (0..n).map(|b| !buses[b].kind.is_generator()).collect();
    let mut q_required: Vec<Option<f64>> = vec![None; gens.len()];
    let mut switched = Vec::new();
    let mut iterations = 0;

    loop {
        let pvpq: Vec<usize> = (0..n).filter(|&b| b != slack).collect();
        let pq: Vec<usize> = (0..n).filter(|&b| is_pq[b]).collect();
        let step = newton(&y.y, &mut vm, &mut va, &p_spec, &q_spec, &pvpq, &pq, opts);
        iterations += step.iterations;
        if !step.converged {
            return PowerFlowResult {
                converged: false,
                iterations,
                max_mismatch: step.max_mismatch,
                singular: step.singular,
                point: None,
            };
        }
        if !opts.enforce_q_limits {
            break;
        }
        let injections = bus_injections(&y.y, &vm, &va);
        let mut any = false;
        for (g, gen) in gens.iter().enumerate() {
            let pos = net.generator_positions()[g];
            if pos == slack || is_pq[pos] {
                continue;
            }
            let q = injections[pos].im + buses[pos].q_load;
            let limit = if q > gen.q_max + Q_LIMIT_TOLERANCE {
                gen.q_max
            } else if q < gen.q_min - Q_LIMIT_TOLERANCE {
                gen.q_min
            } else {
                continue;
            };
            q_required[g] = Some(q);
            q_spec[pos] = limit - buses[pos].q_load;
            is_pq[pos] = true;
            switched.push(g);
            any = true;
        }
        if !any {
            break;
        }
    }

    let injections = bus_injections(&y.y, &vm, &va);
    let max_mismatch = max_mismatch(&injections, &p_spec, &q_spec, slack, &is_pq);
    let mut p_gen = vec![0.0; gens.len()];
    let mut q_gen = vec![0.0; gens.len()];
    for (g, &pos) in net.generator_positions().iter().enumerate() {
        p_gen[g] = if pos == slack {
            injections[pos].re + buses[pos].p_load
        } else {
            p_spec[pos] + buses[pos].p_load
        };
        q_gen[g] = if is_pq[pos] {
            q_spec[pos] + buses[pos].q_load
        } else {
            injections[pos].im + buses[pos].q_load
        };
    }
    let q_gen_required = q_gen
        .iter()
        .zip(&q_required)
        .map(|(&q, req)| req.unwrap_or(q))
        .collect();
    switched.sort_unstable();

    let mut point = OperatingPoint {
        vm,
        va,
        p_gen,
        q_gen,
        q_gen_required,
        branch_flow: Vec::new(),
        switched,
    };
    point.branch_flow = compute_branch_flows(net, settings, &point)
        .expect("settings validated with the admittance matrix")
        .iter()
        .map(BranchFlow::loading)
        .collect();

    PowerFlowResult {
        converged: true,
        iterations,
        max_mismatch,
        singular: false,
        point: Some(point),
    }
}

struct NewtonOutcome {
    converged: bool,
    singular: bool,
    iterations: usize,
    max_mismatch: f64,
}

/// Complex power injected at every bus, `S = V · conj(Y V)`.
fn bus_injections(y: &DMatrix<Complex64>, vm: &[f64], va: &[f64]) -> Vec<Complex64> {
    let v = DVector::from_iterator(
        vm.len(),
        vm.iter()
            .zip(va)
            .map(|(&m, &a)| Complex64::from_polar(m, a)),
    );
    let i = y * &v;
    v.iter().zip(i.iter()).map(|(v, i)| v * i.conj()).collect()
}

fn max_mismatch(
    injections: &[Complex64],
    p_spec: &[f64],
    q_spec: &[f64],
    slack: usize,
    is_pq: &[bool],
) -> f64 {
    let mut worst = 0.0f64;
    for (b, s) in injections.iter().enumerate() {
        if b == slack {
            continue;
        }
        worst = worst.max((s.re - p_spec[b]).abs());
        if is_pq[b] {
            worst = worst.max((s.im - q_spec[b]).abs());
        }
    }
    worst
}

#[allow(clippy::too_many_arguments)]
fn newton(
    y: &DMatrix<Complex64>,
    vm: &mut [f64],
    va: &mut [f64],
    p_spec: &[f64],
    q_spec: &[f64],
    pvpq: &[usize],
    pq: &[usize],
    opts: &PowerFlowOptions,
) -> NewtonOutcome {
    let n = vm.len();
    let n_a = pvpq.len();
    let dim = n_a + pq.len();
    let mut col_a = vec![usize::MAX; n];
    let mut col_m = vec![usize::MAX; n];
    for (k, &b) in pvpq.iter().enumerate() {
        col_a[b] = k;
    }
    for (k, &b) in pq.iter().enumerate() {
        col_m[b] = n_a + k;
    }

    let mut iterations = 0;
    loop {
        let v: Vec<Complex64> = vm
            .iter()
            .zip(va.iter())
            .map(|(&m, &a)| Complex64::from_polar(m, a))
            .collect();
        let current: Vec<Complex64> = (0..n)
            .map(|i| (0..n).map(|k| y[(i, k)] * v[k]).sum())
            .collect();

        let mut f = DVector::<f64>::zeros(dim);
        for (k, &b) in pvpq.iter().enumerate() {
            f[k] = (v[b] * current[b].conj()).re - p_spec[b];
        }
        for (k, &b) in pq.iter().enumerate() {
            f[n_a + k] = (v[b] * current[b].conj()).im - q_spec[b];
        }
        let worst = f.iter().fold(0.0f64, |w, x| w.max(x.abs()));
        if !worst.is_finite() {
            return NewtonOutcome {
                converged: false,
                singular: false,
                iterations,
                max_mismatch: f64::INFINITY,
            };
        }
        if worst <= opts.tolerance {
            return NewtonOutcome {
                converged: true,
                singular: false,
                iterations,
                max_mismatch: worst,
            };
        }
        if iterations >= opts.max_iterations {
            return NewtonOutcome {
                converged: false,
                singular: false,
                iterations,
                max_mismatch: worst,
            };
        }

        // Jacobian rows: ΔP at pvpq, ΔQ at pq; columns: angle at pvpq, |V| at pq.
        let mut jac = DMatrix::<f64>::zeros(dim, dim);
        let j = Complex64::new(0.0, 1.0);
        let rows = pvpq
            .iter()
            .map(|&b| (b, false))
            .chain(pq.iter().map(|&b| (b, true)));
        for (r, (i, reactive)) in rows.enumerate() {
            let vi = v[i];
            for k in 0..n {
                let yik = y[(i, k)];
                if yik == Complex64::new(0.0, 0.0) && i != k {
                    continue;
                }
                let vk_unit = v[k] / vm[k];
                let (ds_da, ds_dm) = if i == k {
                    (
                        j * vi * (current[i] - yik * vi).conj(),
                        vi * (yik * vk_unit).conj() + current[i].conj() * vk_unit,
                    )
                } else {
                    (-j * vi * (yik * v[k]).conj(), vi * (yik * vk_unit).conj())
                };
                let pick = |s: Complex64| if reactive { s.im } else { s.re };
                if col_a[k] != usize::MAX {
                    jac[(r, col_a[k])] = pick(ds_da);
                }
                if col_m[k] != usize::MAX {
                    jac[(r, col_m[k])] = pick(ds_dm);
                }
            }
        }

        let Some(dx) = jac.lu().solve(&(-f)) else {
            return NewtonOutcome {
                converged: false,
                singular: true,
                iterations,
                max_mismatch: worst,
            };
        };
        for (k, &b) in pvpq.iter().enumerate() {
            va[b] += dx[k];
        }
        for (k, &b) in pq.iter().enumerate() {
            vm[b] += dx[n_a + k];
        }
        iterations += 1;
    }
}

/// Complex power entering each branch at its two ends.
pub fn compute_branch_flows(
    net: &PowerNetwork,
    settings: &DeviceSettings,
    point: &OperatingPoint,
) -> Result<Vec<BranchFlow>> {
    let taps = branch_taps(net, settings)?;
    let v = point.voltages();
    Ok(net
        .branches()
        .iter()
        .zip(net.branch_ends())
        .zip(taps)
        .map(|((br, &(f, t)), tap)| {
            let s = BranchStamp::new(br, tap);
            let i_from = s.ff * v[f] + s.ft * v[t];
            let i_to = s.tf * v[f] + s.tt * v[t];
            BranchFlow {
                s_from: v[f] * i_from.conj(),
                s_to: v[t] * i_to.conj(),
            }
        })
        .collect())
}

/// The matrix `F = −Y_LL⁻¹ Y_LG` used by the L-index.
#[derive(Debug, Clone)]
pub struct LIndexFactors {
    f: DMatrix<Complex64>,
    load_buses: Vec<usize>,
    gen_buses: Vec<usize>,
}

impl LIndexFactors {
    pub fn new(net: &PowerNetwork, y: &AdmittanceMatrix) -> Result<Self> {
        let load_buses = y.load_buses().to_vec();
        let gen_buses = y.generator_buses().to_vec();
        if load_buses.is_empty() {
            return Ok(Self {
                f: DMatrix::zeros(0, gen_buses.len()),
                load_buses,
                gen_buses,
            });
        }
        let y_lg = y.y_lg();
        let f = y
            .y_ll()
            .lu()
            .solve(&y_lg)
            .filter(|f| f.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
            .ok_or_else(|| Error::SingularLoadBlock {
                buses: isolated_load_islands(net),
            })?;
        Ok(Self {
            f: -f,
            load_buses,
            gen_buses,
        })
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.f
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LIndex {
    /// `(bus position, L_j)` for every load bus.
    pub per_bus: Vec<(usize, f64)>,
    /// Largest L_j, zero when there are no load buses.
    pub max: f64,
}

/// `L_j = |1 − Σ_i F_ji V_i / V_j|` over the load buses, in complex arithmetic.
pub fn compute_l_index(factors: &LIndexFactors, point: &OperatingPoint) -> LIndex {
    let v = point.voltages();
    let per_bus: Vec<(usize, f64)> = factors
        .load_buses
        .iter()
        .enumerate()
        .map(|(row, &j)| {
            let sum: Complex64 = factors
                .gen_buses
                .iter()
                .enumerate()
                .map(|(col, &i)| factors.f[(row, col)] * v[i])
                .sum();
            (j, (Complex64::new(1.0, 0.0) - sum / v[j]).norm())
        })
        .collect();
    let max = per_bus.iter().map(|&(_, l)| l).fold(0.0, f64::max);
    LIndex { per_bus, max }
}

/// Admittance matrix and L-index factors for one discrete device assignment.
#[derive(Debug)]
pub struct NetworkModel {
    pub settings: DeviceSettings,
    pub admittance: AdmittanceMatrix,
    /// `Err` holds the ids of the isolated load buses.
    pub l_factors: std::result::Result<LIndexFactors, Vec<usize>>,
}

impl NetworkModel {
    pub fn build(net: &PowerNetwork, settings: DeviceSettings) -> Result<Self> {
        let admittance = build_admittance(net, &settings)?;
        let l_factors = match LIndexFactors::new(net, &admittance) {
            Ok(f) => Ok(f),
            Err(Error::SingularLoadBlock { buses }) => Err(buses),
            Err(e) => return Err(e),
        };
        Ok(Self {
            settings,
            admittance,
            l_factors,
        })
    }
}

type ModelKey = (Vec<usize>, Vec<usize>);

/// Models keyed by tap and compensator indices. Each entry is built once
/// even when several threads ask for it at the same time.
#[derive(Debug)]
pub struct ModelCache {
    capacity: usize,
    entries: Mutex<HashMap<ModelKey, Arc<OnceLock<Arc<NetworkModel>>>>>,
}

impl Default for ModelCache {
    fn default() -> Self {
        Self::with_capacity(4096)
    }
}

impl ModelCache {
    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            entries: Mutex::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Model for the discrete part of `controls`, which must already be valid.
    pub fn get(&self, net: &PowerNetwork, controls: &ControlSettings) -> Result<Arc<NetworkModel>> {
        let key = (controls.tap_index.clone(), controls.shunt_index.clone());
        let cell = {
            let mut entries = self.entries.lock().unwrap();
            if entries.len() >= self.capacity && !entries.contains_key(&key) {
                entries.clear();
            }
            Arc::clone(entries.entry(key).or_default())
        };
        if let Some(model) = cell.get() {
            return Ok(Arc::clone(model));
        }
        // Validate outside `get_or_init` so errors are not cached.
        let model = NetworkModel::build(net, net.device_settings(controls))?;
        Ok(Arc::clone(cell.get_or_init(|| Arc::new(model))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::tests::two_bus_case;
    use crate::network::{BranchRecord, BusKind, BusRecord, CaseFile};

    fn solve(net: &PowerNetwork) -> PowerFlowResult {
        solve_power_flow(net, &net.nominal_controls(), &PowerFlowOptions::default()).unwrap()
    }

    /// Gauss-Seidel on the single load bus, independent of the Newton code.
    fn gauss_seidel_two_bus(x: f64, s_load: Complex64) -> Complex64 {
        let ys = Complex64::new(0.0, -1.0 / x);
        let (y21, y22) = (-ys, ys);
        let v1 = Complex64::new(1.0, 0.0);
        let s2 = -s_load;
        let mut v2 = Complex64::new(1.0, 0.0);
        for _ in 0..10_000 {
            let next = (s2.conj() / v2.conj() - y21 * v1) / y22;
            if (next - v2).norm() < 1e-15 {
                return next;
            }
            v2 = next;
        }
        v2
    }

    #[test]
    fn zero_load_flat_solution() {
        let net = two_bus_case(0.1, 0.0, 0.0).into_network().unwrap();
        let res = solve(&net);
        assert!(res.converged);
        assert!(res.iterations <= 2);
        let p = res.point.unwrap();
        assert_eq!(p.va[0], 0.0);
        assert!((p.vm[1] - 1.0).abs() < 1e-12 && p.va[1].abs() < 1e-12);
        assert!(p.branch_flow.iter().all(|&s| s.abs() < 1e-12));
    }

    #[test]
    fn two_bus_matches_gauss_seidel() {
        let net = two_bus_case(0.1, 50.0, 20.0).into_network().unwrap();
        let res = solve(&net);
        assert!(res.converged);
        let p = res.point.unwrap();
        let v2 = gauss_seidel_two_bus(0.1, Complex64::new(0.5, 0.2));
        assert!((p.vm[1] - v2.norm()).abs() < 1e-6);
        assert!((p.va[1] - v2.arg()).abs() < 1e-6);
        assert!((p.p_gen[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn two_bus_branch_flow_by_hand() {
        let net = two_bus_case(0.1, 50.0, 20.0).into_network().unwrap();
        let tight = PowerFlowOptions {
            tolerance: 1e-13,
            ..Default::default()
        };
        let p = solve_power_flow(&net, &net.nominal_controls(), &tight)
            .unwrap()
            .point
            .unwrap();
        // Lossless line: sending end carries the load plus x|I|² of reactive.
        let current_sq = 0.29 / (p.vm[1] * p.vm[1]);
        let s_from = Complex64::new(0.5, 0.2 + 0.1 * current_sq).norm();
        assert!((p.branch_flow[0] - s_from).abs() < 1e-8);
    }

    #[test]
    fn removed_branch_absent_from_flows() {
        let mut case = two_bus_case(0.1, 0.0, 0.0);
        case.branches.push(BranchRecord {
            from: 1,
            to: 2,
            r_pu: 0.01,
            x_pu: 0.2,
            b_pu: 0.0,
            s_max_mva: 100.0,
            tap: None,
        });
        let net = case.into_network().unwrap();
        let reduced = net.with_branches(|k, _| k != 1).unwrap();
        let res = solve(&reduced);
        let flows = compute_branch_flows(
            &reduced,
            &DeviceSettings::nominal(&reduced),
            res.point.as_ref().unwrap(),
        )
        .unwrap();
        assert_eq!(flows.len(), 1);
    }

    #[test]
    fn l_index_two_bus() {
        let net = two_bus_case(0.1, 0.0, 0.0).into_network().unwrap();
        let model = NetworkModel::build(&net, DeviceSettings::nominal(&net)).unwrap();
        let factors = model.l_factors.as_ref().unwrap();
        let p = solve(&net).point.unwrap();
        assert_eq!(compute_l_index(factors, &p).max, 0.0);

        let net = two_bus_case(0.1, 50.0, 20.0).into_network().unwrap();
        let p = solve(&net).point.unwrap();
        let model = NetworkModel::build(&net, DeviceSettings::nominal(&net)).unwrap();
        let factors = model.l_factors.as_ref().unwrap();
        assert!((factors.matrix()[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        let v = p.voltages();
        let expect = (Complex64::new(1.0, 0.0) - v[0] / v[1]).norm();
        assert!((compute_l_index(factors, &p).max - expect).abs() < 1e-12);
    }

    #[test]
    fn symmetric_load_buses_share_l_index() {
        let mut case = two_bus_case(0.1, 40.0, 10.0);
        let mut twin = case.buses[1].clone();
        twin.id = 3;
        case.buses.push(twin);
        let mut line = case.branches[0].clone();
        line.to = 3;
        case.branches.push(line);
        let net = case.into_network().unwrap();
        let p = solve(&net).point.unwrap();
        let model = NetworkModel::build(&net, DeviceSettings::nominal(&net)).unwrap();
        let l = compute_l_index(model.l_factors.as_ref().unwrap(), &p);
        assert_eq!(l.per_bus.len(), 2);
        assert!((l.per_bus[0].1 - l.per_bus[1].1).abs() < 1e-12);
        assert!(l.per_bus[0].1 > 0.0);
    }

    #[test]
    fn l_index_grows_with_load() {
        let mut last = -1.0;
        for load in [0.0, 50.0, 100.0, 150.0, 200.0, 250.0] {
            let net = two_bus_case(0.1, load, 0.3 * load).into_network().unwrap();
            let res = solve(&net);
            assert!(res.converged, "load {load}");
            let model = NetworkModel::build(&net, DeviceSettings::nominal(&net)).unwrap();
            let f3 = compute_l_index(model.l_factors.as_ref().unwrap(), &res.point.unwrap()).max;
            assert!(f3 >= last, "load {load}: {f3} < {last}");
            last = f3;
        }
    }

    #[test]
    fn excessive_load_does_not_converge() {
        let net = two_bus_case(0.1, 1000.0, 500.0).into_network().unwrap();
        let res = solve(&net);
        assert!(!res.converged);
        assert!(res.point.is_none());
    }

    #[test]
    fn reactive_limit_switches_bus_to_pq() {
        // Slack 1 feeds load bus 3 through PV bus 2 whose unit has little
        // reactive range; holding 1.05 p.u. would need more than it can give.
        let mut case = two_bus_case(0.1, 0.0, 0.0);
        case.buses[1].kind = BusKind::Pv;
        case.buses.push(BusRecord {
            id: 3,
            kind: BusKind::Pq,
            v_min: 0.9,
            v_max: 1.1,
            u_ref: 1.0,
            p_load_mw: 60.0,
            q_load_mvar: 40.0,
        });
        case.branches.push(BranchRecord {
            from: 2,
            to: 3,
            r_pu: 0.0,
            x_pu: 0.1,
            b_pu: 0.0,
            s_max_mva: 100.0,
            tap: None,
        });
        let mut unit = case.generators[0].clone();
        unit.bus = 2;
        unit.p_min_mw = 0.0;
        unit.p_max_mw = 0.0;
        unit.q_min_mvar = -5.0;
        unit.q_max_mvar = 5.0;
        case.generators.push(unit);
        let net = CaseFile { ..case }.into_network().unwrap();
        let mut controls = net.nominal_controls();
        controls.v_gen_pu = vec![1.0, 1.05];
        let res = solve_power_flow(&net, &controls, &PowerFlowOptions::default()).unwrap();
        assert!(res.converged);
        let p = res.point.unwrap();
        assert_eq!(p.switched, vec![1]);
        assert!((p.q_gen[1] - 0.05).abs() < 1e-9);
        assert!(p.q_gen_required[1] > 0.05);
        assert!(p.vm[1] < 1.05);
    }
}
