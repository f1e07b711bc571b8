//! Pseudo-Doherty load-modulated balanced amplifier analysis.
//!
//! The amplifier is a balanced pair (BA, peaking) between two quadrature
//! couplers, with a control amplifier (CA, carrier) injected into the
//! isolation port of the output coupler. This module builds the amplifier's
//! signal-flow graph, evaluates the BA and CA output waves in closed form,
//! measures the BA/CA path phase offset, turns it into load-modulation
//! trajectories, and picks a phase-shifter length that minimizes the worst
//! offset over the band.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use num_complex::Complex64;
use thiserror::Error;

use crate::components::{make_phase_shifter, Circuit, CircuitError, ComponentError, LineSpec};
use crate::netcore::{phase_deg, unwrap_deg, FrequencyGrid, NPortNetwork, NetError, DEFAULT_Z_REF};
use crate::sfg::{mason_transfer, solve_linear, FlowGraph, SfgError, SolveError};

pub const SOURCE_BA: &str = "a_BA";
pub const SOURCE_CA: &str = "a_CA";
pub const SINK: &str = "b_out";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LmbaError {
    #[error("block `{block}` must have {expected} ports, has {actual}")]
    BlockPorts {
        block: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("block `{0}` is sampled on a different grid")]
    GridMismatch(&'static str),
    #[error("BA and CA currents are both zero")]
    NoCurrent,
    #[error("load impedance equals -Z0; reflection coefficient is unbounded")]
    ReflectionPole,
    #[error("invalid drive profile: {0}")]
    Profile(String),
    #[error("invalid phase-shifter search range: {0}")]
    SearchRange(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Component(#[from] ComponentError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Graph(#[from] SfgError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// All blocks of the amplifier on one grid. The two BA branches share the
/// same IMN, transistor and OMN networks.
#[derive(Debug, Clone, PartialEq)]
pub struct LmbaTopology {
    grid: FrequencyGrid,
    pub input_coupler: NPortNetwork,
    pub output_coupler: NPortNetwork,
    pub phase_shifter: NPortNetwork,
    pub ba_imn: NPortNetwork,
    pub ba_transistor: NPortNetwork,
    pub ba_omn: NPortNetwork,
    pub ca_imn: NPortNetwork,
    pub ca_transistor: NPortNetwork,
    pub ca_omn: NPortNetwork,
}

/// Blocks used to assemble an [`LmbaTopology`].
#[derive(Debug, Clone)]
pub struct LmbaBlocks {
    pub input_coupler: NPortNetwork,
    pub output_coupler: NPortNetwork,
    pub phase_shifter: NPortNetwork,
    pub ba_imn: NPortNetwork,
    pub ba_transistor: NPortNetwork,
    pub ba_omn: NPortNetwork,
    pub ca_imn: NPortNetwork,
    pub ca_transistor: NPortNetwork,
    pub ca_omn: NPortNetwork,
}

impl LmbaTopology {
    pub fn new(blocks: LmbaBlocks) -> Result<Self, LmbaError> {
        let grid = blocks.input_coupler.grid().clone();
        let checks: [(&'static str, &NPortNetwork, usize); 9] = [
            ("input_coupler", &blocks.input_coupler, 4),
            ("output_coupler", &blocks.output_coupler, 4),
            ("phase_shifter", &blocks.phase_shifter, 2),
            ("ba_imn", &blocks.ba_imn, 2),
            ("ba_transistor", &blocks.ba_transistor, 2),
            ("ba_omn", &blocks.ba_omn, 2),
            ("ca_imn", &blocks.ca_imn, 2),
            ("ca_transistor", &blocks.ca_transistor, 2),
            ("ca_omn", &blocks.ca_omn, 2),
        ];
        for (block, net, expected) in checks {
            if net.n_ports() != expected {
                return Err(LmbaError::BlockPorts {
                    block,
                    expected,
                    actual: net.n_ports(),
                });
            }
            if net.grid() != &grid {
                return Err(LmbaError::GridMismatch(block));
            }
        }
        Ok(Self {
            grid,
            input_coupler: blocks.input_coupler,
            output_coupler: blocks.output_coupler,
            phase_shifter: blocks.phase_shifter,
            ba_imn: blocks.ba_imn,
            ba_transistor: blocks.ba_transistor,
            ba_omn: blocks.ba_omn,
            ca_imn: blocks.ca_imn,
            ca_transistor: blocks.ca_transistor,
            ca_omn: blocks.ca_omn,
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    /// Same topology with a different phase shifter.
    pub fn with_phase_shifter(&self, phase_shifter: NPortNetwork) -> Result<Self, LmbaError> {
        let mut blocks = self.blocks();
        blocks.phase_shifter = phase_shifter;
        Self::new(blocks)
    }

    pub fn blocks(&self) -> LmbaBlocks {
        LmbaBlocks {
            input_coupler: self.input_coupler.clone(),
            output_coupler: self.output_coupler.clone(),
            phase_shifter: self.phase_shifter.clone(),
            ba_imn: self.ba_imn.clone(),
            ba_transistor: self.ba_transistor.clone(),
            ba_omn: self.ba_omn.clone(),
            ca_imn: self.ca_imn.clone(),
            ca_transistor: self.ca_transistor.clone(),
            ca_omn: self.ca_omn.clone(),
        }
    }

    fn s21(net: &NPortNetwork) -> Vec<Complex64> {
        net.param(2, 1)
    }
}

/// Wires the amplifier into a flow graph.
///
/// Input coupler: port 1 from the phase shifter, port 2 to BA1, port 4 to
/// BA2, port 3 terminated. Output coupler: port 2 from BA1, port 4 from
/// BA2, port 1 from the CA, port 3 is the output `b_out`.
pub fn build_graph(t: &LmbaTopology) -> Result<FlowGraph, LmbaError> {
    let mut c = Circuit::new(&t.grid);
    let phs = c.add("PHS", &t.phase_shifter)?;
    let ic = c.add("IC", &t.input_coupler)?;
    let oc = c.add("OC", &t.output_coupler)?;
    c.drive(SOURCE_BA, (phs, 1))?.connect((phs, 2), (ic, 1))?;
    for (name, ic_port, oc_port) in [("BA1", 2, 2), ("BA2", 4, 4)] {
        let imn = c.add(&format!("{name}.IMN"), &t.ba_imn)?;
        let tr = c.add(&format!("{name}.TR"), &t.ba_transistor)?;
        let omn = c.add(&format!("{name}.OMN"), &t.ba_omn)?;
        c.connect((ic, ic_port), (imn, 1))?
            .connect((imn, 2), (tr, 1))?
            .connect((tr, 2), (omn, 1))?
            .connect((omn, 2), (oc, oc_port))?;
    }
    let imn = c.add("CA.IMN", &t.ca_imn)?;
    let tr = c.add("CA.TR", &t.ca_transistor)?;
    let omn = c.add("CA.OMN", &t.ca_omn)?;
    c.drive(SOURCE_CA, (imn, 1))?
        .connect((imn, 2), (tr, 1))?
        .connect((tr, 2), (omn, 1))?
        .connect((omn, 2), (oc, 1))?;
    c.observe(SINK, (oc, 3))?;
    Ok(c.to_flow_graph())
}

/// Closed-form BA and CA path gains to the output port.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGains {
    /// `b_out / a_BA`.
    pub ba_path: Vec<Complex64>,
    /// `b_out / a_CA`.
    pub ca_path: Vec<Complex64>,
}

/// Path gains from the block S-parameters.
///
/// The BA signal splits in the input coupler and recombines in the output
/// coupler; the CA signal splits in the output coupler, runs backwards
/// through each BA OMN, reflects off the BA transistor output and runs
/// forwards again. For ideal couplers both coupler factors equal `2jm²`.
pub fn path_gains(t: &LmbaTopology) -> PathGains {
    let ic = &t.input_coupler;
    let oc = &t.output_coupler;
    let n = t.grid.len();
    let phs = LmbaTopology::s21(&t.phase_shifter);
    let (bi, btr, bo) = (
        LmbaTopology::s21(&t.ba_imn),
        LmbaTopology::s21(&t.ba_transistor),
        LmbaTopology::s21(&t.ba_omn),
    );
    let bo_rev = t.ba_omn.param(1, 2);
    let btr_refl = t.ba_transistor.param(2, 2);
    let (ci, ctr, co) = (
        LmbaTopology::s21(&t.ca_imn),
        LmbaTopology::s21(&t.ca_transistor),
        LmbaTopology::s21(&t.ca_omn),
    );
    let mut ba_path = Vec::with_capacity(n);
    let mut ca_path = Vec::with_capacity(n);
    for k in 0..n {
        let (si, so) = (ic.at(k), oc.at(k));
        let ba_coupling = si[(1, 0)] * so[(2, 1)] + si[(3, 0)] * so[(2, 3)];
        let ca_coupling = so[(1, 0)] * so[(2, 1)] + so[(3, 0)] * so[(2, 3)];
        ba_path.push(ba_coupling * phs[k] * bi[k] * btr[k] * bo[k]);
        ca_path.push(ca_coupling * ci[k] * ctr[k] * co[k] * bo_rev[k] * btr_refl[k] * bo[k]);
    }
    PathGains { ba_path, ca_path }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputWaves {
    pub ba: Vec<Complex64>,
    pub ca: Vec<Complex64>,
    pub total: Vec<Complex64>,
}

/// `b_out,BA`, `b_out,CA` and their sum for the given input waves.
pub fn output_waves(t: &LmbaTopology, a_ba: Complex64, a_ca: Complex64) -> OutputWaves {
    let g = path_gains(t);
    let ba: Vec<Complex64> = g.ba_path.iter().map(|p| a_ba * p).collect();
    let ca: Vec<Complex64> = g.ca_path.iter().map(|p| a_ca * p).collect();
    let total = ba.iter().zip(&ca).map(|(x, y)| x + y).collect();
    OutputWaves { ba, ca, total }
}

/// `b_out / a_BA` and `b_out / a_CA` from Mason's rule on [`build_graph`].
pub fn graph_path_gains(t: &LmbaTopology) -> Result<PathGains, LmbaError> {
    let g = build_graph(t)?;
    let sink = g.id(SINK)?;
    let ba_path = mason_transfer(&g, g.id(SOURCE_BA)?, sink)?.values()?;
    let ca_path = mason_transfer(&g, g.id(SOURCE_CA)?, sink)?.values()?;
    Ok(PathGains { ba_path, ca_path })
}

/// Output waves from a dense solve of the graph, for cross-checking.
pub fn graph_output_waves(t: &LmbaTopology, a_ba: Complex64, a_ca: Complex64) -> Result<Vec<Complex64>, LmbaError> {
    let g = build_graph(t)?;
    let exc = BTreeMap::from([(g.id(SOURCE_BA)?, a_ba), (g.id(SOURCE_CA)?, a_ca)]);
    Ok(solve_linear(&g, &exc).node(g.id(SINK)?)?)
}

/// Continuous phase curve of `ba/ca` in degrees, anchored in (−180, 180] at
/// the lowest frequency.
fn offset_curve(ba: &[Complex64], ca: &[Complex64]) -> Vec<f64> {
    let raw: Vec<f64> = ba.iter().zip(ca).map(|(b, c)| phase_deg(b * c.conj())).collect();
    unwrap_deg(&raw)
}

fn ba_chain(t: &LmbaTopology, include_phs: bool) -> Vec<Complex64> {
    let phs = LmbaTopology::s21(&t.phase_shifter);
    let bi = LmbaTopology::s21(&t.ba_imn);
    let btr = LmbaTopology::s21(&t.ba_transistor);
    (0..t.grid.len())
        .map(|k| {
            let base = bi[k] * btr[k];
            if include_phs {
                phs[k] * base
            } else {
                base
            }
        })
        .collect()
}

fn ca_chain(t: &LmbaTopology) -> Vec<Complex64> {
    let ci = LmbaTopology::s21(&t.ca_imn);
    let ctr = LmbaTopology::s21(&t.ca_transistor);
    let co = LmbaTopology::s21(&t.ca_omn);
    let bo = LmbaTopology::s21(&t.ba_omn);
    (0..t.grid.len()).map(|k| ci[k] * ctr[k] * co[k] * bo[k]).collect()
}

/// BA-minus-CA path phase in degrees per grid point:
/// `∠(S21,PHS·S21,BI·S21,BTr) − ∠(S21,CI·S21,CTr·S21,CO·S21,BO)`.
///
/// Zero at every frequency means the two signals combine in phase at the
/// output regardless of the coupler phase.
pub fn phase_offset(t: &LmbaTopology) -> Vec<f64> {
    offset_curve(&ba_chain(t, true), &ca_chain(t))
}

/// The same offset read from the Mason solution of the full graph:
/// `∠(b_out/a_BA) − ∠(b_out/a_CA)`. Coupler terms cancel between the two.
pub fn phase_offset_from_graph(t: &LmbaTopology) -> Result<Vec<f64>, LmbaError> {
    let g = graph_path_gains(t)?;
    Ok(offset_curve(&g.ba_path, &g.ca_path))
}

/// Load impedance seen by a BA device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Impedance {
    Finite(Complex64),
    /// BA off: open circuit.
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadPoint {
    pub gamma: Complex64,
    pub z: Impedance,
}

/// BA load under CA injection: `Z = z0·(1 + √2·i_c·e^{jθ}/i_b)`.
///
/// `Γ` is evaluated as `√2·i_c·e^{jθ} / (2·i_b + √2·i_c·e^{jθ})`, which stays
/// finite as `i_b → 0` and gives the open circuit `Γ = 1` there.
pub fn load_reflection(i_b: f64, i_c: f64, theta: f64, z0: f64) -> Result<LoadPoint, LmbaError> {
    if i_b == 0.0 && i_c == 0.0 {
        return Err(LmbaError::NoCurrent);
    }
    let injected = Complex64::from_polar(SQRT_2 * i_c, theta);
    let denom = 2.0 * i_b + injected;
    if denom.norm() <= 1e-12 * (2.0 * i_b + SQRT_2 * i_c) {
        return Err(LmbaError::ReflectionPole);
    }
    let gamma = injected / denom;
    let z = if i_b > 0.0 {
        let ratio = SQRT_2 * i_c / i_b;
        Impedance::Finite(z0 * (1.0 + Complex64::from_polar(ratio, theta)))
    } else {
        Impedance::Infinite
    };
    Ok(LoadPoint { gamma, z })
}

/// Normalized carrier/peaking current profile over input drive `r ∈ [0, 1]`.
///
/// The CA current rises linearly and saturates at the back-off drive
/// `r_bo = 10^(−obo/20)`; the BA is off up to `r_bo` and rises linearly to
/// its peak, chosen so the full-power BA load is `full_power_load · z0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveProfile {
    pub obo_target_db: f64,
    pub backoff_drive: f64,
    pub full_power_load: f64,
    pub i_c_peak: f64,
    pub i_b_peak: f64,
    pub theta: f64,
    pub levels: Vec<f64>,
    pub i_c: Vec<f64>,
    pub i_b: Vec<f64>,
}

impl DriveProfile {
    pub fn currents_at(&self, r: f64) -> (f64, f64) {
        let i_c = self.i_c_peak * (r / self.backoff_drive).clamp(0.0, 1.0);
        let i_b = if r <= self.backoff_drive {
            0.0
        } else {
            self.i_b_peak * ((r - self.backoff_drive) / (1.0 - self.backoff_drive)).min(1.0)
        };
        (i_c, i_b)
    }
}

/// Profile for `obo_db` of back-off, `n_levels` evenly spaced drive levels,
/// a full-power BA load of `2·z0` and `θ = 0`.
pub fn make_drive_profile(obo_db: f64, n_levels: usize) -> Result<DriveProfile, LmbaError> {
    make_drive_profile_with(obo_db, n_levels, 2.0, 0.0)
}

pub fn make_drive_profile_with(
    obo_db: f64,
    n_levels: usize,
    full_power_load: f64,
    theta: f64,
) -> Result<DriveProfile, LmbaError> {
    if !(obo_db.is_finite() && obo_db > 0.0) {
        return Err(LmbaError::Profile(format!("back-off {obo_db} dB must be positive")));
    }
    if n_levels < 3 {
        return Err(LmbaError::Profile(format!(
            "need at least 3 drive levels, got {n_levels}"
        )));
    }
    if !(full_power_load.is_finite() && full_power_load > 1.0) {
        return Err(LmbaError::Profile(format!(
            "full-power load {full_power_load}·z0 must exceed z0"
        )));
    }
    let mut profile = DriveProfile {
        obo_target_db: obo_db,
        backoff_drive: 10f64.powf(-obo_db / 20.0),
        full_power_load,
        i_c_peak: 1.0,
        i_b_peak: SQRT_2 / (full_power_load - 1.0),
        theta,
        levels: Vec::with_capacity(n_levels),
        i_c: Vec::with_capacity(n_levels),
        i_b: Vec::with_capacity(n_levels),
    };
    for k in 0..n_levels {
        let r = k as f64 / (n_levels - 1) as f64;
        let (i_c, i_b) = profile.currents_at(r);
        profile.levels.push(r);
        profile.i_c.push(i_c);
        profile.i_b.push(i_b);
    }
    Ok(profile)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub drive: f64,
    pub gamma: Complex64,
    pub z: Impedance,
}

/// BA load reflection versus drive, one trace per grid frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadTrajectory {
    pub frequencies: Vec<f64>,
    pub traces: Vec<Vec<TrajectoryPoint>>,
}

impl LoadTrajectory {
    /// Largest `|Γ_f(r) − Γ_ref(r)|` between any trace and the first one.
    pub fn max_spread(&self) -> f64 {
        let Some(reference) = self.traces.first() else {
            return 0.0;
        };
        self.traces
            .iter()
            .flat_map(|tr| tr.iter().zip(reference).map(|(p, q)| (p.gamma - q.gamma).norm()))
            .fold(0.0, f64::max)
    }
}

/// Trajectories with the control phase at each frequency set to the
/// profile's `θ` plus that frequency's path offset.
pub fn trajectory_sweep(t: &LmbaTopology, p: &DriveProfile) -> Result<LoadTrajectory, LmbaError> {
    trajectory_from_offsets(t.grid(), &phase_offset(t), p)
}

/// Trajectories for explicit per-frequency offsets in degrees.
pub fn trajectory_from_offsets(
    grid: &FrequencyGrid,
    offsets_deg: &[f64],
    p: &DriveProfile,
) -> Result<LoadTrajectory, LmbaError> {
    let mut traces = Vec::with_capacity(grid.len());
    for &offset in offsets_deg {
        let theta = p.theta + offset.to_radians();
        let mut trace = Vec::with_capacity(p.levels.len());
        for ((&r, &i_c), &i_b) in p.levels.iter().zip(&p.i_c).zip(&p.i_b) {
            let point = if i_b == 0.0 {
                LoadPoint {
                    gamma: Complex64::new(1.0, 0.0),
                    z: Impedance::Infinite,
                }
            } else {
                load_reflection(i_b, i_c, theta, DEFAULT_Z_REF)?
            };
            trace.push(TrajectoryPoint {
                drive: r,
                gamma: point.gamma,
                z: point.z,
            });
        }
        traces.push(trace);
    }
    Ok(LoadTrajectory {
        frequencies: grid.points().to_vec(),
        traces,
    })
}

/// Candidate phase-shifter lengths: `start, start + step, …` up to `stop`,
/// in degrees at `f0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthSweep {
    pub start_deg: f64,
    pub stop_deg: f64,
    pub step_deg: f64,
    pub f0: f64,
}

impl LengthSweep {
    /// 0°–360° in 0.5° steps, referenced to the band midpoint.
    pub fn default_for(grid: &FrequencyGrid) -> Self {
        Self {
            start_deg: 0.0,
            stop_deg: 360.0,
            step_deg: 0.5,
            f0: grid.mid(),
        }
    }

    pub fn candidates(&self) -> Result<Vec<f64>, LmbaError> {
        if !(self.step_deg.is_finite() && self.step_deg > 0.0) {
            return Err(LmbaError::SearchRange(format!(
                "step {} must be positive",
                self.step_deg
            )));
        }
        if !(self.start_deg.is_finite() && self.stop_deg.is_finite()) || self.stop_deg < self.start_deg {
            return Err(LmbaError::SearchRange(format!(
                "empty range {}..{}",
                self.start_deg, self.stop_deg
            )));
        }
        if !(self.f0.is_finite() && self.f0 > 0.0) {
            return Err(LmbaError::SearchRange(format!(
                "reference frequency {} must be positive",
                self.f0
            )));
        }
        let n = ((self.stop_deg - self.start_deg) / self.step_deg + 1e-9).floor() as usize + 1;
        Ok((0..n).map(|i| self.start_deg + i as f64 * self.step_deg).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub best_length_deg: f64,
    pub f0: f64,
    pub max_offset_deg: f64,
    pub offsets_deg: Vec<f64>,
}

fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Minimax grid search over matched-line phase shifters replacing the
/// topology's current one. Ties go to the shorter line.
pub fn align_phase_shifter(t: &LmbaTopology, sweep: &LengthSweep) -> Result<Alignment, LmbaError> {
    let candidates = sweep.candidates()?;
    let ba = ba_chain(t, false);
    let ca = ca_chain(t);
    let mut best: Option<(f64, f64)> = None;
    for &len in &candidates {
        let spec = LineSpec::new(DEFAULT_Z_REF, len, sweep.f0)?;
        let shifted: Vec<Complex64> = t
            .grid
            .iter()
            .zip(&ba)
            .map(|(f, b)| b * Complex64::from_polar(1.0, -spec.beta_l(f)))
            .collect();
        let worst = max_abs(&offset_curve(&shifted, &ca));
        if best.is_none_or(|(_, w)| worst < w) {
            best = Some((len, worst));
        }
    }
    let (best_length_deg, _) = best.expect("candidate list is non-empty");
    let ps = make_phase_shifter(&LineSpec::new(DEFAULT_Z_REF, best_length_deg, sweep.f0)?, &t.grid)?;
    let offsets_deg = phase_offset(&t.with_phase_shifter(ps)?);
    Ok(Alignment {
        best_length_deg,
        f0: sweep.f0,
        max_offset_deg: max_abs(&offsets_deg),
        offsets_deg,
    })
}
