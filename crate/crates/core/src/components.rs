//! Building blocks of a load-modulated balanced amplifier as S-parameter
//! networks, plus a small netlist that turns connected networks into a
//! [`FlowGraph`].

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use thiserror::Error;

use crate::netcore::{cascade_all, two_port, FrequencyGrid, NPortNetwork, NetError, SMatrix, DEFAULT_Z_REF, ONE, ZERO};
use crate::sfg::{FlowGraph, FlowGraphBuilder};

const J: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComponentError {
    #[error("{what} has {actual} samples but the grid has {expected}")]
    SampleCount {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("invalid line: {0}")]
    InvalidLine(String),
    #[error("phase shifter must be matched: z_c = {z_c} but z_ref = {z_ref}")]
    UnmatchedPhaseShifter { z_c: f64, z_ref: f64 },
    #[error("a multisection network needs at least one series section")]
    NoSections,
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Phase `θ(ω)` of the coupling coefficient `m = e^{jθ}/√2`, one sample
/// per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplerSpec {
    pub theta: Vec<f64>,
}

impl CouplerSpec {
    pub fn new(theta: Vec<f64>) -> Self {
        Self { theta }
    }

    /// Pure delay: `θ = −ω·τ`.
    pub fn linear_delay(grid: &FrequencyGrid, tau_s: f64) -> Self {
        Self::new((0..grid.len()).map(|k| -grid.omega(k) * tau_s).collect())
    }

    /// Linear-phase coupler with `θ = −90°` at the band midpoint.
    pub fn default_for(grid: &FrequencyGrid) -> Self {
        let tau = 0.25 / grid.mid();
        Self::linear_delay(grid, tau)
    }

    pub fn m(&self, k: usize) -> Complex64 {
        Complex64::from_polar(FRAC_1_SQRT_2, self.theta[k])
    }
}

/// Ideal quadrature coupler.
///
/// Port 1 feeds port 2 (thru, `jm`) and port 4 (coupled, `m`); port 3 is
/// isolated from port 1. Symmetric, so `S21 = j·S41` at every frequency.
pub fn make_coupler(spec: &CouplerSpec, grid: &FrequencyGrid) -> Result<NPortNetwork, ComponentError> {
    check_len("coupler phase", grid, spec.theta.len())?;
    Ok(NPortNetwork::from_fn(4, DEFAULT_Z_REF, grid, |k, _| {
        let m = spec.m(k);
        let jm = J * m;
        SMatrix::from_row_slice(
            4,
            4,
            &[
                ZERO, jm, ZERO, m, //
                jm, ZERO, m, ZERO, //
                ZERO, m, ZERO, jm, //
                m, ZERO, jm, ZERO,
            ],
        )
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwoPortKind {
    Transistor,
    Matching,
    PhaseShifter,
    Line,
}

/// A two-port given only by its forward transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPortSpec {
    pub kind: TwoPortKind,
    pub s21: Vec<Complex64>,
}

impl TwoPortSpec {
    pub fn new(kind: TwoPortKind, s21: Vec<Complex64>) -> Self {
        Self { kind, s21 }
    }
}

/// Transistor blocks are `[[0, 0], [S21, 1]]`; every other kind is matched
/// and reciprocal, `[[0, S21], [S21, 0]]`.
pub fn make_two_port(spec: &TwoPortSpec, grid: &FrequencyGrid) -> Result<NPortNetwork, ComponentError> {
    check_len("two-port S21", grid, spec.s21.len())?;
    Ok(NPortNetwork::from_fn(2, DEFAULT_Z_REF, grid, |k, _| {
        let s21 = spec.s21[k];
        match spec.kind {
            TwoPortKind::Transistor => two_port(ZERO, s21, ZERO, ONE),
            _ => two_port(ZERO, s21, s21, ZERO),
        }
    }))
}

/// Unilateral device: matched input, no reverse transmission, and a fully
/// reflecting output (`S22 = 1`).
pub fn make_transistor(s21: Vec<Complex64>, grid: &FrequencyGrid) -> Result<NPortNetwork, ComponentError> {
    make_two_port(&TwoPortSpec::new(TwoPortKind::Transistor, s21), grid)
}

/// Flat gain magnitude with a pure group delay.
pub fn linear_phase_gain(grid: &FrequencyGrid, magnitude: f64, delay_s: f64) -> Vec<Complex64> {
    (0..grid.len())
        .map(|k| Complex64::from_polar(magnitude, -grid.omega(k) * delay_s))
        .collect()
}

/// Lossless TEM line: characteristic impedance and electrical length at a
/// reference frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSpec {
    pub z_c: f64,
    pub electrical_length_deg: f64,
    pub f0: f64,
}

impl LineSpec {
    pub fn new(z_c: f64, electrical_length_deg: f64, f0: f64) -> Result<Self, ComponentError> {
        let spec = Self {
            z_c,
            electrical_length_deg,
            f0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ComponentError> {
        if !(self.z_c.is_finite() && self.z_c > 0.0) {
            return Err(ComponentError::InvalidLine(format!(
                "characteristic impedance {} must be positive",
                self.z_c
            )));
        }
        if !(self.f0.is_finite() && self.f0 > 0.0) {
            return Err(ComponentError::InvalidLine(format!(
                "reference frequency {} must be positive",
                self.f0
            )));
        }
        if !self.electrical_length_deg.is_finite() {
            return Err(ComponentError::InvalidLine("electrical length is not finite".into()));
        }
        Ok(())
    }

    /// `βl` in radians at `freq_hz`.
    pub fn beta_l(&self, freq_hz: f64) -> f64 {
        self.electrical_length_deg.to_radians() * freq_hz / self.f0
    }
}

pub fn make_line(spec: &LineSpec, grid: &FrequencyGrid, z_ref: f64) -> Result<NPortNetwork, ComponentError> {
    spec.validate()?;
    let z = spec.z_c / z_ref;
    let matched = spec.z_c == z_ref;
    Ok(NPortNetwork::from_fn(2, z_ref, grid, |_, f| {
        let bl = spec.beta_l(f);
        if matched {
            let s21 = Complex64::from_polar(1.0, -bl);
            return two_port(ZERO, s21, s21, ZERO);
        }
        let (sin, cos) = bl.sin_cos();
        let denom = Complex64::new(2.0 * cos, (z + 1.0 / z) * sin);
        let s11 = Complex64::new(0.0, (z - 1.0 / z) * sin) / denom;
        let s21 = Complex64::new(2.0, 0.0) / denom;
        two_port(s11, s21, s21, s11)
    }))
}

/// Matched line used as a phase shifter; `∠S21` is linear in frequency.
pub fn make_phase_shifter(spec: &LineSpec, grid: &FrequencyGrid) -> Result<NPortNetwork, ComponentError> {
    if spec.z_c != DEFAULT_Z_REF {
        return Err(ComponentError::UnmatchedPhaseShifter {
            z_c: spec.z_c,
            z_ref: DEFAULT_Z_REF,
        });
    }
    make_line(spec, grid, DEFAULT_Z_REF)
}

/// Open-circuited stub placed in shunt across the line.
pub fn make_open_stub(spec: &LineSpec, grid: &FrequencyGrid, z_ref: f64) -> Result<NPortNetwork, ComponentError> {
    spec.validate()?;
    Ok(NPortNetwork::from_fn(2, z_ref, grid, |_, f| {
        // Normalized input admittance of an open stub: j·tan(βl)·z_ref/z_c.
        let y = Complex64::new(0.0, spec.beta_l(f).tan() * z_ref / spec.z_c);
        let two = Complex64::new(2.0, 0.0);
        let s11 = -y / (two + y);
        let s21 = two / (two + y);
        two_port(s11, s21, s21, s11)
    }))
}

/// Shunt open stub (if any) at port 1 followed by the series sections in
/// order, referenced to 50 Ω.
pub fn synthesize_multisection_omn(
    sections: &[LineSpec],
    shunt_stub: Option<&LineSpec>,
    grid: &FrequencyGrid,
) -> Result<NPortNetwork, ComponentError> {
    if sections.is_empty() {
        return Err(ComponentError::NoSections);
    }
    let mut parts = Vec::with_capacity(sections.len() + 1);
    if let Some(stub) = shunt_stub {
        parts.push(make_open_stub(stub, grid, DEFAULT_Z_REF)?);
    }
    for s in sections {
        parts.push(make_line(s, grid, DEFAULT_Z_REF)?);
    }
    Ok(cascade_all(&parts)?.expect("at least one section"))
}

fn check_len(what: &'static str, grid: &FrequencyGrid, actual: usize) -> Result<(), ComponentError> {
    if actual != grid.len() {
        return Err(ComponentError::SampleCount {
            what,
            expected: grid.len(),
            actual,
        });
    }
    Ok(())
}

/// A port of a block in a [`Circuit`], numbered from 1.
pub type PortRef = (usize, usize);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("block `{block}` has no port {port}")]
    NoSuchPort { block: String, port: usize },
    #[error("port {port} of block `{block}` is already connected")]
    PortInUse { block: String, port: usize },
    #[error("block `{0}` is sampled on a different grid")]
    GridMismatch(String),
}

#[derive(Debug, Clone)]
enum PortEnd {
    Linked(PortRef),
    Input(String),
    Output(String),
}

/// Netlist of named n-port blocks whose wave variables become flow-graph
/// nodes.
///
/// The wave leaving port `p` of block `X` is node `X.b<p>` (or the label
/// given to [`Circuit::observe`]); the wave entering a port is the wave
/// leaving whatever it is connected to. Unconnected ports are terminated
/// in matched loads. Only nodes reachable from a driven port are kept, and
/// S-parameters that vanish across the whole grid contribute no branch.
#[derive(Debug, Clone)]
pub struct Circuit<'a> {
    grid: FrequencyGrid,
    blocks: Vec<(String, &'a NPortNetwork)>,
    ends: BTreeMap<PortRef, PortEnd>,
}

impl<'a> Circuit<'a> {
    pub fn new(grid: &FrequencyGrid) -> Self {
        Self {
            grid: grid.clone(),
            blocks: Vec::new(),
            ends: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, name: &str, network: &'a NPortNetwork) -> Result<usize, CircuitError> {
        if network.grid() != &self.grid {
            return Err(CircuitError::GridMismatch(name.to_owned()));
        }
        self.blocks.push((name.to_owned(), network));
        Ok(self.blocks.len() - 1)
    }

    pub fn connect(&mut self, a: PortRef, b: PortRef) -> Result<&mut Self, CircuitError> {
        self.claim(a, PortEnd::Linked(b))?;
        self.claim(b, PortEnd::Linked(a))?;
        Ok(self)
    }

    /// Drives `port` from an external source node named `label`.
    pub fn drive(&mut self, label: &str, port: PortRef) -> Result<&mut Self, CircuitError> {
        self.claim(port, PortEnd::Input(label.to_owned()))?;
        Ok(self)
    }

    /// Names the wave leaving `port` and marks it as a sink. The port is
    /// otherwise a matched termination.
    pub fn observe(&mut self, label: &str, port: PortRef) -> Result<&mut Self, CircuitError> {
        self.claim(port, PortEnd::Output(label.to_owned()))?;
        Ok(self)
    }

    fn claim(&mut self, port: PortRef, end: PortEnd) -> Result<(), CircuitError> {
        let (block, p) = port;
        let (name, net) = self.blocks.get(block).ok_or_else(|| CircuitError::NoSuchPort {
            block: format!("#{block}"),
            port: p,
        })?;
        if p == 0 || p > net.n_ports() {
            return Err(CircuitError::NoSuchPort {
                block: name.clone(),
                port: p,
            });
        }
        if self.ends.contains_key(&port) {
            return Err(CircuitError::PortInUse {
                block: name.clone(),
                port: p,
            });
        }
        self.ends.insert(port, end);
        Ok(())
    }

    fn outgoing_label(&self, port: PortRef) -> String {
        match self.ends.get(&port) {
            Some(PortEnd::Output(label)) => label.clone(),
            _ => format!("{}.b{}", self.blocks[port.0].0, port.1),
        }
    }

    fn incoming_label(&self, port: PortRef) -> Option<String> {
        match self.ends.get(&port)? {
            PortEnd::Linked(other) => Some(self.outgoing_label(*other)),
            PortEnd::Input(label) => Some(label.clone()),
            PortEnd::Output(_) => None,
        }
    }

    pub fn to_flow_graph(&self) -> FlowGraph {
        // Candidate branches: incoming wave of port j -> outgoing wave of port i.
        let mut candidates: Vec<(String, String, Vec<Complex64>)> = Vec::new();
        for (bi, (_, net)) in self.blocks.iter().enumerate() {
            let n = net.n_ports();
            for j in 1..=n {
                let Some(from) = self.incoming_label((bi, j)) else {
                    continue;
                };
                for i in 1..=n {
                    let gain = net.param(i, j);
                    if gain.iter().all(|g| *g == ZERO) {
                        continue;
                    }
                    candidates.push((from.clone(), self.outgoing_label((bi, i)), gain));
                }
            }
        }
        let mut reachable: BTreeMap<String, ()> = self
            .ends
            .values()
            .filter_map(|e| match e {
                PortEnd::Input(l) => Some((l.clone(), ())),
                _ => None,
            })
            .collect();
        loop {
            let before = reachable.len();
            for (from, to, _) in &candidates {
                if reachable.contains_key(from) {
                    reachable.entry(to.clone()).or_default();
                }
            }
            if reachable.len() == before {
                break;
            }
        }
        let mut builder = FlowGraphBuilder::new(self.grid.len());
        for label in reachable.keys() {
            builder.node(label);
        }
        for end in self.ends.values() {
            if let PortEnd::Output(label) = end {
                builder.sink(label);
            }
        }
        for (from, to, gain) in candidates {
            if reachable.contains_key(&from) {
                builder
                    .branch(&from, &to, gain)
                    .expect("gains are sampled on the circuit grid");
            }
        }
        builder.build()
    }
}

/// `e^{−j·2π·f·τ}` helper used by fixtures.
pub fn delay_phasor(freq_hz: f64, tau_s: f64) -> Complex64 {
    Complex64::from_polar(1.0, -2.0 * PI * freq_hz * tau_s)
}
