//! Frequency grids and n-port S-parameter networks.
//!
//! Every network in the simulator is sampled on a single shared
//! [`FrequencyGrid`]; per-frequency operations are plain matrix algebra on
//! rectangular complex values.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// Complex S-matrix at a single frequency.
pub type SMatrix = DMatrix<Complex64>;

/// Default system reference impedance in ohms.
pub const DEFAULT_Z_REF: f64 = 50.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("frequency grid is empty")]
    EmptyGrid,
    #[error("frequency grid point {index} ({value} Hz) is not positive and finite")]
    NonPositiveFrequency { index: usize, value: f64 },
    #[error("frequency grid not strictly increasing at index {index}")]
    NotIncreasing { index: usize },
    #[error("grids differ between networks")]
    GridMismatch,
    #[error("reference impedances differ between networks")]
    ZRefMismatch,
    #[error("expected a {expected}-port network, got {actual} ports")]
    PortCount { expected: usize, actual: usize },
    #[error("reference impedance {0} must be positive and finite")]
    BadZRef(f64),
    #[error("expected {expected} matrices (one per grid point), got {actual}")]
    MatrixCount { expected: usize, actual: usize },
    #[error("matrix at grid index {index} is not {n}x{n}")]
    MatrixShape { index: usize, n: usize },
    #[error("cascade is singular at grid index {index} (1 - S22a*S11b = 0)")]
    SingularCascade { index: usize },
}

/// Ordered, strictly increasing set of analysis frequencies in Hz.
///
/// Cloning is cheap; the points are shared.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    points: Arc<[f64]>,
}

impl FrequencyGrid {
    pub fn new(points: Vec<f64>) -> Result<Self, NetError> {
        if points.is_empty() {
            return Err(NetError::EmptyGrid);
        }
        for (index, &value) in points.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(NetError::NonPositiveFrequency { index, value });
            }
            if index > 0 && value <= points[index - 1] {
                return Err(NetError::NotIncreasing { index });
            }
        }
        Ok(Self { points: points.into() })
    }

    /// `n` evenly spaced points from `start` to `stop` inclusive.
    pub fn linear(start_hz: f64, stop_hz: f64, n: usize) -> Result<Self, NetError> {
        match n {
            0 => Err(NetError::EmptyGrid),
            1 => Self::new(vec![start_hz]),
            _ => {
                let step = (stop_hz - start_hz) / (n - 1) as f64;
                let mut pts: Vec<f64> = (0..n).map(|i| start_hz + step * i as f64).collect();
                pts[n - 1] = stop_hz;
                Self::new(pts)
            }
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.points[0]
    }

    pub fn stop(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Arithmetic midpoint of the band.
    pub fn mid(&self) -> f64 {
        0.5 * (self.start() + self.stop())
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().copied()
    }

    pub fn omega(&self, index: usize) -> f64 {
        2.0 * PI * self.points[index]
    }
}

/// Per-frequency complex S-matrix with port count and per-port reference
/// impedance.
///
/// Passivity and reciprocity are not enforced: the transistor model is
/// active and non-reciprocal. Use [`check_reciprocal`] to test for it.
#[derive(Debug, Clone, PartialEq)]
pub struct NPortNetwork {
    n_ports: usize,
    z_ref: Vec<f64>,
    grid: FrequencyGrid,
    s: Vec<SMatrix>,
}

impl NPortNetwork {
    pub fn new(n_ports: usize, z_ref: Vec<f64>, grid: FrequencyGrid, s: Vec<SMatrix>) -> Result<Self, NetError> {
        if n_ports == 0 {
            return Err(NetError::PortCount { expected: 1, actual: 0 });
        }
        if z_ref.len() != n_ports {
            return Err(NetError::PortCount {
                expected: n_ports,
                actual: z_ref.len(),
            });
        }
        if let Some(&bad) = z_ref.iter().find(|z| !(z.is_finite() && **z > 0.0)) {
            return Err(NetError::BadZRef(bad));
        }
        if s.len() != grid.len() {
            return Err(NetError::MatrixCount {
                expected: grid.len(),
                actual: s.len(),
            });
        }
        if let Some(index) = s.iter().position(|m| m.nrows() != n_ports || m.ncols() != n_ports) {
            return Err(NetError::MatrixShape { index, n: n_ports });
        }
        Ok(Self {
            n_ports,
            z_ref,
            grid,
            s,
        })
    }

    /// Network with the same reference impedance on every port.
    pub fn with_uniform_ref(
        n_ports: usize,
        z_ref: f64,
        grid: FrequencyGrid,
        s: Vec<SMatrix>,
    ) -> Result<Self, NetError> {
        Self::new(n_ports, vec![z_ref; n_ports], grid, s)
    }

    /// Builds a network by evaluating `f(grid_index, freq_hz)` at each point.
    pub fn from_fn<F>(n_ports: usize, z_ref: f64, grid: &FrequencyGrid, mut f: F) -> Self
    where
        F: FnMut(usize, f64) -> SMatrix,
    {
        let s = grid.iter().enumerate().map(|(i, fr)| f(i, fr)).collect();
        Self::with_uniform_ref(n_ports, z_ref, grid.clone(), s).expect("from_fn closure must return n x n matrices")
    }

    /// Through connection: S21 = S12 = 1, S11 = S22 = 0.
    pub fn identity_two_port(grid: &FrequencyGrid, z_ref: f64) -> Self {
        Self::from_fn(2, z_ref, grid, |_, _| two_port(ZERO, ONE, ONE, ZERO))
    }

    pub fn n_ports(&self) -> usize {
        self.n_ports
    }

    pub fn z_ref(&self) -> &[f64] {
        &self.z_ref
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn matrices(&self) -> &[SMatrix] {
        &self.s
    }

    pub fn at(&self, index: usize) -> &SMatrix {
        &self.s[index]
    }

    /// `S[to][from]` across the grid, with 1-based port numbers as written
    /// in datasheets (`param(2, 1)` is S21).
    pub fn param(&self, to: usize, from: usize) -> Vec<Complex64> {
        self.s.iter().map(|m| m[(to - 1, from - 1)]).collect()
    }

    /// Keeps only S21/S12 of a two-port, dropping port reflections.
    pub fn matched_idealization(&self) -> Result<Self, NetError> {
        self.expect_ports(2)?;
        let s = self
            .s
            .iter()
            .map(|m| two_port(ZERO, m[(1, 0)], m[(0, 1)], ZERO))
            .collect();
        Self::new(2, self.z_ref.clone(), self.grid.clone(), s)
    }

    pub(crate) fn expect_ports(&self, n: usize) -> Result<(), NetError> {
        if self.n_ports != n {
            return Err(NetError::PortCount {
                expected: n,
                actual: self.n_ports,
            });
        }
        Ok(())
    }
}

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Two-port matrix from its four entries.
pub fn two_port(s11: Complex64, s21: Complex64, s12: Complex64, s22: Complex64) -> SMatrix {
    SMatrix::from_row_slice(2, 2, &[s11, s12, s21, s22])
}

/// Connects port 2 of `a` to port 1 of `b`.
///
/// Uses the closed-form S-parameter cascade; the result is associative up to
/// rounding.
pub fn cascade(a: &NPortNetwork, b: &NPortNetwork) -> Result<NPortNetwork, NetError> {
    a.expect_ports(2)?;
    b.expect_ports(2)?;
    if a.grid != b.grid {
        return Err(NetError::GridMismatch);
    }
    if a.z_ref != b.z_ref {
        return Err(NetError::ZRefMismatch);
    }
    let mut out = Vec::with_capacity(a.grid.len());
    for (index, (ma, mb)) in a.s.iter().zip(&b.s).enumerate() {
        let (a11, a12, a21, a22) = (ma[(0, 0)], ma[(0, 1)], ma[(1, 0)], ma[(1, 1)]);
        let (b11, b12, b21, b22) = (mb[(0, 0)], mb[(0, 1)], mb[(1, 0)], mb[(1, 1)]);
        let denom = ONE - a22 * b11;
        if denom == ZERO {
            return Err(NetError::SingularCascade { index });
        }
        // When either inner reflection vanishes the result is assembled
        // without dividing, so identity cascades are bit-exact.
        let (s11, s21, s12, s22) = if a22 == ZERO || b11 == ZERO {
            (a11 + a12 * a21 * b11, a21 * b21, a12 * b12, b22 + b21 * b12 * a22)
        } else {
            (
                a11 + a12 * a21 * b11 / denom,
                a21 * b21 / denom,
                a12 * b12 / denom,
                b22 + b21 * b12 * a22 / denom,
            )
        };
        out.push(two_port(s11, s21, s12, s22));
    }
    NPortNetwork::new(2, a.z_ref.clone(), a.grid.clone(), out)
}

/// Cascades a non-empty chain of two-ports left to right.
pub fn cascade_all<'a, I>(networks: I) -> Result<Option<NPortNetwork>, NetError>
where
    I: IntoIterator<Item = &'a NPortNetwork>,
{
    let mut acc: Option<NPortNetwork> = None;
    for n in networks {
        acc = Some(match acc {
            None => n.clone(),
            Some(prev) => cascade(&prev, n)?,
        });
    }
    Ok(acc)
}

/// True iff `max over grid ‖S − Sᵀ‖∞ ≤ tol` (maximum absolute row sum).
pub fn check_reciprocal(n: &NPortNetwork, tol: f64) -> bool {
    n.s.iter().all(|m| {
        let diff = m - m.transpose();
        let norm = diff
            .row_iter()
            .map(|row| row.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        norm <= tol
    })
}

/// Phase of `z` in degrees, in (−180, 180].
pub fn phase_deg(z: Complex64) -> f64 {
    z.arg().to_degrees()
}

/// Removes 360° jumps larger than 180° between consecutive samples.
pub fn unwrap_deg(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut offset = 0.0;
    for (i, &p) in phases.iter().enumerate() {
        if i > 0 {
            let prev = phases[i - 1];
            let jump = p - prev;
            if jump > 180.0 {
                offset -= 360.0 * ((jump - 180.0) / 360.0).ceil();
            } else if jump < -180.0 {
                offset += 360.0 * ((-jump - 180.0) / 360.0).ceil();
            }
        }
        out.push(p + offset);
    }
    out
}
