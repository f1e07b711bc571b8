#![allow(dead_code)]

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use lmba_core::components::{make_coupler, make_transistor, make_two_port, CouplerSpec, TwoPortKind, TwoPortSpec};
use lmba_core::lmba::{LmbaBlocks, LmbaTopology};
use lmba_core::netcore::FrequencyGrid;
use lmba_core::sfg::{FlowGraph, FlowGraphBuilder};
use lmba_core::touchstone::{DataFormat, FreqUnit, Record, TouchstoneDocument};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn random_unit(rng: &mut StdRng) -> Complex64 {
    Complex64::from_polar(1.0, rng.gen_range(-PI..PI))
}

/// Random graph with source `s`, sink `t` and up to `max_nodes` nodes.
///
/// Gains are rescaled so every row of |A| sums to at most 0.85, which
/// bounds the spectral radius of A below 0.9 at every frequency.
pub fn random_graph(rng: &mut StdRng, max_nodes: usize, max_branches: usize, n_freq: usize) -> FlowGraph {
    let n = rng.gen_range(3..=max_nodes);
    let names: Vec<String> = (0..n)
        .map(|i| match i {
            0 => "s".to_string(),
            1 => "t".to_string(),
            _ => format!("n{i:02}"),
        })
        .collect();
    // Targets never include the source, so only n·(n−1) ordered pairs exist.
    let n_branches = rng.gen_range(n..=max_branches.max(n)).min(n * (n - 1));
    let mut pairs = BTreeSet::new();
    // Chain so the sink is usually reachable.
    let mut order: Vec<usize> = (2..n).collect();
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let mut prev = 0;
    for &v in order.iter().take(rng.gen_range(0..=order.len())) {
        pairs.insert((prev, v));
        prev = v;
    }
    pairs.insert((prev, 1));
    while pairs.len() < n_branches {
        let from = rng.gen_range(0..n);
        let to = rng.gen_range(1..n);
        pairs.insert((from, to));
    }
    let mut gains: Vec<((usize, usize), Vec<Complex64>)> = pairs
        .into_iter()
        .map(|p| {
            let g = (0..n_freq)
                .map(|_| Complex64::from_polar(rng.gen_range(0.1..1.0), rng.gen_range(-PI..PI)))
                .collect();
            (p, g)
        })
        .collect();
    for k in 0..n_freq {
        for row in 0..n {
            let sum: f64 = gains
                .iter()
                .filter(|((_, to), _)| *to == row)
                .map(|(_, g)| g[k].norm())
                .sum();
            if sum > 0.85 {
                let scale = 0.85 / sum;
                for ((_, to), g) in gains.iter_mut() {
                    if *to == row {
                        g[k] *= scale;
                    }
                }
            }
        }
    }
    let mut b = FlowGraphBuilder::new(n_freq);
    for name in &names {
        b.node(name);
    }
    for ((from, to), g) in gains {
        b.branch(&names[from], &names[to], g).unwrap();
    }
    b.sink("t");
    b.build()
}

/// Brute-force simple paths: breadth-first extension of partial paths,
/// sorted afterwards.
pub fn brute_paths(g: &FlowGraph, src: usize, dst: usize) -> Vec<Vec<usize>> {
    let mut done = Vec::new();
    let mut partial = vec![vec![src]];
    while let Some(p) = partial.pop() {
        let last = *p.last().unwrap();
        if last == dst {
            done.push(p);
            continue;
        }
        for b in g.branches() {
            if b.from == last && !p.contains(&b.to) {
                let mut q = p.clone();
                q.push(b.to);
                partial.push(q);
            }
        }
    }
    done.sort();
    done
}

/// Brute-force simple cycles: every closed simple walk from every node,
/// canonicalized by rotation and deduplicated.
pub fn brute_cycles(g: &FlowGraph) -> Vec<Vec<usize>> {
    let mut found = BTreeSet::new();
    for start in 0..g.n_nodes() {
        let mut partial = vec![vec![start]];
        while let Some(p) = partial.pop() {
            let last = *p.last().unwrap();
            for b in g.branches() {
                if b.from != last {
                    continue;
                }
                if b.to == start {
                    let min_pos = p.iter().enumerate().min_by_key(|(_, v)| **v).unwrap().0;
                    let mut rot = p[min_pos..].to_vec();
                    rot.extend_from_slice(&p[..min_pos]);
                    found.insert(rot);
                } else if !p.contains(&b.to) {
                    let mut q = p.clone();
                    q.push(b.to);
                    partial.push(q);
                }
            }
        }
    }
    found.into_iter().collect()
}

/// Random ideal blocks (matched two-ports, unilateral transistors, ideal
/// couplers); keeps the raw S21 values for closed-form
/// checks.
pub struct RandomLmba {
    pub topology: LmbaTopology,
    pub theta: Vec<f64>,
    pub phs: Vec<Complex64>,
    pub bi: Vec<Complex64>,
    pub btr: Vec<Complex64>,
    pub bo: Vec<Complex64>,
    pub ci: Vec<Complex64>,
    pub ctr: Vec<Complex64>,
    pub co: Vec<Complex64>,
}

fn random_response(rng: &mut StdRng, grid: &FrequencyGrid, mag: (f64, f64), max_delay: f64) -> Vec<Complex64> {
    let a = rng.gen_range(mag.0..mag.1);
    let tau = rng.gen_range(0.0..max_delay);
    let ripple = rng.gen_range(0.0..0.3);
    let phi0 = rng.gen_range(-PI..PI);
    grid.iter()
        .map(|f| {
            let w = 2.0 * PI * f;
            Complex64::from_polar(
                a * (1.0 + ripple * (w * 0.3e-9).sin()),
                phi0 - w * tau + ripple * (w * 0.7e-9).cos(),
            )
        })
        .collect()
}

pub fn random_lmba(rng: &mut StdRng, grid: &FrequencyGrid) -> RandomLmba {
    let tau_c = rng.gen_range(0.0..2e-9);
    let phi_c = rng.gen_range(-PI..PI);
    let theta: Vec<f64> = grid.iter().map(|f| phi_c - 2.0 * PI * f * tau_c).collect();
    let phs = random_response(rng, grid, (0.9, 1.0), 1e-9);
    let bi = random_response(rng, grid, (0.5, 1.0), 1e-9);
    let btr = random_response(rng, grid, (1.0, 6.0), 0.3e-9);
    let bo = random_response(rng, grid, (0.5, 1.0), 1e-9);
    let ci = random_response(rng, grid, (0.5, 1.0), 1e-9);
    let ctr = random_response(rng, grid, (1.0, 6.0), 0.3e-9);
    let co = random_response(rng, grid, (0.5, 1.0), 1e-9);
    let coupler = make_coupler(&CouplerSpec::new(theta.clone()), grid).unwrap();
    let matching = |s21: &Vec<Complex64>, kind| make_two_port(&TwoPortSpec::new(kind, s21.clone()), grid).unwrap();
    let topology = LmbaTopology::new(LmbaBlocks {
        input_coupler: coupler.clone(),
        output_coupler: coupler,
        phase_shifter: matching(&phs, TwoPortKind::PhaseShifter),
        ba_imn: matching(&bi, TwoPortKind::Matching),
        ba_transistor: make_transistor(btr.clone(), grid).unwrap(),
        ba_omn: matching(&bo, TwoPortKind::Matching),
        ca_imn: matching(&ci, TwoPortKind::Matching),
        ca_transistor: make_transistor(ctr.clone(), grid).unwrap(),
        ca_omn: matching(&co, TwoPortKind::Matching),
    })
    .unwrap();
    RandomLmba {
        topology,
        theta,
        phs,
        bi,
        btr,
        bo,
        ci,
        ctr,
        co,
    }
}

impl RandomLmba {
    /// `2jm²` written out from the coupler phase.
    pub fn two_j_m_squared(&self, k: usize) -> Complex64 {
        let m = Complex64::from_polar(FRAC_1_SQRT_2, self.theta[k]);
        c(0.0, 2.0) * m * m
    }

    pub fn expected_ba_gain(&self, k: usize) -> Complex64 {
        self.two_j_m_squared(k) * self.phs[k] * self.bi[k] * self.btr[k] * self.bo[k]
    }

    pub fn expected_ca_gain(&self, k: usize) -> Complex64 {
        self.two_j_m_squared(k) * self.ci[k] * self.ctr[k] * self.co[k] * self.bo[k] * self.bo[k]
    }
}

pub fn band_grid() -> FrequencyGrid {
    FrequencyGrid::linear(0.2e9, 2e9, 181).unwrap()
}

/// Random v1 document with strictly increasing frequencies and entries
/// spanning several decades of magnitude.
pub fn random_document(rng: &mut StdRng, n_ports: usize, format: DataFormat) -> TouchstoneDocument {
    let units = [FreqUnit::Hz, FreqUnit::KHz, FreqUnit::MHz, FreqUnit::GHz];
    let freq_unit = units[rng.gen_range(0..units.len())];
    let n_records = rng.gen_range(1..12);
    let mut f = rng.gen_range(1e6..1e9);
    let records = (0..n_records)
        .map(|_| {
            f += rng.gen_range(1e5..1e8);
            let s = (0..n_ports * n_ports)
                .map(|_| Complex64::from_polar(10f64.powf(rng.gen_range(-4.0..1.0)), rng.gen_range(-PI..PI)))
                .collect();
            Record { freq_hz: f, s }
        })
        .collect();
    let comments = (0..rng.gen_range(0..3)).map(|i| format!(" note {i}")).collect();
    TouchstoneDocument {
        n_ports,
        freq_unit,
        format,
        z_ref: [50.0, 75.0, 12.5][rng.gen_range(0..3)],
        records,
        comments,
    }
}

/// Largest relative deviation between two documents over frequencies and
/// every S entry.
pub fn document_deviation(a: &TouchstoneDocument, b: &TouchstoneDocument) -> f64 {
    assert_eq!(a.records.len(), b.records.len());
    let mut worst: f64 = 0.0;
    for (ra, rb) in a.records.iter().zip(&b.records) {
        worst = worst.max((ra.freq_hz - rb.freq_hz).abs() / rb.freq_hz.abs());
        for (x, y) in ra.s.iter().zip(&rb.s) {
            worst = worst.max((x - y).norm() / y.norm());
        }
    }
    worst
}

impl RandomLmba {
    /// Phase-shifter response that makes the BA and CA paths combine in
    /// phase at every frequency, scaled by `extra` (one phasor per point).
    pub fn aligning_shifter(&self, extra: &[Complex64]) -> Vec<Complex64> {
        (0..self.phs.len())
            .map(|k| {
                let want = (self.ci[k] * self.ctr[k] * self.co[k] * self.bo[k]).arg();
                let have = (self.bi[k] * self.btr[k]).arg();
                Complex64::from_polar(1.0, want - have) * extra[k]
            })
            .collect()
    }

    pub fn with_shifter(&self, phs: Vec<Complex64>) -> LmbaTopology {
        let grid = self.topology.grid().clone();
        let net = make_two_port(&TwoPortSpec::new(TwoPortKind::PhaseShifter, phs), &grid).unwrap();
        self.topology.with_phase_shifter(net).unwrap()
    }
}

/// BA load reflection written straight from the impedance expression
/// `Z = z0·(1 + √2·i_c·e^{jθ}/i_b)` and `Γ = (Z − z0)/(Z + z0)`.
pub fn gamma_direct(i_b: f64, i_c: f64, theta: f64, z0: f64) -> Complex64 {
    let z = z0 * (1.0 + Complex64::from_polar(std::f64::consts::SQRT_2 * i_c / i_b, theta));
    (z - z0) / (z + z0)
}

/// Phase-unwrapping by the textbook rule, kept separate from the library.
pub fn unwrap_oracle(deg: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(deg.len());
    let mut shift = 0.0;
    for (i, &d) in deg.iter().enumerate() {
        if i > 0 {
            let jump = d - deg[i - 1];
            shift -= 360.0 * (jump / 360.0).round();
        }
        out.push(d + shift);
    }
    out
}

/// Exhaustive minimax over phase-shifter lengths `0, step, …, 360` at `f0`:
/// returns `(length, worst |offset|)`.
pub fn brute_force_alignment(t: &LmbaTopology, f0: f64, step_deg: f64) -> (f64, f64) {
    let b = t.blocks();
    let s21 = |n: &lmba_core::netcore::NPortNetwork| n.param(2, 1);
    let (bi, btr) = (s21(&b.ba_imn), s21(&b.ba_transistor));
    let (ci, ctr, co, bo) = (s21(&b.ca_imn), s21(&b.ca_transistor), s21(&b.ca_omn), s21(&b.ba_omn));
    let freqs = t.grid().points();
    let n_steps = (360.0 / step_deg).round() as usize;
    let mut best = (f64::NAN, f64::INFINITY);
    for i in 0..=n_steps {
        let len = i as f64 * step_deg;
        let raw: Vec<f64> = (0..freqs.len())
            .map(|k| {
                let ba = bi[k] * btr[k] * Complex64::from_polar(1.0, -(len * freqs[k] / f0).to_radians());
                let ca = ci[k] * ctr[k] * co[k] * bo[k];
                (ba.arg() - ca.arg()).to_degrees()
            })
            .collect();
        let mut curve = unwrap_oracle(&raw);
        // Anchor the first point in (−180, 180].
        let k0 = -360.0 * ((curve[0] - 180.0) / 360.0).ceil();
        curve.iter_mut().for_each(|x| *x += k0);
        let worst = curve.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if worst < best.1 {
            best = (len, worst);
        }
    }
    best
}
