//! Decade-band (0.2–2 GHz) amplifier fixture built from idealized
//! transmission-line networks.
//!
//! The CA output network is a device-parasitic pre-section (series line and
//! shunt stub) followed by a shunt open stub and two series lines forming a
//! 40 Ω to 50 Ω transformer. The BA output network is a parasitic
//! pre-section and a short 50 Ω line. Input networks are multisection
//! transformers. Every passive block enters the topology through its
//! matched idealization (S11 = S22 = 0).

use crate::components::{
    linear_phase_gain, make_coupler, make_phase_shifter, make_transistor, synthesize_multisection_omn, CouplerSpec,
    LineSpec,
};
use crate::lmba::{LmbaBlocks, LmbaError, LmbaTopology};
use crate::netcore::{cascade, FrequencyGrid, NPortNetwork};

pub const BAND_START_HZ: f64 = 0.2e9;
pub const BAND_STOP_HZ: f64 = 2.0e9;
pub const BAND_POINTS: usize = 181;
/// Reference frequency for all electrical lengths in the fixture.
pub const F0_HZ: f64 = 1.1e9;

pub fn band_grid() -> FrequencyGrid {
    FrequencyGrid::linear(BAND_START_HZ, BAND_STOP_HZ, BAND_POINTS).expect("static band is valid")
}

fn line(z_c: f64, deg: f64) -> LineSpec {
    LineSpec::new(z_c, deg, F0_HZ).expect("static line is valid")
}

/// Series line followed by a shunt open stub at its far end.
fn parasitic_section(grid: &FrequencyGrid, series: LineSpec, stub: LineSpec) -> Result<NPortNetwork, LmbaError> {
    let s = synthesize_multisection_omn(&[series], None, grid)?;
    let p = synthesize_multisection_omn(&[line(50.0, 0.0)], Some(&stub), grid)?;
    Ok(cascade(&s, &p)?)
}

pub fn ca_omn(grid: &FrequencyGrid) -> Result<NPortNetwork, LmbaError> {
    let parasitics = parasitic_section(grid, line(60.0, 14.0), line(45.0, 30.0))?;
    let matching = synthesize_multisection_omn(&[line(43.0, 40.0), line(47.0, 40.0)], Some(&line(30.0, 45.0)), grid)?;
    Ok(cascade(&parasitics, &matching)?)
}

pub fn ba_omn(grid: &FrequencyGrid) -> Result<NPortNetwork, LmbaError> {
    let parasitics = parasitic_section(grid, line(55.0, 12.0), line(90.0, 8.0))?;
    let short = synthesize_multisection_omn(&[line(50.0, 22.0)], None, grid)?;
    Ok(cascade(&parasitics, &short)?)
}

pub fn ba_imn(grid: &FrequencyGrid) -> Result<NPortNetwork, LmbaError> {
    Ok(synthesize_multisection_omn(
        &[line(40.0, 60.0), line(28.0, 60.0), line(18.0, 60.0)],
        None,
        grid,
    )?)
}

pub fn ca_imn(grid: &FrequencyGrid) -> Result<NPortNetwork, LmbaError> {
    Ok(synthesize_multisection_omn(
        &[line(42.0, 55.0), line(30.0, 55.0), line(20.0, 55.0)],
        None,
        grid,
    )?)
}

/// The fixture with a zero-length phase shifter and the default ideal
/// couplers.
pub fn decade_fixture(grid: &FrequencyGrid) -> Result<LmbaTopology, LmbaError> {
    let coupler = make_coupler(&CouplerSpec::default_for(grid), grid)?;
    LmbaTopology::new(LmbaBlocks {
        input_coupler: coupler.clone(),
        output_coupler: coupler,
        phase_shifter: make_phase_shifter(&line(50.0, 0.0), grid)?,
        ba_imn: ba_imn(grid)?.matched_idealization()?,
        ba_transistor: make_transistor(linear_phase_gain(grid, 3.0, 0.15e-9), grid)?,
        ba_omn: ba_omn(grid)?.matched_idealization()?,
        ca_imn: ca_imn(grid)?.matched_idealization()?,
        ca_transistor: make_transistor(linear_phase_gain(grid, 4.0, 0.12e-9), grid)?,
        ca_omn: ca_omn(grid)?.matched_idealization()?,
    })
}
