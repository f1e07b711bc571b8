//! JSON topology description.

use std::path::{Path, PathBuf};

use lmba_core::components::{
    linear_phase_gain, make_coupler, make_line, make_open_stub, make_phase_shifter, make_transistor, CouplerSpec,
    LineSpec,
};
use lmba_core::lmba::{make_drive_profile_with, DriveProfile, LengthSweep, LmbaBlocks, LmbaTopology};
use lmba_core::netcore::{cascade_all, FrequencyGrid, NPortNetwork, DEFAULT_Z_REF};
use lmba_core::touchstone::{ports_from_path, read_file, to_network};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couplers: Option<CouplersConfig>,
    pub blocks: BlocksConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub align: Option<AlignConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start_hz: f64,
    pub stop_hz: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplersConfig {
    pub input: CouplerConfig,
    pub output: CouplerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CouplerConfig {
    /// Ideal quadrature hybrid with a pure-delay coupling phase. Without a
    /// delay, the phase is −90° at the band midpoint.
    Ideal {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delay_s: Option<f64>,
    },
    /// Measured four-port data.
    Touchstone { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlocksConfig {
    pub phase_shifter: BlockConfig,
    pub ba_imn: BlockConfig,
    pub ba_transistor: BlockConfig,
    pub ba_omn: BlockConfig,
    pub ca_imn: BlockConfig,
    pub ca_transistor: BlockConfig,
    pub ca_omn: BlockConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineConfig {
    pub z_c: f64,
    pub length_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Element {
    Series(LineConfig),
    OpenStub(LineConfig),
}

fn yes() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BlockConfig {
    Identity {},
    /// Matched line; the only choice for a phase shifter besides data.
    Line {
        length_deg: f64,
        f0_hz: f64,
    },
    /// Series lines and shunt open stubs cascaded in order, 50 Ω reference.
    Lines {
        elements: Vec<Element>,
        f0_hz: f64,
        /// Keep only the transmission terms (S11 = S22 = 0).
        #[serde(default = "yes", skip_serializing_if = "is_true")]
        matched: bool,
    },
    Transistor {
        gain: f64,
        delay_s: f64,
    },
    Touchstone {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "is_false")]
        matched: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    pub obo_db: f64,
    pub levels: usize,
    #[serde(default = "default_load")]
    pub full_power_load: f64,
    #[serde(default)]
    pub theta_deg: f64,
}

fn default_load() -> f64 {
    2.0
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            obo_db: 10.0,
            levels: 11,
            full_power_load: default_load(),
            theta_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignConfig {
    pub start_deg: f64,
    pub stop_deg: f64,
    pub step_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f0_hz: Option<f64>,
}

/// A parsed config with the directory its relative paths are resolved in.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: TopologyConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let config = parse_config(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, base_dir })
    }

    /// Configuration equivalent to the built-in decade-band fixture.
    pub fn builtin() -> Self {
        Self {
            config: builtin_config(),
            base_dir: PathBuf::new(),
        }
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn grid(&self, points_override: Option<usize>) -> Result<FrequencyGrid, CliError> {
        let g = self.config.grid;
        FrequencyGrid::linear(g.start_hz, g.stop_hz, points_override.unwrap_or(g.points))
            .map_err(|e| CliError::Config(format!("grid: {e}")))
    }

    pub fn topology(&self, grid: &FrequencyGrid) -> Result<LmbaTopology, CliError> {
        let (input, output) = match &self.config.couplers {
            Some(c) => (self.coupler(&c.input, grid)?, self.coupler(&c.output, grid)?),
            None => {
                let ideal = CouplerConfig::Ideal { delay_s: None };
                (self.coupler(&ideal, grid)?, self.coupler(&ideal, grid)?)
            }
        };
        let b = &self.config.blocks;
        let block = |name: &str, cfg: &BlockConfig| {
            self.block(cfg, grid, name == "phase_shifter")
                .map_err(|e| e.context(&format!("blocks.{name}")))
        };
        LmbaTopology::new(LmbaBlocks {
            input_coupler: input,
            output_coupler: output,
            phase_shifter: block("phase_shifter", &b.phase_shifter)?,
            ba_imn: block("ba_imn", &b.ba_imn)?,
            ba_transistor: block("ba_transistor", &b.ba_transistor)?,
            ba_omn: block("ba_omn", &b.ba_omn)?,
            ca_imn: block("ca_imn", &b.ca_imn)?,
            ca_transistor: block("ca_transistor", &b.ca_transistor)?,
            ca_omn: block("ca_omn", &b.ca_omn)?,
        })
        .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn drive_profile(&self) -> Result<DriveProfile, CliError> {
        let d = self.config.drive.unwrap_or_default();
        make_drive_profile_with(d.obo_db, d.levels, d.full_power_load, d.theta_deg.to_radians())
            .map_err(|e| CliError::Config(format!("drive: {e}")))
    }

    pub fn length_sweep(&self, grid: &FrequencyGrid) -> LengthSweep {
        let default = LengthSweep::default_for(grid);
        match self.config.align {
            Some(a) => LengthSweep {
                start_deg: a.start_deg,
                stop_deg: a.stop_deg,
                step_deg: a.step_deg,
                f0: a.f0_hz.unwrap_or(default.f0),
            },
            None => default,
        }
    }

    fn coupler(&self, cfg: &CouplerConfig, grid: &FrequencyGrid) -> Result<NPortNetwork, CliError> {
        match cfg {
            CouplerConfig::Ideal { delay_s } => {
                let spec = match delay_s {
                    Some(tau) => CouplerSpec::linear_delay(grid, *tau),
                    None => CouplerSpec::default_for(grid),
                };
                make_coupler(&spec, grid).map_err(|e| CliError::Config(format!("couplers: {e}")))
            }
            CouplerConfig::Touchstone { path } => self.touchstone(path, 4, grid),
        }
    }

    fn block(&self, cfg: &BlockConfig, grid: &FrequencyGrid, is_shifter: bool) -> Result<NPortNetwork, CliError> {
        let bad = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());
        let net = match cfg {
            BlockConfig::Identity {} => NPortNetwork::identity_two_port(grid, DEFAULT_Z_REF),
            BlockConfig::Line { length_deg, f0_hz } => {
                let spec = LineSpec::new(DEFAULT_Z_REF, *length_deg, *f0_hz).map_err(|e| bad(&e))?;
                make_phase_shifter(&spec, grid).map_err(|e| bad(&e))?
            }
            BlockConfig::Lines {
                elements,
                f0_hz,
                matched,
            } => {
                if is_shifter {
                    return Err(CliError::Config("a phase shifter must be a matched `line`".into()));
                }
                let mut parts = Vec::with_capacity(elements.len());
                for el in elements {
                    let (l, stub) = match el {
                        Element::Series(l) => (l, false),
                        Element::OpenStub(l) => (l, true),
                    };
                    let spec = LineSpec::new(l.z_c, l.length_deg, *f0_hz).map_err(|e| bad(&e))?;
                    parts.push(
                        if stub {
                            make_open_stub(&spec, grid, DEFAULT_Z_REF)
                        } else {
                            make_line(&spec, grid, DEFAULT_Z_REF)
                        }
                        .map_err(|e| bad(&e))?,
                    );
                }
                let net = cascade_all(&parts)
                    .map_err(|e| bad(&e))?
                    .ok_or_else(|| CliError::Config("`elements` is empty".into()))?;
                if *matched {
                    net.matched_idealization().map_err(|e| bad(&e))?
                } else {
                    net
                }
            }
            BlockConfig::Transistor { gain, delay_s } => {
                if !(gain.is_finite() && delay_s.is_finite()) {
                    return Err(CliError::Config("transistor gain and delay must be finite".into()));
                }
                make_transistor(linear_phase_gain(grid, *gain, *delay_s), grid).map_err(|e| bad(&e))?
            }
            BlockConfig::Touchstone { path, matched } => {
                let net = self.touchstone(path, 2, grid)?;
                if *matched {
                    net.matched_idealization().map_err(|e| bad(&e))?
                } else {
                    net
                }
            }
        };
        Ok(net)
    }

    fn touchstone(&self, path: &Path, ports: usize, grid: &FrequencyGrid) -> Result<NPortNetwork, CliError> {
        let full = self.resolve(path);
        let shown = full.display();
        if !full.is_file() {
            return Err(CliError::Input(format!("touchstone file not found: {shown}")));
        }
        let found = ports_from_path(&full).map_err(|e| CliError::Input(format!("{shown}: {e}")))?;
        if found != ports {
            return Err(CliError::Config(format!(
                "{shown}: expected a {ports}-port file, found {found} ports"
            )));
        }
        let doc = read_file(&full).map_err(|e| CliError::Input(format!("{shown}: {e}")))?;
        to_network(&doc, grid).map_err(|e| CliError::Input(format!("{shown}: {e}")))
    }
}

pub fn parse_config(text: &str) -> Result<TopologyConfig, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

fn series(z_c: f64, length_deg: f64) -> Element {
    Element::Series(LineConfig { z_c, length_deg })
}

fn stub(z_c: f64, length_deg: f64) -> Element {
    Element::OpenStub(LineConfig { z_c, length_deg })
}

fn builtin_config() -> TopologyConfig {
    use lmba_core::fixture::{BAND_POINTS, BAND_START_HZ, BAND_STOP_HZ, F0_HZ};
    let lines = |elements| BlockConfig::Lines {
        elements,
        f0_hz: F0_HZ,
        matched: true,
    };
    TopologyConfig {
        grid: GridConfig {
            start_hz: BAND_START_HZ,
            stop_hz: BAND_STOP_HZ,
            points: BAND_POINTS,
        },
        couplers: None,
        blocks: BlocksConfig {
            phase_shifter: BlockConfig::Line {
                length_deg: 0.0,
                f0_hz: F0_HZ,
            },
            ba_imn: lines(vec![series(40.0, 60.0), series(28.0, 60.0), series(18.0, 60.0)]),
            ba_transistor: BlockConfig::Transistor {
                gain: 3.0,
                delay_s: 0.15e-9,
            },
            ba_omn: lines(vec![series(55.0, 12.0), stub(90.0, 8.0), series(50.0, 22.0)]),
            ca_imn: lines(vec![series(42.0, 55.0), series(30.0, 55.0), series(20.0, 55.0)]),
            ca_transistor: BlockConfig::Transistor {
                gain: 4.0,
                delay_s: 0.12e-9,
            },
            ca_omn: lines(vec![
                series(60.0, 14.0),
                stub(45.0, 30.0),
                stub(30.0, 45.0),
                series(43.0, 40.0),
                series(47.0, 40.0),
            ]),
        },
        drive: None,
        align: None,
    }
}
