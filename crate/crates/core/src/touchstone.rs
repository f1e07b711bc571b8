//! Touchstone v1 (`.sNp`) reader and writer.
//!
//! Supports 1- to 4-port S-parameter files in RI, MA and DB formats. Data is
//! held as complex values with frequencies in Hz; the original unit and
//! format are kept so a document is written back the way it was read.

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use thiserror::Error;

use crate::netcore::{unwrap_deg, FrequencyGrid, NPortNetwork, NetError, SMatrix, DEFAULT_Z_REF};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TouchstoneError {
    #[error("unsupported port count {0} (expected 1 to 4)")]
    PortCount(usize),
    #[error("line {line}: malformed option line: {reason}")]
    OptionLine { line: usize, reason: String },
    #[error("line {line}: Touchstone v2 keyword `{keyword}` found; only v1 files are supported")]
    Version2 { line: usize, keyword: String },
    #[error("line {line}: expected {expected} values, found {found}")]
    ValueCount { line: usize, expected: usize, found: usize },
    #[error("line {line}: cannot parse `{token}` as a number")]
    BadNumber { line: usize, token: String },
    #[error("line {line}: frequency {freq} Hz does not increase")]
    NonMonotonic { line: usize, freq: f64 },
    #[error("unexpected end of file inside the record starting on line {line}")]
    Truncated { line: usize },
    #[error("file has no data records")]
    Empty,
    #[error("cannot infer port count from file name `{0}`")]
    Extension(String),
    #[error("grid point {freq} Hz lies outside the data span {min}..{max} Hz")]
    OutOfRange { freq: f64, min: f64, max: f64 },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreqUnit {
    Hz,
    KHz,
    MHz,
    GHz,
}

impl FreqUnit {
    pub fn multiplier(self) -> f64 {
        match self {
            FreqUnit::Hz => 1.0,
            FreqUnit::KHz => 1e3,
            FreqUnit::MHz => 1e6,
            FreqUnit::GHz => 1e9,
        }
    }
}

impl fmt::Display for FreqUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FreqUnit::Hz => "Hz",
            FreqUnit::KHz => "kHz",
            FreqUnit::MHz => "MHz",
            FreqUnit::GHz => "GHz",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    /// Real, imaginary.
    RI,
    /// Linear magnitude, angle in degrees.
    MA,
    /// Magnitude in dB, angle in degrees.
    DB,
}

impl fmt::Display for DataFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataFormat::RI => "RI",
            DataFormat::MA => "MA",
            DataFormat::DB => "DB",
        })
    }
}

impl DataFormat {
    fn decode(self, x: f64, y: f64) -> Complex64 {
        match self {
            DataFormat::RI => Complex64::new(x, y),
            DataFormat::MA => Complex64::from_polar(x, y.to_radians()),
            DataFormat::DB => Complex64::from_polar(10f64.powf(x / 20.0), y.to_radians()),
        }
    }

    fn encode(self, z: Complex64) -> (f64, f64) {
        match self {
            DataFormat::RI => (z.re, z.im),
            DataFormat::MA => (z.norm(), z.arg().to_degrees()),
            DataFormat::DB => (20.0 * z.norm().max(MIN_DB_MAGNITUDE).log10(), z.arg().to_degrees()),
        }
    }
}

/// Magnitudes below this are written as -400 dB.
const MIN_DB_MAGNITUDE: f64 = 1e-20;

/// One frequency point: `s[row * n + col]` is `S(row+1)(col+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub freq_hz: f64,
    pub s: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TouchstoneDocument {
    pub n_ports: usize,
    pub freq_unit: FreqUnit,
    pub format: DataFormat,
    pub z_ref: f64,
    pub records: Vec<Record>,
    /// Comment text without the leading `!`.
    pub comments: Vec<String>,
}

impl TouchstoneDocument {
    /// Document holding the grid and matrices of `net` (first port's
    /// reference impedance).
    pub fn from_network(net: &NPortNetwork, freq_unit: FreqUnit, format: DataFormat) -> Self {
        let n = net.n_ports();
        let records = net
            .grid()
            .iter()
            .zip(net.matrices())
            .map(|(f, m)| Record {
                freq_hz: f,
                s: (0..n * n).map(|i| m[(i / n, i % n)]).collect(),
            })
            .collect();
        Self {
            n_ports: n,
            freq_unit,
            format,
            z_ref: net.z_ref()[0],
            records,
            comments: Vec::new(),
        }
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.freq_hz).collect()
    }
}

/// Port count from an `.sNp` extension.
pub fn ports_from_path(path: &Path) -> Result<usize, TouchstoneError> {
    let bad = || TouchstoneError::Extension(path.display().to_string());
    let ext = path.extension().and_then(|e| e.to_str()).ok_or_else(bad)?;
    let ext = ext.to_ascii_lowercase();
    let digits = ext
        .strip_prefix('s')
        .and_then(|r| r.strip_suffix('p'))
        .ok_or_else(bad)?;
    digits.parse().map_err(|_| bad())
}

pub fn read_file(path: &Path) -> Result<TouchstoneDocument, TouchstoneError> {
    let n = ports_from_path(path)?;
    let text = std::fs::read_to_string(path).map_err(|e| TouchstoneError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse(&text, n)
}

fn parse_options(body: &str, line: usize) -> Result<(FreqUnit, DataFormat, f64), TouchstoneError> {
    let err = |reason: String| TouchstoneError::OptionLine { line, reason };
    let mut unit = FreqUnit::GHz;
    let mut format = DataFormat::MA;
    let mut z_ref = DEFAULT_Z_REF;
    let mut tokens = body.split_whitespace();
    while let Some(tok) = tokens.next() {
        match tok.to_ascii_uppercase().as_str() {
            "HZ" => unit = FreqUnit::Hz,
            "KHZ" => unit = FreqUnit::KHz,
            "MHZ" => unit = FreqUnit::MHz,
            "GHZ" => unit = FreqUnit::GHz,
            "S" => {}
            "Y" | "Z" | "H" | "G" => return Err(err(format!("parameter type `{tok}` is not supported, only S"))),
            "RI" => format = DataFormat::RI,
            "MA" => format = DataFormat::MA,
            "DB" => format = DataFormat::DB,
            "R" => {
                let v = tokens.next().ok_or_else(|| err("missing value after R".into()))?;
                z_ref = v
                    .parse::<f64>()
                    .ok()
                    .filter(|z| z.is_finite() && *z > 0.0)
                    .ok_or_else(|| err(format!("invalid reference impedance `{v}`")))?;
            }
            _ => return Err(err(format!("unknown token `{tok}`"))),
        }
    }
    Ok((unit, format, z_ref))
}

/// Parses Touchstone v1 text for an `n_ports`-port file.
///
/// 1- and 2-port records sit on one line. For 3 and 4 ports each matrix row
/// is on its own line, the first also carrying the frequency.
pub fn parse(text: &str, n_ports: usize) -> Result<TouchstoneDocument, TouchstoneError> {
    if !(1..=4).contains(&n_ports) {
        return Err(TouchstoneError::PortCount(n_ports));
    }
    let mut options: Option<(FreqUnit, DataFormat, f64)> = None;
    let mut comments = Vec::new();
    let mut records: Vec<Record> = Vec::new();
    let lines_per_record = if n_ports <= 2 { 1 } else { n_ports };
    let values_per_line = if n_ports <= 2 {
        2 * n_ports * n_ports
    } else {
        2 * n_ports
    };
    // (first line number, values collected so far)
    let mut pending: Option<(usize, Vec<f64>)> = None;
    let mut lines_in_pending = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let (content, comment) = match raw.find('!') {
            Some(pos) => (&raw[..pos], Some(&raw[pos + 1..])),
            None => (raw, None),
        };
        if let Some(c) = comment {
            comments.push(c.to_owned());
        }
        let content = content.trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            let keyword = content.split(']').next().unwrap_or(content).to_owned() + "]";
            return Err(TouchstoneError::Version2 { line: line_no, keyword });
        }
        if let Some(body) = content.strip_prefix('#') {
            if pending.is_some() || !records.is_empty() {
                return Err(TouchstoneError::OptionLine {
                    line: line_no,
                    reason: "option line must precede the data".into(),
                });
            }
            if options.is_none() {
                options = Some(parse_options(body, line_no)?);
            }
            continue;
        }
        let values = content
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|_| TouchstoneError::BadNumber {
                    line: line_no,
                    token: t.to_owned(),
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        let first = pending.is_none();
        let expected = values_per_line + usize::from(first);
        if values.len() != expected {
            return Err(TouchstoneError::ValueCount {
                line: line_no,
                expected,
                found: values.len(),
            });
        }
        let (_, buf) = pending.get_or_insert_with(|| (line_no, Vec::new()));
        buf.extend(values);
        lines_in_pending += 1;
        if lines_in_pending == lines_per_record {
            let (start, buf) = pending.take().unwrap();
            lines_in_pending = 0;
            let (unit, format, _) = options.unwrap_or((FreqUnit::GHz, DataFormat::MA, DEFAULT_Z_REF));
            let freq_hz = buf[0] * unit.multiplier();
            if let Some(prev) = records.last() {
                if freq_hz <= prev.freq_hz {
                    return Err(TouchstoneError::NonMonotonic {
                        line: start,
                        freq: freq_hz,
                    });
                }
            }
            let pairs: Vec<Complex64> = buf[1..].chunks_exact(2).map(|p| format.decode(p[0], p[1])).collect();
            records.push(Record {
                freq_hz,
                s: to_row_major(&pairs, n_ports),
            });
        }
    }
    if let Some((line, _)) = pending {
        return Err(TouchstoneError::Truncated { line });
    }
    let (freq_unit, format, z_ref) = options.unwrap_or((FreqUnit::GHz, DataFormat::MA, DEFAULT_Z_REF));
    Ok(TouchstoneDocument {
        n_ports,
        freq_unit,
        format,
        z_ref,
        records,
        comments,
    })
}

/// 2-port files list S11 S21 S12 S22; everything else is row-major already.
fn to_row_major(pairs: &[Complex64], n: usize) -> Vec<Complex64> {
    if n == 2 {
        vec![pairs[0], pairs[2], pairs[1], pairs[3]]
    } else {
        pairs.to_vec()
    }
}

fn file_order(s: &[Complex64], n: usize) -> Vec<Complex64> {
    // The 2-port permutation is its own inverse.
    to_row_major(s, n)
}

fn num(x: f64) -> String {
    format!("{x:.12e}")
}

/// Canonical v1 text: comments, option line, then one record per frequency
/// with 13 significant digits.
pub fn serialize(doc: &TouchstoneDocument) -> String {
    let mut out = String::new();
    for c in &doc.comments {
        let _ = writeln!(out, "!{c}");
    }
    let _ = writeln!(out, "# {} S {} R {}", doc.freq_unit, doc.format, fmt_plain(doc.z_ref));
    let n = doc.n_ports;
    for r in &doc.records {
        let values = file_order(&r.s, n);
        let mut fields: Vec<String> = Vec::with_capacity(1 + 2 * values.len());
        fields.push(num(r.freq_hz / doc.freq_unit.multiplier()));
        for v in &values {
            let (a, b) = doc.format.encode(*v);
            fields.push(num(a));
            fields.push(num(b));
        }
        if n <= 2 {
            let _ = writeln!(out, "{}", fields.join(" "));
        } else {
            let _ = writeln!(out, "{} {}", fields[0], fields[1..1 + 2 * n].join(" "));
            for row in 1..n {
                let start = 1 + 2 * n * row;
                let _ = writeln!(out, "{}", fields[start..start + 2 * n].join(" "));
            }
        }
    }
    out
}

fn fmt_plain(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

/// Resamples the document onto `grid` by linear interpolation of magnitude
/// and unwrapped phase, per matrix entry. Grid points matching a stored
/// frequency exactly take the stored value unchanged.
pub fn to_network(doc: &TouchstoneDocument, grid: &FrequencyGrid) -> Result<NPortNetwork, TouchstoneError> {
    if doc.records.is_empty() {
        return Err(TouchstoneError::Empty);
    }
    let freqs = doc.frequencies();
    let (min, max) = (freqs[0], freqs[freqs.len() - 1]);
    if let Some(&freq) = grid.points().iter().find(|&&f| f < min || f > max) {
        return Err(TouchstoneError::OutOfRange { freq, min, max });
    }
    let n = doc.n_ports;
    let entries = n * n;
    let mags: Vec<Vec<f64>> = (0..entries)
        .map(|e| doc.records.iter().map(|r| r.s[e].norm()).collect())
        .collect();
    let phases: Vec<Vec<f64>> = (0..entries)
        .map(|e| {
            let raw: Vec<f64> = doc.records.iter().map(|r| r.s[e].arg().to_degrees()).collect();
            unwrap_deg(&raw)
        })
        .collect();

    let mut matrices = Vec::with_capacity(grid.len());
    for f in grid.iter() {
        let hi = freqs.partition_point(|&x| x < f);
        let m = if freqs[hi] == f {
            let r = &doc.records[hi];
            SMatrix::from_fn(n, n, |i, j| r.s[i * n + j])
        } else {
            let lo = hi - 1;
            let t = (f - freqs[lo]) / (freqs[hi] - freqs[lo]);
            SMatrix::from_fn(n, n, |i, j| {
                let e = i * n + j;
                let mag = mags[e][lo] + t * (mags[e][hi] - mags[e][lo]);
                let ph = phases[e][lo] + t * (phases[e][hi] - phases[e][lo]);
                Complex64::from_polar(mag, ph.to_radians())
            })
        };
        matrices.push(m);
    }
    Ok(NPortNetwork::with_uniform_ref(n, doc.z_ref, grid.clone(), matrices)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_two_port_ma() {
        let doc = parse("# GHz S MA R 50\n1.0 0 0 1 0 1 0 0 0\n", 2).unwrap();
        assert_eq!(doc.records.len(), 1);
        let r = &doc.records[0];
        assert_eq!(r.freq_hz, 1e9);
        assert_eq!(r.s[2], c(1.0, 0.0)); // S21
        assert_eq!(r.s[1], c(1.0, 0.0)); // S12
        assert_eq!(r.s[0].norm(), 0.0);
    }

    #[test]
    fn column_order_for_two_ports() {
        let doc = parse("# Hz S RI\n1 11 0 21 0 12 0 22 0\n", 2).unwrap();
        let s: Vec<f64> = doc.records[0].s.iter().map(|z| z.re).collect();
        assert_eq!(s, vec![11.0, 12.0, 21.0, 22.0]);
    }

    #[test]
    fn db_entry() {
        let doc = parse("# MHz S DB R 50\n100 0 90\n", 1).unwrap();
        let z = doc.records[0].s[0];
        assert!((z - c(0.0, 1.0)).norm() < 1e-15);
        assert_eq!(doc.records[0].freq_hz, 100e6);
    }

    #[test]
    fn defaults_without_option_line() {
        let doc = parse("! just data\n2 0.5 180\n", 1).unwrap();
        assert_eq!(doc.freq_unit, FreqUnit::GHz);
        assert_eq!(doc.format, DataFormat::MA);
        assert_eq!(doc.z_ref, 50.0);
        assert_eq!(doc.comments, vec![" just data".to_string()]);
        assert!((doc.records[0].s[0] - c(-0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn whitespace_and_comments_do_not_matter() {
        let a = parse("# GHz S RI R 50\n1 0.1 0.2\n2 0.3 0.4\n", 1).unwrap();
        let b = parse(
            "!hdr\n#\tghz  s ri r 50 ! trailing\n\n1\t0.1   0.2 ! x\n  2 0.3\t0.4\n",
            1,
        )
        .unwrap();
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn four_port_layout() {
        let mut text = String::from("# GHz S RI R 50\n");
        for f in [1, 2] {
            for row in 0..4 {
                if row == 0 {
                    text.push_str(&format!("{f} "));
                }
                let vals: Vec<String> = (0..4)
                    .flat_map(|col| vec![format!("{}", row * 4 + col), "0".to_string()])
                    .collect();
                text.push_str(&vals.join(" "));
                text.push('\n');
            }
        }
        let doc = parse(&text, 4).unwrap();
        assert_eq!(doc.records.len(), 2);
        assert_eq!(doc.records[1].s[7], c(7.0, 0.0));
        let out = serialize(&doc);
        assert_eq!(out.lines().count(), 1 + 8);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert!(matches!(
            parse("# GHz S XX\n", 1),
            Err(TouchstoneError::OptionLine { line: 1, .. })
        ));
        assert!(matches!(
            parse("# GHz Z MA\n", 1),
            Err(TouchstoneError::OptionLine { line: 1, .. })
        ));
        assert!(matches!(
            parse("# GHz S MA R\n", 1),
            Err(TouchstoneError::OptionLine { line: 1, .. })
        ));
        assert_eq!(
            parse("# GHz S MA\n1 0 0\n1 0 0\n", 1),
            Err(TouchstoneError::NonMonotonic { line: 3, freq: 1e9 })
        );
        assert_eq!(
            parse("# GHz S MA\n\n1 0 0 1\n", 1),
            Err(TouchstoneError::ValueCount {
                line: 3,
                expected: 3,
                found: 4
            })
        );
        assert!(matches!(
            parse("1 0 0 abc 0 0 0 0 0\n", 2),
            Err(TouchstoneError::BadNumber { line: 1, .. })
        ));
        assert!(matches!(
            parse("[Version] 2.0\n# GHz S MA\n", 2),
            Err(TouchstoneError::Version2 { line: 1, .. })
        ));
        assert!(matches!(
            parse("1 0 0 0 0 0 0 0\n", 4),
            Err(TouchstoneError::ValueCount {
                line: 1,
                expected: 9,
                found: 8
            })
        ));
        let three_lines = "1 0 0 0 0 0 0 0 0\n0 0 0 0 0 0 0 0\n0 0 0 0 0 0 0 0\n";
        assert_eq!(parse(three_lines, 4), Err(TouchstoneError::Truncated { line: 1 }));
        assert_eq!(parse("", 5), Err(TouchstoneError::PortCount(5)));
        assert!(matches!(
            parse("1 0 0\n# GHz S MA\n", 1),
            Err(TouchstoneError::OptionLine { line: 2, .. })
        ));
    }

    #[test]
    fn serialize_starts_with_option_line() {
        let doc = parse("# MHz S DB R 75\n10 -3 45\n", 1).unwrap();
        let text = serialize(&doc);
        assert!(text.starts_with("# MHz S DB R 75\n"));
        assert_eq!(parse(&text, 1).unwrap().z_ref, 75.0);
    }

    #[test]
    fn port_count_from_extension() {
        assert_eq!(ports_from_path(Path::new("a/b/coupler.s4p")).unwrap(), 4);
        assert_eq!(ports_from_path(Path::new("x.S2P")).unwrap(), 2);
        assert!(ports_from_path(Path::new("x.txt")).is_err());
    }

    #[test]
    fn resample_exact_and_midpoint() {
        let doc = parse("# GHz S MA\n1 1 10\n2 3 30\n", 1).unwrap();
        let grid = FrequencyGrid::new(vec![1e9, 1.5e9, 2e9]).unwrap();
        let net = to_network(&doc, &grid).unwrap();
        assert_eq!(net.at(0)[(0, 0)], doc.records[0].s[0]);
        assert_eq!(net.at(2)[(0, 0)], doc.records[1].s[0]);
        let mid = net.at(1)[(0, 0)];
        assert!((mid.norm() - 2.0).abs() < 1e-12);
        assert!((mid.arg().to_degrees() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn resample_through_wrap() {
        let doc = parse("# GHz S MA\n1 1 170\n2 1 -170\n", 1).unwrap();
        let grid = FrequencyGrid::new(vec![1.5e9]).unwrap();
        let z = to_network(&doc, &grid).unwrap().at(0)[(0, 0)];
        assert!((z - c(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn resample_refuses_extrapolation() {
        let doc = parse("# GHz S MA\n1 1 0\n2 1 0\n", 1).unwrap();
        let grid = FrequencyGrid::new(vec![0.5e9, 1.5e9]).unwrap();
        assert!(matches!(
            to_network(&doc, &grid),
            Err(TouchstoneError::OutOfRange { .. })
        ));
    }
}
