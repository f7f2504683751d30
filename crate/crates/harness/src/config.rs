//! Flat `key = value` run configuration.
//!
//! Lines starting with `#` are comments. Command-line `--set key=value` overrides
//! are applied after the file. Unknown keys are rejected.
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `method` | scenario dependent | `impedance` or `dtn` |
//! | `scenario` | `two_layer` | `circular`, `planewave`, `two_layer`, `custom` |
//! | `k` | 10 (circular, planewave), 5 (two_layer), 2 (custom) | wavenumber |
//! | `theta` | −π/3 (two_layer), −π/4 (custom) | incidence angle in (−π, 0) |
//! | `H` | 3 (two_layer), geometry dependent (custom) | strip half-height |
//! | `h` | 1.5 | mesh size target |
//! | `p` | 3 | plane waves per element |
//! | `M` | 100 | DtN truncation |
//! | `p_range` | `3..27` | `a..b` or `a..b:step`, inclusive |
//! | `h_list` | `1.5,0.75,0.375` | sizes for `sweep-h` |
//! | `m_list` | `5,10,25,50,100` | truncations for `sweep-m` |
//! | `alpha`, `beta`, `delta` | 0.5 | flux parameters (UWVF) |
//! | `xi` | 1 | circular-wave order |
//! | `direction` | π/4 | plane-wave direction angle |
//! | `eps2` | `(1.27+0.05i)^2` | lower permittivity of `two_layer` |
//! | `eps.N` | geometry dependent | permittivity of region N |
//! | `geometry` | `step` | built-in `custom` geometry: `step` or `bao` |
//! | `mesh` | none | mesh file for `custom`, replaces `geometry` |
//! | `duffy_order` | 10 | triangle quadrature order for error norms |
//! | `gl_points` | 10 | Gauss–Legendre points for boundary data |
//! | `data_quadrature` | `graded` | `graded` or `edge` rule for sampled data |
//! | `timing` | false | record wall time in the `seconds` column |
//! | `diff_p` | none | `field` also dumps the difference to this p |

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use pwdg_core::basis::FluxParams;

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Impedance,
    Dtn,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Impedance => "impedance",
            Method::Dtn => "dtn",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Geometry {
    Step,
    Bao,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Scenario {
    Circular { xi: f64 },
    PlaneWave { angle: f64 },
    TwoLayer { eps2: Complex64 },
    Custom { mesh: Option<PathBuf>, geometry: Geometry, eps: BTreeMap<usize, Complex64> },
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Circular { .. } => "circular",
            Scenario::PlaneWave { .. } => "planewave",
            Scenario::TwoLayer { .. } => "two_layer",
            Scenario::Custom { .. } => "custom",
        }
    }

    pub fn has_oracle(&self) -> bool {
        !matches!(self, Scenario::Custom { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub scenario: Scenario,
    pub k: f64,
    pub theta: f64,
    pub half_height: f64,
    pub h: f64,
    pub p: usize,
    pub m: usize,
    pub p_range: Vec<usize>,
    pub h_list: Vec<f64>,
    pub m_list: Vec<usize>,
    pub flux: FluxParams,
    pub duffy_order: usize,
    pub gl_points: usize,
    pub edge_data_rule: bool,
    pub timing: bool,
    pub diff_p: Option<usize>,
}

const KEYS: &[&str] = &[
    "method", "scenario", "k", "theta", "H", "h", "p", "M", "p_range", "h_list", "m_list", "alpha", "beta",
    "delta", "xi", "direction", "eps2", "geometry", "mesh", "duffy_order", "gl_points", "data_quadrature",
    "timing", "diff_p",
];

fn bad(key: &str, value: &str) -> HarnessError {
    HarnessError::Config(format!("invalid value '{value}' for key '{key}'"))
}

/// Parses `a`, `a+bi`, `a-bi`, `bi`, optionally wrapped as `(…)^2`.
pub fn parse_complex(s: &str) -> Option<Complex64> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if let Some(inner) = s.strip_suffix("^2") {
        let inner = inner.strip_prefix('(')?.strip_suffix(')')?;
        return parse_complex(inner).map(|z| z * z);
    }
    if let Some(body) = s.strip_suffix('i') {
        let split = body
            .char_indices()
            .skip(1)
            .filter(|&(i, c)| (c == '+' || c == '-') && !matches!(body.as_bytes()[i - 1], b'e' | b'E'))
            .map(|(i, _)| i)
            .last();
        return match split {
            Some(i) => {
                let re = body[..i].parse().ok()?;
                let im = parse_imag(&body[i..])?;
                Some(Complex64::new(re, im))
            }
            None => Some(Complex64::new(0.0, parse_imag(body)?)),
        };
    }
    s.parse().ok().map(|re| Complex64::new(re, 0.0))
}

fn parse_imag(s: &str) -> Option<f64> {
    match s {
        "" | "+" => Some(1.0),
        "-" => Some(-1.0),
        _ => s.parse().ok(),
    }
}

/// Real number, also accepting fractions such as `2/3` and angles such as `-pi/3` or `2pi`.
pub fn parse_real(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse() {
        return Some(v);
    }
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d.trim().parse::<f64>().ok()?),
        None => (s, 1.0),
    };
    if let Ok(v) = num.trim().parse::<f64>() {
        return Some(v / den);
    }
    let coef = num.trim().strip_suffix("pi")?.trim();
    let c = match coef {
        "" | "+" => 1.0,
        "-" => -1.0,
        _ => coef.trim_end_matches('*').parse().ok()?,
    };
    Some(c * PI / den)
}

fn parse_range(s: &str) -> Option<Vec<usize>> {
    let (span, step) = match s.split_once(':') {
        Some((a, b)) => (a, b.trim().parse().ok()?),
        None => (s, 1usize),
    };
    let (a, b) = span.split_once("..")?;
    let (a, b): (usize, usize) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
    if step == 0 || a > b {
        return None;
    }
    Some((a..=b).step_by(step).collect())
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Option<Vec<T>> {
    let v: Option<Vec<T>> = s.split(',').map(|x| x.trim().parse().ok()).collect();
    v.filter(|v| !v.is_empty())
}

/// Raw key/value pairs in insertion order, later entries overriding earlier ones.
#[derive(Clone, Debug, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse_str(text: &str) -> Result<RawConfig> {
        let mut raw = RawConfig::default();
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            raw.set_line(t).map_err(|e| HarnessError::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(raw)
    }

    pub fn from_file(path: &Path) -> Result<RawConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        RawConfig::parse_str(&text)
    }

    pub fn set_line(&mut self, line: &str) -> Result<()> {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("expected key=value, found '{line}'")))?;
        let (k, v) = (k.trim(), v.trim());
        let known = KEYS.contains(&k) || k.strip_prefix("eps.").is_some_and(|r| r.parse::<usize>().is_ok());
        if !known {
            return Err(HarnessError::Config(format!("unknown key '{k}'")));
        }
        self.entries.insert(k.to_owned(), v.to_owned());
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn real(&self, key: &str, default: f64) -> Result<f64> {
        self.get(key).map_or(Ok(default), |v| parse_real(v).ok_or_else(|| bad(key, v)))
    }

    fn uint(&self, key: &str, default: usize) -> Result<usize> {
        self.get(key).map_or(Ok(default), |v| v.parse().map_err(|_| bad(key, v)))
    }

    pub fn build(&self) -> Result<RunConfig> {
        let scenario_name = self.get("scenario").unwrap_or("two_layer");
        let scenario = match scenario_name {
            "circular" => Scenario::Circular { xi: self.real("xi", 1.0)? },
            "planewave" => Scenario::PlaneWave { angle: self.real("direction", PI / 4.0)? },
            "two_layer" => {
                let v = self.get("eps2").unwrap_or("(1.27+0.05i)^2");
                Scenario::TwoLayer { eps2: parse_complex(v).ok_or_else(|| bad("eps2", v))? }
            }
            "custom" => {
                let geometry = match self.get("geometry").unwrap_or("step") {
                    "step" => Geometry::Step,
                    "bao" => Geometry::Bao,
                    v => return Err(bad("geometry", v)),
                };
                let mut eps = crate::scenario::default_eps(geometry);
                for (k, v) in &self.entries {
                    if let Some(r) = k.strip_prefix("eps.") {
                        let z = parse_complex(v).ok_or_else(|| bad(k, v))?;
                        eps.insert(r.parse().expect("checked in set_line"), z);
                    }
                }
                Scenario::Custom { mesh: self.get("mesh").map(PathBuf::from), geometry, eps }
            }
            v => return Err(bad("scenario", v)),
        };
        let default_method = match scenario {
            Scenario::Circular { .. } | Scenario::PlaneWave { .. } => Method::Impedance,
            _ => Method::Dtn,
        };
        let method = match self.get("method") {
            None => default_method,
            Some("impedance") => Method::Impedance,
            Some("dtn") => Method::Dtn,
            Some(v) => return Err(bad("method", v)),
        };
        let (k_def, theta_def, h_def) = match &scenario {
            Scenario::Circular { .. } | Scenario::PlaneWave { .. } => (10.0, -PI / 4.0, 3.0),
            Scenario::TwoLayer { .. } => (5.0, -PI / 3.0, 3.0),
            Scenario::Custom { geometry, .. } => (2.0, -PI / 4.0, crate::scenario::default_half_height(*geometry)),
        };
        let flux = FluxParams::new(self.real("alpha", 0.5)?, self.real("beta", 0.5)?, self.real("delta", 0.5)?)
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        let range = self.get("p_range").unwrap_or("3..27");
        let hl = self.get("h_list").unwrap_or("1.5,0.75,0.375");
        let ml = self.get("m_list").unwrap_or("5,10,25,50,100");
        let edge_data_rule = match self.get("data_quadrature").unwrap_or("graded") {
            "graded" => false,
            "edge" => true,
            v => return Err(bad("data_quadrature", v)),
        };
        let timing = match self.get("timing").unwrap_or("false") {
            "true" => true,
            "false" => false,
            v => return Err(bad("timing", v)),
        };
        let cfg = RunConfig {
            method,
            scenario,
            k: self.real("k", k_def)?,
            theta: self.real("theta", theta_def)?,
            half_height: self.real("H", h_def)?,
            h: self.real("h", 1.5)?,
            p: self.uint("p", 3)?,
            m: self.uint("M", 100)?,
            p_range: parse_range(range).ok_or_else(|| bad("p_range", range))?,
            h_list: parse_list(hl).ok_or_else(|| bad("h_list", hl))?,
            m_list: parse_list(ml).ok_or_else(|| bad("m_list", ml))?,
            flux,
            duffy_order: self.uint("duffy_order", 10)?,
            gl_points: self.uint("gl_points", 10)?,
            edge_data_rule,
            timing,
            diff_p: self.get("diff_p").map(|v| v.parse().map_err(|_| bad("diff_p", v))).transpose()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(HarnessError::Config(m.to_owned()));
        match (&self.scenario, self.method) {
            (Scenario::Circular { .. } | Scenario::PlaneWave { .. }, Method::Dtn) => {
                return fail("circular and planewave scenarios require method=impedance")
            }
            (Scenario::Custom { .. }, Method::Impedance) => return fail("custom scenarios require method=dtn"),
            _ => {}
        }
        if !(self.k > 0.0) || !(self.half_height > 0.0) || !(self.h > 0.0) {
            return fail("k, H and h must be positive");
        }
        if !(self.theta > -PI && self.theta < 0.0) {
            return fail("theta must lie in (-pi, 0)");
        }
        if self.p == 0 || self.p_range.contains(&0) || self.diff_p == Some(0) {
            return fail("p must be positive");
        }
        if self.m == 0 || self.m_list.contains(&0) {
            return fail("M must be positive");
        }
        if self.h_list.iter().any(|&h| !(h > 0.0)) {
            return fail("h_list entries must be positive");
        }
        if !(1..=32).contains(&self.duffy_order) || self.gl_points == 0 {
            return fail("duffy_order must lie in 1..=32 and gl_points must be positive");
        }
        if let Scenario::Circular { xi } = self.scenario {
            if !(0.0..=5.0).contains(&xi) {
                return fail("xi must lie in [0, 5]");
            }
        }
        Ok(())
    }

    pub fn from_pairs(pairs: &[(&str, &str)]) -> Result<RunConfig> {
        let mut raw = RawConfig::default();
        for (k, v) in pairs {
            raw.set_line(&format!("{k}={v}"))?;
        }
        raw.build()
    }
}
