//! Input parsing: state literals, windows, complex numbers, and the optional
//! JSON config file that supplies defaults for omitted flags.

use serde::Deserialize;

use masep_core::state::MarkovState;
use num_complex::Complex64;

pub use masep_core::contour::ContourSpec;

/// The state literal `{"positions":[0,1,2],"species":[1,2,3]}`.
#[derive(Clone, Debug, Deserialize)]
pub struct StateJson {
    pub positions: Vec<i64>,
    pub species: Vec<u32>,
}

impl StateJson {
    pub fn into_state(self) -> Result<MarkovState, String> {
        masep_core::state::validate_state(&self.positions, &self.species)
            .map_err(|e| format!("invalid state: {}", e))?;
        MarkovState::from_parts(self.positions, self.species).map_err(|e| e.to_string())
    }
}

pub fn parse_state(text: &str) -> Result<MarkovState, String> {
    let js: StateJson =
        serde_json::from_str(text).map_err(|e| format!("state literal is not valid JSON: {}", e))?;
    js.into_state()
}

/// `lo:hi` with signed integers.
pub fn parse_window(text: &str) -> Result<(i64, i64), String> {
    let (lo, hi) = text
        .split_once(':')
        .ok_or_else(|| format!("window `{}` must look like lo:hi", text))?;
    let lo: i64 = lo.trim().parse().map_err(|e| format!("window lower bound: {}", e))?;
    let hi: i64 = hi.trim().parse().map_err(|e| format!("window upper bound: {}", e))?;
    if lo > hi {
        return Err("window must satisfy lo <= hi".into());
    }
    Ok((lo, hi))
}

/// Complex literals: `2`, `-1.5`, `3i`, `1+2i`, `2.5e-1-0.5i`.
pub fn parse_complex(text: &str) -> Result<Complex64, String> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err("empty complex literal".into());
    }
    if !s.ends_with('i') {
        let re: f64 = s.parse().map_err(|_| format!("bad real literal `{}`", text))?;
        return Ok(Complex64::new(re, 0.0));
    }
    let body = &s[..s.len() - 1];
    // split at the last +/- that is neither leading nor an exponent sign
    let bytes = body.as_bytes();
    let mut split = None;
    for i in (1..bytes.len()).rev() {
        let c = bytes[i] as char;
        if (c == '+' || c == '-') && !matches!(bytes[i - 1] as char, 'e' | 'E') {
            split = Some(i);
            break;
        }
    }
    match split {
        None => {
            let im: f64 = if body.is_empty() || body == "+" {
                1.0
            } else if body == "-" {
                -1.0
            } else {
                body.parse().map_err(|_| format!("bad imaginary literal `{}`", text))?
            };
            Ok(Complex64::new(0.0, im))
        }
        Some(i) => {
            let re: f64 = body[..i]
                .parse()
                .map_err(|_| format!("bad real part in `{}`", text))?;
            let imtxt = &body[i..];
            let im: f64 = if imtxt == "+" {
                1.0
            } else if imtxt == "-" {
                -1.0
            } else {
                imtxt.parse().map_err(|_| format!("bad imaginary part in `{}`", text))?
            };
            Ok(Complex64::new(re, im))
        }
    }
}

/// Comma-separated complex literals.
pub fn parse_complex_list(text: &str) -> Result<Vec<Complex64>, String> {
    text.split(',').map(parse_complex).collect()
}

/// Comma-separated radii.
pub fn parse_radii(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("bad radius: {}", e)))
        .collect()
}

/// Species word: either comma-joined letters (`2,1,3`) or plain digits
/// (`213`) when every letter is a single digit.
pub fn parse_word(text: &str) -> Result<Vec<u32>, String> {
    let t = text.trim();
    if t.contains(',') {
        t.split(',')
            .map(|x| x.trim().parse::<u32>().map_err(|e| format!("bad letter: {}", e)))
            .collect()
    } else {
        t.chars()
            .map(|c| c.to_digit(10).ok_or_else(|| format!("bad letter `{}`", c)))
            .collect()
    }
}

/// Defaults loadable from `--config <path>`; explicit flags always win.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub initial: Option<StateJson>,
    #[serde(rename = "final")]
    pub final_state: Option<StateJson>,
    pub t: Option<f64>,
    pub p: Option<f64>,
    pub window: Option<String>,
    pub radii: Option<Vec<f64>>,
    pub nodes: Option<usize>,
    pub tol: Option<f64>,
    pub max_refinements: Option<u32>,
    pub tail_tol: Option<f64>,
    pub paths: Option<u64>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub n: Option<u32>,
    pub workers: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&std::path::Path>) -> Result<Self, String> {
        match path {
            None => Ok(FileConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| format!("cannot read config {}: {}", p.display(), e))?;
                serde_json::from_str(&text).map_err(|e| format!("bad config file: {}", e))
            }
        }
    }
}

/// Resolves the contour from flags and config, falling back to the spec
/// defaults for the particle count.
pub struct ContourFlags {
    pub radii: Option<String>,
    pub nodes: Option<usize>,
    pub tol: Option<f64>,
    pub max_refinements: Option<u32>,
}

impl ContourFlags {
    pub fn resolve(&self, config: &FileConfig, n: usize) -> Result<ContourSpec, String> {
        let defaults = ContourSpec::default_for(n);
        let radii = match (&self.radii, &config.radii) {
            (Some(text), _) => parse_radii(text)?,
            (None, Some(r)) => r.clone(),
            (None, None) => defaults.radii,
        };
        Ok(ContourSpec {
            radii,
            nodes_per_circle: self.nodes.or(config.nodes).unwrap_or(defaults.nodes_per_circle),
            abs_tol: self.tol.or(config.tol).unwrap_or(defaults.abs_tol),
            max_refinements: self
                .max_refinements
                .or(config.max_refinements)
                .unwrap_or(defaults.max_refinements),
        })
    }
}
