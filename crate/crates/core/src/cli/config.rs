//! Line-oriented `key = value` experiment configuration.
//!
//! Parsing collects every error (with its line number) before giving up, and
//! all numeric ranges are checked against the domain before anything runs.

use std::f64::consts::FRAC_PI_2;
use std::fmt::{self, Write as _};
use std::path::PathBuf;

use serde::Serialize;

use crate::coefficients::CoefficientField;
use crate::geometry::{Domain, DomainFamily};
use crate::Sym2;

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    /// 1-based; 0 for problems with the file as a whole (missing keys).
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DomainSpec {
    pub family: DomainFamily,
    pub params: Vec<f64>,
}

impl DomainSpec {
    pub fn build(&self) -> crate::Result<Domain> {
        Domain::new(self.family, &self.params)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSpec {
    Constant(f64),
    ConstantTensor { a11: f64, a12: f64, a22: f64 },
    RadialBump { beta: f64, x0: f64, y0: f64, width: f64 },
    LinearRamp { beta: f64, floor: f64 },
    RotatedAnisotropic { major: f64, minor: f64, angle_deg: f64 },
    Blended(Vec<(f64, FieldSpec)>),
}

impl FieldSpec {
    pub fn build(&self) -> crate::Result<CoefficientField> {
        match self {
            FieldSpec::Constant(c) => CoefficientField::constant(*c),
            FieldSpec::ConstantTensor { a11, a12, a22 } => {
                CoefficientField::constant_tensor(Sym2 { xx: *a11, xy: *a12, yy: *a22 })
            }
            FieldSpec::RadialBump { beta, x0, y0, width } => CoefficientField::radial_bump(*beta, [*x0, *y0], *width),
            FieldSpec::LinearRamp { beta, floor } => CoefficientField::linear_ramp(*beta, *floor),
            FieldSpec::RotatedAnisotropic { major, minor, angle_deg } => {
                CoefficientField::rotated_anisotropic(*major, *minor, *angle_deg)
            }
            FieldSpec::Blended(parts) => {
                let built = parts
                    .iter()
                    .map(|(w, f)| Ok((*w, f.build()?)))
                    .collect::<crate::Result<Vec<_>>>()?;
                CoefficientField::blended(built)
            }
        }
    }

    fn parse(text: &str) -> Result<FieldSpec, String> {
        let text = text.trim();
        let (head, rest) = text.split_once(char::is_whitespace).unwrap_or((text, ""));
        if head == "blended" {
            let mut parts = Vec::new();
            for piece in rest.split(';') {
                let piece = piece.trim();
                let (w, field) = piece
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| format!("blended part `{piece}` needs `weight field`"))?;
                parts.push((number(w)?, FieldSpec::parse(field)?));
            }
            return Ok(FieldSpec::Blended(parts));
        }
        let args = numbers(rest)?;
        let want = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(format!("{head} takes {n} numbers, got {}", args.len()))
            }
        };
        match head {
            "constant" => want(1).map(|_| FieldSpec::Constant(args[0])),
            "constant_tensor" => want(3).map(|_| FieldSpec::ConstantTensor { a11: args[0], a12: args[1], a22: args[2] }),
            "radial_bump" => {
                want(4).map(|_| FieldSpec::RadialBump { beta: args[0], x0: args[1], y0: args[2], width: args[3] })
            }
            "linear_ramp" => want(2).map(|_| FieldSpec::LinearRamp { beta: args[0], floor: args[1] }),
            "rotated_anisotropic" => {
                want(3).map(|_| FieldSpec::RotatedAnisotropic { major: args[0], minor: args[1], angle_deg: args[2] })
            }
            other => Err(format!("unknown coefficient field `{other}`")),
        }
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldSpec::Constant(c) => write!(f, "constant {c}"),
            FieldSpec::ConstantTensor { a11, a12, a22 } => write!(f, "constant_tensor {a11} {a12} {a22}"),
            FieldSpec::RadialBump { beta, x0, y0, width } => write!(f, "radial_bump {beta} {x0} {y0} {width}"),
            FieldSpec::LinearRamp { beta, floor } => write!(f, "linear_ramp {beta} {floor}"),
            FieldSpec::RotatedAnisotropic { major, minor, angle_deg } => {
                write!(f, "rotated_anisotropic {major} {minor} {angle_deg}")
            }
            FieldSpec::Blended(parts) => {
                f.write_str("blended")?;
                for (i, (w, field)) in parts.iter().enumerate() {
                    write!(f, "{} {w} {field}", if i == 0 { "" } else { " ;" })?;
                }
                Ok(())
            }
        }
    }
}

/// A boundary datum: a Fourier mode in the curve parameter, or the k-th
/// Steklov eigenfunction of the problem pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DatumSpec {
    Cos(usize),
    Sin(usize),
    Fourier { mode: usize, phase: f64 },
    Steklov(usize),
}

impl DatumSpec {
    /// `(mode, phase)` for the Fourier kinds.
    pub fn fourier(&self) -> Option<(usize, f64)> {
        match *self {
            DatumSpec::Cos(n) => Some((n, 0.0)),
            DatumSpec::Sin(n) => Some((n, FRAC_PI_2)),
            DatumSpec::Fourier { mode, phase } => Some((mode, phase)),
            DatumSpec::Steklov(_) => None,
        }
    }

    /// Short file-name friendly label such as `cos3`.
    pub fn slug(&self) -> String {
        match self {
            DatumSpec::Cos(n) => format!("cos{n}"),
            DatumSpec::Sin(n) => format!("sin{n}"),
            DatumSpec::Fourier { mode, .. } => format!("fourier{mode}"),
            DatumSpec::Steklov(k) => format!("steklov{k}"),
        }
    }

    fn parse(text: &str) -> Result<DatumSpec, String> {
        let words: Vec<&str> = text.split_whitespace().collect();
        let index = |w: &str| w.parse::<usize>().map_err(|_| format!("`{w}` is not a non-negative integer"));
        let datum = match words.as_slice() {
            ["cos", n] => DatumSpec::Cos(index(n)?),
            ["sin", n] => DatumSpec::Sin(index(n)?),
            ["fourier", n, phase] => DatumSpec::Fourier { mode: index(n)?, phase: number(phase)? },
            ["steklov", k] => DatumSpec::Steklov(index(k)?),
            _ => return Err(format!("cannot read boundary datum `{}`", text.trim())),
        };
        match datum {
            DatumSpec::Steklov(0) => Err("steklov 0 is the constant mode; data must not be constant".into()),
            DatumSpec::Steklov(_) => Ok(datum),
            _ if datum.fourier().is_some_and(|(n, _)| n == 0) => {
                Err("Fourier mode 0 is constant; data must not be constant".into())
            }
            _ => Ok(datum),
        }
    }
}

impl fmt::Display for DatumSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatumSpec::Cos(n) => write!(f, "cos {n}"),
            DatumSpec::Sin(n) => write!(f, "sin {n}"),
            DatumSpec::Fourier { mode, phase } => write!(f, "fourier {mode} {phase}"),
            DatumSpec::Steklov(k) => write!(f, "steklov {k}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        crate::decay::uniform_grid(self.start, self.stop, self.count)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub domain: DomainSpec,
    pub h: f64,
    pub conductivity: FieldSpec,
    pub metric: FieldSpec,
    pub aks: bool,
    pub data: Vec<DatumSpec>,
    pub d_grid: GridSpec,
    pub steklov_modes: Option<usize>,
    pub steklov_traces: usize,
    pub out: Option<PathBuf>,
    pub penetration_n: Vec<usize>,
    /// Search-space cap; `n + 16` per `n` when absent.
    pub n_max: Option<usize>,
    pub penetration_d: Vec<f64>,
}

pub const DEFAULT_PENETRATION_D: [f64; 3] = [0.1, 0.2, 0.4];
pub const PENETRATION_EXTRA_MODES: usize = 16;

impl ExperimentConfig {
    pub fn n_max_for(&self, n: usize) -> usize {
        self.n_max.unwrap_or(n + PENETRATION_EXTRA_MODES)
    }

    /// Canonical text form; parsing it gives back an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let _ = writeln!(out, "domain = {} {}", self.domain.family, join(&self.domain.params));
        let _ = writeln!(out, "h = {}", self.h);
        let _ = writeln!(out, "A = {}", self.conductivity);
        let _ = writeln!(out, "G = {}", self.metric);
        let _ = writeln!(out, "aks = {}", if self.aks { "on" } else { "off" });
        for datum in &self.data {
            let _ = writeln!(out, "data = {datum}");
        }
        let _ = writeln!(out, "d_grid = {} {} {}", self.d_grid.start, self.d_grid.stop, self.d_grid.count);
        if let Some(m) = self.steklov_modes {
            let _ = writeln!(out, "steklov_modes = {m}");
        }
        let _ = writeln!(out, "steklov_traces = {}", self.steklov_traces);
        if let Some(dir) = &self.out {
            let _ = writeln!(out, "out = {}", dir.display());
        }
        if !self.penetration_n.is_empty() {
            let ns: Vec<String> = self.penetration_n.iter().map(|n| n.to_string()).collect();
            let _ = writeln!(out, "penetration_n = {}", ns.join(" "));
        }
        if let Some(n_max) = self.n_max {
            let _ = writeln!(out, "n_max = {n_max}");
        }
        let _ = writeln!(out, "penetration_d = {}", join(&self.penetration_d));
        out
    }
}

fn number(word: &str) -> Result<f64, String> {
    match word.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("malformed number `{word}`")),
    }
}

fn numbers(text: &str) -> Result<Vec<f64>, String> {
    text.split_whitespace().map(number).collect()
}

fn integers(text: &str) -> Result<Vec<usize>, String> {
    text.split_whitespace()
        .map(|w| w.parse::<usize>().map_err(|_| format!("malformed integer `{w}`")))
        .collect()
}

fn switch(text: &str) -> Result<bool, String> {
    match text {
        "on" | "true" | "yes" => Ok(true),
        "off" | "false" | "no" => Ok(false),
        other => Err(format!("expected on or off, got `{other}`")),
    }
}

/// Raw values with the line each came from, before cross-checks.
#[derive(Default)]
struct Raw {
    domain: Option<(usize, DomainSpec)>,
    h: Option<(usize, f64)>,
    conductivity: Option<(usize, FieldSpec)>,
    metric: Option<(usize, FieldSpec)>,
    aks: Option<bool>,
    data: Vec<(usize, DatumSpec)>,
    d_grid: Option<(usize, GridSpec)>,
    steklov_modes: Option<(usize, usize)>,
    steklov_traces: Option<(usize, usize)>,
    out: Option<PathBuf>,
    penetration_n: Option<(usize, Vec<usize>)>,
    n_max: Option<(usize, usize)>,
    penetration_d: Option<(usize, Vec<f64>)>,
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, Vec<ConfigError>> {
    let mut errors = Vec::new();
    let mut raw = Raw::default();
    for (index, full) in text.lines().enumerate() {
        let line = index + 1;
        let content = full.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            errors.push(ConfigError { line, message: format!("expected `key = value`, got `{content}`") });
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        if let Err(message) = read_entry(&mut raw, line, key, value) {
            errors.push(ConfigError { line, message });
        }
    }
    let config = validate(raw, &mut errors);
    match config {
        Some(c) if errors.is_empty() => Ok(c),
        _ => {
            errors.sort_by_key(|e| e.line);
            Err(errors)
        }
    }
}

fn read_entry(raw: &mut Raw, line: usize, key: &str, value: &str) -> Result<(), String> {
    match key {
        "domain" => {
            let (family, params) = value.split_once(char::is_whitespace).unwrap_or((value, ""));
            let family: DomainFamily = family.parse().map_err(|e: crate::Error| e.to_string())?;
            raw.domain = Some((line, DomainSpec { family, params: numbers(params)? }));
        }
        "h" => raw.h = Some((line, number(value)?)),
        "A" => raw.conductivity = Some((line, FieldSpec::parse(value)?)),
        "G" => raw.metric = Some((line, FieldSpec::parse(value)?)),
        "aks" => raw.aks = Some(switch(value)?),
        "data" => {
            for item in value.split(',') {
                raw.data.push((line, DatumSpec::parse(item)?));
            }
        }
        "d_grid" => {
            let words: Vec<&str> = value.split_whitespace().collect();
            let [start, stop, count] = words.as_slice() else {
                return Err("d_grid takes `start stop count`".into());
            };
            let count = count.parse::<usize>().map_err(|_| format!("malformed integer `{count}`"))?;
            raw.d_grid = Some((line, GridSpec { start: number(start)?, stop: number(stop)?, count }));
        }
        "steklov_modes" => raw.steklov_modes = Some((line, single_integer(value)?)),
        "steklov_traces" => raw.steklov_traces = Some((line, single_integer(value)?)),
        "out" => raw.out = Some(PathBuf::from(value)),
        "penetration_n" => raw.penetration_n = Some((line, integers(value)?)),
        "n_max" => raw.n_max = Some((line, single_integer(value)?)),
        "penetration_d" => raw.penetration_d = Some((line, numbers(value)?)),
        other => return Err(format!("unknown key `{other}`")),
    }
    Ok(())
}

fn single_integer(value: &str) -> Result<usize, String> {
    match integers(value)?.as_slice() {
        [n] => Ok(*n),
        _ => Err(format!("expected one integer, got `{value}`")),
    }
}

fn validate(raw: Raw, errors: &mut Vec<ConfigError>) -> Option<ExperimentConfig> {
    let mut fail = |line: usize, message: String| errors.push(ConfigError { line, message });

    let Some((domain_line, domain_spec)) = raw.domain else {
        fail(0, "missing key `domain`".into());
        return None;
    };
    let domain = match domain_spec.build() {
        Ok(d) => Some(d),
        Err(e) => {
            fail(domain_line, e.to_string());
            None
        }
    };
    let d0 = domain.as_ref().map(Domain::d0);

    let h = match raw.h {
        None => {
            fail(0, "missing key `h`".into());
            f64::NAN
        }
        Some((line, h)) => {
            if !(h > 0.0 && d0.map_or(true, |d0| h < d0)) {
                fail(line, "h must be in (0, d0)".into());
            }
            h
        }
    };

    let mut field = |entry: Option<(usize, FieldSpec)>| match entry {
        None => FieldSpec::Constant(1.0),
        Some((line, spec)) => {
            if let Err(e) = spec.build() {
                fail(line, e.to_string());
            }
            spec
        }
    };
    let conductivity = field(raw.conductivity);
    let metric = field(raw.metric);

    let d_grid = match raw.d_grid {
        None => GridSpec { start: 0.0, stop: 0.5 * d0.unwrap_or(1.0), count: 26 },
        Some((line, g)) => {
            if g.count < 2 {
                fail(line, "d_grid needs at least 2 points".into());
            }
            if !(g.start >= 0.0 && g.stop > g.start) {
                fail(line, "d_grid needs 0 <= start < stop".into());
            }
            if let Some(d0) = d0 {
                if g.stop > 0.9 * d0 * (1.0 + 1e-12) {
                    fail(line, format!("d_grid stop must not exceed 0.9 d0 = {}", 0.9 * d0));
                }
            }
            g
        }
    };

    if let Some((line, m)) = raw.steklov_modes {
        if m < 2 {
            fail(line, "steklov_modes must be at least 2".into());
        }
        for (dline, datum) in &raw.data {
            if let DatumSpec::Steklov(k) = datum {
                if *k >= m {
                    fail(*dline, format!("steklov {k} needs steklov_modes > {k}"));
                }
            }
        }
    }

    let penetration_n = raw.penetration_n.as_ref().map(|(_, v)| v.clone()).unwrap_or_default();
    if let Some((line, ns)) = &raw.penetration_n {
        if ns.is_empty() || ns.contains(&0) {
            fail(*line, "penetration_n needs positive integers".into());
        }
    }
    if let Some((line, n_max)) = raw.n_max {
        if let Some(&worst) = penetration_n.iter().max() {
            if n_max <= worst {
                fail(line, format!("n_max must exceed every penetration n (got n_max = {n_max}, n = {worst})"));
            }
        }
    }
    let penetration_d = match raw.penetration_d {
        None => DEFAULT_PENETRATION_D.to_vec(),
        Some((line, ds)) => {
            if ds.is_empty() {
                fail(line, "penetration_d needs at least one depth".into());
            }
            for &d in &ds {
                if !(d > 0.0 && d0.map_or(true, |d0| d <= 0.9 * d0 * (1.0 + 1e-12))) {
                    fail(line, format!("penetration depth {d} must be in (0, 0.9 d0]"));
                }
            }
            ds
        }
    };

    Some(ExperimentConfig {
        domain: domain_spec,
        h,
        conductivity,
        metric,
        aks: raw.aks.unwrap_or(false),
        data: raw.data.into_iter().map(|(_, d)| d).collect(),
        d_grid,
        steklov_modes: raw.steklov_modes.map(|(_, m)| m),
        steklov_traces: raw.steklov_traces.map_or(0, |(_, k)| k),
        out: raw.out,
        penetration_n,
        n_max: raw.n_max.map(|(_, n)| n),
        penetration_d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# unit disk, anisotropic conductivity
domain = disk 1.0
h = 0.05
A = rotated_anisotropic 2 0.5 30
G = blended 0.5 constant 1 ; 0.5 radial_bump 0.4 0.1 -0.2 0.3
aks = on
data = cos 3, sin 2
data = fourier 4 0.25
data = steklov 3
d_grid = 0 0.6 13
steklov_modes = 40
steklov_traces = 2
out = runs/sample
penetration_n = 2 4
n_max = 20
penetration_d = 0.1 0.3
";

    #[test]
    fn sample_parses() {
        let c = parse_config(SAMPLE).unwrap();
        assert_eq!(c.domain, DomainSpec { family: DomainFamily::Disk, params: vec![1.0] });
        assert_eq!(c.data.len(), 4);
        assert_eq!(c.data[1], DatumSpec::Sin(2));
        assert!(c.aks);
        assert_eq!(c.d_grid.count, 13);
        assert_eq!(c.n_max_for(2), 20);
    }

    #[test]
    fn round_trip() {
        let c = parse_config(SAMPLE).unwrap();
        let again = parse_config(&c.to_text()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn negative_h_is_reported_with_line() {
        let errors = parse_config("domain = disk 1.0\nh = -0.1\n").unwrap_err();
        assert_eq!(errors, vec![ConfigError { line: 2, message: "h must be in (0, d0)".into() }]);
    }

    #[test]
    fn collects_all_errors() {
        let text = "domain = disk 1.0\nh = 0.05\nfoo = 1\nA = constant x\nd_grid = 0 5 10\n";
        let errors = parse_config(text).unwrap_err();
        let lines: Vec<usize> = errors.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![3, 4, 5]);
        assert!(errors[0].message.contains("unknown key"));
        assert!(errors[1].message.contains("malformed number"));
    }

    #[test]
    fn n_max_must_exceed_n() {
        let errors = parse_config("domain = disk 1\nh = 0.05\npenetration_n = 2 8\nn_max = 8\n").unwrap_err();
        assert_eq!(errors[0].line, 4);
    }

    #[test]
    fn constant_data_rejected() {
        assert!(parse_config("domain = disk 1\nh = 0.05\ndata = cos 0\n").is_err());
        assert!(parse_config("domain = disk 1\nh = 0.05\ndata = steklov 0\n").is_err());
    }

    #[test]
    fn missing_keys() {
        let errors = parse_config("h = 0.1\n").unwrap_err();
        assert_eq!(errors[0].line, 0);
        assert_eq!(errors[0].to_string(), "config: missing key `domain`");
    }

    #[test]
    fn bad_domain_and_field() {
        let errors = parse_config("domain = smooth_star 1 0 0.6\nh = 0.05\nA = constant -1\n").unwrap_err();
        assert_eq!(errors.iter().map(|e| e.line).collect::<Vec<_>>(), vec![1, 3]);
    }
}
