//! Pipeline orchestration for the command-line tool: mesh, solve, profile,
//! verify, and write CSV/SVG outputs plus a manifest of their digests.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::cli::config::{DatumSpec, ExperimentConfig};
use crate::coefficients::{aks_modify, reduce_to_scalar, Coefficients};
use crate::decay::{decay_profile, h_fun, verify_decay, DecayProfile, PenetrationSpace};
use crate::fem::{assemble, BoundaryDatum, DenseMatrix, DirichletSolver, SystemMatrices};
use crate::geometry::{build_mesh, Domain, DomainFamily, Mesh};
use crate::oracle::disk_profile;
use crate::spectral::{
    boundary_mass, default_mode_count, dtn_from_parts, frequency_report, steklov_basis, FrequencyReport, SteklovBasis,
};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Triangulate the domain and export the mesh
    Mesh,
    /// Steklov eigenvalues (and optional mode traces) of the problem pair
    Steklov,
    /// Frequency and lower frequency of each boundary datum
    Frequency,
    /// Decay profiles D, H, E, T, N, F, K, K1 per datum
    Decay,
    /// Decay profiles checked against the decay bounds
    Verify,
    /// Penetration function sweep
    Penetration,
    /// Closed-form unit-disk profiles
    Oracle,
    /// Decay profiles with SVG plots
    Plot,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: Command,
    pub version: String,
    pub config: ExperimentConfig,
    pub stages: Vec<StageTime>,
    pub outputs: Vec<OutputFile>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Success,
    /// Everything computed, but a decay bound was not met.
    VerificationFailed,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Success => 0,
            RunStatus::VerificationFailed => 2,
        }
    }
}

#[derive(Debug)]
pub struct RunError {
    pub stage: String,
    pub source: Error,
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} failed: {}", self.stage, self.source)
    }
}

impl std::error::Error for RunError {}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Files written so far, so a failed run can take them back.
struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
    files: Vec<OutputFile>,
}

impl Outputs {
    fn new(dir: &Path) -> std::io::Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir)?;
        Ok(Outputs { dir: dir.to_path_buf(), created_dir, written: Vec::new(), files: Vec::new() })
    }

    fn write_raw(&mut self, name: &str, contents: &str) -> std::io::Result<()> {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        fs::write(&path, contents)
    }

    fn write(&mut self, name: &str, contents: &str) -> std::io::Result<()> {
        self.write_raw(name, contents)?;
        self.files.push(OutputFile {
            file: name.to_string(),
            bytes: contents.len(),
            sha256: sha256_hex(contents.as_bytes()),
        });
        Ok(())
    }

    fn discard(&self) {
        for path in &self.written {
            let _ = fs::remove_file(path);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

struct Euclidean {
    s0: DenseMatrix,
    b: DenseMatrix,
    basis: SteklovBasis,
}

/// Lazily built pipeline state for one run.
struct Lab<'c> {
    config: &'c ExperimentConfig,
    log: &'c mut dyn FnMut(&str),
    stages: Vec<StageTime>,
    domain: Option<Domain>,
    mesh: Option<Mesh>,
    problem: Option<Coefficients>,
    profile_coefficients: Option<Coefficients>,
    matrices: Option<SystemMatrices>,
    solver: Option<DirichletSolver>,
    problem_basis: Option<SteklovBasis>,
    euclidean: Option<Euclidean>,
}

type StageResult<T> = Result<T, RunError>;

impl<'c> Lab<'c> {
    fn stage<T>(&mut self, name: &str, work: impl FnOnce(&mut Self) -> crate::Result<T>) -> StageResult<T> {
        let start = Instant::now();
        let out = work(self).map_err(|source| RunError { stage: name.to_string(), source })?;
        let seconds = start.elapsed().as_secs_f64();
        (self.log)(&format!("{name}: {seconds:.3} s"));
        self.stages.push(StageTime { stage: name.to_string(), seconds });
        Ok(out)
    }

    fn domain(&mut self) -> StageResult<&Domain> {
        if self.domain.is_none() {
            let domain = self.stage("domain", |lab| lab.config.domain.build())?;
            self.domain = Some(domain);
        }
        Ok(self.domain.as_ref().expect("built above"))
    }

    fn mesh(&mut self) -> StageResult<&Mesh> {
        if self.mesh.is_none() {
            let domain = self.domain()?.clone();
            let h = self.config.h;
            let mesh = self.stage("mesh", |_| build_mesh(&domain, h))?;
            self.mesh = Some(mesh);
        }
        Ok(self.mesh.as_ref().expect("built above"))
    }

    fn problem(&mut self) -> StageResult<Coefficients> {
        if self.problem.is_none() {
            let domain = self.domain()?.clone();
            let config = self.config;
            let (problem, profile) = self.stage("coefficients", |_| {
                let a = config.conductivity.build()?;
                let mut g = config.metric.build()?;
                if config.aks {
                    g = aks_modify(&domain, &g)?;
                }
                let problem = Coefficients::new(a, g);
                let profile = if problem.has_scalar_conductivity() {
                    problem.clone()
                } else {
                    let (gamma, metric) = reduce_to_scalar(&domain, &problem.conductivity, &problem.metric)?;
                    Coefficients::new(gamma, metric)
                };
                Ok((problem, profile))
            })?;
            self.problem = Some(problem);
            self.profile_coefficients = Some(profile);
        }
        Ok(self.problem.clone().expect("built above"))
    }

    fn matrices(&mut self) -> StageResult<()> {
        if self.matrices.is_none() {
            let coefficients = self.problem()?;
            self.mesh()?;
            let mesh = self.mesh.as_ref().expect("built above");
            let start = Instant::now();
            let matrices = assemble(mesh, &coefficients)
                .map_err(|source| RunError { stage: "assemble".into(), source })?;
            let solver = DirichletSolver::new(&matrices, mesh)
                .and_then(DirichletSolver::factorized)
                .map_err(|source| RunError { stage: "assemble".into(), source })?;
            let seconds = start.elapsed().as_secs_f64();
            (self.log)(&format!("assemble: {seconds:.3} s"));
            self.stages.push(StageTime { stage: "assemble".into(), seconds });
            self.matrices = Some(matrices);
            self.solver = Some(solver);
        }
        Ok(())
    }

    fn mode_count(&self, boundary: usize) -> usize {
        self.config.steklov_modes.map_or(default_mode_count(boundary), |m| m.min(boundary))
    }

    fn problem_basis(&mut self) -> StageResult<&SteklovBasis> {
        if self.problem_basis.is_none() {
            self.matrices()?;
            let mesh = self.mesh.as_ref().expect("built above");
            let m = self.mode_count(mesh.boundary_cycle().len());
            let start = Instant::now();
            let wrap = |source| RunError { stage: "steklov".into(), source };
            let matrices = self.matrices.as_ref().expect("built above");
            let s = dtn_from_parts(matrices, self.solver.as_ref().expect("built above")).map_err(wrap)?;
            let b = boundary_mass(matrices, mesh);
            let basis = steklov_basis(&s, &b, m).map_err(wrap)?.with_tag("problem");
            let seconds = start.elapsed().as_secs_f64();
            (self.log)(&format!("steklov: {seconds:.3} s"));
            self.stages.push(StageTime { stage: "steklov".into(), seconds });
            self.problem_basis = Some(basis);
        }
        Ok(self.problem_basis.as_ref().expect("built above"))
    }

    fn euclidean(&mut self) -> StageResult<&Euclidean> {
        if self.euclidean.is_none() {
            self.mesh()?;
            let mesh = self.mesh.as_ref().expect("built above");
            let m = self.mode_count(mesh.boundary_cycle().len());
            let start = Instant::now();
            let wrap = |source| RunError { stage: "euclidean spectrum".into(), source };
            let matrices = assemble(mesh, &Coefficients::euclidean()).map_err(wrap)?;
            let solver = DirichletSolver::new(&matrices, mesh).and_then(DirichletSolver::factorized).map_err(wrap)?;
            let s0 = dtn_from_parts(&matrices, &solver).map_err(wrap)?;
            let b = boundary_mass(&matrices, mesh);
            let basis = steklov_basis(&s0, &b, m).map_err(wrap)?.with_tag("euclidean");
            let seconds = start.elapsed().as_secs_f64();
            (self.log)(&format!("euclidean spectrum: {seconds:.3} s"));
            self.stages.push(StageTime { stage: "euclidean spectrum".into(), seconds });
            self.euclidean = Some(Euclidean { s0, b, basis });
        }
        Ok(self.euclidean.as_ref().expect("built above"))
    }

    fn require_data(&self, command: &str) -> StageResult<()> {
        if self.config.data.is_empty() {
            return Err(RunError {
                stage: command.into(),
                source: Error::InvalidInput("no boundary data configured (add `data = ...`)".into()),
            });
        }
        Ok(())
    }

    fn datum(&mut self, spec: &DatumSpec) -> StageResult<BoundaryDatum> {
        match spec.fourier() {
            Some((n, phase)) => Ok(BoundaryDatum::fourier(self.mesh()?, n, phase)),
            None => {
                let DatumSpec::Steklov(k) = *spec else { unreachable!("non-Fourier datum is a Steklov mode") };
                let basis = self.problem_basis()?;
                if k >= basis.count() {
                    return Err(RunError {
                        stage: "data".into(),
                        source: Error::InvalidInput(format!("steklov {k} needs more than {} modes", basis.count())),
                    });
                }
                let values = basis.mode(k).to_vec();
                BoundaryDatum::from_values(self.mesh()?, values).map_err(|source| RunError { stage: "data".into(), source })
            }
        }
    }

    fn profiles(&mut self) -> StageResult<Vec<DecayProfile>> {
        self.require_data("decay")?;
        self.matrices()?;
        let data: Vec<BoundaryDatum> =
            self.config.data.iter().map(|d| self.datum(d)).collect::<StageResult<_>>()?;
        let grid = self.config.d_grid.points();
        let d0 = self.domain()?.d0();
        self.stage("decay", |lab| {
            let mesh = lab.mesh.as_ref().expect("built above");
            let solver = lab.solver.as_ref().expect("built above");
            let coefficients = lab.profile_coefficients.as_ref().expect("built above");
            data.iter()
                .map(|f| {
                    let u = solver.solve(mesh, f)?;
                    decay_profile(mesh, coefficients, &u, &grid, d0)
                })
                .collect()
        })
    }

    fn frequencies(&mut self) -> StageResult<Vec<FrequencyReport>> {
        self.require_data("frequency")?;
        let data: Vec<BoundaryDatum> =
            self.config.data.iter().map(|d| self.datum(d)).collect::<StageResult<_>>()?;
        self.euclidean()?;
        self.stage("frequency", |lab| {
            let e = lab.euclidean.as_ref().expect("built above");
            data.iter().map(|f| frequency_report(&e.s0, &e.b, &e.basis, f.values())).collect()
        })
    }
}

fn io_error(source: std::io::Error) -> RunError {
    RunError { stage: "write".into(), source: Error::Io(source) }
}

fn profile_file(index: usize, spec: &DatumSpec, stem: &str, ext: &str) -> String {
    format!("{stem}_{:02}_{}.{ext}", index + 1, spec.slug())
}

/// Runs one subcommand, writing outputs and `manifest.json` into `out_dir`.
/// On error every file this run wrote is removed again.
pub fn run(
    config: &ExperimentConfig,
    command: Command,
    out_dir: &Path,
    log: &mut dyn FnMut(&str),
) -> Result<(RunManifest, RunStatus), RunError> {
    let mut outputs = Outputs::new(out_dir).map_err(io_error)?;
    let mut lab = Lab {
        config,
        log,
        stages: Vec::new(),
        domain: None,
        mesh: None,
        problem: None,
        profile_coefficients: None,
        matrices: None,
        solver: None,
        problem_basis: None,
        euclidean: None,
    };
    let result = execute(&mut lab, command, &mut outputs).and_then(|status| {
        let manifest = RunManifest {
            command,
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            stages: lab.stages.clone(),
            outputs: outputs.files.clone(),
        };
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| RunError { stage: "manifest".into(), source: Error::InvalidInput(e.to_string()) })?;
        outputs.write_raw(MANIFEST_FILE, &(json + "\n")).map_err(io_error)?;
        Ok((manifest, status))
    });
    if result.is_err() {
        outputs.discard();
    }
    result
}

fn execute(lab: &mut Lab, command: Command, out: &mut Outputs) -> Result<RunStatus, RunError> {
    let config = lab.config;
    match command {
        Command::Mesh => {
            let text = lab.mesh()?.to_text();
            out.write("mesh.txt", &text).map_err(io_error)?;
        }
        Command::Steklov => {
            let traces = config.steklov_traces;
            let basis = lab.problem_basis()?.clone();
            let mut csv = String::from("k,mu_k\n");
            for (k, mu) in basis.mu().iter().enumerate() {
                let _ = writeln!(csv, "{k},{mu:.16e}");
            }
            out.write("steklov.csv", &csv).map_err(io_error)?;
            let theta = lab.mesh()?.boundary_param().to_vec();
            for k in 0..traces.min(basis.count()) {
                let mut csv = String::from("theta,value\n");
                for (t, v) in theta.iter().zip(basis.mode(k)) {
                    let _ = writeln!(csv, "{t:.16e},{v:.16e}");
                }
                out.write(&format!("steklov_mode_{k:03}.csv"), &csv).map_err(io_error)?;
            }
        }
        Command::Frequency => {
            let reports = lab.frequencies()?;
            out.write("frequency.csv", &frequency_csv(&config.data, &reports)).map_err(io_error)?;
        }
        Command::Decay => {
            let profiles = lab.profiles()?;
            write_profiles(out, &config.data, &profiles)?;
        }
        Command::Verify => {
            let profiles = lab.profiles()?;
            let reports = lab.frequencies()?;
            let d0 = lab.domain()?.d0();
            write_profiles(out, &config.data, &profiles)?;
            out.write("frequency.csv", &frequency_csv(&config.data, &reports)).map_err(io_error)?;
            let pairs: Vec<(DecayProfile, FrequencyReport)> = profiles.into_iter().zip(reports).collect();
            let report = lab.stage("verify", |_| verify_decay(&pairs, d0))?;
            out.write("verify.csv", &report.to_csv()).map_err(io_error)?;
            if !report.passed() {
                (lab.log)("verification: bounds not met");
                return Ok(RunStatus::VerificationFailed);
            }
        }
        Command::Penetration => {
            if config.penetration_n.is_empty() {
                return Err(RunError {
                    stage: "penetration".into(),
                    source: Error::InvalidInput("no penetration_n configured".into()),
                });
            }
            let coefficients = lab.problem()?;
            lab.matrices()?;
            let csv = lab.stage("penetration", |lab| {
                let mesh = lab.mesh.as_ref().expect("built above");
                let matrices = lab.matrices.as_ref().expect("built above");
                let solver = lab.solver.as_ref().expect("built above");
                let mut csv = String::from("n,d,xi,xi_times_dn\n");
                for &n in &config.penetration_n {
                    let space = PenetrationSpace::new(mesh, &coefficients, matrices, solver, n, config.n_max_for(n))?;
                    for &d in &config.penetration_d {
                        let xi = space.xi(d)?;
                        let _ = writeln!(csv, "{n},{d:.16e},{xi:.16e},{:.16e}", xi * d * n as f64);
                    }
                }
                Ok(csv)
            })?;
            out.write("penetration.csv", &csv).map_err(io_error)?;
        }
        Command::Oracle => {
            let unit_disk = config.domain.family == DomainFamily::Disk && config.domain.params == [1.0];
            let bad = |message: String| RunError { stage: "oracle".into(), source: Error::InvalidInput(message) };
            if !unit_disk {
                return Err(bad("the oracle only covers the unit disk".into()));
            }
            lab.require_data("oracle")?;
            let grid = config.d_grid.points();
            for (i, spec) in config.data.iter().enumerate() {
                let (n, _) = spec.fourier().ok_or_else(|| bad(format!("no closed form for `{spec}`")))?;
                let profile = disk_profile(n, &grid).map_err(|source| RunError { stage: "oracle".into(), source })?;
                out.write(&profile_file(i, spec, "oracle", "csv"), &profile.to_csv()).map_err(io_error)?;
            }
        }
        Command::Plot => {
            let profiles = lab.profiles()?;
            let reports = lab.frequencies()?;
            write_profiles(out, &config.data, &profiles)?;
            for (i, ((spec, profile), freq)) in config.data.iter().zip(&profiles).zip(&reports).enumerate() {
                let svg = profile_svg(&spec.to_string(), profile, freq);
                out.write(&profile_file(i, spec, "decay", "svg"), &svg).map_err(io_error)?;
            }
        }
    }
    Ok(RunStatus::Success)
}

fn write_profiles(out: &mut Outputs, data: &[DatumSpec], profiles: &[DecayProfile]) -> Result<(), RunError> {
    for (i, (spec, profile)) in data.iter().zip(profiles).enumerate() {
        out.write(&profile_file(i, spec, "decay", "csv"), &profile.to_csv()).map_err(io_error)?;
    }
    Ok(())
}

fn frequency_csv(data: &[DatumSpec], reports: &[FrequencyReport]) -> String {
    let mut csv = String::from("datum,phi,phi1,l2,semi_h12,dual\n");
    for (spec, r) in data.iter().zip(reports) {
        let _ = writeln!(
            csv,
            "{spec},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.phi, r.phi1, r.l2, r.semi_h12, r.dual
        );
    }
    csv
}

/// Line chart of log10 D/D(d_0) and log10 H/H(d_0) against d, with the
/// reference curves h(d Phi) and h(d Phi1).
pub fn profile_svg(title: &str, profile: &DecayProfile, freq: &FrequencyReport) -> String {
    const W: f64 = 800.0;
    const HT: f64 = 600.0;
    const LEFT: f64 = 80.0;
    const RIGHT: f64 = 30.0;
    const TOP: f64 = 50.0;
    const BOTTOM: f64 = 60.0;

    let rows = profile.rows();
    let d: Vec<f64> = rows.iter().map(|r| r.d).collect();
    let (d_lo, d_hi) = (d[0], d[d.len() - 1].max(d[0] + 1e-12));
    let first = &rows[0];
    let log = |v: f64| if v > 0.0 { v.log10() } else { f64::NAN };
    let curves: [(&str, &str, bool, Vec<f64>); 4] = [
        ("D/D0", "#1f4e9a", false, rows.iter().map(|r| log(r.dirichlet / first.dirichlet)).collect()),
        ("H/H0", "#b8322a", false, rows.iter().map(|r| log(r.trace / first.trace)).collect()),
        ("h(d Phi)", "#1f4e9a", true, d.iter().map(|&x| log(h_fun((x - d_lo) * freq.phi).unwrap_or(f64::NAN))).collect()),
        ("h(d Phi1)", "#b8322a", true, d.iter().map(|&x| log(h_fun((x - d_lo) * freq.phi1).unwrap_or(f64::NAN))).collect()),
    ];
    let finite = curves.iter().flat_map(|c| c.3.iter().copied()).filter(|v| v.is_finite());
    let (mut y_lo, mut y_hi) = finite.fold((0.0f64, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    y_lo = y_lo.floor().max(-16.0);
    y_hi = y_hi.ceil();
    if y_hi - y_lo < 1.0 {
        y_lo = y_hi - 1.0;
    }
    let px = |x: f64| LEFT + (x - d_lo) / (d_hi - d_lo) * (W - LEFT - RIGHT);
    let py = |y: f64| TOP + (y_hi - y.clamp(y_lo, y_hi)) / (y_hi - y_lo) * (HT - TOP - BOTTOM);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="600" viewBox="0 0 800 600">"#);
    let _ = writeln!(svg, r#"<rect width="800" height="600" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="400" y="28" text-anchor="middle" font-family="sans-serif" font-size="16">{} (Phi = {:.4}, Phi1 = {:.4})</text>"#,
        escape(title),
        freq.phi,
        freq.phi1
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - LEFT - RIGHT,
        HT - TOP - BOTTOM
    );
    for k in 0..=5 {
        let x = d_lo + (d_hi - d_lo) * k as f64 / 5.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="12">{x:.3}</text>"#,
            px(x),
            HT - BOTTOM + 18.0
        );
    }
    let step = ((y_hi - y_lo) / 8.0).ceil().max(1.0);
    let mut y = y_hi;
    while y >= y_lo - 1e-9 {
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="#dddddd"/><text x="{2:.2}" y="{3:.2}" text-anchor="end" font-family="sans-serif" font-size="12">{y}</text>"##,
            py(y),
            W - RIGHT,
            LEFT - 6.0,
            py(y) + 4.0
        );
        y -= step;
    }
    let _ = writeln!(
        svg,
        r#"<text x="400" y="590" text-anchor="middle" font-family="sans-serif" font-size="13">d</text>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="300" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 20 300)">log10 of ratio to first grid point</text>"#
    );
    for (i, (name, color, dashed, values)) in curves.iter().enumerate() {
        let points: Vec<String> = d
            .iter()
            .zip(values)
            .filter(|(_, v)| v.is_finite())
            .map(|(&x, &v)| format!("{:.2},{:.2}", px(x), py(v)))
            .collect();
        let dash = if *dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2"{dash} points="{}"/>"#,
            points.join(" ")
        );
        let ly = TOP + 20.0 + 18.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">{}</text>"#,
            W - RIGHT - 150.0,
            W - RIGHT - 120.0,
            W - RIGHT - 112.0,
            ly + 4.0,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
