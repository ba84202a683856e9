use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use amalgam_core::geometry::{cover_sweep, empirical_concentration, CoverRow, FiniteMeasure, PointCloud};
use amalgam_core::models::hex_digest;
use amalgam_core::ncpoly::{write_tuples, GenId};
use amalgam_core::oracle::OracleError;
use amalgam_core::verify::{
    write_report_json, write_rows_csv, Harness, VerifyError, DETERMINISTIC_FACTOR,
};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, Validated};
use crate::manifest::{unix_now, OutputLock, RunManifest, RunStatus};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Oracle,
    Sample,
    Verify,
    Cover,
    All,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Oracle => "oracle",
            Command::Sample => "sample",
            Command::Verify => "verify",
            Command::Cover => "cover",
            Command::All => "all",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error at {0}")]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Compute(String),
}

impl RunError {
    /// 2 for config errors, 3 for I/O errors, 4 for anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            RunError::Io { .. } => 3,
            RunError::Compute(_) => 4,
        }
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> RunError {
    let context = context.into();
    move |source| RunError::Io { context, source }
}

impl From<VerifyError> for RunError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Io(source) => RunError::Io {
                context: "writing output".into(),
                source,
            },
            VerifyError::Oracle(OracleError::Io(source)) => RunError::Io {
                context: "writing output".into(),
                source,
            },
            other => RunError::Compute(other.to_string()),
        }
    }
}

impl From<OracleError> for RunError {
    fn from(e: OracleError) -> Self {
        VerifyError::from(e).into()
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub pass: bool,
    pub out_dir: PathBuf,
    pub files: Vec<String>,
}

/// Reads, validates and runs one command. Output files and the manifest go
/// to the configured directory (or `opts.out`).
pub fn run(command: Command, opts: &RunOptions) -> Result<Outcome, RunError> {
    let text = fs::read_to_string(&opts.config)
        .map_err(io_err(format!("reading {}", opts.config.display())))?;
    let mut config = ExperimentConfig::parse(&text)?;
    if let Some(s) = opts.seed {
        config.seed = s;
    }
    if let Some(o) = &opts.out {
        config.output_dir = o.clone();
    }
    let v = config.validate()?;
    if matches!(command, Command::Sample) && v.config.sample.is_none() {
        return Err(ConfigError {
            path: "sample".into(),
            message: "the sample command needs a [sample] section".into(),
        }
        .into());
    }
    if matches!(command, Command::Cover) && v.cover.is_none() {
        return Err(ConfigError {
            path: "cover".into(),
            message: "the cover command needs a [cover] section".into(),
        }
        .into());
    }

    let out = v.config.output_dir.clone();
    fs::create_dir_all(&out).map_err(io_err(format!("creating {}", out.display())))?;
    let _lock = OutputLock::acquire(&out).map_err(io_err("locking the output directory"))?;
    let mut manifest = RunManifest {
        name: v.config.name.clone(),
        command: command.name().into(),
        status: RunStatus::Running,
        config_hash: hex_digest(v.config.to_toml().as_bytes()),
        spec_hash: v.config.model.spec_hash(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        seed: v.config.seed,
        started_unix: unix_now(),
        finished_unix: None,
        files: Vec::new(),
        pass: None,
        error: None,
    };
    manifest.write(&out).map_err(io_err("writing the manifest"))?;

    let mut emitter = Emitter {
        dir: out.clone(),
        files: Vec::new(),
    };
    let result = execute(command, &v, &mut emitter);
    manifest.files = emitter.files.clone();
    match &result {
        Ok(pass) => manifest.finish(*pass),
        Err(e) => manifest.abort(e.to_string()),
    }
    manifest.write(&out).map_err(io_err("writing the manifest"))?;
    let pass = result?;
    Ok(Outcome {
        pass,
        out_dir: out,
        files: emitter.files,
    })
}

struct Emitter {
    dir: PathBuf,
    files: Vec<String>,
}

impl Emitter {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>, RunError> {
        let path = self.dir.join(name);
        let f = File::create(&path).map_err(io_err(format!("creating {}", path.display())))?;
        self.files.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), RunError> {
        let mut w = csv::Writer::from_writer(self.create(name)?);
        for r in rows {
            w.serialize(r)
                .map_err(|e| RunError::Compute(format!("writing {name}: {e}")))?;
        }
        w.flush().map_err(io_err(format!("writing {name}")))
    }

    fn path(&self) -> &Path {
        &self.dir
    }
}

fn execute(command: Command, v: &Validated, out: &mut Emitter) -> Result<bool, RunError> {
    let harness = Harness::with_oracle(v.config.model.clone(), v.oracle.clone(), v.config.seed);
    match command {
        Command::Oracle => oracle(v, out),
        Command::Sample => sample(v, &harness, out),
        Command::Verify => verify(v, &harness, out),
        Command::Cover => cover(v, &harness, out),
        Command::All => {
            let mut pass = oracle(v, out)?;
            if v.config.sample.is_some() {
                pass &= sample(v, &harness, out)?;
            }
            pass &= verify(v, &harness, out)?;
            if v.cover.is_some() {
                pass &= cover(v, &harness, out)?;
            }
            Ok(pass)
        }
    }
}

#[derive(Serialize)]
struct OracleRow {
    poly: String,
    re: f64,
    im: f64,
    /// `||E_P p||_2` onto the deterministic factor.
    cond_exp_norm: f64,
}

fn oracle(v: &Validated, out: &mut Emitter) -> Result<bool, RunError> {
    log::info!("oracle: {} polynomials", v.polys.len());
    let mut rows = Vec::new();
    for p in &v.polys {
        let t = v.oracle.trace_poly(p)?;
        rows.push(OracleRow {
            poly: p.to_string(),
            re: t.re,
            im: t.im,
            cond_exp_norm: v.oracle.cond_exp_norm(p, DETERMINISTIC_FACTOR)?,
        });
    }
    out.csv("oracle.csv", &rows)?;
    let gens = v.config.model.generators().into_iter().collect();
    let w = out.create("moments.csv")?;
    v.oracle
        .export_moment_table(w, &gens, v.config.oracle.table_max_len)?;
    Ok(true)
}

fn sample(v: &Validated, harness: &Harness, out: &mut Emitter) -> Result<bool, RunError> {
    let s = v.config.sample.as_ref().expect("validated");
    log::info!("sample: {} draws at k = {}", s.count, s.k);
    let tuples = harness.draw(s.k, s.count)?;
    let name = format!("samples_k{}.bin", s.k);
    let mut w = out.create(&name)?;
    write_tuples(&mut w, &tuples).map_err(|e| RunError::Compute(e.to_string()))?;
    w.flush().map_err(io_err(format!("writing {name}")))?;
    Ok(true)
}

fn verify(v: &Validated, harness: &Harness, out: &mut Emitter) -> Result<bool, RunError> {
    log::info!("verify: k = {:?}", v.config.schedule.k_list);
    let report = harness.run_suite(&v.suite())?;
    write_report_json(out.create("report.json")?, &report)?;
    write_rows_csv(out.create("rows.csv")?, report.rows())?;
    let failed = report.rows().filter(|r| !r.pass).count();
    log::info!(
        "verify: {} rows, {failed} failed, overall {}",
        report.rows().count(),
        if report.pass { "pass" } else { "fail" }
    );
    Ok(report.pass)
}

#[derive(Serialize)]
struct ConcentrationRow {
    n: usize,
    generators: String,
    eps: f64,
    points: usize,
    /// Lower bound on the concentration function from half-mass sets of
    /// the observables.
    alpha_lower: f64,
}

fn family_label(f: &std::collections::BTreeSet<GenId>) -> String {
    f.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(" ")
}

fn cover(v: &Validated, harness: &Harness, out: &mut Emitter) -> Result<bool, RunError> {
    let plan = v.cover.as_ref().expect("validated");
    let geo = |e: amalgam_core::geometry::GeometryError| RunError::Compute(e.to_string());
    let mut rows = Vec::new();
    let mut conc = Vec::new();
    for &k in &plan.k_list {
        log::info!("cover: {} points at k = {k}", plan.points);
        let cloud = PointCloud::new(harness.draw(k, plan.points)?).map_err(geo)?;
        let n = cloud.dim().unwrap_or(0);
        let sweep = cover_sweep(&cloud, &plan.families, &plan.eps).map_err(geo)?;
        for (f, per_eps) in plan.families.iter().zip(&sweep) {
            for (&eps, b) in plan.eps.iter().zip(per_eps) {
                rows.push(CoverRow::new(n, f, eps, cloud.len(), b));
            }
        }
        if !plan.observables.is_empty() {
            let mu = FiniteMeasure::uniform(&cloud).map_err(geo)?;
            for f in &plan.families {
                for &eps in &plan.eps {
                    let w = empirical_concentration(&mu, f, eps, &plan.observables).map_err(geo)?;
                    conc.push(ConcentrationRow {
                        n,
                        generators: family_label(f),
                        eps,
                        points: cloud.len(),
                        alpha_lower: w.value,
                    });
                }
            }
        }
    }
    out.csv("cover.csv", &rows)?;
    if !conc.is_empty() {
        out.csv("cover_concentration.csv", &conc)?;
    }
    log::info!("cover: results in {}", out.path().display());
    Ok(true)
}
