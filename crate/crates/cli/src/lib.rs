//! Command-line driver for the operator-system toolkit.
//!
//! Exit codes: `0` for success and positive verdicts (member / certified),
//! `1` for negative mathematical verdicts (not a member, rejected,
//! signalling), `2` for input or numerical errors. Every verdict can be
//! persisted as a canonical JSON certificate with `--output`; fixed seeds
//! give byte-identical certificates across runs.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::Serialize;

use opsys_core::compression::{
    abstract_cone_membership, compute_j, ContractionData, MembershipParams,
};
use opsys_core::correlations::{
    build_ns_opsys, chsh_value, correlation_from_state, qc_from_pvms, validate_ns, PvmFamily,
    StateFunctional,
};
use opsys_core::error::Error;
use opsys_core::io::{
    canonical_json, correlation_from_json, correlation_to_json, load_json, load_opsys,
    CorrelationJson, MatrixJson, NsSystemJson, PvmJson, StateJson,
};
use opsys_core::matlin::{C64, HermitianMatrix};
use opsys_core::opsys::{cone_membership, LevelElement, OperatorSystemSpace};
use opsys_core::projection::{
    block_cone_membership, is_abstract_projection, DetectorConfig, ProjectionStatus,
};
use opsys_core::quotient::{build_quotient, compression_iso_check, kernel_iso_instances};

use opsys_core::selftest::run_selftest;

/// Numerical toolkit for operator systems, compression cones, quotients,
/// projection detection, and quantum correlations.
#[derive(Parser)]
#[command(name = "opsys", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Run parameters shared by most subcommands.
#[derive(Args, Clone)]
struct RunConfig {
    /// PSD decision tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Comma-separated strictly decreasing epsilon schedule.
    #[arg(long, default_value = "1e-1,1e-3,1e-6")]
    eps_schedule: String,
    /// Maximum matrix level for level-quantified procedures.
    #[arg(long, default_value_t = 3)]
    n_max: usize,
    /// Randomized search budget per level.
    #[arg(long, default_value_t = 2000)]
    budget: usize,
    /// RNG seed (the OPSYS_SEED environment variable overrides this).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the verdict certificate to this path as canonical JSON.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl RunConfig {
    fn seed(&self) -> u64 {
        match std::env::var("OPSYS_SEED") {
            Ok(v) => v.parse().unwrap_or(self.seed),
            Err(_) => self.seed,
        }
    }

    fn params(&self) -> Result<MembershipParams, Error> {
        let eps_schedule: Result<Vec<f64>, _> =
            self.eps_schedule.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let eps_schedule = eps_schedule.map_err(|e| Error::SchemaError {
            context: "--eps-schedule".into(),
            message: e.to_string(),
        })?;
        let params = MembershipParams {
            tol: self.tol,
            eps_schedule,
            seed: self.seed(),
            ..MembershipParams::default()
        };
        params.validate()?;
        Ok(params)
    }

    fn detector(&self) -> Result<DetectorConfig, Error> {
        Ok(DetectorConfig {
            n_max: self.n_max,
            budget: self.budget,
            seed: self.seed(),
            params: self.params()?,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Decide membership of an element in C_n, or in C(p_n) when --p is given.
    ConeCheck {
        #[arg(long)]
        opsys: PathBuf,
        /// Element file: JSON matrix of size n·d.
        #[arg(long)]
        x: PathBuf,
        /// Positive contraction: `diag(...)` or a JSON matrix file.
        #[arg(long)]
        p: Option<String>,
        #[command(flatten)]
        cfg: RunConfig,
    },
    /// Build J_p and the quotient V/J_p; print dimensions.
    Compress {
        #[arg(long)]
        opsys: PathBuf,
        #[arg(long)]
        p: String,
        #[command(flatten)]
        cfg: RunConfig,
    },
    /// Decide whether p is an abstract projection.
    DetectProjection {
        #[arg(long)]
        opsys: PathBuf,
        #[arg(long)]
        p: String,
        #[command(flatten)]
        cfg: RunConfig,
    },
    /// Randomized agreement check between the quotient and the compressed corner.
    QuotientIso {
        #[arg(long)]
        opsys: PathBuf,
        #[arg(long)]
        p: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[command(flatten)]
        cfg: RunConfig,
    },
    /// Membership of [[a, x], [x*, b]] in the block compression cone.
    BlockCheck {
        #[arg(long)]
        opsys: PathBuf,
        #[arg(long)]
        p: String,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        x: PathBuf,
        #[command(flatten)]
        cfg: RunConfig,
    },
    /// Correlation subcommands.
    #[command(subcommand)]
    Corr(CorrCommand),
    /// Run the deterministic invariant suites and write a certificate.
    Selftest {
        #[command(flatten)]
        cfg: RunConfig,
    },
}

#[derive(Subcommand)]
enum CorrCommand {
    /// Validate non-signalling conditions of a correlation file.
    Validate {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        cfg: RunConfig,
    },
    /// Generate a correlation from commuting PVM families and a state.
    FromPvm {
        #[arg(long)]
        alice: PathBuf,
        #[arg(long)]
        bob: PathBuf,
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        commute_tol: f64,
        /// Write the generated correlation here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: RunConfig,
    },
    /// Evaluate a state on the generators of a non-signalling system.
    FromState {
        #[arg(long)]
        ns: PathBuf,
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: RunConfig,
    },
    /// CHSH winning probability of a 2-experiment binary correlation.
    Chsh {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        cfg: RunConfig,
    },
}

/// Entry point; returns the process exit code.
pub fn cli_dispatch(args: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version are successful exits in clap's model.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if verdict_error(&e) {
                1
            } else {
                2
            }
        }
    }
}

/// Errors that represent negative mathematical verdicts rather than tool
/// failures.
fn verdict_error(e: &Error) -> bool {
    matches!(
        e,
        Error::SignallingViolation { .. }
            | Error::NotADistribution { .. }
            | Error::CommutationViolation { .. }
            | Error::NotNonSignalling { .. }
            | Error::TrivialUnit { .. }
    )
}

fn write_certificate<T: Serialize>(output: &Option<PathBuf>, value: &T) -> Result<(), Error> {
    if let Some(path) = output {
        opsys_core::io::save_canonical(path, value)?;
    }
    Ok(())
}

/// Parses `diag(a,b,...)` or loads a JSON matrix file.
fn parse_matrix_arg(arg: &str, expected_dim: usize) -> Result<HermitianMatrix, Error> {
    let trimmed = arg.trim();
    if let Some(inner) = trimmed.strip_prefix("diag(").and_then(|s| s.strip_suffix(')')) {
        let entries: Result<Vec<f64>, _> = inner.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let entries = entries.map_err(|e| Error::SchemaError {
            context: format!("matrix expression {trimmed:?}"),
            message: e.to_string(),
        })?;
        if entries.len() != expected_dim {
            return Err(Error::ShapeMismatch {
                expected: format!("{expected_dim} diagonal entries"),
                got: format!("{}", entries.len()),
            });
        }
        return Ok(HermitianMatrix::from_diagonal(&entries));
    }
    let mj: MatrixJson = load_json(Path::new(trimmed))?;
    HermitianMatrix::new(mj.to_matrix()?)
}

fn load_element(v: &OperatorSystemSpace, path: &Path) -> Result<LevelElement, Error> {
    let mj: MatrixJson = load_json(path)?;
    LevelElement::from_block(v, HermitianMatrix::new(mj.to_matrix()?)?)
}

fn load_raw_matrix(path: &Path) -> Result<DMatrix<C64>, Error> {
    let mj: MatrixJson = load_json(path)?;
    mj.to_matrix()
}

fn load_pvm(path: &Path) -> Result<PvmFamily, Error> {
    let j: PvmJson = load_json(path)?;
    let measures = j
        .measurements
        .iter()
        .map(|pvm| {
            pvm.iter()
                .map(|mj| HermitianMatrix::new(mj.to_matrix()?))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    PvmFamily::new(j.dim, measures)
}

fn load_state(path: &Path) -> Result<StateFunctional, Error> {
    let j: StateJson = load_json(path)?;
    StateFunctional::new(HermitianMatrix::new(j.rho.to_matrix()?)?)
}

fn run(command: Command) -> Result<i32, Error> {
    match command {
        Command::ConeCheck { opsys, x, p, cfg } => {
            let v = load_opsys(&opsys)?;
            let params = cfg.params()?;
            let x = load_element(&v, &x)?;
            let cert = match p {
                None => cone_membership(&v, &x, params.tol)?,
                Some(expr) => {
                    let p = parse_matrix_arg(&expr, v.ambient_dim())?;
                    let c = ContractionData::new(v, p)?;
                    abstract_cone_membership(&c, &x, &params)?
                }
            };
            println!("{}", if cert.is_member() { "member" } else { "not_member" });
            write_certificate(&cfg.output, &cert)?;
            Ok(if cert.is_member() { 0 } else { 1 })
        }
        Command::Compress { opsys, p, cfg } => {
            let v = load_opsys(&opsys)?;
            let params = cfg.params()?;
            let p = parse_matrix_arg(&p, v.ambient_dim())?;
            let c = ContractionData::new(v, p)?;
            let j = compute_j(&c, &params)?;
            let quotient = build_quotient(&c, &params)?;
            #[derive(Serialize)]
            struct CompressReport {
                dim_system: usize,
                dim_kernel: usize,
                dim_quotient: usize,
                heuristic: bool,
                unit_coset_norm: f64,
            }
            let report = CompressReport {
                dim_system: c.system().basis_len(),
                dim_kernel: j.dim(),
                dim_quotient: quotient.dim(),
                heuristic: j.is_heuristic(),
                unit_coset_norm: quotient.unit_coset().norm(),
            };
            println!(
                "dim V = {}, dim J_p = {}, dim V/J_p = {}{}",
                report.dim_system,
                report.dim_kernel,
                report.dim_quotient,
                if report.heuristic { " (heuristic kernel)" } else { "" }
            );
            write_certificate(&cfg.output, &report)?;
            Ok(0)
        }
        Command::DetectProjection { opsys, p, cfg } => {
            let v = load_opsys(&opsys)?;
            let detector = cfg.detector()?;
            let p = parse_matrix_arg(&p, v.ambient_dim())?;
            let c = ContractionData::new(v, p)?;
            let verdict = is_abstract_projection(&c, &detector)?;
            println!("{}", canonical_json(&verdict)?.trim_end());
            write_certificate(&cfg.output, &verdict)?;
            Ok(match verdict.status {
                ProjectionStatus::CertifiedUpTo(_) => 0,
                ProjectionStatus::Rejected => 1,
            })
        }
        Command::QuotientIso { opsys, p, trials, cfg } => {
            let v = load_opsys(&opsys)?;
            let params = cfg.params()?;
            let p = parse_matrix_arg(&p, v.ambient_dim())?;
            let c = ContractionData::new(v, p)?;
            let quotient = build_quotient(&c, &params)?;
            let mut report =
                compression_iso_check(&quotient, cfg.n_max, trials, cfg.seed(), &params, 1e-6)?;
            kernel_iso_instances(&quotient, cfg.n_max, trials / 5, cfg.seed(), &params, &mut report)?;
            println!(
                "compared {} instances: {} agreements, {} kernel instances",
                report.compared, report.agreements, report.kernel_instances
            );
            write_certificate(&cfg.output, &report)?;
            Ok(if report.all_agree() { 0 } else { 1 })
        }
        Command::BlockCheck { opsys, p, a, b, x, cfg } => {
            let v = load_opsys(&opsys)?;
            let params = cfg.params()?;
            let p = parse_matrix_arg(&p, v.ambient_dim())?;
            let c = ContractionData::new(v.clone(), p)?;
            let a = load_element(&v, &a)?;
            let b = load_element(&v, &b)?;
            let x = load_raw_matrix(&x)?;
            let member = block_cone_membership(&c, &a, &b, &x, &params)?;
            #[derive(Serialize)]
            struct BlockReport {
                member: bool,
            }
            println!("{}", if member { "member" } else { "not_member" });
            write_certificate(&cfg.output, &BlockReport { member })?;
            Ok(if member { 0 } else { 1 })
        }
        Command::Corr(corr) => run_corr(corr),
        Command::Selftest { cfg } => {
            let report = run_selftest(cfg.seed(), &cfg.params()?)?;
            println!("selftest: {} suites, all passed = {}", report.suites.len(), report.all_passed());
            write_certificate(&cfg.output, &report)?;
            Ok(if report.all_passed() { 0 } else { 1 })
        }
    }
}

fn run_corr(corr: CorrCommand) -> Result<i32, Error> {
    match corr {
        CorrCommand::Validate { input, cfg } => {
            let j: CorrelationJson = load_json(&input)?;
            let c = correlation_from_json(&j)?;
            let report = validate_ns(&c, cfg.tol)?;
            println!("non-signalling ok (worst defect {:.3e})", report.worst_defect);
            write_certificate(&cfg.output, &report)?;
            Ok(0)
        }
        CorrCommand::FromPvm { alice, bob, state, commute_tol, out, cfg } => {
            let alice = load_pvm(&alice)?;
            let bob = load_pvm(&bob)?;
            let state = load_state(&state)?;
            let corr = qc_from_pvms(&alice, &bob, &state, commute_tol)?;
            let json = correlation_to_json(&corr);
            if let Some(path) = out {
                opsys_core::io::save_canonical(&path, &json)?;
            }
            println!("generated correlation: {} experiments, {} outcomes", corr.experiments(), corr.outcomes());
            write_certificate(&cfg.output, &json)?;
            Ok(0)
        }
        CorrCommand::FromState { ns, state, out, cfg } => {
            let nsj: NsSystemJson = load_json(&ns)?;
            let mut gens = Vec::new();
            for x in 0..nsj.experiments {
                for y in 0..nsj.experiments {
                    for a in 0..nsj.outcomes {
                        for b in 0..nsj.outcomes {
                            let m = nsj.generators[x][y][a][b].to_matrix()?;
                            gens.push(HermitianMatrix::new(m)?);
                        }
                    }
                }
            }
            let system = build_ns_opsys(gens, nsj.experiments, nsj.outcomes, cfg.tol.max(1e-9))?;
            let state = load_state(&state)?;
            let corr = correlation_from_state(&system, &state)?;
            let json = correlation_to_json(&corr);
            if let Some(path) = out {
                opsys_core::io::save_canonical(&path, &json)?;
            }
            println!("evaluated state on {} generators", system.generators().len());
            write_certificate(&cfg.output, &json)?;
            Ok(0)
        }
        CorrCommand::Chsh { input, cfg } => {
            let j: CorrelationJson = load_json(&input)?;
            let c = correlation_from_json(&j)?;
            let value = chsh_value(&c)?;
            println!("{value:.7}");
            #[derive(Serialize)]
            struct ChshReport {
                chsh_winning_probability: f64,
            }
            write_certificate(&cfg.output, &ChshReport { chsh_winning_probability: value })?;
            Ok(0)
        }
    }
}
