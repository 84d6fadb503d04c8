use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use corrspec_core::asymptotic;
use corrspec_core::binary;
use corrspec_core::dpi::{self, ChainSpec};
use corrspec_core::linalg::Matrix;
use corrspec_core::oracle::{self, FrontierConfig, Mode};
use corrspec_core::prob::{FactoredDist, JointDist, Kernel, Marginal};
use corrspec_core::regions::{self, DistortionSpec, SamplerConfig, SetPredicate, TestChannel};
use corrspec_core::spectral::{self, TildeMatrix};

const SCHEMA: &str = "corrspec/1";

const FORMATS: &str = "\
Input formats (JSON):
  joint      {\"rows\": [labels]?, \"cols\": [labels]?, \"mass\": [[f64]]}
  kernel     {\"from\": [labels]?, \"to\": [labels]?, \"rows\": [[f64]]}   rows sum to 1
  chain      {\"pxy\": joint, \"kzy\": kernel}                          kernel maps Y to Z
  factored   {\"axes\": [{\"name\": s, \"labels\": [labels]}], \"mass\": [f64]}
             mass is row-major over the listed axes; source letters are
             named u1.., v1.., encoder outputs x1, x2, time sharing q
  tilde      {\"tilde\": [[f64]]}
  distortion {\"d1\": [[f64]], \"d2\": [[f64]], \"target\": [d1_max, d2_max]}

Every JSON output is an object carrying \"schema\": \"corrspec/1\".
CSV output uses ',' separators, '.' decimals and LF line endings.

Exit codes: 0 pass, 1 fail verdict, 2 usage error, 3 input or I/O error.";

#[derive(Parser, Debug)]
#[command(name = "corrspec", version, about = "Maximal-correlation spectra and the bounds built on them", after_help = FORMATS)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write data here instead of standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Worker threads for the parallel modules.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Override the default comparison tolerance of the check.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output format where a command supports both.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check that a joint (or a raw tilde matrix) is a valid tilde matrix.
    ///
    /// Output: {sigma, sigma_in_unit_interval, top_is_one, positive_top_pair,
    /// untilde_valid, accept, reason}. Fails when the matrix is rejected.
    Validate {
        file: PathBuf,
        /// Input is {"tilde": [[..]]} rather than a joint.
        #[arg(long)]
        tilde: bool,
    },
    /// Singular values of the tilde matrix of a joint.
    ///
    /// Output: {sigma, lambda2, valid, decomposes: {s1, s2} | null}.
    Spectrum { file: PathBuf },
    /// Data-processing check on a chain X - Y - Z.
    ///
    /// Output: {sigma_xy, sigma_yz, sigma_xz, slack, factorization_residual, holds}.
    DpiCheck { file: PathBuf },
    /// Spectral necessary conditions on a factored candidate.
    ///
    /// Output: {set, constraints: [{id, measured, bound, pass}], skipped, worst, pass}.
    Necc {
        file: PathBuf,
        /// lambda2 of the sources.
        #[arg(long)]
        lambda2: f64,
        /// `all` conditions on every subset pair of source letters; `none`
        /// checks only the unconditional x1-x2 spectrum.
        #[arg(long, value_enum, default_value_t = Subsets::All)]
        subsets: Subsets,
    },
    /// Top of the spectrum of the n-fold product of a joint.
    ///
    /// Output: {base, n, values, multiplicity_holds}.
    Nletter {
        file: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 16)]
        top_k: usize,
    },
    /// Near-decomposable construction over a range of block lengths.
    ///
    /// CSV columns: n,gap,certified_lower,lambda2. JSON: {rows: [certificate]}.
    Witsenhausen {
        /// Marginal of X1, comma separated.
        #[arg(long)]
        px1: String,
        /// Marginal of one source letter, comma separated.
        #[arg(long)]
        pu: String,
        /// Block length `n` or inclusive range `a..b`.
        #[arg(long)]
        n: String,
        /// Symbols of the first block, comma separated indices.
        #[arg(long, default_value = "0")]
        s1: String,
    },
    /// Binary bound intervals on the lambda of (X1, X2) over an a-b grid.
    ///
    /// CSV columns: a,b,outer1_lo,outer1_hi,outer2_lo,outer2_hi,inner_lo,inner_hi.
    BinaryBounds {
        #[arg(long)]
        lambda2: f64,
        #[arg(long, default_value_t = 99)]
        grid: usize,
        /// Emit the full square grid rather than the diagonal a = b.
        #[arg(long)]
        full_grid: bool,
    },
    /// Sample achievable rate points of a distortion problem under a set.
    ///
    /// CSV columns: id,kind,r1,r2,rsum,ed1,ed2,in_set,accepted.
    /// JSON: {predicate, lambda2_uv, samples, summary}.
    RdRegion {
        #[arg(long)]
        sources: PathBuf,
        #[arg(long)]
        distortion: PathBuf,
        #[arg(long = "set")]
        set: String,
        #[arg(long, default_value_t = 200)]
        budget: usize,
        /// Also write the JSON summary here when emitting CSV.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Necessary conditions for a multiple-access channel.
    ///
    /// Output: {spectral, bounds, entropies, margins, rates_ok, pass}.
    MacCheck {
        #[arg(long)]
        sources: PathBuf,
        /// Kernel from the pair (x1, x2), flattened as x1 * |X2| + x2.
        #[arg(long)]
        channel: PathBuf,
        /// Factored candidate over (q?, u1, v1, x1, x2).
        #[arg(long)]
        candidate: PathBuf,
        /// Defaults to the lambda2 of the sources.
        #[arg(long)]
        lambda2: Option<f64>,
    },
    /// Search encoder pairs for violations of the bounds.
    ///
    /// Output: {mode, n, seed, lambda2_uv, best_lambda, argmax, best_pair,
    /// samples_evaluated, binary_checked, cross_check, violation_count,
    /// violations, pass}.
    Oracle {
        #[arg(long)]
        sources: PathBuf,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value = "exhaustive")]
        mode: String,
        #[arg(long, default_value_t = 100_000)]
        budget: usize,
        /// Encoder output sizes, `n1,n2`.
        #[arg(long, default_value = "2,2")]
        sizes: String,
        /// Re-check every k-th pair through the tensor route; 0 disables.
        #[arg(long, default_value_t = 97)]
        cross_check_every: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Subsets {
    All,
    None,
}

/// Bad flag values found after parsing; exit code 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

struct Output {
    body: String,
    pass: bool,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid input in {}", path.display()))
}

fn json<T: Serialize>(value: &T, pass: bool) -> Result<Output> {
    let mut v = serde_json::to_value(value)?;
    let obj = v
        .as_object_mut()
        .ok_or_else(|| anyhow!("report did not serialize to an object"))?;
    obj.insert("schema".into(), Value::from(SCHEMA));
    let mut body = serde_json::to_string_pretty(&v)?;
    body.push('\n');
    Ok(Output { body, pass })
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| x.trim().parse::<T>().map_err(|_| usage(format!("bad {what} entry {x:?}"))))
        .collect()
}

fn parse_range(s: &str) -> Result<Vec<usize>> {
    let bad = || usage(format!("bad block length {s:?}; expected n or a..b"));
    match s.split_once("..") {
        Some((a, b)) => {
            let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            if a > b {
                return Err(bad());
            }
            Ok((a..=b).collect())
        }
        None => Ok(vec![s.trim().parse().map_err(|_| bad())?]),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TildeFile {
    tilde: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DistortionFile {
    d1: Vec<Vec<f64>>,
    d2: Vec<Vec<f64>>,
    target: [f64; 2],
}

#[derive(Serialize)]
struct SpectrumOut {
    sigma: Vec<f64>,
    lambda2: f64,
    valid: bool,
    decomposes: Option<spectral::Decomposition>,
}

#[derive(Serialize)]
struct NLetterOut {
    #[serde(flatten)]
    spectrum: asymptotic::NLetterSpectrum,
    multiplicity_holds: bool,
}

#[derive(Serialize)]
struct RowsOut<T: Serialize> {
    rows: Vec<T>,
}

#[derive(Serialize)]
struct RegionSummary {
    predicate: SetPredicate,
    lambda2_uv: f64,
    budget: usize,
    seed: u64,
    in_set: usize,
    accepted: usize,
    min_rsum: Option<f64>,
}

#[derive(Serialize)]
struct RegionOut<'a> {
    #[serde(flatten)]
    report: &'a regions::RegionReport,
    summary: &'a RegionSummary,
}

fn run(cli: &Cli) -> Result<Output> {
    let g = &cli.global;
    let fmt = |default: Format| g.format.unwrap_or(default);
    match &cli.command {
        Command::Validate { file, tilde } => {
            let t = if *tilde {
                let f: TildeFile = read_json(file)?;
                TildeMatrix::new(Matrix::from_rows(&f.tilde)?)
            } else {
                spectral::tilde(&read_json::<JointDist>(file)?)?
            };
            let rep = match g.tol {
                Some(tol) => spectral::verify_theorem_iff_tol(&t, tol),
                None => spectral::verify_theorem_iff(&t),
            };
            json(&rep, rep.accept)
        }
        Command::Spectrum { file } => {
            let j: JointDist = read_json(file)?;
            let t = spectral::tilde(&j)?;
            let rep = spectral::verify_theorem_iff(&t);
            let out = SpectrumOut {
                lambda2: spectral::lambda2(&j)?,
                sigma: rep.sigma,
                valid: rep.accept,
                decomposes: spectral::decomposes(&j),
            };
            json(&out, true)
        }
        Command::DpiCheck { file } => {
            let c: ChainSpec = read_json(file)?;
            let rep = dpi::check_dpi_tol(&c, g.tol.unwrap_or(dpi::DPI_TOL))?;
            json(&rep, rep.holds)
        }
        Command::Necc { file, lambda2, subsets } => {
            let f: FactoredDist = read_json(file)?;
            let tol = g.tol.unwrap_or(dpi::DPI_TOL);
            let rep = match subsets {
                Subsets::All => dpi::intersection_membership_with(&f, *lambda2, dpi::DEFAULT_SUBSET_CAP, tol)?,
                Subsets::None => dpi::conditional_necc_check_tol(&f, *lambda2, &[], &[], tol)?,
            };
            if let Some(w) = rep.worst_constraint().filter(|_| !rep.pass) {
                eprintln!("failing constraint {}: {} > {}", w.id, w.measured, w.bound);
            }
            json(&rep, rep.pass)
        }
        Command::Nletter { file, n, top_k } => {
            let j: JointDist = read_json(file)?;
            let s = asymptotic::nletter_spectrum(&j, *n, *top_k)?;
            let holds = s.multiplicity_holds();
            json(&NLetterOut { spectrum: s, multiplicity_holds: holds }, holds)
        }
        Command::Witsenhausen { px1, pu, n, s1 } => {
            let px1 = Marginal::from_probs(&parse_list::<f64>(px1, "px1")?)?;
            let pu = Marginal::from_probs(&parse_list::<f64>(pu, "pu")?)?;
            let s1 = parse_list::<usize>(s1, "s1")?;
            let rows = asymptotic::trajectory(&px1, &pu, parse_range(n)?, &s1)?;
            let pass = rows.iter().all(|r| r.holds);
            match fmt(Format::Csv) {
                Format::Json => json(&RowsOut { rows }, pass),
                Format::Csv => {
                    let mut body = String::from("n,gap,certified_lower,lambda2\n");
                    for r in &rows {
                        body += &format!("{},{},{},{}\n", r.n, r.gap, r.certified_lower, r.lambda2);
                    }
                    Ok(Output { body, pass })
                }
            }
        }
        Command::BinaryBounds { lambda2, grid, full_grid } => {
            let rows = binary::curve_data(*lambda2, *grid, *full_grid)?;
            let pass = rows.iter().all(|r| r.bounds.nested(1e-12));
            match fmt(Format::Csv) {
                Format::Json => json(&RowsOut { rows }, pass),
                Format::Csv => Ok(Output {
                    body: binary::curve_csv(&rows),
                    pass,
                }),
            }
        }
        Command::RdRegion {
            sources,
            distortion,
            set,
            budget,
            summary,
        } => {
            let pred: SetPredicate = set.parse().map_err(|e| usage(format!("{e}")))?;
            let puv: JointDist = read_json(sources)?;
            let d: DistortionFile = read_json(distortion)?;
            let ds = DistortionSpec::new(Matrix::from_rows(&d.d1)?, Matrix::from_rows(&d.d2)?)?;
            let mut cfg = SamplerConfig {
                budget: *budget,
                seed: g.seed,
                ..SamplerConfig::default()
            };
            cfg.sout2.seed = g.seed;
            let rep = regions::rd_region_sample(&puv, &ds, (d.target[0], d.target[1]), pred, &cfg)?;
            let sum = RegionSummary {
                predicate: pred,
                lambda2_uv: rep.lambda2_uv,
                budget: *budget,
                seed: g.seed,
                in_set: rep.samples.iter().filter(|s| s.in_set).count(),
                accepted: rep.accepted().count(),
                min_rsum: rep.accepted().map(|s| s.rates.rsum).reduce(f64::min),
            };
            match fmt(Format::Csv) {
                Format::Json => json(&RegionOut { report: &rep, summary: &sum }, true),
                Format::Csv => {
                    if let Some(p) = summary {
                        write_to(Some(p), &json(&sum, true)?.body)?;
                    }
                    let mut body = String::from("id,kind,r1,r2,rsum,ed1,ed2,in_set,accepted\n");
                    for s in &rep.samples {
                        let kind = serde_json::to_value(s.kind)?;
                        body += &format!(
                            "{},{},{},{},{},{},{},{},{}\n",
                            s.id,
                            kind.as_str().unwrap_or_default(),
                            s.rates.r1,
                            s.rates.r2,
                            s.rates.rsum,
                            s.ed1,
                            s.ed2,
                            s.in_set,
                            s.accepted
                        );
                    }
                    Ok(Output { body, pass: true })
                }
            }
        }
        Command::MacCheck {
            sources,
            channel,
            candidate,
            lambda2,
        } => {
            let puv: JointDist = read_json(sources)?;
            let ch: Kernel = read_json(channel)?;
            let f: FactoredDist = read_json(candidate)?;
            let tc = TestChannel::from_dist(&f)?;
            let diff = tc.sources().mass().sub(puv.mass()).max_abs();
            if diff > 1e-9 {
                return Err(anyhow!("candidate source marginal differs from the sources by {diff:e}"));
            }
            let l2 = match lambda2 {
                Some(l) => *l,
                None => spectral::lambda2(&puv)?,
            };
            let rep = regions::mare_check(&tc, &ch, l2)?;
            json(&rep, rep.pass)
        }
        Command::Oracle {
            sources,
            n,
            mode,
            budget,
            sizes,
            cross_check_every,
        } => {
            let mode: Mode = mode.parse().map_err(|e| usage(format!("{e}")))?;
            let sz = parse_list::<usize>(sizes, "sizes")?;
            let [n1, n2] = sz[..] else {
                return Err(usage("--sizes takes two values"));
            };
            let src: JointDist = read_json(sources)?;
            let cfg = FrontierConfig {
                n: *n,
                sizes: (n1, n2),
                mode,
                budget: *budget,
                seed: g.seed,
                cross_check_every: *cross_check_every,
            };
            let r = oracle::frontier(&src, &cfg)?;
            json(&r, r.pass)
        }
    }
}

fn write_to(path: Option<&Path>, body: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, body).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.global.workers == 0 {
        eprintln!("error: --workers must be at least 1");
        return ExitCode::from(2);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.workers)
        .build_global()
    {
        eprintln!("error: {e}");
        return ExitCode::from(3);
    }
    let result = run(&cli).and_then(|out| {
        write_to(cli.global.output.as_deref(), &out.body)?;
        Ok(out.pass)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = if e.downcast_ref::<Usage>().is_some() { 2 } else { 3 };
            ExitCode::from(code)
        }
    }
}
