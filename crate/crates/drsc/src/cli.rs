//! The `drsc` command line.
//!
//! Exit status: 0 success, 1 usage error, 2 data error, 3 property or bound
//! violation.

use std::ffi::OsString;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use drsc_core::bounds::{delay_tail_bound, exponent_summary, insertion_prob_bound, redundancy_delay_bound};
use drsc_core::codec::DEFAULT_PRECISION_CEILING;
use drsc_core::delay_codec::{build_extended_model_with, dc_decode_with, dc_encode, BuildOptions, DEFAULT_AGGREGATION_CEILING};
use drsc_core::{Error, SourceModel, Symbol};

use crate::analysis::{
    ensemble_rows, estimate_delay_tail, estimate_redundancy, write_ensemble_csv, write_redundancy_csv, RedundancyConfig, TailConfig,
};
use crate::container::{payload_byte, read_container, write_container};
use crate::pmf::{parse_pmf, single_char_tokens};
use crate::verify::{find_suite, run_suites, SUITES};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;

pub const PRECISION_ENV: &str = "DRSC_PRECISION_CEILING";

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
    Violation(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Data(_) => EXIT_DATA,
            Failure::Violation(_) => EXIT_VIOLATION,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Violation(m) => m,
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

fn data(e: impl std::fmt::Display) -> Failure {
    Failure::Data(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "drsc", version, about = "Hard-delay arithmetic coding for memoryless sources")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Encode symbols into a DRSC container.
    Encode(EncodeArgs),
    /// Decode a DRSC container back to symbols.
    Decode(DecodeArgs),
    /// Print closed-form delay and redundancy bounds.
    Bounds(BoundsArgs),
    /// Monte Carlo experiments, written as CSV.
    #[command(subcommand)]
    Simulate(Simulate),
    /// Run the randomized property suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct EncodeArgs {
    #[arg(long)]
    pmf: PathBuf,
    #[arg(long)]
    d: u64,
    /// Input text; standard input if absent.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Output container; standard output if absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Every character is a symbol, instead of whitespace-separated tokens.
    #[arg(long)]
    chars: bool,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    /// Token names for the output; without it symbols print as indices.
    #[arg(long)]
    pmf: Option<PathBuf>,
    #[arg(long, short)]
    input: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    chars: bool,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[arg(long)]
    pmf: PathBuf,
    /// Coding model for the delay-tail bound; defaults to the source.
    #[arg(long)]
    q: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    dmax: u64,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Simulate {
    /// Empirical delay tail of plain arithmetic coding against its bound.
    DelayTail(TailArgs),
    /// Redundancy of the hard-delay codec against its bound.
    Redundancy(RedundancyArgs),
    /// Hit rate of the rotation ensemble.
    Ensemble(EnsembleArgs),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    threads: Option<usize>,
    /// CSV output; standard output if absent.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Multiplies every bound before comparison.
    #[arg(long, default_value_t = 1.0, hide = true)]
    bound_scale: f64,
}

#[derive(Debug, Args)]
struct TailArgs {
    #[arg(long)]
    pmf: PathBuf,
    #[arg(long)]
    q: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    dmax: u64,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, default_value_t = 200)]
    horizon: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct RedundancyArgs {
    #[arg(long)]
    pmf: PathBuf,
    /// A single delay budget; otherwise every workable d up to --dmax.
    #[arg(long)]
    d: Option<u64>,
    #[arg(long, default_value_t = 6)]
    dmax: u64,
    /// Source symbols per delay budget.
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    /// Stream length.
    #[arg(long, default_value_t = 200)]
    horizon: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct EnsembleArgs {
    #[arg(long)]
    pmf: PathBuf,
    #[arg(long, default_value_t = 4)]
    dmax: u32,
    /// Trials per block length.
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    /// Largest aggregated alphabet to build.
    #[arg(long, default_value_t = 1 << 16, hide = true)]
    ceiling: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Print the suites and exit.
    #[arg(long)]
    list: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Cases per suite.
    #[arg(long, default_value_t = 50)]
    samples: u64,
    /// Corrupts the named suite's inputs to exercise failure reporting.
    #[arg(long, hide = true)]
    inject_failure: Option<String>,
}

/// Standard streams, replaceable in tests.
pub struct Io<'a> {
    pub stdin: &'a mut dyn Read,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
}

pub fn run<I, T>(args: I, io: &mut Io<'_>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let shown = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(io.stdout, "{shown}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(io.stderr, "{shown}");
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli.command, io) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(io.stderr, "error: {}", f.message());
            f.code()
        }
    }
}

fn dispatch(cmd: Command, io: &mut Io<'_>) -> Result<(), Failure> {
    let ceiling = precision_ceiling()?;
    let _ = writeln!(io.stderr, "config: {cmd:?} precision_ceiling={ceiling}");
    let opts = BuildOptions { aggregation_ceiling: DEFAULT_AGGREGATION_CEILING, precision_ceiling: ceiling };
    match cmd {
        Command::Encode(a) => encode(a, &opts, io),
        Command::Decode(a) => decode(a, &opts, io),
        Command::Bounds(a) => bounds(a, io),
        Command::Simulate(Simulate::DelayTail(a)) => delay_tail(a, ceiling, io),
        Command::Simulate(Simulate::Redundancy(a)) => redundancy(a, &opts, io),
        Command::Simulate(Simulate::Ensemble(a)) => ensemble(a, io),
        Command::Verify(a) => verify(a, io),
    }
}

fn precision_ceiling() -> Result<u64, Failure> {
    match std::env::var(PRECISION_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Failure::Usage(format!("{PRECISION_ENV}={v:?} is not a bit count"))),
        Err(_) => Ok(DEFAULT_PRECISION_CEILING),
    }
}

fn load_pmf(path: &Path) -> Result<SourceModel, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    parse_pmf(&text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn read_input(path: &Option<PathBuf>, io: &mut Io<'_>) -> Result<Vec<u8>, Failure> {
    match path {
        Some(p) => fs::read(p).map_err(|e| Failure::Data(format!("{}: {e}", p.display()))),
        None => {
            let mut buf = Vec::new();
            io.stdin.read_to_end(&mut buf)?;
            Ok(buf)
        }
    }
}

fn write_output(path: &Option<PathBuf>, bytes: &[u8], io: &mut Io<'_>) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| Failure::Data(format!("{}: {e}", p.display()))),
        None => Ok(io.stdout.write_all(bytes)?),
    }
}

fn tokenize(model: &SourceModel, text: &str, chars: bool) -> Result<Vec<Symbol>, Failure> {
    let lookup = |i: usize, tok: &str| {
        model.symbol_of(tok).ok_or_else(|| Failure::Data(format!("unknown symbol {tok:?} at position {}", i + 1)))
    };
    if chars {
        let mut buf = [0u8; 4];
        text.chars().enumerate().map(|(i, c)| lookup(i, c.encode_utf8(&mut buf))).collect()
    } else {
        text.split_whitespace().enumerate().map(|(i, t)| lookup(i, t)).collect()
    }
}

fn check_chars(model: &SourceModel, chars: bool) -> Result<(), Failure> {
    if chars && !single_char_tokens(model) {
        return Err(Failure::Usage("--chars needs every token to be a single character".to_string()));
    }
    Ok(())
}

fn encode(a: EncodeArgs, opts: &BuildOptions, io: &mut Io<'_>) -> Result<(), Failure> {
    let model = load_pmf(&a.pmf)?;
    check_chars(&model, a.chars)?;
    let raw = read_input(&a.input, io)?;
    let text = String::from_utf8(raw).map_err(|e| Failure::Data(format!("input is not UTF-8: {e}")))?;
    let x = tokenize(&model, &text, a.chars)?;
    let ext = build_extended_model_with(&model, a.d, opts).map_err(data)?;
    let (header, bits, ledger) = dc_encode(&ext, &x).map_err(data)?;
    let bytes = write_container(&header, &bits).map_err(data)?;
    write_output(&a.output, &bytes, io)?;
    let n = x.len();
    let per = if n == 0 { 0.0 } else { bits.len() as f64 / n as f64 };
    let _ = writeln!(
        io.stderr,
        "N={n} insertions={} bits={} bits/symbol={per:.6} max_delay={} d={} k={} d_tilde={}",
        ledger.insertions,
        bits.len(),
        ledger.max_delay,
        a.d,
        ext.k(),
        ext.d_tilde()
    );
    if ledger.max_delay > a.d {
        return Err(Failure::Violation(format!("observed delay {} exceeds d = {}", ledger.max_delay, a.d)));
    }
    Ok(())
}

fn decode(a: DecodeArgs, opts: &BuildOptions, io: &mut Io<'_>) -> Result<(), Failure> {
    let model = a.pmf.as_deref().map(load_pmf).transpose()?;
    if let Some(m) = &model {
        check_chars(m, a.chars)?;
    } else if a.chars {
        return Err(Failure::Usage("--chars needs --pmf for the token names".to_string()));
    }
    let bytes = read_input(&a.input, io)?;
    let (header, bits, start) = read_container(&bytes).map_err(data)?;
    if let Some(m) = &model {
        if m.pmf() != header.pmf.as_slice() {
            return Err(Failure::Data("the pmf file does not match the container header".to_string()));
        }
    }
    let x = dc_decode_with(&header, &bits, opts).map_err(|e| match e {
        Error::Corrupt { bit, detail } => Failure::Data(format!("byte {}: corrupt payload: {detail}", payload_byte(start, bit))),
        Error::Truncated { decoded, expected, .. } => {
            Failure::Data(format!("byte {}: payload truncated after {decoded} of {expected} symbols", bytes.len()))
        }
        e => data(e),
    })?;
    let mut out = String::new();
    match &model {
        Some(m) if a.chars => x.iter().for_each(|&s| out.push_str(m.token(s))),
        Some(m) => out = x.iter().map(|&s| m.token(s)).collect::<Vec<_>>().join(" "),
        None => out = x.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" "),
    }
    if !a.chars && !x.is_empty() {
        out.push('\n');
    }
    write_output(&a.output, out.as_bytes(), io)
}

fn fmt_bound(r: Result<f64, Error>) -> String {
    match r {
        Ok(v) if v.is_finite() => format!("{v:.6e}"),
        Ok(_) => "inf".to_string(),
        Err(_) => "undefined".to_string(),
    }
}

fn bounds(a: BoundsArgs, io: &mut Io<'_>) -> Result<(), Failure> {
    let p = load_pmf(&a.pmf)?;
    let q = match &a.q {
        Some(path) => load_pmf(path)?,
        None => p.clone(),
    };
    if p.size() != q.size() {
        return Err(data(Error::AlphabetMismatch(p.size(), q.size())));
    }
    let mut rows = Vec::new();
    for d in 1..=a.dmax {
        let insertion = build_extended_model_with(&p, d, &BuildOptions::default())
            .and_then(|m| insertion_prob_bound(m.super_model(), m.d_tilde(), m.epsilon()));
        rows.push([
            d.to_string(),
            fmt_bound(delay_tail_bound(&p, &q, d)),
            fmt_bound(insertion),
            fmt_bound(redundancy_delay_bound(&p, d)),
        ]);
    }
    let head = ["d", "delay_tail_bound", "insertion_bound", "redundancy_bound"];
    match &a.csv {
        Some(path) => {
            let mut w = csv::Writer::from_path(path).map_err(data)?;
            w.write_record(head).map_err(data)?;
            for r in &rows {
                w.write_record(r).map_err(data)?;
            }
            w.flush()?;
        }
        None => {
            writeln!(io.stdout, "{:>4} {:>16} {:>16} {:>16}", head[0], head[1], head[2], head[3])?;
            for r in &rows {
                writeln!(io.stdout, "{:>4} {:>16} {:>16} {:>16}", r[0], r[1], r[2], r[3])?;
            }
        }
    }
    match exponent_summary(&p) {
        Ok(s) => {
            writeln!(io.stdout, "exponent lower log2(1/pmax) = {:.6}", s.lower_pmax)?;
            writeln!(io.stdout, "exponent lower H2           = {:.6}", s.lower_renyi)?;
            writeln!(io.stdout, "exponent upper 8 log2(K/pmin) = {:.6}", s.upper_general)?;
            writeln!(io.stdout, "exponent upper 8 log2(1/pmin) = {:.6} (interval-mapping encoders)", s.upper_interval_mapping)?;
            if s.dyadic {
                writeln!(io.stdout, "note: dyadic source; zero redundancy at zero delay is attainable, the exponent bounds do not apply")?;
            }
        }
        Err(e) => writeln!(io.stdout, "note: exponents are degenerate: {e}")?,
    }
    Ok(())
}

fn threads(t: Option<usize>) -> usize {
    t.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn csv_sink(path: &Option<PathBuf>, buf: Vec<u8>, io: &mut Io<'_>) -> Result<(), Failure> {
    write_output(path, &buf, io)
}

fn delay_tail(a: TailArgs, ceiling: u64, io: &mut Io<'_>) -> Result<(), Failure> {
    let p = load_pmf(&a.pmf)?;
    let q = match &a.q {
        Some(path) => load_pmf(path)?,
        None => p.clone(),
    };
    if a.horizon <= a.dmax {
        return Err(Failure::Usage(format!("--horizon {} must exceed --dmax {}", a.horizon, a.dmax)));
    }
    if a.samples == 0 {
        return Err(Failure::Usage("--samples must be positive".to_string()));
    }
    let mut cfg = TailConfig::new(a.dmax, a.samples, a.horizon, a.common.seed);
    cfg.threads = threads(a.common.threads);
    cfg.precision_ceiling = ceiling;
    let est = estimate_delay_tail(&p, &q, &cfg).map_err(data)?;
    let mut buf = Vec::new();
    est.write_csv(&mut buf)?;
    csv_sink(&a.common.csv, buf, io)?;
    let bad = est.violations(a.common.bound_scale);
    if !bad.is_empty() {
        return Err(Failure::Violation(format!("empirical tail above its bound at d = {bad:?}")));
    }
    Ok(())
}

fn redundancy(a: RedundancyArgs, opts: &BuildOptions, io: &mut Io<'_>) -> Result<(), Failure> {
    let p = load_pmf(&a.pmf)?;
    if a.samples == 0 || a.horizon == 0 {
        return Err(Failure::Usage("--samples and --horizon must be positive".to_string()));
    }
    let ds: Vec<u64> = match a.d {
        Some(d) => vec![d],
        None => (1..=a.dmax).collect(),
    };
    let cfg = RedundancyConfig { samples: a.samples, horizon: a.horizon, seed: a.common.seed, threads: threads(a.common.threads), options: opts.clone() };
    let mut rows = Vec::new();
    for d in ds {
        match estimate_redundancy(&p, d, &cfg) {
            Ok(r) => rows.push(r),
            Err(e @ Error::DelayTooSmall { .. }) if a.d.is_none() => {
                let _ = writeln!(io.stderr, "skipping d = {d}: {e}");
            }
            Err(e) => return Err(data(e)),
        }
    }
    if rows.is_empty() {
        return Err(Failure::Data(format!("no workable delay budget up to {}", a.dmax)));
    }
    let mut buf = Vec::new();
    write_redundancy_csv(&mut buf, &p, &cfg, &rows)?;
    csv_sink(&a.common.csv, buf, io)?;
    for r in &rows {
        let _ = writeln!(
            io.stderr,
            "d={} k={} d_tilde={} insertions={}/{} direct={:.6e} flush={:.6e} insertion_bound={:.6e}",
            r.d, r.k, r.d_tilde, r.insertions, r.super_steps, r.direct, r.flush_overhead, r.insertion_bound
        );
    }
    let bad: Vec<u64> = rows.iter().filter(|r| r.violates(a.common.bound_scale)).map(|r| r.d).collect();
    if !bad.is_empty() {
        return Err(Failure::Violation(format!("redundancy or insertion rate above its bound at d = {bad:?}")));
    }
    Ok(())
}

fn ensemble(a: EnsembleArgs, io: &mut Io<'_>) -> Result<(), Failure> {
    let p = load_pmf(&a.pmf)?;
    let rows = ensemble_rows(&p, a.dmax, a.samples, a.common.seed, threads(a.common.threads), a.ceiling).map_err(data)?;
    let mut buf = Vec::new();
    write_ensemble_csv(&mut buf, &p, a.common.seed, &rows)?;
    csv_sink(&a.common.csv, buf, io)
}

fn verify(a: VerifyArgs, io: &mut Io<'_>) -> Result<(), Failure> {
    if a.list {
        for s in SUITES {
            writeln!(io.stdout, "{:<22} {}", s.name, s.about)?;
        }
        return Ok(());
    }
    if let Some(name) = &a.inject_failure {
        if find_suite(name).is_none() {
            return Err(Failure::Usage(format!("no suite named {name:?}")));
        }
    }
    let reports = run_suites(a.seed, a.samples, a.inject_failure.as_deref());
    let mut failed = Vec::new();
    for r in &reports {
        let status = if r.failures.is_empty() { "ok" } else { "FAILED" };
        writeln!(io.stdout, "{:<22} {:>5} cases  {status}", r.name, r.cases)?;
        for f in r.failures.iter().take(3) {
            writeln!(io.stdout, "    {f}")?;
        }
        if !r.failures.is_empty() {
            failed.push(r.name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Violation(format!("suites failed: {}", failed.join(", "))))
    }
}
