//! The `speke-lab` command line.
//!
//! Exit codes: 0 when the run met its expectation, 1 on a protocol failure
//! or unmet expectation, 2 on a usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::attacks::{self, matrix, AttackConfig, AttackKind, ExpEquivalenceParams, PasswordClass, ZChoice};
use crate::error::Error;
use crate::group::{GroupParams, Scalar};
use crate::protocol::{self, ConfirmationMethod, Identity, Role, SessionConfig, SessionState, Variant};
use crate::simnet::{self, socket, ExchangeConfig, RunError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const DEFAULT_PASSWORD: &str = "correct horse";

#[derive(Debug, Parser)]
#[command(name = "speke-lab", version, about = "SPEKE variants, attacks and a security matrix")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Honest exchange between Alice and Bob over the simulator.
    Run(RunArgs),
    /// Run one attack scenario and check it against the expected outcome.
    Attack(AttackArgs),
    /// Build the variant x attack matrix and compare it to the golden file.
    Matrix(MatrixArgs),
    /// Wait for one TCP connection and run the responder side.
    Serve(ServeArgs),
    /// Connect over TCP and run the initiator side.
    Connect(ConnectArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// jablon96, ieee-p1363.2, iso-11770-4-2006, patch-2014, p-speke-2017
    #[arg(long)]
    pub variant: Option<String>,
    /// none, jablon-double-hash, tagged-hash-3-4, symmetric-hash, symmetric-mac
    #[arg(long)]
    pub confirm: Option<String>,
    /// toy23 or modp2048
    #[arg(long)]
    pub group: Option<String>,
    #[arg(long, env = "SPEKE_LAB_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub password: Option<String>,
    /// Bob's password, when it should differ from Alice's.
    #[arg(long = "password-b")]
    pub password_b: Option<String>,
    /// Abort on receiving an exchange element this party already sent.
    #[arg(long = "dup-detect")]
    pub dup_detect: bool,
    /// Flat `key = value` file; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Write the event trace here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    /// impersonation, malleability, session-swap, exp-equivalence
    pub attack: String,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Adversary exponent for impersonation or malleability.
    #[arg(long)]
    pub z: Option<String>,
    /// Exponent relating the two passwords in exp-equivalence.
    #[arg(long)]
    pub r: Option<String>,
    /// Which password the exp-equivalence victim holds: `s` or `s^r`.
    #[arg(long, default_value = "s")]
    pub victim: String,
    /// Override the expected outcome: success or failure.
    #[arg(long)]
    pub expect: Option<String>,
    /// Write the event trace here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    #[arg(long)]
    pub group: Option<String>,
    #[arg(long, env = "SPEKE_LAB_SEED")]
    pub seed: Option<u64>,
    /// Directory for matrix.txt and matrix.kv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Compare against this file instead of the bundled expectation.
    #[arg(long)]
    pub golden: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:0")]
    pub listen: String,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct ConnectArgs {
    #[arg(long)]
    pub connect: String,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// A fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub variant: Variant,
    pub confirm: ConfirmationMethod,
    pub group: String,
    pub params: Arc<GroupParams>,
    pub id_a: String,
    pub id_b: String,
    pub password: String,
    pub password_b: String,
    pub seed: u64,
    pub duplicate_detection: bool,
}

impl RunConfig {
    /// The variant and method are not one of the standardized pairings.
    pub fn non_historical(&self) -> bool {
        self.confirm != self.variant.preset_confirmation()
    }

    pub fn exchange(&self) -> ExchangeConfig {
        ExchangeConfig {
            variant: self.variant,
            confirm: self.confirm,
            params: Arc::clone(&self.params),
            id_a: Identity::new(self.id_a.clone()),
            id_b: Identity::new(self.id_b.clone()),
            password_a: self.password.clone().into_bytes(),
            password_b: self.password_b.clone().into_bytes(),
            duplicate_detection: self.duplicate_detection,
            scalars: None,
        }
    }

    fn header(&self) -> String {
        format!(
            "variant={} confirm={} group={} seed={} pairing={}",
            self.variant,
            self.confirm,
            self.group,
            self.seed,
            if self.non_historical() { "non-historical" } else { "historical" }
        )
    }
}

/// Parses a flat `key = value` file. Blank lines and `#` comments are
/// skipped.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key = value", n + 1))?;
        let key = k.trim().replace('-', "_");
        const KNOWN: [&str; 9] = [
            "variant", "confirm", "group", "seed", "password", "password_b", "dup_detect", "id_a", "id_b",
        ];
        if !KNOWN.contains(&key.as_str()) {
            return Err(format!("config line {}: unknown key `{}`", n + 1, k.trim()));
        }
        map.insert(key, v.trim().to_owned());
    }
    Ok(map)
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(format!("expected a boolean, got `{s}`")),
    }
}

/// Applies flags over the config file over the presets.
pub fn resolve(common: &CommonArgs) -> Result<RunConfig, String> {
    let file = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            parse_config_file(&text)?
        }
        None => BTreeMap::new(),
    };
    let pick = |flag: &Option<String>, key: &str| flag.clone().or_else(|| file.get(key).cloned());

    let variant: Variant = pick(&common.variant, "variant")
        .unwrap_or_else(|| Variant::PSpeke2017.name().to_owned())
        .parse()?;
    let confirm = match pick(&common.confirm, "confirm") {
        Some(s) => s.parse()?,
        None => variant.preset_confirmation(),
    };
    let group = pick(&common.group, "group").unwrap_or_else(|| "toy23".to_owned());
    let params = GroupParams::preset(&group).map_err(|e| e.to_string())?;
    let seed = match common.seed {
        Some(s) => s,
        None => match file.get("seed") {
            Some(s) => s.parse().map_err(|_| format!("invalid seed `{s}`"))?,
            None => 0,
        },
    };
    let password = pick(&common.password, "password").unwrap_or_else(|| DEFAULT_PASSWORD.to_owned());
    let password_b = pick(&common.password_b, "password_b").unwrap_or_else(|| password.clone());
    let duplicate_detection = common.dup_detect
        || file.get("dup_detect").map(|s| parse_bool(s)).transpose()?.unwrap_or(false);
    let cfg = RunConfig {
        variant,
        confirm,
        group,
        params,
        id_a: file.get("id_a").cloned().unwrap_or_else(|| "Alice".to_owned()),
        id_b: file.get("id_b").cloned().unwrap_or_else(|| "Bob".to_owned()),
        password,
        password_b,
        seed,
        duplicate_detection,
    };
    // catch bad identities or degenerate passwords before any protocol step
    for (me, peer, pw) in [
        (&cfg.id_a, &cfg.id_b, &cfg.password),
        (&cfg.id_b, &cfg.id_a, &cfg.password_b),
    ] {
        let probe = SessionConfig::new(Role::Initiator, me.as_str(), peer.as_str(), cfg.variant, Arc::clone(&cfg.params));
        let one = Scalar::from_u64(&cfg.params, 1).map_err(|e| e.to_string())?;
        protocol::start_session_with_scalar(probe, pw.as_bytes(), one).map_err(|e| e.to_string())?;
    }
    Ok(cfg)
}

/// Parses argv and runs the command, writing reports to `out` and
/// diagnostics to `err`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{rendered}");
            } else {
                let _ = write!(out, "{rendered}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(&a, out),
        Command::Attack(a) => cmd_attack(&a, out),
        Command::Matrix(a) => cmd_matrix(&a, out, err),
        Command::Serve(a) => cmd_serve(&a, out),
        Command::Connect(a) => cmd_connect(&a, out),
    };
    match result {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Failure(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_FAILURE
        }
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Failure(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

type CliResult = Result<i32, CliError>;

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> CliResult {
    let cfg = resolve(&args.common).map_err(CliError::Usage)?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    writeln!(out, "{}", cfg.header())?;
    let result = simnet::run_honest_exchange(&cfg.exchange(), &mut rng);
    let run = match result {
        Ok(run) => run,
        Err(RunError::Failed(run)) => *run,
        Err(RunError::Config(e)) => return Err(CliError::Usage(e.to_string())),
    };
    writeln!(
        out,
        "rounds={} expected_rounds={}",
        run.rounds,
        protocol::round_count(cfg.confirm)
    )?;
    for s in [&run.a, &run.b] {
        let key = s.fingerprint().map_or_else(|| "-".to_owned(), |d| d.to_hex());
        writeln!(out, "party={:?} phase={} key_digest={key}", s.self_id, s.phase)?;
    }
    if let Some(path) = &args.out {
        write_file(path, &run.trace.export())?;
    }
    let ok = run.a.completed() && run.b.completed() && run.a.key == run.b.key;
    if ok {
        writeln!(out, "result=ok")?;
        Ok(EXIT_OK)
    } else {
        let reason = [run.a.phase, run.b.phase]
            .iter()
            .find_map(|p| match p {
                protocol::Phase::Aborted(r) => Some(r.to_string()),
                _ => None,
            })
            .unwrap_or_else(|| "KeyMismatch".to_owned());
        writeln!(out, "result=failed reason={reason}")?;
        Err(CliError::Failure(format!("handshake failed: {reason}")))
    }
}

fn parse_scalar(s: &str, params: &GroupParams, what: &str) -> Result<Scalar, CliError> {
    let v = BigUint::from_str(s).map_err(|_| CliError::Usage(format!("invalid {what} `{s}`")))?;
    Scalar::new(params, v).map_err(|_| CliError::Usage(format!("{what} must lie in [1, q-1]")))
}

fn cmd_attack(args: &AttackArgs, out: &mut dyn Write) -> CliResult {
    let kind: AttackKind = args.attack.parse().map_err(CliError::Usage)?;
    let cfg = resolve(&args.common).map_err(CliError::Usage)?;
    let victim: PasswordClass = args.victim.parse().map_err(CliError::Usage)?;
    let forced_expect = match args.expect.as_deref() {
        None => None,
        Some("success") => Some(true),
        Some("failure") => Some(false),
        Some(other) => return Err(CliError::Usage(format!("--expect must be success or failure, got `{other}`"))),
    };
    let z = args
        .z
        .as_deref()
        .map(|s| parse_scalar(s, &cfg.params, "z"))
        .transpose()?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let attack_cfg = AttackConfig {
        password: cfg.password.clone().into_bytes(),
        ..AttackConfig::new(cfg.variant, Arc::clone(&cfg.params))
            .with_confirm(cfg.confirm)
            .with_duplicate_detection(cfg.duplicate_detection)
    };
    let usage_on_invalid = |e: Error| match e {
        Error::InvalidExponent | Error::DegenerateGenerator | Error::ScalarOutOfRange => CliError::Usage(e.to_string()),
        other => CliError::Failure(other.to_string()),
    };
    let outcome = match kind {
        AttackKind::Impersonation => {
            let choice = z.map_or(ZChoice::Adaptive, ZChoice::Fixed);
            attacks::impersonation_attack(&attack_cfg, choice, &mut rng)
        }
        AttackKind::Malleability => attacks::malleability_attack(&attack_cfg, z, &mut rng),
        AttackKind::SessionSwap => attacks::session_swap_attack(&attack_cfg, &mut rng),
        AttackKind::ExpEquivalence => {
            let r = args.r.as_deref().unwrap_or("3");
            let r = BigUint::from_str(r).map_err(|_| CliError::Usage(format!("invalid r `{r}`")))?;
            let probe = ExpEquivalenceParams {
                s: attack_cfg.password.clone(),
                r,
                victim_holds: victim,
                scalars: None,
            };
            attacks::exp_equivalence_attack(cfg.variant, cfg.confirm, &cfg.params, &probe, &mut rng)
        }
    }
    .map_err(usage_on_invalid)?;
    let expected = forced_expect.unwrap_or_else(|| {
        attacks::expected_success(kind, cfg.variant, cfg.confirm, cfg.duplicate_detection, victim)
    });
    writeln!(out, "{}", cfg.header())?;
    write!(out, "{}", outcome.report())?;
    writeln!(out, "expected_success={expected}")?;
    writeln!(out, "trace:")?;
    write!(out, "{}", outcome.trace.export())?;
    if let Some(path) = &args.out {
        write_file(path, &outcome.trace.export())?;
    }
    if outcome.success == expected {
        writeln!(out, "verdict=as-expected")?;
        Ok(EXIT_OK)
    } else {
        writeln!(out, "verdict=unexpected")?;
        Err(CliError::Failure(format!(
            "{kind}: success={} but expected {expected}",
            outcome.success
        )))
    }
}

fn cmd_matrix(args: &MatrixArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let group = args.group.clone().unwrap_or_else(|| "toy23".to_owned());
    let params = GroupParams::preset(&group).map_err(|e| CliError::Usage(e.to_string()))?;
    let m = attacks::security_matrix(&params, args.seed.unwrap_or(0))
        .map_err(|e| CliError::Failure(e.to_string()))?;
    let text = m.to_text();
    let kv = m.to_kv();
    write!(out, "{text}")?;
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        write_file(&dir.join("matrix.txt"), &text)?;
        write_file(&dir.join("matrix.kv"), &kv)?;
    }
    let golden = match &args.golden {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
        None => matrix::GOLDEN_TEXT.to_owned(),
    };
    let mut diffs = matrix::diff_tables(&golden, &text);
    if args.golden.is_none() && kv != matrix::GOLDEN_KV && diffs.is_empty() {
        // text agreed but the record form did not
        diffs = matrix::diff_tables(&golden, &kv_as_table(&kv));
    }
    if golden == text && diffs.is_empty() {
        writeln!(out, "golden=match")?;
        return Ok(EXIT_OK);
    }
    writeln!(out, "golden=mismatch")?;
    for d in &diffs {
        writeln!(err, "{d}")?;
    }
    if diffs.is_empty() {
        writeln!(err, "formatting differs from the golden file")?;
    }
    Err(CliError::Failure(format!("matrix differs from golden in {} cell(s)", diffs.len())))
}

fn kv_as_table(kv: &str) -> String {
    let mut out = String::from("variant/confirm");
    for c in matrix::COLUMNS {
        out.push(' ');
        out.push_str(c);
    }
    out.push('\n');
    for line in kv.lines() {
        let vals: Vec<&str> = line.split(' ').filter_map(|t| t.split_once('=').map(|(_, v)| v)).collect();
        out.push_str(&vals.join(" "));
        out.push('\n');
    }
    out
}

fn report_socket(out: &mut dyn Write, cfg: &RunConfig, result: crate::Result<SessionState>) -> CliResult {
    writeln!(out, "{}", cfg.header())?;
    match result {
        Ok(state) => {
            let key = state.key().map(|k| k.fingerprint().to_hex()).unwrap_or_default();
            writeln!(out, "phase={} key_digest={key}", state.phase())?;
            Ok(EXIT_OK)
        }
        Err(e) => {
            writeln!(out, "result=failed reason={e}")?;
            Err(CliError::Failure(e.to_string()))
        }
    }
}

fn cmd_serve(args: &ServeArgs, out: &mut dyn Write) -> CliResult {
    let cfg = resolve(&args.common).map_err(CliError::Usage)?;
    let listener = TcpListener::bind(&args.listen)
        .map_err(|e| CliError::Failure(format!("bind {}: {e}", args.listen)))?;
    writeln!(out, "listening on {}", listener.local_addr()?)?;
    out.flush()?;
    let session = SessionConfig::new(
        Role::Responder,
        cfg.id_b.as_str(),
        cfg.id_a.as_str(),
        cfg.variant,
        Arc::clone(&cfg.params),
    )
    .with_confirm(cfg.confirm);
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed ^ 0xb0b);
    let result = socket::serve(&listener, session, cfg.password_b.as_bytes(), &mut rng);
    report_socket(out, &cfg, result)
}

fn cmd_connect(args: &ConnectArgs, out: &mut dyn Write) -> CliResult {
    let cfg = resolve(&args.common).map_err(CliError::Usage)?;
    let session = SessionConfig::new(
        Role::Initiator,
        cfg.id_a.as_str(),
        cfg.id_b.as_str(),
        cfg.variant,
        Arc::clone(&cfg.params),
    )
    .with_confirm(cfg.confirm);
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed ^ 0xa11ce);
    let result = socket::connect(args.connect.as_str(), session, cfg.password.as_bytes(), &mut rng);
    report_socket(out, &cfg, result)
}
