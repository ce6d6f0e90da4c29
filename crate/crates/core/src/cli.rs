//! Command-line entry points.
//!
//! Exit codes: 0 success, 1 audit or decode failure, 2 usage error,
//! 3 transport error.

use std::ffi::OsString;
use std::io::Write;
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use crate::audit::{
    self, audit_correctness, audit_privacy, bound_asymptotic, bound_two_message, CostReport, StoreSource,
};
use crate::error::{Error, Result};
use crate::field::FieldId;
use crate::schemes::{scheme_for, SchemeId, SchemeParams, MAX_ENUMERATION};
use crate::session_rng;
use crate::simnet::{self, format_symbols, DatabaseActor};
use crate::store::MessageStore;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_TRANSPORT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "bia-pir", version, about = "Private retrieval from replicated non-communicating databases")]
pub struct Cli {
    /// Output style for reports and transcripts.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Kv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a random replicated store file.
    Genstore {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "gf256")]
        field: FieldId,
        /// Symbols per message before padding.
        #[arg(long)]
        len: usize,
        #[arg(long)]
        out: PathBuf,
        /// Scheme whose block length sets the padding; defaults to two-opt
        /// for k = 2 and k-rep otherwise.
        #[arg(long)]
        scheme: Option<SchemeId>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one database.
    Serve {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        db_index: usize,
        #[arg(long, default_value = "127.0.0.1:0")]
        listen: String,
    },
    /// Retrieve one message from running databases.
    Retrieve {
        #[arg(long)]
        scheme: SchemeId,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value = "gf256")]
        field: FieldId,
        #[arg(long)]
        index: usize,
        /// Comma-separated host:port list, database 1 first.
        #[arg(long, value_delimiter = ',', required = true)]
        endpoints: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate a store and retrieve from it in-process.
    Demo {
        #[arg(long)]
        scheme: SchemeId,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value = "gf256")]
        field: FieldId,
        #[arg(long, default_value_t = 1)]
        index: usize,
        /// Symbols per message; defaults to one block.
        #[arg(long)]
        len: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Exact privacy, correctness and cost audit of one scheme.
    Audit {
        #[arg(long)]
        scheme: SchemeId,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "gf2")]
        field: FieldId,
        /// Random stores to try when exhaustive enumeration is too large.
        #[arg(long, default_value_t = 200)]
        stores: usize,
    },
    /// Closed-form download-cost bounds.
    Bounds {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
    },
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Transport { .. } | Error::Remote { .. } | Error::Wire(_) => EXIT_TRANSPORT,
        Error::InvalidParams(_)
        | Error::InvalidIndex { .. }
        | Error::InvalidField(_)
        | Error::SpaceTooLarge { .. }
        | Error::ValueOutOfRange { .. }
        | Error::FieldMismatch(..) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

/// Parses `args` and runs the command, writing reports to `out` and
/// diagnostics to `err`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match execute(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if let Error::SpaceTooLarge { .. } = e {
                let _ = writeln!(err, "hint: audit over a smaller field such as gf2 or gf3");
            }
            exit_code(&e)
        }
    }
}

fn seed_warning(seed: Option<u64>, err: &mut dyn Write) {
    if seed.is_some() {
        let _ = writeln!(err, "warning: --seed makes the query randomness predictable; this retrieval is not private");
    }
}

fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let kv = cli.format == Format::Kv;
    match &cli.command {
        Command::Genstore { k, n, field, len, out: path, scheme, seed } => {
            let id = scheme.unwrap_or(if *k == 2 { SchemeId::TWO_OPT } else { SchemeId::K_REP });
            let s = scheme_for(SchemeParams::new(id, *k, *n, *field)?)?;
            let mut rng = session_rng(*seed);
            let store = MessageStore::random(*field, *k, *len, s.block_len(), &mut rng)?;
            store.save(path)?;
            writeln!(
                out,
                "wrote {} ({} messages x {} symbols over {})",
                path.display(),
                store.k(),
                store.len(),
                field
            )?;
            writeln!(out, "digest {}", store.digest())?;
            Ok(EXIT_OK)
        }
        Command::Serve { store, db_index, listen } => {
            let store = MessageStore::load(store)?;
            if *db_index == 0 {
                return Err(Error::InvalidParams("database index is 1-based".into()));
            }
            let listener =
                TcpListener::bind(listen).map_err(|source| Error::Transport { endpoint: listen.clone(), source })?;
            let addr = listener.local_addr()?;
            writeln!(out, "listening on {addr}")?;
            out.flush()?;
            let _ = writeln!(err, "database {db_index} store digest {}", store.digest());
            DatabaseActor::new(*db_index, Arc::new(store))
                .serve(listener)
                .map_err(|source| Error::Transport { endpoint: addr.to_string(), source })?;
            Ok(EXIT_OK)
        }
        Command::Retrieve { scheme, k, field, index, endpoints, seed } => {
            let params = SchemeParams::new(*scheme, *k, endpoints.len(), *field)?;
            seed_warning(*seed, err);
            let mut rng = session_rng(*seed);
            let (message, transcript) = simnet::retrieve(params, *index, endpoints, &mut rng)?;
            if kv {
                write!(out, "{}", transcript.to_kv())?;
            } else {
                write!(out, "{}", transcript.to_text())?;
                writeln!(out, "message: {}", format_symbols(&message))?;
            }
            let _ = writeln!(err, "wall time: {:?}", transcript.wall_time);
            Ok(EXIT_OK)
        }
        Command::Demo { scheme, k, n, field, index, len, seed } => {
            let params = SchemeParams::new(*scheme, *k, *n, *field)?;
            let s = scheme_for(params)?;
            seed_warning(*seed, err);
            let mut rng = session_rng(*seed);
            let store = MessageStore::random(*field, *k, len.unwrap_or(s.block_len()), s.block_len(), &mut rng)?;
            let token = s.draw_randomness(&mut rng);
            let (message, transcript) = simnet::run_inprocess(params, *index, &store, &token)?;
            let ok = message == store.unpad(*index, store.message(*index)?)?;
            let cost = transcript.cost_report()?;
            if kv {
                write!(out, "{}{}", transcript.to_kv(), cost.to_kv())?;
                writeln!(out, "demo.decoded_ok={ok}")?;
            } else {
                write!(out, "{}", transcript.to_text())?;
                write!(out, "{}", cost.to_text())?;
                writeln!(out, "decoded message matches store: {ok}")?;
            }
            let _ = writeln!(err, "wall time: {:?}", transcript.wall_time);
            Ok(if ok { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::Audit { scheme, k, n, field, stores } => {
            let params = SchemeParams::new(*scheme, *k, *n, *field)?;
            let s = scheme_for(params)?;
            let privacy = match audit_privacy(s.as_ref()) {
                Ok(r) => r,
                Err(e @ Error::SpaceTooLarge { .. }) => {
                    let mut rng = session_rng(None);
                    for w in audit::spot_check_privacy(s.as_ref(), 256, &mut rng)? {
                        let _ = writeln!(err, "spot check warning (non-binding): {w}");
                    }
                    return Err(e);
                }
                Err(e) => return Err(e),
            };
            let exhaustive_size =
                (field.order() as u128).checked_pow((params.k * s.block_len()) as u32).unwrap_or(u128::MAX);
            let source = if exhaustive_size <= MAX_ENUMERATION.min(4096) {
                StoreSource::Exhaustive
            } else {
                StoreSource::Random { count: *stores, blocks: 1, seed: 0 }
            };
            let correctness = audit_correctness(s.as_ref(), source)?;
            let cost = CostReport::for_scheme(s.as_ref())?;
            if kv {
                write!(out, "{}{}{}", privacy.to_kv(), correctness.to_kv(), cost.to_kv())?;
            } else {
                write!(out, "{}{}{}", privacy.to_text(), correctness.to_text(), cost.to_text())?;
            }
            Ok(if privacy.passed() && correctness.passed() { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::Bounds { k, n } => {
            let asym = bound_asymptotic(*k, *n)?;
            let two = (*k == 2).then(|| bound_two_message(*n)).transpose()?;
            if kv {
                if let Some(b) = two {
                    writeln!(out, "bounds.two_message={b}")?;
                }
                writeln!(out, "bounds.asymptotic.finite={}", asym.finite)?;
                writeln!(out, "bounds.asymptotic.limit={}", asym.limit)?;
                writeln!(out, "bounds.asymptotic.flag={}", asym.flag())?;
                writeln!(out, "bounds.asymptotic.exceeds_two_message_optimum={}", asym.exceeds_two_message_optimum)?;
            } else {
                if let Some(b) = two {
                    writeln!(out, "two-message optimum (k=2, n={n}): eta* = {b}")?;
                }
                writeln!(out, "finite-k formula nk/(1+(k-1)(n-1)) at k={k}, n={n}: {} [{}]", asym.finite, asym.flag())?;
                writeln!(out, "k -> infinity limit n/(n-1): {}", asym.limit)?;
                if asym.exceeds_two_message_optimum {
                    writeln!(out, "note: exceeds the achievable two-message cost; not a lower bound at this k")?;
                }
            }
            Ok(EXIT_OK)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut full = vec!["bia-pir"];
        full.extend_from_slice(args);
        let code = run(full, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn demo_costs() {
        let (code, out, _) = run_capture(&["demo", "--scheme", "two-opt", "--n", "2", "--seed", "1"]);
        assert_eq!(code, 0);
        assert!(out.contains("eta = 3/2"), "{out}");
        let (code, out, _) = run_capture(&["demo", "--scheme", "k-rep", "--k", "3", "--n", "2", "--seed", "1"]);
        assert_eq!(code, 0);
        assert!(out.contains("eta = 2\n"), "{out}");
        let (code, out, _) = run_capture(&["demo", "--scheme", "all", "--k", "4", "--seed", "1"]);
        assert_eq!(code, 0);
        assert!(out.contains("eta = 4\n"), "{out}");
    }

    #[test]
    fn seeded_demo_is_reproducible_and_warns() {
        let a = run_capture(&["--format", "kv", "demo", "--scheme", "sym:two-opt", "--n", "3", "--seed", "9"]);
        let b = run_capture(&["--format", "kv", "demo", "--scheme", "sym:two-opt", "--n", "3", "--seed", "9"]);
        assert_eq!(a.0, 0);
        assert_eq!(a.1, b.1);
        assert!(a.2.contains("not private"));
    }

    #[test]
    fn bounds_output() {
        let (code, out, _) = run_capture(&["bounds", "--k", "2", "--n", "5"]);
        assert_eq!(code, 0);
        assert!(out.contains("eta* = 6/5"), "{out}");
        let (_, out, _) = run_capture(&["--format", "kv", "bounds", "--k", "2", "--n", "2"]);
        assert!(out.contains("bounds.asymptotic.finite=2\n"), "{out}");
        assert!(out.contains("bounds.asymptotic.flag=asymptotic heuristic"), "{out}");
    }

    #[test]
    fn audit_passes_and_reports() {
        let (code, out, _) = run_capture(&["audit", "--scheme", "two-opt", "--n", "4"]);
        assert_eq!(code, 0, "{out}");
        assert!(out.contains("privacy audit: two-opt k=2 n=4"));
        let (code, _, err) = run_capture(&["audit", "--scheme", "k-rep", "--k", "4", "--n", "4", "--field", "gf256"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("smaller field"), "{err}");
    }

    #[test]
    fn usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        let p = path.to_str().unwrap();
        let (code, _, _) = run_capture(&["genstore", "--k", "1", "--n", "2", "--len", "2", "--out", p]);
        assert_eq!(code, EXIT_USAGE);
        let (code, _, _) = run_capture(&["demo", "--scheme", "bogus"]);
        assert_eq!(code, EXIT_USAGE);
        let (code, _, _) = run_capture(&["demo", "--scheme", "two-opt", "--k", "3"]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn genstore_pads_to_block() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        let p = path.to_str().unwrap();
        let (code, out, _) =
            run_capture(&["genstore", "--k", "2", "--n", "2", "--len", "2", "--out", p, "--seed", "3"]);
        assert_eq!(code, 0, "{out}");
        let s = MessageStore::load(&path).unwrap();
        assert_eq!((s.k(), s.len()), (2, 2));
        let (code, _, _) = run_capture(&["genstore", "--k", "2", "--n", "3", "--len", "7", "--out", p]);
        assert_eq!(code, 0);
        assert_eq!(MessageStore::load(&path).unwrap().len(), 12);
    }

    #[test]
    fn retrieve_against_unreachable_endpoint() {
        let (code, _, err) =
            run_capture(&["retrieve", "--scheme", "two-opt", "--index", "1", "--endpoints", "127.0.0.1:1,127.0.0.1:1"]);
        assert_eq!(code, EXIT_TRANSPORT, "{err}");
    }
}
