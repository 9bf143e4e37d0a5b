//! The `linmon` command line.
//!
//! Exit codes: 0 linearizable (or success), 1 not linearizable, 2 input error.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value as Json};

use crate::frontier::{build_frontier_graph, count_partition_states};
use crate::generator::{gen_history, mutate_history};
use crate::model::{parse_history, serialize_history, AdtKind, History};
use crate::oracle::{oracle_check, DEFAULT_CAP};
use crate::{check_with, Engine};

pub const EXIT_LINEARIZABLE: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_INPUT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "linmon",
    version,
    about = "Linearizability monitoring for concurrent histories"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check one history file and print a JSON report.
    Check {
        /// Use the brute-force oracle instead of the specialised engine.
        #[arg(long, conflicts_with = "engine")]
        oracle: bool,
        /// Engine to use: aadt, stack, queue or oracle.
        #[arg(long)]
        engine: Option<Engine>,
        /// Include the witness linearization in the report.
        #[arg(long)]
        witness: bool,
        file: PathBuf,
    },
    /// Print the frontier graph of a history in DOT format.
    Graph { file: PathBuf },
    /// Generate a corpus of histories with a manifest.
    Gen {
        #[arg(long)]
        kind: AdtKind,
        #[arg(long)]
        n: usize,
        /// Maximum concurrency width.
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Fraction of histories to mutate.
        #[arg(long, default_value_t = 0.0)]
        mutate: f64,
        dir: PathBuf,
    },
    /// Time the default engine on every history of a corpus; CSV on stdout.
    Bench { dir: PathBuf },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT_ERROR } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Check {
            oracle,
            engine,
            witness,
            file,
        } => cmd_check(&file, if oracle { Some(Engine::Oracle) } else { engine }, witness, out),
        Command::Graph { file } => cmd_graph(&file, out),
        Command::Gen {
            kind,
            n,
            k,
            seed,
            count,
            mutate,
            dir,
        } => cmd_gen(kind, n, k, seed, count, mutate, &dir).map(|_| EXIT_LINEARIZABLE),
        Command::Bench { dir } => cmd_bench(&dir, out),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_INPUT_ERROR
        }
    }
}

fn load(path: &Path) -> Result<History, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_history(&text).map_err(|e| format!("{}: {e}", path.display()))
}

#[derive(Serialize)]
struct WitnessJson<'a> {
    id: &'a str,
    time: String,
}

pub fn cmd_check(path: &Path, engine: Option<Engine>, with_witness: bool, out: &mut dyn Write) -> Result<i32, String> {
    let h = load(path)?;
    let engine = engine.unwrap_or_else(|| Engine::for_kind(h.kind()));
    let start = Instant::now();
    let verdict = check_with(&h, engine).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let witness = match (&verdict.witness, with_witness) {
        (Some(w), true) => serde_json::to_value(
            w.iter()
                .map(|e| WitnessJson {
                    id: &h.op(e.op).id,
                    time: e.time.to_string(),
                })
                .collect::<Vec<_>>(),
        )
        .expect("witness serializes"),
        _ => Json::Null,
    };
    let report = json!({
        "file": path.display().to_string(),
        "adt": h.kind().name(),
        "engine": engine.name(),
        "linearizable": verdict.linearizable,
        "n": h.len(),
        "k": h.width(),
        "states": count_partition_states(&h),
        "elapsed_ms": elapsed.as_secs_f64() * 1000.0,
        "witness": witness,
    });
    writeln!(out, "{}", serde_json::to_string_pretty(&report).unwrap()).map_err(|e| e.to_string())?;
    Ok(if verdict.linearizable {
        EXIT_LINEARIZABLE
    } else {
        EXIT_VIOLATION
    })
}

pub fn cmd_graph(path: &Path, out: &mut dyn Write) -> Result<i32, String> {
    let h = load(path)?;
    let g = build_frontier_graph(&h);
    write!(out, "{}", g.to_dot(&h)).map_err(|e| e.to_string())?;
    Ok(EXIT_LINEARIZABLE)
}

#[derive(Serialize)]
struct ManifestEntry {
    file: String,
    seed: u64,
    kind: String,
    n: usize,
    k: usize,
    label: &'static str,
    label_source: &'static str,
    mutation: Option<String>,
}

#[derive(Serialize)]
struct Manifest {
    kind: String,
    n: usize,
    k: usize,
    seed: u64,
    count: usize,
    mutate: f64,
    histories: Vec<ManifestEntry>,
}

/// Writes `count` histories and `manifest.json` into `dir`. Histories are
/// labelled by the oracle when small enough, by construction when unmutated,
/// and left unlabelled otherwise.
#[allow(clippy::too_many_arguments)]
pub fn cmd_gen(
    kind: AdtKind,
    n: usize,
    k: usize,
    seed: u64,
    count: usize,
    mutate: f64,
    dir: &Path,
) -> Result<(), String> {
    if !(0.0..=1.0).contains(&mutate) {
        return Err(format!("--mutate must be within [0, 1], got {mutate}"));
    }
    fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let digits = count.saturating_sub(1).to_string().len().max(4);
    let mut histories = Vec::with_capacity(count);
    for i in 0..count {
        let sub_seed: u64 = rng.random();
        let mut h = gen_history(kind, n, k, sub_seed).map_err(|e| e.to_string())?;
        let mut mutation = None;
        if n > 0 && rng.random_bool(mutate) {
            let (m, desc) = mutate_history(&h, sub_seed).map_err(|e| e.to_string())?;
            h = m;
            mutation = Some(desc);
        }
        let (label, label_source) = if n <= DEFAULT_CAP {
            let v = oracle_check(&h).map_err(|e| e.to_string())?;
            (
                if v.linearizable {
                    "linearizable"
                } else {
                    "not-linearizable"
                },
                "oracle",
            )
        } else if mutation.is_none() {
            ("linearizable", "construction")
        } else {
            ("unlabeled", "none")
        };
        let file = format!("h{i:0digits$}.json");
        fs::write(dir.join(&file), serialize_history(&h) + "\n").map_err(|e| format!("{}: {e}", dir.display()))?;
        histories.push(ManifestEntry {
            file,
            seed: sub_seed,
            kind: kind.name().to_string(),
            n,
            k: h.width(),
            label,
            label_source,
            mutation,
        });
    }
    let manifest = Manifest {
        kind: kind.name().to_string(),
        n,
        k,
        seed,
        count,
        mutate,
        histories,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    fs::write(dir.join("manifest.json"), text).map_err(|e| format!("{}: {e}", dir.display()))
}

pub fn cmd_bench(dir: &Path, out: &mut dyn Write) -> Result<i32, String> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_name().is_some_and(|f| f != "manifest.json"))
        .collect();
    files.sort();
    // Ok(false) on a closed pipe (e.g. `linmon bench dir | head`), which ends the run quietly.
    let w = |out: &mut dyn Write, line: String| match writeln!(out, "{line}") {
        Ok(()) => Ok(true),
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(false),
        Err(e) => Err(e.to_string()),
    };
    if !w(out, "file,kind,n,k,states,engine,ms".into())? {
        return Ok(EXIT_LINEARIZABLE);
    }
    for path in files {
        let h = load(&path)?;
        let engine = Engine::for_kind(h.kind());
        let start = Instant::now();
        check_with(&h, engine).map_err(|e| format!("{}: {e}", path.display()))?;
        let ms = start.elapsed().as_secs_f64() * 1000.0;
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let line = format!(
            "{name},{},{},{},{},{engine},{ms:.3}",
            h.kind(),
            h.len(),
            h.width(),
            count_partition_states(&h)
        );
        if !w(out, line)? {
            break;
        }
    }
    Ok(EXIT_LINEARIZABLE)
}
