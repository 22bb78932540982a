//! `grz`: command-line experiments on the forced PP04 switching model.
//!
//! Exit codes: 0 success, 1 model/runtime error, 2 configuration error.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Arg, ArgAction, ArgMatches, Command};
use serde_json::json;

use config::{parse_scalar_flag, Assignment, ConfigError, Resolved, Schema, SEED_KEY};

const SEED_ENV: &str = "GRZ_SEED";

fn cli(schemas: &[Schema]) -> Command {
    let mut app = Command::new("grz")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Grazing-bifurcation experiments on the forced PP04 glacial-cycle model")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .after_help(
            "Configuration is layered: built-in defaults, then the --config file, then flags.\n\
             Config files hold one `key = value` per line (`#` starts a comment); a manifest.json\n\
             from an earlier run is accepted too. Every run writes manifest.json to --out.\n\
             Exit codes: 0 success, 1 model error, 2 configuration error.",
        )
        .arg(
            Arg::new("config")
                .long("config")
                .short('c')
                .global(true)
                .value_name("FILE")
                .value_parser(clap::value_parser!(PathBuf))
                .help("key = value file or manifest.json of an earlier run"),
        )
        .arg(
            Arg::new("out")
                .long("out")
                .short('o')
                .global(true)
                .value_name("DIR")
                .default_value("grz-out")
                .value_parser(clap::value_parser!(PathBuf))
                .help("output directory (created if missing)"),
        )
        .arg(Arg::new(SEED_KEY).long("seed").global(true).value_name("N").help(format!(
            "random seed; falls back to the config file, then ${SEED_ENV}, then {}",
            config::DEFAULT_SEED
        )))
        .arg(
            Arg::new("workers")
                .long("workers")
                .short('j')
                .global(true)
                .value_name("N")
                .value_parser(clap::value_parser!(usize))
                .help("worker threads for scans (default: all cores); results do not depend on it"),
        );
    for s in schemas {
        let mut sub = Command::new(s.name).about(s.about).after_help(format!(
            "Outputs (in --out):\n{}\n  manifest.json: resolved configuration, seed, outputs and status\n\n\
             Every flag may also be given in the --config file under the name shown in brackets.",
            s.outputs.lines().map(|l| format!("  {l}")).collect::<Vec<_>>().join("\n")
        ));
        for k in &s.keys {
            sub = sub.arg(
                Arg::new(k.name)
                    .long(k.flag())
                    .value_name("VALUE")
                    .action(ArgAction::Set)
                    .allow_negative_numbers(true)
                    .help(format!("[{}] {}", k.name, k.describe())),
            );
        }
        app = app.subcommand(sub);
    }
    app
}

enum Failure {
    Config(ConfigError),
    Runtime(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

fn resolve(schema: &Schema, m: &ArgMatches) -> Result<Resolved, ConfigError> {
    let file = match m.get_one::<PathBuf>("config") {
        Some(path) => config::read_config_file(path, schema.name)?,
        None => Vec::new(),
    };
    let mut flags = Vec::new();
    for k in &schema.keys {
        if let Some(raw) = m.get_one::<String>(k.name) {
            flags.push(Assignment {
                key: k.name.into(),
                value: parse_scalar_flag(raw),
                location: format!("--{}", k.flag()),
            });
        }
    }
    if let Some(raw) = m.get_one::<String>(SEED_KEY) {
        flags.push(Assignment { key: SEED_KEY.into(), value: parse_scalar_flag(raw), location: "--seed".into() });
    }
    let env_seed = std::env::var(SEED_ENV).ok().map(|raw| Assignment {
        key: SEED_KEY.into(),
        value: parse_scalar_flag(&raw),
        location: format!("${SEED_ENV}"),
    });
    config::resolve(&schema.keys, &file, &flags, env_seed)
}

fn write_manifest(dir: &Path, doc: &serde_json::Value) -> anyhow::Result<()> {
    let path = dir.join("manifest.json");
    let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    pp04::io::write_json(file, doc).with_context(|| format!("writing {}", path.display()))
}

fn execute(schema: &Schema, m: &ArgMatches) -> Result<(), Failure> {
    let cfg = resolve(schema, m)?;
    let dir = m.get_one::<PathBuf>("out").cloned().unwrap_or_else(|| PathBuf::from("grz-out"));
    let workers = m.get_one::<usize>("workers").copied();
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("creating output directory {}", dir.display()))
        .map_err(Failure::Runtime)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .context("building worker pool")
        .map_err(Failure::Runtime)?;
    let result = pool.install(|| commands::run(schema.name, &cfg, &dir));

    let mut manifest = json!({
        "tool": "grz",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": schema.name,
        "seed": cfg.seed,
        "workers": workers,
        "config": cfg.to_json(),
    });
    let outcome = match result {
        Ok(files) => {
            manifest["status"] = json!("ok");
            manifest["outputs"] = json!(files);
            Ok(())
        }
        Err(e) => {
            // Cross-key constraints are checked by the commands themselves.
            let e = match e.downcast::<ConfigError>() {
                Ok(ce) => return Err(Failure::Config(ce)),
                Err(e) => e,
            };
            manifest["status"] = json!("error");
            manifest["error_kind"] = json!(error_kind(&e));
            manifest["error"] = json!(format!("{e:#}"));
            Err(Failure::Runtime(e))
        }
    };
    write_manifest(&dir, &manifest).map_err(Failure::Runtime)?;
    outcome
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    if let Some(err) = e.downcast_ref::<pp04::Error>() {
        err.kind()
    } else if e.downcast_ref::<std::io::Error>().is_some() {
        "Io"
    } else {
        "Runtime"
    }
}

fn main() -> ExitCode {
    let schemas = config::schemas();
    let matches = match cli(&schemas).try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let Some((name, sub)) = matches.subcommand() else {
        return ExitCode::from(2);
    };
    let schema = schemas.iter().find(|s| s.name == name).expect("subcommand comes from the schema list");
    match execute(schema, sub) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("grz {name}: configuration error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("grz {name}: error [{}]: {e:#}", error_kind(&e));
            ExitCode::from(1)
        }
    }
}
