use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, Command};

use superarrivals::config::{ExperimentConfig, KEYS};
use superarrivals::experiment::run;

fn cli() -> Command {
    let mut cmd = Command::new("superarrivals")
        .version(clap::crate_version!())
        .about("Wave-packet scattering off a time-dependent barrier: detector probabilities, superarrival windows and Bohmian trajectories")
        .after_help("Every configuration key is also a flag (`--n_steps 500`). Flags override the file. Times accept physical units or `N steps`.")
        .arg(
            Arg::new("config")
                .long("config")
                .short('c')
                .value_name("FILE")
                .value_parser(clap::value_parser!(PathBuf))
                .help("key = value configuration file"),
        )
        .arg(
            Arg::new("print-config")
                .long("print-config")
                .action(ArgAction::SetTrue)
                .help("print the resolved configuration and exit"),
        );
    for &key in KEYS {
        cmd = cmd.arg(
            Arg::new(key)
                .long(key)
                .value_name("VALUE")
                .allow_hyphen_values(true),
        );
    }
    cmd
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let overrides: BTreeMap<String, String> = KEYS
        .iter()
        .filter_map(|&k| {
            matches
                .get_one::<String>(k)
                .map(|v| (k.to_string(), v.clone()))
        })
        .collect();
    let result = ExperimentConfig::load(
        matches.get_one::<PathBuf>("config").map(PathBuf::as_path),
        &overrides,
    )
    .and_then(|config| {
        if matches.get_flag("print-config") {
            print!("{}", config.to_key_values());
            return Ok(None);
        }
        run(&config).map(Some)
    });
    match result {
        Ok(Some(outcome)) => {
            println!("{}", outcome.summary());
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
