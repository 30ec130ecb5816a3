use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use supg_dlr::runner::checks::{run_suite, Suite};
use supg_dlr::runner::{
    preset_boundary_layer, preset_rotating_body, run_from_config, write_config, ParameterEcho, RunConfig, Scale,
};

#[derive(Parser)]
#[command(name = "supg-dlr", version, about = "SUPG-stabilised dynamical low-rank solver for random ADR problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configuration in a TOML file.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Override `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a ready-made experiment configuration and print its parameters.
    Preset {
        #[arg(value_enum)]
        name: PresetName,
        #[arg(long, value_enum, default_value = "desk")]
        scale: ScaleArg,
        #[arg(long)]
        out: PathBuf,
        /// Run the preset right away.
        #[arg(long)]
        run: bool,
    },
    /// Run a built-in verification suite.
    Check {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        /// Scratch directory for suite outputs.
        #[arg(long, default_value = "check-output")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetName {
    RotatingBody,
    BoundaryLayer,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Paper,
    Desk,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Coercivity,
    Bounds,
    Oracle,
}

fn solve(cfg: RunConfig) -> ExitCode {
    let outcome = run_from_config(&cfg);
    let s = &outcome.summary;
    println!("status: {:?}", outcome.status);
    println!("steps: {}  N_h: {}  N_C: {}  R: {}", s.steps_completed, s.n_h, s.n_c, s.rank);
    if let Some(l2) = s.final_l2 {
        println!("final E||u||^2 root: {l2:e}");
    }
    if let Some(m) = &outcome.message {
        eprintln!("{m}");
    }
    println!("outputs in {}", cfg.output.dir.display());
    ExitCode::from(outcome.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Solve { config, out } => match RunConfig::load(&config) {
            Ok(mut cfg) => {
                if let Some(dir) = out {
                    cfg.output.dir = dir;
                }
                solve(cfg)
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
        Command::Preset { name, scale, out, run } => {
            let scale = match scale {
                ScaleArg::Paper => Scale::Paper,
                ScaleArg::Desk => Scale::Desk,
            };
            let mut cfg = match name {
                PresetName::RotatingBody => preset_rotating_body(scale),
                PresetName::BoundaryLayer => preset_boundary_layer(scale),
            };
            cfg.output.dir = out.join("output");
            let written = std::fs::create_dir_all(&out)
                .map_err(supg_dlr::Error::from)
                .and_then(|_| write_config(&out.join("config.toml"), &cfg));
            if let Err(e) = written {
                eprintln!("{e}");
                return ExitCode::from(e.exit_code() as u8);
            }
            println!("{}", ParameterEcho::of(&cfg));
            println!("config written to {}", out.join("config.toml").display());
            if run {
                solve(cfg)
            } else {
                ExitCode::SUCCESS
            }
        }
        Command::Check { suite, out } => {
            let suite = match suite {
                SuiteArg::Coercivity => Suite::Coercivity,
                SuiteArg::Bounds => Suite::Bounds,
                SuiteArg::Oracle => Suite::Oracle,
            };
            match run_suite(suite, &out) {
                Ok(rep) => {
                    print!("{rep}");
                    if rep.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(3)
                    }
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
