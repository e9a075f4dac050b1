use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use rnoid::app::{self, Command, Context, RunConfig};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Mesh,
    Solve,
    PerField,
    Degree,
    FindZero,
    BuildSurface,
    Star,
    Validate,
}

#[derive(Parser, Debug)]
#[command(name = "rnoid", about = "Minimal surfaces from flux polygons")]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for period sweeps; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("error ConfigError: {}", e.to_string().lines().next().unwrap_or(""));
            return ExitCode::from(2);
        }
    };
    let command = match cli.command {
        Cmd::Mesh => Command::Mesh,
        Cmd::Solve => Command::Solve,
        Cmd::PerField => Command::PerField,
        Cmd::Degree => Command::Degree,
        Cmd::FindZero => Command::FindZero,
        Cmd::BuildSurface => Command::BuildSurface,
        Cmd::Star => Command::Star,
        Cmd::Validate => Command::Validate,
    };
    let result = RunConfig::load(&cli.config).and_then(|cfg| {
        let ctx = Context::new(&cfg, cli.out.clone(), cli.jobs);
        app::run(command, &cfg, &ctx)
    });
    match result {
        Ok(o) => {
            println!("{}", o.summary);
            for f in &o.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", app::error_line(&e));
            ExitCode::from(app::exit_code(&e) as u8)
        }
    }
}
