use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use pics_io::{builtin_presets, PresetCatalogue};
use pics_service::{router, Config};

/// Serve interactive segmentation sessions over HTTP.
#[derive(Parser)]
#[command(name = "pics-service", version)]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    /// Also write every export to this directory.
    #[arg(long)]
    workdir: Option<PathBuf>,
    /// Extra preset catalogue (JSON), merged over the built-in one.
    #[arg(long)]
    presets: Option<PathBuf>,
    /// Stream every n-th iteration only.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    event_stride: u64,
}

fn config(args: &Args) -> Result<Config, String> {
    let mut presets = builtin_presets();
    if let Some(p) = &args.presets {
        presets.merge(PresetCatalogue::load(p).map_err(|e| e.to_string())?);
    }
    if let Some(dir) = &args.workdir {
        std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    Ok(Config {
        workdir: args.workdir.clone(),
        presets,
        event_stride: args.event_stride as usize,
    })
}

#[tokio::main]
async fn main() -> ExitCode {
    let args = Args::parse();
    let config = match config(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let listener = match tokio::net::TcpListener::bind(args.listen).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: cannot listen on {}: {e}", args.listen);
            return ExitCode::from(2);
        }
    };
    eprintln!("pics-service listening on http://{}", args.listen);
    if let Err(e) = axum::serve(listener, router(config)).await {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
