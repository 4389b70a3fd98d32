use clap::Parser;

fn main() -> std::process::ExitCode {
    let cli = pics_cli::Cli::parse();
    if let Err(e) = pics_cli::configure_threads() {
        eprintln!("error: {e}");
        return std::process::ExitCode::from(2);
    }
    match pics_cli::run(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::from(e.exit_code())
        }
    }
}
