use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match drr::cli::run(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(drr::DrrError::Config(msg)) if msg.starts_with("Usage") || msg.contains("\nUsage") => {
            eprintln!("{msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
