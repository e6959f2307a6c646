use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(dib_core::cli::run(std::env::args_os()) as u8)
}
