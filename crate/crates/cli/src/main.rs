use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(zwalk_cli::run(std::env::args_os()) as u8)
}
