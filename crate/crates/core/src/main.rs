use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(caa::cli::main_with(std::env::args_os()))
}
