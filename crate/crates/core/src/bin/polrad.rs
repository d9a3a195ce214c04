use std::process::ExitCode;

fn main() -> ExitCode {
    polrad::cli::main_with_args(std::env::args_os())
}
