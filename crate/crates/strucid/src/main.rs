use std::process::ExitCode;

fn main() -> ExitCode {
    strucid::cli::main_with_args(std::env::args_os())
}
