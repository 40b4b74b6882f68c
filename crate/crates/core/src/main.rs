use std::process::ExitCode;

fn main() -> ExitCode {
    dcopt::cli::main_with(std::env::args_os())
}
