use std::process::ExitCode;

fn main() -> ExitCode {
    kzk_cli::main_with(std::env::args_os())
}
