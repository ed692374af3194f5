use std::process::ExitCode;

fn main() -> ExitCode {
    uwbnav_cli::run(std::env::args_os())
}
