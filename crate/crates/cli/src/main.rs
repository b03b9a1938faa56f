use std::process::ExitCode;

fn main() -> ExitCode {
    regloss_cli::run(std::env::args_os())
}
