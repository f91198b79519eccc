use std::process::ExitCode;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    ExitCode::from(opsys_cli::cli_dispatch(&args) as u8)
}
