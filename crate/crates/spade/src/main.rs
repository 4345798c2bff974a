use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(spade::cli::run() as u8)
}
