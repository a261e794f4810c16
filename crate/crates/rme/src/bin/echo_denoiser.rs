//! Identity denoiser plugin: answers every DNRQ frame with the same image.

use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    match rme::plugin::serve_echo(io::stdin().lock(), io::stdout().lock()) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("echo_denoiser: {e}");
            ExitCode::FAILURE
        }
    }
}
