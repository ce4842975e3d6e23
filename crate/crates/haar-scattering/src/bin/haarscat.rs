use std::process::ExitCode;

fn main() -> ExitCode {
    match haar_scattering::cli::run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
