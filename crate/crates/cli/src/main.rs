use std::process::ExitCode;

fn main() -> ExitCode {
    if let Err(e) = qhd_cli::init_threads() {
        eprintln!("qhd: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    ExitCode::from(qhd_cli::main_with_args(std::env::args_os()) as u8)
}
