use std::io::Write;
use std::process::ExitCode;

use torograph_tool::cli::{configure_threads, execute};

fn main() -> ExitCode {
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        if std::env::args().any(|a| a == "--error-json") {
            println!("{}", e.to_json());
        }
        return ExitCode::from(e.exit_code() as u8);
    }
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = execute(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock());
    let _ = std::io::stdout().flush();
    ExitCode::from(code as u8)
}
