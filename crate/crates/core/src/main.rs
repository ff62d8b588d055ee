use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let result = gowa::cli::run_command(std::env::args_os().skip(1));
    let text = match &result.machine_payload {
        Some(payload) => format!("{}\n", serde_json::to_string_pretty(payload).expect("serializable payload")),
        None => result.human_text,
    };
    if result.exit_code == 0 {
        let _ = std::io::stdout().write_all(text.as_bytes());
    } else {
        let _ = std::io::stderr().write_all(text.as_bytes());
    }
    ExitCode::from(result.exit_code as u8)
}
