use std::process::ExitCode;

use ma_bellman::cli::{parse_config, run, EXIT_OK};

fn main() -> ExitCode {
    ma_bellman::init_thread_pool();
    let code = match parse_config(std::env::args_os()).and_then(|cfg| run(&cfg)) {
        Ok(code) => code,
        Err(e) if e.code == EXIT_OK => {
            print!("{}", e.message);
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {}", e.message.trim_end());
            e.code
        }
    };
    ExitCode::from(code as u8)
}
