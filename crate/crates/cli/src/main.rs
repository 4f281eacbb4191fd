use std::io::{self, IsTerminal};

use riskctl::{color_enabled, run, Io};

fn main() {
    let setting = std::env::var("RISKCTL_COLOR").ok();
    let stdout = io::stdout();
    let color = color_enabled(setting.as_deref(), stdout.is_terminal());
    let code = run(
        std::env::args_os(),
        &mut Io {
            stdin: &mut io::stdin().lock(),
            stdout: &mut stdout.lock(),
            stderr: &mut io::stderr().lock(),
            color,
        },
    );
    std::process::exit(code.code());
}
