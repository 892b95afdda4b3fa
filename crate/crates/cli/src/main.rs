use std::io::Write;

fn main() {
    let outcome = riemann_cli::run(std::env::args_os());
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(outcome.stdout.as_bytes());
    let _ = out.flush();
    std::process::exit(outcome.code);
}
