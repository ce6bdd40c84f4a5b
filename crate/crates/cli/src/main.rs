use std::io::Write;

fn main() {
    let result = bihomog_cli::run(std::env::args());
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    let _ = out.write_all(result.stdout.as_bytes());
    let _ = err.write_all(result.stderr.as_bytes());
    let _ = out.flush();
    let _ = err.flush();
    std::process::exit(result.code);
}
