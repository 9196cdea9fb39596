use std::io::Write;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let out = lieident::cli::run(&args);
    // a closed pipe (`| head`) is not an error worth a panic
    if !out.stdout.is_empty() {
        let _ = writeln!(std::io::stdout(), "{}", out.stdout);
    }
    if !out.stderr.is_empty() {
        let _ = writeln!(std::io::stderr(), "{}", out.stderr);
    }
    std::process::exit(out.code);
}
