use std::io;

fn main() {
    let stdin = io::stdin();
    let mut stdin = stdin.lock();
    let mut stdout = io::BufWriter::new(io::stdout().lock());
    let mut stderr = io::stderr().lock();
    let code = isocheck::cli::run(std::env::args_os(), &mut stdin, &mut stdout, &mut stderr);
    drop(stdout);
    std::process::exit(code.code());
}
