use std::io;

use tlsynth_cli::{run_cli, Streams};

fn main() {
    let stdin = io::stdin();
    let mut stdin = stdin.lock();
    let mut stdout = io::stdout();
    let mut stderr = io::stderr();
    let mut streams = Streams { stdin: &mut stdin, stdout: &mut stdout, stderr: &mut stderr };
    let code = run_cli(std::env::args_os(), &mut streams);
    std::process::exit(code);
}
