use clap::Parser;
use rijepa_lab::cli::{run, Cli};

fn main() {
    // clap itself exits 2 on usage errors, matching the config-error code
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
