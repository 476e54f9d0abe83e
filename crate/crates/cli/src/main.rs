use clap::Parser;

fn main() {
    let cli = vlsm_cli::Cli::parse();
    if let Err(err) = vlsm_cli::execute(cli) {
        eprintln!("vlsm: {err}");
        std::process::exit(err.exit_code());
    }
}
