use clap::Parser;

fn main() {
    let cli = paws_cli::Cli::parse();
    match paws_cli::run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
