use clap::Parser;

fn main() {
    let cli = tutor_align::Cli::parse();
    if let Err(error) = tutor_align::run(cli) {
        eprintln!("error: {error:#}");
        std::process::exit(1);
    }
}
