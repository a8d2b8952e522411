use clap::Parser;

fn main() {
    let cli = lexalign::cli::Cli::parse();
    std::process::exit(lexalign::cli::run(cli));
}
