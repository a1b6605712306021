use clap::Parser;

fn main() {
    std::process::exit(mixbo::cli::main_with(mixbo::cli::Cli::parse()));
}
