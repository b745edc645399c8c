use clap::Parser;

fn main() {
    let cli = slowfast_cli::Cli::parse();
    std::process::exit(slowfast_cli::main_with(cli));
}
