use clap::Parser;

#[derive(Parser)]
#[command(name = "galdef")]
struct Cli {}

fn main() {
    let _cli = Cli::parse();
    eprintln!("subcommands not wired up yet");
}
