use clap::Parser;

fn main() -> anyhow::Result<()> {
    nomf::cli::run(nomf::cli::Cli::parse())
}
