use clap::Parser;

fn main() {
    let cli = cluster_ld::cli::Cli::parse();
    std::process::exit(cluster_ld::cli::run(cli));
}
