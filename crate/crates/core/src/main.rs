use clap::Parser;

fn main() -> std::process::ExitCode {
    let cli = krdiv::cli::Cli::parse();
    std::process::ExitCode::from(krdiv::cli::run(cli))
}
