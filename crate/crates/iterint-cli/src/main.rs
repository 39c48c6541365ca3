mod args;
mod commands;
mod report;
mod tables;

use clap::Parser;

use args::{Cli, Command};

fn main() {
    let cli = Cli::parse();
    let (result, output) = match &cli.command {
        Command::Tables(a) => (commands::tables_cmd(a), &a.output),
        Command::Coeffs(a) => (commands::coeffs_cmd(a), &a.output),
        Command::Error(a) => (commands::error_cmd(a), &a.output),
        Command::Minq(a) => (commands::minq_cmd(a), &a.output),
        Command::Sample(a) => (commands::sample_cmd(a), &a.output),
        Command::VerifyMc(a) => (commands::verify_mc_cmd(a), &a.output),
        Command::WongZakai(a) => (commands::wong_zakai_cmd(a), &a.output),
        Command::Sde(a) => (commands::sde_cmd(a), &a.output),
    };
    let code = match result {
        Ok(report) => {
            if let Err(e) = report.emit(output) {
                eprintln!("iterint: {e}");
                4
            } else if report.all_pass() {
                0
            } else {
                for c in report.checks.iter().filter(|c| !c.pass) {
                    eprintln!("iterint: check failed: {} ({})", c.name, c.detail);
                }
                3
            }
        }
        Err(f) => {
            eprintln!("iterint: {}", f.message());
            f.exit_code()
        }
    };
    std::process::exit(code);
}
