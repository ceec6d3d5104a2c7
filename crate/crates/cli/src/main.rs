use clap::Parser;

fn main() {
    let cli = iga_motor_cli::Cli::parse();
    if let Err(e) = iga_motor_cli::run(cli) {
        eprintln!("{}", e.to_json());
        std::process::exit(e.exit_code());
    }
}
