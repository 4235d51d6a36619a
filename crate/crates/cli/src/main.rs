fn main() {
    std::process::exit(ladderbuck_cli::run_command(std::env::args_os()));
}
