fn main() {
    std::process::exit(mwcons::cli::run_cli(std::env::args_os()));
}
