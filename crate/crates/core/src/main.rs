fn main() {
    dampwave::cli::configure_threads();
    std::process::exit(dampwave::cli::run_command(std::env::args_os()));
}
