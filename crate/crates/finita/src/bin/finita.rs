fn main() {
    std::process::exit(finita::cli::dispatch(std::env::args_os()));
}
