fn main() {
    std::process::exit(tgeval::cli::dispatch(std::env::args_os()));
}
