fn main() {
    std::process::exit(sfou::cli::dispatch(std::env::args_os()));
}
