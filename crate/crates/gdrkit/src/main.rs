fn main() {
    std::process::exit(gdrkit::cli::dispatch(std::env::args_os()));
}
