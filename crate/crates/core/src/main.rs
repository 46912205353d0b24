fn main() {
    std::process::exit(tdinv::cli::cli_dispatch(std::env::args_os()));
}
