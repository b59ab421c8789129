fn main() {
    std::process::exit(kgsq::harness::cli::cli_main(std::env::args_os()));
}
