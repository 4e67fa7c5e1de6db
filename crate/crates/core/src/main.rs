fn main() {
    std::process::exit(rotary_coverage::cli::cli_main(std::env::args_os()));
}
