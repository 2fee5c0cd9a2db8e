fn main() {
    std::process::exit(fracreg::cli::parse_and_dispatch(std::env::args_os()));
}
