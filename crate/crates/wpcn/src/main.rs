fn main() {
    std::process::exit(wpcn::cli::run(std::env::args_os()));
}
