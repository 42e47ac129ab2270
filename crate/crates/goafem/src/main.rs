use goafem::cli;

fn main() {
    std::process::exit(cli::run());
}
