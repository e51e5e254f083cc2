use std::process::exit;

fn main() {
    exit(coexsched::cli::run());
}
