fn main() {
    std::process::exit(transit_hierarchy::cli::run(std::env::args_os()));
}
