fn main() {
    std::process::exit(gebd_kit::cli::main(std::env::args_os()));
}
