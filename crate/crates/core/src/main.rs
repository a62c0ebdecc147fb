fn main() {
    std::process::exit(mrc_core::evalcli::cli::run(std::env::args_os()));
}
