fn main() {
    std::process::exit(lexalign::cli::main_with_args(std::env::args_os()));
}
