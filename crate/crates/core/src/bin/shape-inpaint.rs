fn main() {
    std::process::exit(shape_inpaint::cli::main_with(std::env::args_os()));
}
