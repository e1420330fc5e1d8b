fn main() {
    std::process::exit(hmc_lab::cli::main_with_args(std::env::args_os()));
}
