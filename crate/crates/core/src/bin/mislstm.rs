fn main() {
    std::process::exit(mislstm_core::cli::run());
}
