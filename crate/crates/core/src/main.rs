fn main() {
    std::process::exit(color_homography::cli::run(std::env::args_os()));
}
