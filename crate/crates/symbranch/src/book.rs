//! The guide chapters from `book/` included as rustdoc, so every fenced
//! Rust block in the book compiles and runs under `cargo test --doc`.

macro_rules! chapter {
    ($name:ident, $path:literal) => {
        #[doc = include_str!($path)]
        pub mod $name {}
    };
}

chapter!(introduction, "../../../book/src/introduction.md");
chapter!(kernels, "../../../book/src/kernels.md");
chapter!(local_times, "../../../book/src/local-times.md");
chapter!(growth_rates, "../../../book/src/growth-rates.md");
chapter!(moments, "../../../book/src/moments.md");
chapter!(aging, "../../../book/src/aging.md");
chapter!(monte_carlo, "../../../book/src/monte-carlo.md");
chapter!(cli, "../../../book/src/cli.md");
