//! Bernstein-Bezier weight-adjusted discontinuous Galerkin (BBWADG) solver
//! for acoustic and elastic wave propagation in media with sub-element
//! heterogeneity.
//!
//! The update kernel that applies the weight-adjusted mass inverse comes in
//! two interchangeable forms: a quadrature-based reference path, and a fast
//! path that multiplies by a degree-M polynomial weight and projects back to
//! degree N with a telescoping chain of sparse degree-elevation operators,
//! lowering the per-element cost from O(N^{2d}) to O(N^{d+1}).

pub mod bernstein;
pub mod config;
pub mod dense;
pub mod error;
pub mod gmsh;
pub mod kernels;
pub mod lift;
pub mod mesh;
pub mod multi_index;
pub mod ops_counter;
pub mod output;
pub mod poly;
pub mod quadrature;
pub mod simplex;
pub mod solver;
pub mod sparse;
pub mod studies;
pub mod time;
pub mod wadg;

pub use config::{MeshSpec, Mode, RunConfig, System, WavespeedModel};
pub use error::{Error, Result};

/// Initialize the global worker pool, honoring `BBWADG_THREADS`.
/// Safe to call more than once.
pub fn init_threads() {
    let threads = std::env::var("BBWADG_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok());
    if let Some(t) = threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global();
    }
}
