//! Fixtures shared by the pipeline benchmarks.

use remodel_core::eval::phantom::{generate_phantom, Phantom, PhantomParams};
use remodel_core::Seed;

/// A deterministic phantom of the given side.
pub fn fixture(side: usize) -> Phantom {
    generate_phantom(Seed(7), &PhantomParams::for_side(side)).expect("phantom parameters are valid")
}
