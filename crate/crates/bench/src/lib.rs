//! Shared fixtures for the criterion benches.

use catgate::states::{self, CatQubitSpec};
use catgate::{BlochPoint, DensityOperator};

pub const ALPHA: f64 = 0.92;

pub fn cat_input(cutoff: usize) -> DensityOperator {
    let spec = CatQubitSpec::new(ALPHA, cutoff).expect("valid alpha");
    let ket = spec
        .cat(BlochPoint::new(std::f64::consts::FRAC_PI_4, 0.5))
        .expect("cat");
    DensityOperator::pure(&ket).expect("normalized")
}

pub fn squeezed_input(s: f64, cutoff: usize) -> DensityOperator {
    DensityOperator::pure(&states::squeezed_vacuum(s, cutoff).expect("squeezed vacuum")).expect("normalized")
}
