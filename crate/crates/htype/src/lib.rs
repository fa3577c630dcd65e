//! Spectral numerics on H-type groups.
//!
//! The core is generic over the scalar type ([`Real`], implemented for `f32`
//! and `f64`); the aliases below fix `f64`, which every tolerance in the test
//! suites assumes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod error;
pub mod evolve;
pub mod fan;
pub mod gft;
pub mod grid;
pub mod group;
pub mod linalg;
pub mod norms;
pub mod quadrature;
pub mod real;
pub mod special;
pub mod twisted;

pub use error::{Error, Result};
pub use real::{Cplx, Real};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Structure = group::HTypeStructure<f64>;
pub type Grid = grid::SpaceGrid<f64>;
pub type Field = grid::SpaceField<f64>;
pub type TimeField = grid::SpaceTimeField<f64>;
pub type Times = grid::TimeGrid<f64>;
pub type Coeffs = gft::SpectralCoeffs<f64>;
pub type Twisted = twisted::TwistedField<f64>;
pub type Fan = fan::FanData<f64>;

pub type Structure32 = group::HTypeStructure<f32>;
pub type Field32 = grid::SpaceField<f32>;
pub type Twisted32 = twisted::TwistedField<f32>;

#[cfg(test)]
mod tests {
    use num_complex::Complex;

    use super::*;

    #[test]
    fn single_precision_pipeline() {
        let s = Structure32::heisenberg(1).unwrap();
        let grid = grid::SpaceGrid::<f32>::new(1, 1, 24, 5.0, 32, 8.0).unwrap();
        let f = Field32::from_fn(grid, |x, z| Complex::new((-(x[0] * x[0] + x[1] * x[1]) / 2.0 - z[0] * z[0] / 4.0).exp() * (3.0 * z[0]).cos(), 0.0));
        let spec = gft::SpectralSpec {
            n_max: 8,
            radial_nodes: 16,
            lambda_max: 6.0,
            ..Default::default()
        };
        let c = gft::forward(&f, &s, &spec).unwrap();
        let back = gft::inverse(&c, &s, &grid).unwrap();
        assert!(back.relative_l2(&f) < 5e-2);
        let g = Twisted32::heisenberg(grid.horizontal, 1.0, |x| Complex::new((-(x[0] * x[0] + x[1] * x[1]) / 4.0).exp(), 0.0)).unwrap();
        let p = twisted::project_k(&g, 0).unwrap();
        assert!(p.sub(&g).l2_norm() / g.l2_norm() < 1e-3);
    }
}
