//! Reference plants used throughout the tests and the CLI demos.

use nalgebra::DMatrix;

use crate::scalar::{lit, Scalar};
use crate::system::StateSpaceSystem;

fn mat<T: Scalar>(rows: usize, cols: usize, values: &[f64]) -> DMatrix<T> {
    DMatrix::from_row_slice(rows, cols, values).map(lit)
}

/// Two-state, two-input, two-output plant with `D = 0` and inherent delay 1.
pub fn example1<T: Scalar>() -> StateSpaceSystem<T> {
    StateSpaceSystem::new(
        mat(2, 2, &[-0.3, 0.0, 0.0, -0.5]),
        mat(2, 2, &[2.0, 1.0, -1.0, 1.0]),
        mat(2, 2, &[1.0, 2.0, 1.0, 0.0]),
        DMatrix::zeros(2, 2),
    )
    .expect("consistent dimensions")
}

/// Six-state, two-input, three-output plant measuring the first three
/// states; inherent delay 1.
pub fn example2<T: Scalar>() -> StateSpaceSystem<T> {
    #[rustfmt::skip]
    let a = [
        1.0,  0.05, 0.0,  0.1,  0.5,  0.0,
        0.05, 1.0,  0.05, 0.05, 0.1,  0.05,
        0.0,  0.05, 1.0,  0.0,  0.05, 0.1,
        -0.2, 0.1,  0.05, 0.8,  0.1,  0.05,
        0.1,  -0.2, 0.1,  0.1,  0.8,  0.1,
        0.0,  0.1,  -0.2, 0.05, 0.1,  0.8,
    ];
    #[rustfmt::skip]
    let b = [
        0.1,  0.0,
        0.1,  0.0,
        0.0,  0.1,
        0.1,  0.05,
        -0.1, 0.1,
        0.0,  -0.1,
    ];
    let mut c = DMatrix::zeros(3, 6);
    c.view_mut((0, 0), (3, 3)).fill_with_identity();
    StateSpaceSystem::new(mat(6, 6, &a), mat(6, 2, &b), c, DMatrix::zeros(3, 2))
        .expect("consistent dimensions")
}
